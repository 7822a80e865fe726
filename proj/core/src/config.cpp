// SPDX-License-Identifier: Apache-2.0
#include "ldseg/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ldseg/errors.hpp"

namespace ldseg {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected boolean, got '" + v + "'");
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected number, got '" + v + "'");
  }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(parse_int(key, tok));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(parse_double(key, tok));
  }
  return out;
}

std::string join_ints(const std::set<int>& s) {
  std::string out;
  for (int v : s) {
    if (!out.empty()) out += ",";
    out += std::to_string(v);
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ModelConfig::validate() const {
  for (int c : encoder_channels) {
    if (c <= 0) throw ConfigError("encoder_channels: all entries must be positive");
  }
  if (input_h <= 0 || input_w <= 0) throw ConfigError("input_size: must be positive");
  if (input_h % 32 != 0) {
    throw ConfigError("input_size: height " + std::to_string(input_h) +
                      " not divisible by 32 (five halvings)");
  }
  if (input_w % 32 != 0) {
    throw ConfigError("input_size: width " + std::to_string(input_w) +
                      " not divisible by 32 (five halvings)");
  }
  if (kernel_size < 1) throw ConfigError("kernel_size: K must be >= 1");
  if (heads < 1) throw ConfigError("heads: n must be >= 1");
  for (int s : esa_stages) {
    if (s < 1 || s > 5) throw ConfigError("esa_stages: stage " + std::to_string(s) + " out of 1..5");
    if (use_esa && encoder_channels[s - 1] % heads != 0) {
      throw ConfigError("heads: n=" + std::to_string(heads) + " does not divide ESA stage " +
                        std::to_string(s) + " channels " +
                        std::to_string(encoder_channels[s - 1]));
    }
  }
  for (int s : lca_stages) {
    if (s < 1 || s > 4) throw ConfigError("lca_stages: stage " + std::to_string(s) + " out of 1..4");
    if (use_lca && decoder_channels(s) % heads != 0) {
      throw ConfigError("heads: n=" + std::to_string(heads) + " does not divide LCA stage " +
                        std::to_string(s) + " channels " + std::to_string(decoder_channels(s)));
    }
  }
}

void TrainConfig::validate() const {
  if (lr_init <= 0) throw ConfigError("lr_init: must be positive");
  if (power <= 0 || power > 1) throw ConfigError("power: must be in (0,1]");
  if (epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum: must be in [0,1)");
  if (weight_decay < 0) throw ConfigError("weight_decay: must be >= 0");
  if (dice_smooth <= 0) throw ConfigError("dice_smooth: must be positive");
}

void SplitSpec::validate() const {
  if (train < 0 || val < 0 || test < 0) throw ConfigError("split: ratios must be >= 0");
  const double sum = train + val + test;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split: ratios must sum to 1, got " + fmt_double(sum));
  }
}

void RunConfig::apply_kv(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "encoder_channels") {
    auto xs = parse_int_list(key, v);
    if (xs.size() != 5) throw ConfigError("encoder_channels: expected 5 values, got " +
                                          std::to_string(xs.size()));
    std::copy(xs.begin(), xs.end(), model.encoder_channels.begin());
  } else if (key == "input_size") {
    auto xs = parse_int_list(key, v);
    if (xs.size() == 1) {
      model.input_h = model.input_w = xs[0];
    } else if (xs.size() == 2) {
      model.input_h = xs[0];
      model.input_w = xs[1];
    } else {
      throw ConfigError("input_size: expected H or H,W");
    }
  } else if (key == "kernel_size") {
    model.kernel_size = parse_int(key, v);
  } else if (key == "heads") {
    model.heads = parse_int(key, v);
  } else if (key == "esa_stages") {
    auto xs = parse_int_list(key, v);
    model.esa_stages = std::set<int>(xs.begin(), xs.end());
  } else if (key == "lca_stages") {
    auto xs = parse_int_list(key, v);
    model.lca_stages = std::set<int>(xs.begin(), xs.end());
  } else if (key == "use_dk") {
    model.use_dk = parse_bool(key, v);
  } else if (key == "use_esa") {
    model.use_esa = parse_bool(key, v);
  } else if (key == "use_lca") {
    model.use_lca = parse_bool(key, v);
  } else if (key == "lca_softmax") {
    model.lca_softmax = parse_bool(key, v);
  } else if (key == "lesion_norm") {
    model.lesion_norm = parse_bool(key, v);
  } else if (key == "seed") {
    model.seed = static_cast<std::uint64_t>(std::stoull(v));
  } else if (key == "lr_init") {
    train.lr_init = parse_double(key, v);
  } else if (key == "power") {
    train.power = parse_double(key, v);
  } else if (key == "epochs") {
    train.epochs = parse_int(key, v);
  } else if (key == "batch_size") {
    train.batch_size = parse_int(key, v);
  } else if (key == "momentum") {
    train.momentum = parse_double(key, v);
  } else if (key == "weight_decay") {
    train.weight_decay = parse_double(key, v);
  } else if (key == "dice_smooth") {
    train.dice_smooth = parse_double(key, v);
  } else if (key == "augment") {
    train.augment = parse_bool(key, v);
  } else if (key == "split") {
    auto xs = parse_double_list(key, v);
    if (xs.size() != 3) throw ConfigError("split: expected train,val,test ratios");
    split_train = xs[0];
    split_val = xs[1];
    split_test = xs[2];
  } else if (key == "data") {
    data = v;
  } else if (key == "out") {
    out = v;
  } else if (key == "checkpoint") {
    checkpoint = v;
  } else if (key == "threshold") {
    threshold = parse_double(key, v);
  } else {
    throw ConfigError("unknown config key: '" + key + "'");
  }
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << "encoder_channels = ";
  for (std::size_t i = 0; i < model.encoder_channels.size(); ++i) {
    if (i) os << ",";
    os << model.encoder_channels[i];
  }
  os << "\n";
  os << "input_size = " << model.input_h << "," << model.input_w << "\n";
  os << "kernel_size = " << model.kernel_size << "\n";
  os << "heads = " << model.heads << "\n";
  os << "esa_stages = " << join_ints(model.esa_stages) << "\n";
  os << "lca_stages = " << join_ints(model.lca_stages) << "\n";
  os << "use_dk = " << (model.use_dk ? "true" : "false") << "\n";
  os << "use_esa = " << (model.use_esa ? "true" : "false") << "\n";
  os << "use_lca = " << (model.use_lca ? "true" : "false") << "\n";
  os << "lca_softmax = " << (model.lca_softmax ? "true" : "false") << "\n";
  os << "lesion_norm = " << (model.lesion_norm ? "true" : "false") << "\n";
  os << "seed = " << model.seed << "\n";
  os << "lr_init = " << fmt_double(train.lr_init) << "\n";
  os << "power = " << fmt_double(train.power) << "\n";
  os << "epochs = " << train.epochs << "\n";
  os << "batch_size = " << train.batch_size << "\n";
  os << "momentum = " << fmt_double(train.momentum) << "\n";
  os << "weight_decay = " << fmt_double(train.weight_decay) << "\n";
  os << "dice_smooth = " << fmt_double(train.dice_smooth) << "\n";
  os << "augment = " << (train.augment ? "true" : "false") << "\n";
  os << "split = " << fmt_double(split_train) << "," << fmt_double(split_val) << ","
     << fmt_double(split_test) << "\n";
  os << "data = " << data << "\n";
  os << "out = " << out << "\n";
  os << "checkpoint = " << checkpoint << "\n";
  os << "threshold = " << fmt_double(threshold) << "\n";
  return os.str();
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  split_spec().validate();
  // threshold deliberately unbounded: values past 1 give an empty mask in predict
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  for (const auto& [k, v] : parse_flat_kv(text)) cfg.apply_kv(k, v);
  return cfg;
}

std::vector<std::pair<std::string, std::string>> parse_flat_kv(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" +
                        line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(key, value);
  }
  return out;
}

}  // namespace ldseg
