// SPDX-License-Identifier: Apache-2.0
#include "ldseg/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "ldseg/errors.hpp"
#include "ldseg/image_io.hpp"

namespace fs = std::filesystem;

namespace ldseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::map<std::string, fs::path> stem_index(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string stem = entry.path().stem().string();
    if (out.count(stem)) {
      throw DataError("duplicate stem '" + stem + "' in " + dir.string());
    }
    out[stem] = entry.path();
  }
  return out;
}

double bilinear_sample(const Tensor& chw, int c, double y, double x) {
  const int h = chw.dim(1), w = chw.dim(2);
  const double yc = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const double xc = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(yc));
  const int x0 = static_cast<int>(std::floor(xc));
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double fy = yc - y0, fx = xc - x0;
  return (1 - fy) * ((1 - fx) * chw.at(c, y0, x0) + fx * chw.at(c, y0, x1)) +
         fy * ((1 - fx) * chw.at(c, y1, x0) + fx * chw.at(c, y1, x1));
}

Tensor box_blur3(const Tensor& chw) {
  const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < w; ++q) {
        double s = 0.0;
        int cnt = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dq = -1; dq <= 1; ++dq) {
            const int rr = r + dr, qq = q + dq;
            if (rr < 0 || rr >= h || qq < 0 || qq >= w) continue;
            s += chw.at(ch, rr, qq);
            ++cnt;
          }
        }
        out.at(ch, r, q) = s / cnt;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<Sample> load_pairs(const std::string& root) {
  const fs::path base(root);
  const fs::path img_dir = base / "images";
  const fs::path mask_dir = base / "masks";
  if (!fs::is_directory(img_dir)) throw DataError("missing directory: " + img_dir.string());
  if (!fs::is_directory(mask_dir)) throw DataError("missing directory: " + mask_dir.string());

  auto images = stem_index(img_dir);
  auto masks = stem_index(mask_dir);
  if (images.empty()) throw DataError("no images found in " + img_dir.string());

  std::string orphans;
  for (const auto& [stem, path] : images) {
    if (!masks.count(stem)) orphans += (orphans.empty() ? "" : ", ") + stem;
  }
  for (const auto& [stem, path] : masks) {
    if (!images.count(stem)) orphans += (orphans.empty() ? "" : ", ") + stem;
  }
  if (!orphans.empty()) throw DataError("unmatched image/mask ids: " + orphans);

  std::vector<Sample> samples;
  samples.reserve(images.size());
  for (const auto& [stem, path] : images) {
    Sample s;
    s.id = stem;
    s.image = load_image_rgb(path.string());
    s.mask = load_mask(masks.at(stem).string());
    if (s.image.dim(1) != s.mask.dim(1) || s.image.dim(2) != s.mask.dim(2)) {
      throw DataError("size mismatch for '" + stem + "': image " + s.image.shape_str() +
                      " vs mask " + s.mask.shape_str());
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

SplitResult split(std::vector<Sample> samples, const SplitSpec& spec) {
  spec.validate();
  const int n = static_cast<int>(samples.size());
  int n_train = static_cast<int>(std::floor(spec.train * n));
  int n_val = static_cast<int>(std::floor(spec.val * n));
  int n_test = static_cast<int>(std::floor(spec.test * n));
  n_train += n - (n_train + n_val + n_test);

  auto require_nonempty = [&](double ratio, int count, const char* name) {
    if (ratio > 0.0 && count == 0) {
      throw DataError(std::string("split: partition '") + name + "' would be empty with " +
                      std::to_string(n) + " samples");
    }
  };
  require_nonempty(spec.train, n_train, "train");
  require_nonempty(spec.val, n_val, "val");
  require_nonempty(spec.test, n_test, "test");

  Rng rng(Rng::mix(spec.seed, 0x5b115));
  for (int i = n - 1; i >= 1; --i) {
    const int j = rng.uniform_int(i + 1);
    std::swap(samples[i], samples[j]);
  }

  SplitResult out;
  out.train.assign(samples.begin(), samples.begin() + n_train);
  out.val.assign(samples.begin() + n_train, samples.begin() + n_train + n_val);
  out.test.assign(samples.begin() + n_train + n_val, samples.end());
  return out;
}

AugmentParams draw_augment(Rng& rng) {
  AugmentParams p;
  p.hflip = rng.bernoulli(0.5);
  p.vflip = rng.bernoulli(0.5);
  p.angle_deg = rng.uniform(-15.0, 15.0);
  p.crop_area = rng.uniform(0.9, 1.0);
  p.crop_off_x = rng.uniform();
  p.crop_off_y = rng.uniform();
  return p;
}

Sample apply_augment(const Sample& sample, const AugmentParams& params) {
  Sample out = sample;
  const int h = sample.image.dim(1), w = sample.image.dim(2);

  if (params.hflip || params.vflip) {
    Tensor img(out.image.shape());
    Tensor mask(out.mask.shape());
    for (int r = 0; r < h; ++r) {
      const int sr = params.vflip ? h - 1 - r : r;
      for (int q = 0; q < w; ++q) {
        const int sq = params.hflip ? w - 1 - q : q;
        for (int c = 0; c < 3; ++c) img.at(c, r, q) = out.image.at(c, sr, sq);
        mask.at(0, r, q) = out.mask.at(0, sr, sq);
      }
    }
    out.image = std::move(img);
    out.mask = std::move(mask);
  }

  if (params.angle_deg != 0.0) {
    const double theta = params.angle_deg * kPi / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    Tensor img({3, h, w});
    Tensor mask({1, h, w});
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < w; ++q) {
        // inverse rotation of the output pixel back into the source frame
        const double dy = r - cy, dx = q - cx;
        const double sy = ct * dy + st * dx + cy;
        const double sx = -st * dy + ct * dx + cx;
        const bool inside = sy >= 0.0 && sy <= h - 1 && sx >= 0.0 && sx <= w - 1;
        for (int c = 0; c < 3; ++c) {
          img.at(c, r, q) = inside ? bilinear_sample(out.image, c, sy, sx) : 0.0;
        }
        const int ny = static_cast<int>(std::lround(sy));
        const int nx = static_cast<int>(std::lround(sx));
        mask.at(0, r, q) =
            (inside && ny >= 0 && ny < h && nx >= 0 && nx < w) ? out.mask.at(0, ny, nx) : 0.0;
      }
    }
    out.image = std::move(img);
    out.mask = std::move(mask);
  }

  if (params.crop_area < 1.0) {
    const double side = std::sqrt(params.crop_area);
    const int ch = std::max(1, static_cast<int>(std::lround(side * h)));
    const int cw = std::max(1, static_cast<int>(std::lround(side * w)));
    const int y0 = static_cast<int>(std::floor(params.crop_off_y * (h - ch + 1)));
    const int x0 = static_cast<int>(std::floor(params.crop_off_x * (w - cw + 1)));
    Tensor img({3, ch, cw});
    Tensor mask({1, ch, cw});
    for (int r = 0; r < ch; ++r) {
      for (int q = 0; q < cw; ++q) {
        for (int c = 0; c < 3; ++c) img.at(c, r, q) = out.image.at(c, y0 + r, x0 + q);
        mask.at(0, r, q) = out.mask.at(0, y0 + r, x0 + q);
      }
    }
    out.image = resize_bilinear(img, h, w);
    out.mask = resize_nearest(mask, h, w);
  }
  return out;
}

Sample augment(const Sample& sample, Rng& rng) {
  return apply_augment(sample, draw_augment(rng));
}

Tensor resize_bilinear(const Tensor& chw, int out_h, int out_w) {
  if (chw.ndim() != 3) throw ShapeError("resize_bilinear: expected CxHxW");
  const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (h == out_h && w == out_w) return chw;
  if (out_h <= 0 || out_w <= 0) throw ConfigError("resize: target must be positive");
  Tensor out({c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int ch = 0; ch < c; ++ch) {
    for (int r = 0; r < out_h; ++r) {
      const double y = (r + 0.5) * sy - 0.5;
      for (int q = 0; q < out_w; ++q) {
        const double x = (q + 0.5) * sx - 0.5;
        out.at(ch, r, q) = bilinear_sample(chw, ch, y, x);
      }
    }
  }
  return out;
}

Tensor resize_nearest(const Tensor& chw, int out_h, int out_w) {
  if (chw.ndim() != 3) throw ShapeError("resize_nearest: expected CxHxW");
  const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (h == out_h && w == out_w) return chw;
  if (out_h <= 0 || out_w <= 0) throw ConfigError("resize: target must be positive");
  Tensor out({c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int r = 0; r < out_h; ++r) {
    const int y = std::clamp(static_cast<int>(std::floor((r + 0.5) * sy)), 0, h - 1);
    for (int q = 0; q < out_w; ++q) {
      const int x = std::clamp(static_cast<int>(std::floor((q + 0.5) * sx)), 0, w - 1);
      for (int ch = 0; ch < c; ++ch) out.at(ch, r, q) = chw.at(ch, y, x);
    }
  }
  return out;
}

Sample resize_sample(const Sample& sample, int out_h, int out_w) {
  Sample out;
  out.id = sample.id;
  out.image = resize_bilinear(sample.image, out_h, out_w);
  out.mask = resize_nearest(sample.mask, out_h, out_w);
  return out;
}

std::vector<Sample> synth_generate(int n, int size, std::uint64_t seed) {
  if (n < 1) throw DataError("synth_generate: need n >= 1");
  std::vector<Sample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    Rng rng(Rng::mix(seed, 0xda7a0 + static_cast<std::uint64_t>(k)));

    // low-frequency background from a bilinearly upscaled coarse grid
    const int coarse = 8;
    Tensor grid({3, coarse, coarse});
    for (double& v : grid.vec()) v = rng.uniform(0.15, 0.55);
    Tensor image = resize_bilinear(grid, size, size);

    Tensor mask({1, size, size});
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      mask.fill(0.0);
      const int ellipses = 1 + (rng.bernoulli(0.5) ? 1 : 0);
      std::vector<std::array<double, 6>> shapes;
      for (int e = 0; e < ellipses; ++e) {
        const double cy = rng.uniform(0.25, 0.75) * size;
        const double cx = rng.uniform(0.25, 0.75) * size;
        const double ay = rng.uniform(0.10, 0.26) * size;
        const double ax = rng.uniform(0.10, 0.26) * size;
        const double phi = rng.uniform(0.0, kPi);
        const double offset = rng.uniform(0.20, 0.45);
        shapes.push_back({cy, cx, ay, ax, phi, offset});
      }
      for (const auto& s : shapes) {
        const double ct = std::cos(s[4]), st = std::sin(s[4]);
        for (int r = 0; r < size; ++r) {
          for (int q = 0; q < size; ++q) {
            const double dy = r - s[0], dx = q - s[1];
            const double u = (ct * dy + st * dx) / s[2];
            const double v = (-st * dy + ct * dx) / s[3];
            if (u * u + v * v <= 1.0) mask.at(0, r, q) = 1.0;
          }
        }
      }
      const double frac = mask.sum() / (size * static_cast<double>(size));
      if (frac >= 0.02 && frac <= 0.5) {
        for (const auto& s : shapes) {
          const double ct = std::cos(s[4]), st = std::sin(s[4]);
          for (int r = 0; r < size; ++r) {
            for (int q = 0; q < size; ++q) {
              const double dy = r - s[0], dx = q - s[1];
              const double u = (ct * dy + st * dx) / s[2];
              const double v = (-st * dy + ct * dx) / s[3];
              if (u * u + v * v <= 1.0) {
                for (int c = 0; c < 3; ++c) image.at(c, r, q) += s[5];
              }
            }
          }
        }
        placed = true;
      }
    }
    if (!placed) {
      throw DataError("synth_generate: could not place ellipses within the foreground budget");
    }

    image = box_blur3(image);
    for (double& v : image.vec()) v = std::clamp(v, 0.0, 1.0);

    Sample s;
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%04d", k);
    s.id = id;
    s.image = std::move(image);
    s.mask = std::move(mask);
    out.push_back(std::move(s));
  }
  return out;
}

bool parse_synth_spec(const std::string& data, int& n_out) {
  constexpr const char* prefix = "synth:";
  if (data.rfind(prefix, 0) != 0) return false;
  try {
    n_out = std::stoi(data.substr(6));
  } catch (const std::exception&) {
    throw DataError("bad synth spec: '" + data + "'");
  }
  return true;
}

std::vector<Sample> load_dataset(const std::string& data, int synth_size, std::uint64_t seed) {
  if (data.empty()) throw DataError("no dataset specified");
  int n = 0;
  if (parse_synth_spec(data, n)) return synth_generate(n, synth_size, seed);
  return load_pairs(data);
}

}  // namespace ldseg
