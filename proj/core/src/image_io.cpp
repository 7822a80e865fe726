// SPDX-License-Identifier: Apache-2.0
#include "ldseg/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "ldseg/errors.hpp"

namespace ldseg {

namespace {

cv::Mat read_or_throw(const std::string& path, int flags) {
  cv::Mat img = cv::imread(path, flags);
  if (img.empty()) throw DataError("cannot read image: " + path);
  return img;
}

unsigned char quantize(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Tensor load_image_rgb(const std::string& path) {
  cv::Mat img = read_or_throw(path, cv::IMREAD_COLOR);  // BGR, 8-bit
  Tensor out({3, img.rows, img.cols});
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const cv::Vec3b px = img.at<cv::Vec3b>(r, c);
      out.at(0, r, c) = px[2] / 255.0;
      out.at(1, r, c) = px[1] / 255.0;
      out.at(2, r, c) = px[0] / 255.0;
    }
  }
  return out;
}

Tensor load_mask(const std::string& path) {
  cv::Mat img = read_or_throw(path, cv::IMREAD_GRAYSCALE);
  Tensor out({1, img.rows, img.cols});
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      out.at(0, r, c) = img.at<unsigned char>(r, c) > 127 ? 1.0 : 0.0;
    }
  }
  return out;
}

Tensor load_gray(const std::string& path) {
  cv::Mat img = read_or_throw(path, cv::IMREAD_GRAYSCALE);
  Tensor out({1, img.rows, img.cols});
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      out.at(0, r, c) = img.at<unsigned char>(r, c) / 255.0;
    }
  }
  return out;
}

void save_gray_png(const std::string& path, const Tensor& gray) {
  if (gray.ndim() != 3 || gray.dim(0) != 1) {
    throw ShapeError("save_gray_png: expected 1xHxW, got " + gray.shape_str());
  }
  cv::Mat img(gray.dim(1), gray.dim(2), CV_8UC1);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      img.at<unsigned char>(r, c) = quantize(gray.at(0, r, c));
    }
  }
  if (!cv::imwrite(path, img)) throw DataError("cannot write image: " + path);
}

void save_rgb_png(const std::string& path, const Tensor& rgb) {
  if (rgb.ndim() != 3 || rgb.dim(0) != 3) {
    throw ShapeError("save_rgb_png: expected 3xHxW, got " + rgb.shape_str());
  }
  cv::Mat img(rgb.dim(1), rgb.dim(2), CV_8UC3);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      img.at<cv::Vec3b>(r, c) =
          cv::Vec3b(quantize(rgb.at(2, r, c)), quantize(rgb.at(1, r, c)), quantize(rgb.at(0, r, c)));
    }
  }
  if (!cv::imwrite(path, img)) throw DataError("cannot write image: " + path);
}

Tensor overlay_contour(const Tensor& image, const Tensor& mask) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ShapeError("overlay_contour: expected 3xHxW image");
  }
  if (mask.dim(1) != image.dim(1) || mask.dim(2) != image.dim(2)) {
    throw ShapeError("overlay_contour: mask " + mask.shape_str() + " does not match image " +
                     image.shape_str());
  }
  const int h = image.dim(1), w = image.dim(2);
  Tensor out = image;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask.at(0, r, c) != 1.0) continue;
      const bool boundary = r == 0 || r == h - 1 || c == 0 || c == w - 1 ||
                            mask.at(0, r - 1, c) == 0.0 || mask.at(0, r + 1, c) == 0.0 ||
                            mask.at(0, r, c - 1) == 0.0 || mask.at(0, r, c + 1) == 0.0;
      if (boundary) {
        out.at(0, r, c) = 0.0;
        out.at(1, r, c) = 1.0;
        out.at(2, r, c) = 0.0;
      }
    }
  }
  return out;
}

}  // namespace ldseg
