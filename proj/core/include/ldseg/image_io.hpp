// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "ldseg/tensor.hpp"

namespace ldseg {

// 3xHxW RGB in [0,1]; throws DataError on unreadable files.
Tensor load_image_rgb(const std::string& path);

// 1xHxW strictly binary; 8-bit sources thresholded at foreground > 127.
Tensor load_mask(const std::string& path);

// 1xHxW grayscale in [0,1] without binarization (probability maps).
Tensor load_gray(const std::string& path);

// 8-bit PNG writers; values are clamped to [0,1] before quantization.
void save_gray_png(const std::string& path, const Tensor& gray);
void save_rgb_png(const std::string& path, const Tensor& rgb);

// Copies the image and paints the contour of the binary mask (foreground
// pixels with at least one background 4-neighbour, or touching the border).
Tensor overlay_contour(const Tensor& image, const Tensor& mask);

}  // namespace ldseg
