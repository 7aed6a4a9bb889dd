// Copyright 2026 msrf authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "msrf/types.hpp"

namespace msrf {

// Linear RGB image, values in [0,1], row-major, 3 floats per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(size_t(w) * h * 3, 0.0) {}

  double* pixel(int x, int y) { return rgb.data() + 3 * (size_t(y) * width + x); }
  const double* pixel(int x, int y) const {
    return rgb.data() + 3 * (size_t(y) * width + x);
  }
  size_t pixel_count() const { return size_t(width) * height; }
};

// 8-bit RGB PNG; values linearly quantized.
void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

// 16-bit grayscale PNG of values normalized to [lo, hi].
void write_depth_png(const std::vector<double>& depth, int width, int height,
                     double lo, double hi, const std::string& path);

}  // namespace msrf
