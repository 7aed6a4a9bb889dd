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
//
// Stage assignment by camera distance and the inclusive multi-level loss:
// scale L_max is the closest band [d_min, 2 d_min), each distance doubling
// moves one stage more remote, and head l is supervised by every ray whose
// indicator is <= l.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "msrf/types.hpp"

namespace msrf {

inline int assign_stage(double distance, double d_min, int l_max) {
  if (d_min <= 0) throw InputError("d_min must be positive");
  if (distance < d_min) throw InputError("distance below d_min");
  const int doublings = static_cast<int>(std::floor(std::log2(distance / d_min)));
  return l_max - std::min(doublings, l_max - 1);
}

// Total squared error over heads 1..L; a ray with indicator l' contributes
// at heads l'..L. predictions[h-1] is 3 x n_rays for head h.
template <class Scalar>
double stage_loss(const std::vector<MatX<Scalar>>& predictions,
                  const MatX<Scalar>& ground_truth,
                  const std::vector<int>& indicators, int current_stage) {
  if (static_cast<int>(predictions.size()) < current_stage)
    throw InputError("stage_loss: missing head predictions");
  const Eigen::Index n = ground_truth.cols();
  double total = 0;
  for (int h = 1; h <= current_stage; ++h) {
    const MatX<Scalar>& pred = predictions[h - 1];
    if (pred.cols() != n) throw InputError("stage_loss: ray count mismatch");
    for (Eigen::Index r = 0; r < n; ++r) {
      if (indicators[r] > current_stage)
        throw InputError("stage_loss: indicator beyond current stage");
      if (indicators[r] <= h)
        total += (pred.col(r) - ground_truth.col(r))
                     .template cast<double>()
                     .squaredNorm();
    }
  }
  return total;
}

// Uniform sampling domain over all pixels of images with indicator <= L.
struct RayPool {
  std::vector<int> image_indices;
  std::vector<size_t> cumulative_pixels;  // same length; running totals
  size_t total_pixels = 0;

  // Maps a draw in [0, total_pixels) to (image index, pixel index).
  std::pair<int, size_t> locate(size_t draw) const {
    auto it = std::upper_bound(cumulative_pixels.begin(),
                               cumulative_pixels.end(), draw);
    const size_t i = static_cast<size_t>(it - cumulative_pixels.begin());
    const size_t before = i == 0 ? 0 : cumulative_pixels[i - 1];
    return {image_indices[i], draw - before};
  }
};

}  // namespace msrf
