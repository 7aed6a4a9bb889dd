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

#include <cmath>
#include <numbers>
#include <optional>

#include "msrf/types.hpp"

namespace msrf {

// Fourier feature encoding settings. Frequencies are 2^0 .. 2^(M-1);
// the default M_pos = 11 tops out at 2^10.
struct EncodingConfig {
  int m_pos = 11;
  int m_dir = 4;
  std::optional<double> window_alpha;  // baseline-only frequency window
  Vec3d scene_center = Vec3d::Zero();
  double scene_radius = 1.0;

  void validate() const {
    if (m_pos < 1) throw InputError("m_pos must be >= 1");
    if (m_dir < 0) throw InputError("m_dir must be >= 0");
    if (scene_radius <= 0) throw InputError("scene_radius must be positive");
    if (window_alpha && (*window_alpha < 0 || *window_alpha > m_pos))
      throw InputError("window_alpha out of [0, m_pos]");
  }
};

// pi * (x - center) / radius, per-component clamped to [-pi, pi].
inline Vec3d normalize_position(const Vec3d& x, const EncodingConfig& cfg) {
  if (cfg.scene_radius <= 0) throw InputError("scene_radius must be positive");
  Vec3d n = std::numbers::pi * (x - cfg.scene_center) / cfg.scene_radius;
  return n.cwiseMax(-std::numbers::pi).cwiseMin(std::numbers::pi);
}

// Output layout: frequency-major, then dimension, then (sin, cos).
// Entry index for (band j, dim d, sin/cos s) is j*6 + d*2 + s.
template <class Scalar>
VecX<Scalar> encode(const Vec3<Scalar>& x_norm, int m) {
  VecX<Scalar> out(6 * m);
  Scalar freq = 1;
  for (int j = 0; j < m; ++j) {
    for (int d = 0; d < 3; ++d) {
      const Scalar a = freq * x_norm[d];
      out[j * 6 + d * 2] = std::sin(a);
      out[j * 6 + d * 2 + 1] = std::cos(a);
    }
    freq *= 2;
  }
  return out;
}

// Batched variant: columns are points, rows the 6*m encoding entries.
template <class Scalar>
MatX<Scalar> encode_batch(const MatX<Scalar>& x_norm, int m) {
  MatX<Scalar> out(6 * m, x_norm.cols());
  // sin/cos over the contiguous 3xN block vectorizes; the row shuffle into
  // the frequency-major layout is a cheap strided copy.
  MatX<Scalar> s(3, x_norm.cols()), c(3, x_norm.cols());
  Scalar freq = 1;
  for (int j = 0; j < m; ++j) {
    s = (freq * x_norm).array().sin();
    c = (freq * x_norm).array().cos();
    for (int d = 0; d < 3; ++d) {
      out.row(j * 6 + d * 2) = s.row(d);
      out.row(j * 6 + d * 2 + 1) = c.row(d);
    }
    freq *= 2;
  }
  return out;
}

// Cosine easing window over frequency bands; band j is scaled by
// (1 - cos(pi * clamp(alpha - j, 0, 1))) / 2.
inline double band_window(double alpha, int j) {
  const double t = std::clamp(alpha - j, 0.0, 1.0);
  return 0.5 * (1.0 - std::cos(std::numbers::pi * t));
}

template <class Scalar>
VecX<Scalar> windowed_encode(const Vec3<Scalar>& x_norm, int m, double alpha) {
  if (alpha < 0 || alpha > m) throw InputError("alpha out of [0, m]");
  VecX<Scalar> out = encode(x_norm, m);
  for (int j = 0; j < m; ++j)
    out.segment(j * 6, 6) *= static_cast<Scalar>(band_window(alpha, j));
  return out;
}

}  // namespace msrf
