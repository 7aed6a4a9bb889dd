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

#include "msrf/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace msrf {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_shapes(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw InputError("metric: image shape mismatch");
  if (a.width == 0 || a.height == 0) throw InputError("metric: empty image");
}

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  double sum = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - (kWindow - 1) / 2.0;
    k[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

std::vector<double> to_gray(const Image& img) {
  std::vector<double> g(img.pixel_count());
  for (size_t i = 0; i < g.size(); ++i)
    g[i] = (img.rgb[3 * i] + img.rgb[3 * i + 1] + img.rgb[3 * i + 2]) / 3.0;
  return g;
}

// Separable valid-mode Gaussian filter; output is (w-10) x (h-10).
std::vector<double> filter_valid(const std::vector<double>& g, int w, int h,
                                 const std::vector<double>& k, int* ow,
                                 int* oh) {
  const int half = kWindow / 2;
  *ow = w - 2 * half;
  *oh = h - 2 * half;
  std::vector<double> tmp(size_t(*ow) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < *ow; ++x) {
      double acc = 0;
      for (int i = 0; i < kWindow; ++i) acc += k[i] * g[size_t(y) * w + x + i];
      tmp[size_t(y) * *ow + x] = acc;
    }
  std::vector<double> out(size_t(*ow) * *oh, 0.0);
  for (int y = 0; y < *oh; ++y)
    for (int x = 0; x < *ow; ++x) {
      double acc = 0;
      for (int i = 0; i < kWindow; ++i)
        acc += k[i] * tmp[size_t(y + i) * *ow + x];
      out[size_t(y) * *ow + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  check_shapes(a, b);
  double mse = 0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.rgb.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  check_shapes(a, b);
  if (a.width < kWindow || a.height < kWindow)
    throw InputError("ssim: image smaller than the 11x11 window");
  const std::vector<double> k = gaussian_kernel();
  const std::vector<double> ga = to_gray(a);
  const std::vector<double> gb = to_gray(b);
  const size_t n = ga.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (size_t i = 0; i < n; ++i) {
    aa[i] = ga[i] * ga[i];
    bb[i] = gb[i] * gb[i];
    ab[i] = ga[i] * gb[i];
  }
  int ow, oh;
  const auto mu_a = filter_valid(ga, a.width, a.height, k, &ow, &oh);
  const auto mu_b = filter_valid(gb, a.width, a.height, k, &ow, &oh);
  const auto m_aa = filter_valid(aa, a.width, a.height, k, &ow, &oh);
  const auto m_bb = filter_valid(bb, a.width, a.height, k, &ow, &oh);
  const auto m_ab = filter_valid(ab, a.width, a.height, k, &ow, &oh);
  double total = 0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    total += (2 * mu_a[i] * mu_b[i] + kC1) * (2 * cov + kC2) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace msrf
