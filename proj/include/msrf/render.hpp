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
// Quadrature volume rendering: C = sum_k T_k (1 - exp(-sigma_k dt_k)) c_k,
// T_k = exp(-sum_{k'<k} sigma_k' dt_k'), with the final interval clipped to
// the far plane. An optional background is weighted by the residual
// transmittance.

#pragma once

#include <optional>

#include "msrf/field.hpp"
#include "msrf/geometry.hpp"

namespace msrf {

template <class Scalar>
struct RenderOutput {
  Vec3<Scalar> color = Vec3<Scalar>::Zero();
  VecX<Scalar> weights;            // T_k * alpha_k per sample
  Scalar depth_proxy = 0;          // weight-averaged t
  Scalar accumulated_opacity = 0;  // sum of weights
};

// Delta-based core: sample k owns an interval of length deltas[k].
template <class Scalar>
RenderOutput<Scalar> composite_deltas(
    const VecX<Scalar>& densities, const MatX<Scalar>& colors,
    const std::vector<double>& t_values, const VecX<Scalar>& deltas,
    const std::optional<Vec3<Scalar>>& background) {
  const Eigen::Index n = densities.size();
  if (n < 1 || colors.cols() != n || colors.rows() != 3 ||
      deltas.size() != n || static_cast<Eigen::Index>(t_values.size()) != n)
    throw InputError("composite: length mismatch");
  RenderOutput<Scalar> out;
  out.weights.resize(n);
  Scalar transmittance = 1;
  Scalar depth_acc = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    Scalar sigma = densities[k];
    if (sigma < 0) {
      if (sigma > Scalar(-1e-12))
        sigma = 0;  // tolerate upstream rounding
      else
        throw InputError("composite: negative density");
    }
    const Scalar alpha = 1 - std::exp(-sigma * deltas[k]);
    const Scalar w = transmittance * alpha;
    out.weights[k] = w;
    out.color += w * colors.col(k);
    depth_acc += w * static_cast<Scalar>(t_values[k]);
    transmittance *= 1 - alpha;
  }
  out.accumulated_opacity = out.weights.sum();
  if (background) out.color += transmittance * *background;
  out.depth_proxy = out.accumulated_opacity > 0
                        ? depth_acc / out.accumulated_opacity
                        : static_cast<Scalar>(t_values.back());
  return out;
}

// t-based entry point: deltas from consecutive samples, final one clipped
// to t_far.
template <class Scalar>
RenderOutput<Scalar> composite(const VecX<Scalar>& densities,
                               const MatX<Scalar>& colors,
                               const SampleVector& samples, double t_far,
                               const std::optional<Vec3<Scalar>>& background) {
  const Eigen::Index n = densities.size();
  if (static_cast<Eigen::Index>(samples.t_values.size()) != n)
    throw InputError("composite: length mismatch");
  VecX<Scalar> deltas(n);
  for (Eigen::Index k = 0; k + 1 < n; ++k)
    deltas[k] = static_cast<Scalar>(samples.t_values[k + 1] - samples.t_values[k]);
  deltas[n - 1] = static_cast<Scalar>(t_far - samples.t_values[n - 1]);
  return composite_deltas(densities, colors, samples.t_values, deltas,
                          background);
}

// Differentiable batched compositing on the tape. sigma_node is 1xP and
// color_node 3xP with P = n_rays * n_samples, samples contiguous per ray;
// deltas is per sample over the whole batch. Result node is 3 x n_rays.
template <class Scalar>
int composite_tape(Tape<Scalar>& tape, int sigma_node, int color_node,
                   const VecX<Scalar>& deltas, Eigen::Index n_rays,
                   Eigen::Index n_samples,
                   const std::optional<Vec3<Scalar>>& background) {
  const MatX<Scalar>& sig = tape.value(sigma_node);
  const MatX<Scalar>& col = tape.value(color_node);
  if (sig.cols() != n_rays * n_samples || col.cols() != sig.cols())
    throw InputError("composite_tape: shape mismatch");
  MatX<Scalar> out(3, n_rays);
  VecX<Scalar> trans_final(n_rays);
  for (Eigen::Index r = 0; r < n_rays; ++r) {
    Scalar transmittance = 1;
    Vec3<Scalar> c = Vec3<Scalar>::Zero();
    for (Eigen::Index k = 0; k < n_samples; ++k) {
      const Eigen::Index i = r * n_samples + k;
      const Scalar alpha = 1 - std::exp(-sig(0, i) * deltas[i]);
      c += transmittance * alpha * col.col(i);
      transmittance *= 1 - alpha;
    }
    if (background) c += transmittance * *background;
    out.col(r) = c;
    trans_final[r] = transmittance;
  }
  return tape.custom(
      std::move(out),
      [sigma_node, color_node, deltas, n_rays, n_samples, background](
          Tape<Scalar>& t, int self) {
        const MatX<Scalar>& adj = t.adjoint(self);
        const MatX<Scalar>& sig = t.value(sigma_node);
        const MatX<Scalar>& col = t.value(color_node);
        MatX<Scalar>& sig_adj = t.adjoint(sigma_node);
        MatX<Scalar>& col_adj = t.adjoint(color_node);
        for (Eigen::Index r = 0; r < n_rays; ++r) {
          // Forward sweep per ray to recover T_k and alpha_k.
          VecX<Scalar> trans(n_samples + 1);
          VecX<Scalar> alpha(n_samples);
          trans[0] = 1;
          for (Eigen::Index k = 0; k < n_samples; ++k) {
            const Eigen::Index i = r * n_samples + k;
            alpha[k] = 1 - std::exp(-sig(0, i) * deltas[i]);
            trans[k + 1] = trans[k] * (1 - alpha[k]);
          }
          // d out / d c_k = w_k; d out / d sigma_k needs the suffix sum of
          // later contributions (they all attenuate through sample k).
          Vec3<Scalar> suffix = Vec3<Scalar>::Zero();
          if (background) suffix = trans[n_samples] * *background;
          for (Eigen::Index k = n_samples - 1; k >= 0; --k) {
            const Eigen::Index i = r * n_samples + k;
            const Scalar w = trans[k] * alpha[k];
            col_adj.col(i) += w * adj.col(r);
            const Vec3<Scalar> own =
                trans[k] * (1 - alpha[k]) * deltas[i] * col.col(i);
            sig_adj(0, i) +=
                adj.col(r).dot(own - deltas[i] * suffix);
            suffix += w * col.col(i);
          }
        }
      });
}

// Samples, encodes, evaluates the field at `head`, and composites one ray.
template <class Scalar>
RenderOutput<Scalar> render_ray(const FieldParams<Scalar>& f, const Ray& ray,
                                int head, int n_samples, std::mt19937_64& rng,
                                bool jitter,
                                const std::optional<Vec3<Scalar>>& background) {
  SampleVector samples = stratified_samples(ray, n_samples, rng, jitter);
  MatX<Scalar> x_norm(3, n_samples);
  for (int k = 0; k < n_samples; ++k) {
    Vec3d p = ray.origin + samples.t_values[k] * ray.direction;
    x_norm.col(k) =
        normalize_position(p, f.config.encoding).template cast<Scalar>();
  }
  MatX<Scalar> gx = encode_batch(x_norm, f.config.encoding.m_pos);
  MatX<Scalar> dnorm = ray.direction.template cast<Scalar>().replicate(1, n_samples);
  MatX<Scalar> gd = encode_batch(dnorm, f.config.encoding.m_dir);
  auto [sigma, color] = field_forward(f, gx, gd, head);
  return composite(sigma, color, samples, ray.t_far, background);
}

struct RenderImageOptions {
  int n_samples = 64;
  bool jitter = false;
  uint64_t seed = 0;
  bool white_background = true;
};

// Per-pixel colors (3 x W*H, row-major pixel order) and depth proxies.
template <class Scalar>
std::pair<MatX<Scalar>, VecX<Scalar>> render_image(
    const FieldParams<Scalar>& f, const Camera& cam, int head,
    const RenderImageOptions& opt) {
  if (head < 1 || head > f.current_depth)
    throw InputError("render_image: head out of range");
  const SceneBounds bounds{f.config.encoding.scene_center,
                           f.config.encoding.scene_radius};
  std::optional<Vec3<Scalar>> bg;
  if (opt.white_background) bg = Vec3<Scalar>::Ones();
  std::mt19937_64 rng(opt.seed);
  const Eigen::Index n_px = Eigen::Index(cam.width) * cam.height;
  MatX<Scalar> colors(3, n_px);
  VecX<Scalar> depth(n_px);
  // Chunked so the per-chunk forward keeps the tape footprint modest.
  const int chunk = 1024;
  std::vector<Ray> rays(n_px);
  for (int py = 0; py < cam.height; ++py)
    for (int px = 0; px < cam.width; ++px)
      rays[Eigen::Index(py) * cam.width + px] =
          generate_ray(cam, px, py, bounds);
  for (Eigen::Index begin = 0; begin < n_px; begin += chunk) {
    const Eigen::Index count = std::min<Eigen::Index>(chunk, n_px - begin);
    const int S = opt.n_samples;
    MatX<Scalar> x_norm(3, count * S);
    MatX<Scalar> dirs(3, count * S);
    std::vector<SampleVector> samp(count);
    for (Eigen::Index r = 0; r < count; ++r) {
      const Ray& ray = rays[begin + r];
      samp[r] = stratified_samples(ray, S, rng, opt.jitter);
      for (int k = 0; k < S; ++k) {
        Vec3d p = ray.origin + samp[r].t_values[k] * ray.direction;
        x_norm.col(r * S + k) =
            normalize_position(p, f.config.encoding).template cast<Scalar>();
        dirs.col(r * S + k) = ray.direction.template cast<Scalar>();
      }
    }
    MatX<Scalar> gx = encode_batch(x_norm, f.config.encoding.m_pos);
    MatX<Scalar> gd = encode_batch(dirs, f.config.encoding.m_dir);
    auto [sigma, color] = field_forward(f, gx, gd, head);
    for (Eigen::Index r = 0; r < count; ++r) {
      RenderOutput<Scalar> ro = composite<Scalar>(
          sigma.segment(r * S, S), color.middleCols(r * S, S), samp[r],
          rays[begin + r].t_far, bg);
      colors.col(begin + r) = ro.color.cwiseMin(Scalar(1)).cwiseMax(Scalar(0));
      depth[begin + r] = ro.depth_proxy;
    }
  }
  return {std::move(colors), std::move(depth)};
}

}  // namespace msrf
