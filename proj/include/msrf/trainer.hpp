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
// The grow-as-you-train loop: stage L trains on the ray pool {indicator <= L},
// supervising heads 1..L inclusively; the model grows one residual block per
// stage with the optimizer reset at each boundary. Ablation flags each alter
// exactly one ingredient.

#pragma once

#include <chrono>
#include <functional>
#include <future>
#include <thread>

#include "msrf/curriculum.hpp"
#include "msrf/metrics.hpp"
#include "msrf/render.hpp"
#include "msrf/scenegen.hpp"

namespace msrf {

struct TrainConfig {
  int t_stage = 3000;        // paper scale: 100k
  int batch = 1024;          // paper scale: 2048
  int samples_per_ray = 64;  // paper scale: 128
  double base_lr = 5e-4;
  double lr_final = 5e-6;
  uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  bool deterministic = false;
  int log_every = 100;
  bool white_background = true;
  bool jitter = true;
  bool eval_each_stage = true;
  std::string diagnostic_path;  // snapshot target on non-finite loss
  // Ablations, one per Table-style row.
  bool no_multilevel_sup = false;
  bool no_data_schedule = false;
  bool no_growing = false;
  bool no_skip = false;
  bool no_residual = false;

  void validate() const {
    if (t_stage < 1 || batch < 1 || samples_per_ray < 1)
      throw InputError("train config counts must be positive");
    if (base_lr <= 0 || lr_final <= 0)
      throw InputError("learning rates must be positive");
  }
};

struct StageLog {
  struct Record {
    long long iter;
    int stage;
    int head;
    double loss;  // mean squared error per contributing ray at this head
    double lr;
  };
  struct ScaleMetric {
    int scale;
    double psnr_match, ssim_match;  // head matching the scale
    double psnr_final, ssim_final;  // deepest available head
  };
  struct StageSummary {
    int stage;
    double wall_seconds = 0;
    long long param_count = 0;
    std::vector<ScaleMetric> scales;
  };
  std::vector<Record> records;
  std::vector<StageSummary> stages;
};

template <class Scalar>
struct CurriculumResult {
  FieldParams<Scalar> field;
  StageLog log;
};

inline RayPool expand_training_set(const StagedDataset& ds, int stage) {
  if (stage < 1 || stage > ds.l_max)
    throw InputError("expand_training_set: stage out of range");
  RayPool pool;
  std::vector<bool> scale_seen(stage + 1, false);
  for (int i = 0; i < static_cast<int>(ds.images.size()); ++i) {
    const DatasetImage& im = ds.images[i];
    if (im.split != "train" || im.stage > stage) continue;
    scale_seen[im.stage] = true;
    pool.image_indices.push_back(i);
    pool.total_pixels += im.pixels.pixel_count();
    pool.cumulative_pixels.push_back(pool.total_pixels);
  }
  for (int l = 1; l <= stage; ++l)
    if (!scale_seen[l])
      throw InputError("expand_training_set: no train images at scale " +
                       std::to_string(l));
  return pool;
}

namespace detail {

// One sampled training batch, flattened: P = batch * samples points.
template <class Scalar>
struct Batch {
  MatX<Scalar> gx, gd;        // encodings, 6M x P
  VecX<Scalar> deltas;        // per point
  MatX<Scalar> ground_truth;  // 3 x batch
  std::vector<int> indicators;
};

template <class Scalar>
Batch<Scalar> sample_batch(const StagedDataset& ds, const RayPool& pool,
                           const EncodingConfig& enc, int batch, int samples,
                           bool jitter, std::mt19937_64& rng) {
  Batch<Scalar> out;
  const Eigen::Index P = Eigen::Index(batch) * samples;
  MatX<Scalar> x_norm(3, P), dirs(3, P);
  out.deltas.resize(P);
  out.ground_truth.resize(3, batch);
  out.indicators.resize(batch);
  const SceneBounds bounds{enc.scene_center, enc.scene_radius};
  std::uniform_int_distribution<size_t> pick(0, pool.total_pixels - 1);
  for (int r = 0; r < batch; ++r) {
    auto [img_i, pix] = pool.locate(pick(rng));
    const DatasetImage& im = ds.images[img_i];
    const int px = static_cast<int>(pix % im.camera.width);
    const int py = static_cast<int>(pix / im.camera.width);
    const Ray ray = generate_ray(im.camera, px, py, bounds);
    const SampleVector sv = stratified_samples(ray, samples, rng, jitter);
    for (int k = 0; k < samples; ++k) {
      const Eigen::Index i = Eigen::Index(r) * samples + k;
      const Vec3d p = ray.origin + sv.t_values[k] * ray.direction;
      x_norm.col(i) = normalize_position(p, enc).template cast<Scalar>();
      dirs.col(i) = ray.direction.template cast<Scalar>();
      out.deltas[i] = static_cast<Scalar>(
          (k + 1 < samples ? sv.t_values[k + 1] : ray.t_far) - sv.t_values[k]);
    }
    const double* gt = im.pixels.pixel(px, py);
    out.ground_truth.col(r) = Vec3<Scalar>(Scalar(gt[0]), Scalar(gt[1]),
                                           Scalar(gt[2]));
    out.indicators[r] = im.stage;
  }
  out.gx = encode_batch(x_norm, enc.m_pos);
  out.gd = encode_batch(dirs, enc.m_dir);
  return out;
}

template <class Scalar>
struct ShardResult {
  VecX<Scalar> grads;
  std::vector<double> head_loss_sum;  // per supervised head
  std::vector<long long> head_rays;
};

// Forward + backward over rays [ray_begin, ray_end). `heads` lists the
// supervised heads; masks[h] gives each ray's 0/1 loss weight at head h.
template <class Scalar>
ShardResult<Scalar> run_shard(const FieldParams<Scalar>& field,
                              const Batch<Scalar>& batch, int samples,
                              int exit_head, const std::vector<int>& heads,
                              const std::vector<VecX<Scalar>>& masks,
                              bool white_background, Eigen::Index ray_begin,
                              Eigen::Index ray_end) {
  const Eigen::Index n_rays = ray_end - ray_begin;
  const Eigen::Index p0 = ray_begin * samples;
  const Eigen::Index np = n_rays * samples;
  Tape<Scalar> tape(field.params);
  const int gx = tape.constant(batch.gx.middleCols(p0, np));
  const int gd = tape.constant(batch.gd.middleCols(p0, np));
  FieldTapeNodes nodes = field_forward_tape(tape, field, gx, gd, exit_head);
  std::optional<Vec3<Scalar>> bg;
  if (white_background) bg = Vec3<Scalar>::Ones();
  const VecX<Scalar> deltas = batch.deltas.segment(p0, np);
  const MatX<Scalar> gt = batch.ground_truth.middleCols(ray_begin, n_rays);
  std::vector<int> loss_terms;
  ShardResult<Scalar> out;
  for (int h : heads) {
    const int sig = tape.relu(nodes.sigma_raw[h - 1]);
    const int col = tape.sigmoid(nodes.color_raw[h - 1]);
    const int pred = composite_tape(tape, sig, col, deltas, n_rays,
                                    static_cast<Eigen::Index>(samples), bg);
    const VecX<Scalar> w = masks[h - 1].segment(ray_begin, n_rays);
    const int term = tape.weighted_squared_error(pred, gt, w);
    loss_terms.push_back(term);
    out.head_loss_sum.push_back(tape.value(term)(0, 0));
    out.head_rays.push_back(static_cast<long long>(
        std::lround(static_cast<double>(w.sum()))));
  }
  const int loss = loss_terms.size() == 1 ? loss_terms[0] : tape.sum(loss_terms);
  out.grads = tape.backward(loss);
  return out;
}

}  // namespace detail

template <class Scalar>
CurriculumResult<Scalar> run_curriculum(
    const StagedDataset& ds, FieldConfig fcfg, TrainConfig tcfg,
    const std::function<void(const FieldParams<Scalar>&, int)>& on_stage_end =
        nullptr) {
  tcfg.validate();
  ds.validate();
  fcfg.l_max = ds.l_max;
  fcfg.encoding.scene_center = ds.scene_center;
  fcfg.encoding.scene_radius = ds.scene_radius;
  fcfg.skip_connections = !tcfg.no_skip;
  fcfg.residual_aggregation = !tcfg.no_residual;
  fcfg.validate();

  std::mt19937_64 rng(tcfg.seed);
  CurriculumResult<Scalar> result;
  result.field = init_field<Scalar>(fcfg, rng);
  FieldParams<Scalar>& field = result.field;
  StageLog& log = result.log;

  const bool grow_per_stage = !(tcfg.no_growing || tcfg.no_data_schedule);
  if (!grow_per_stage)
    while (field.current_depth < fcfg.l_max) grow(field, rng);

  // (stage, iterations) phases; ablating the data schedule collapses them
  // into one full-data phase of equal total length.
  std::vector<std::pair<int, long long>> phases;
  if (tcfg.no_data_schedule)
    phases.push_back({fcfg.l_max, 1LL * fcfg.l_max * tcfg.t_stage});
  else
    for (int l = 1; l <= fcfg.l_max; ++l) phases.push_back({l, tcfg.t_stage});

  int n_threads = tcfg.threads > 0
                      ? tcfg.threads
                      : std::max(1u, std::thread::hardware_concurrency());
  long long global_iter = 0;
  for (auto [stage, iters] : phases) {
    const auto stage_t0 = std::chrono::steady_clock::now();
    while (grow_per_stage && field.current_depth < stage) grow(field, rng);
    AdamState<Scalar> adam = make_adam<Scalar>(
        field.params.size(), static_cast<Scalar>(tcfg.base_lr),
        static_cast<Scalar>(tcfg.lr_final), iters);
    const RayPool pool = expand_training_set(ds, stage);

    std::vector<int> heads;
    if (tcfg.no_multilevel_sup)
      heads = {stage};
    else if (tcfg.no_growing)
      heads = {fcfg.l_max};
    else
      for (int h = 1; h <= stage; ++h) heads.push_back(h);
    const int exit_head = heads.back();

    for (long long it = 0; it < iters; ++it, ++global_iter) {
      detail::Batch<Scalar> batch = detail::sample_batch<Scalar>(
          ds, pool, fcfg.encoding, tcfg.batch, tcfg.samples_per_ray,
          tcfg.jitter, rng);
      std::vector<VecX<Scalar>> masks(fcfg.l_max);
      for (int h : heads) {
        masks[h - 1].resize(tcfg.batch);
        for (int r = 0; r < tcfg.batch; ++r) {
          const bool in = tcfg.no_multilevel_sup
                              ? batch.indicators[r] == stage
                              : batch.indicators[r] <= h;
          masks[h - 1][r] = in ? Scalar(1) : Scalar(0);
        }
      }
      // Shard rays across workers; gradients reduce in fixed shard order.
      const int shards = std::min<int>(n_threads, tcfg.batch);
      std::vector<detail::ShardResult<Scalar>> parts(shards);
      if (shards == 1) {
        parts[0] = detail::run_shard(field, batch, tcfg.samples_per_ray,
                                     exit_head, heads, masks,
                                     tcfg.white_background, 0, tcfg.batch);
      } else {
        std::vector<std::future<detail::ShardResult<Scalar>>> futures;
        for (int s = 0; s < shards; ++s) {
          const Eigen::Index b0 = Eigen::Index(tcfg.batch) * s / shards;
          const Eigen::Index b1 = Eigen::Index(tcfg.batch) * (s + 1) / shards;
          futures.push_back(std::async(std::launch::async, [&, b0, b1] {
            return detail::run_shard(field, batch, tcfg.samples_per_ray,
                                     exit_head, heads, masks,
                                     tcfg.white_background, b0, b1);
          }));
        }
        for (int s = 0; s < shards; ++s) parts[s] = futures[s].get();
      }
      VecX<Scalar> grads = std::move(parts[0].grads);
      std::vector<double> head_loss = parts[0].head_loss_sum;
      std::vector<long long> head_rays = parts[0].head_rays;
      for (int s = 1; s < shards; ++s) {
        grads += parts[s].grads;
        for (size_t h = 0; h < head_loss.size(); ++h) {
          head_loss[h] += parts[s].head_loss_sum[h];
          head_rays[h] += parts[s].head_rays[h];
        }
      }
      double total_loss = 0;
      for (double v : head_loss) total_loss += v;
      if (!std::isfinite(total_loss) || !grads.allFinite()) {
        if (!tcfg.diagnostic_path.empty())
          save_params(field.template cast<double>(), tcfg.diagnostic_path);
        throw RuntimeError("non-finite loss at iteration " +
                           std::to_string(global_iter) +
                           (tcfg.diagnostic_path.empty()
                                ? ""
                                : "; snapshot at " + tcfg.diagnostic_path));
      }
      const double lr = static_cast<double>(current_lr(adam));
      adam_step(field.params, grads, adam);
      if (it % tcfg.log_every == 0 || it + 1 == iters) {
        for (size_t h = 0; h < heads.size(); ++h)
          log.records.push_back({global_iter, stage, heads[h],
                                 head_rays[h] > 0
                                     ? head_loss[h] / double(head_rays[h])
                                     : 0.0,
                                 lr});
      }
    }

    StageLog::StageSummary summary;
    summary.stage = stage;
    summary.param_count = field.params.size();
    if (tcfg.eval_each_stage) {
      RenderImageOptions ropt;
      ropt.n_samples = tcfg.samples_per_ray;
      ropt.jitter = false;  // evaluation sampling is always deterministic
      ropt.white_background = tcfg.white_background;
      for (int scale = 1; scale <= stage; ++scale) {
        std::vector<double> pm, sm, pf, sf;
        for (const DatasetImage& im : ds.images) {
          if (im.split != "test" || im.stage != scale) continue;
          const int match_head = std::min(scale, field.current_depth);
          for (int pass = 0; pass < 2; ++pass) {
            const int head = pass == 0 ? match_head : field.current_depth;
            auto [colors, depth] = render_image(field, im.camera, head, ropt);
            Image rendered(im.camera.width, im.camera.height);
            for (Eigen::Index i = 0; i < colors.cols(); ++i)
              for (int c = 0; c < 3; ++c)
                rendered.rgb[3 * i + c] = static_cast<double>(colors(c, i));
            (pass == 0 ? pm : pf).push_back(psnr(rendered, im.pixels));
            (pass == 0 ? sm : sf).push_back(ssim(rendered, im.pixels));
          }
        }
        auto mean = [](const std::vector<double>& v) {
          double a = 0;
          for (double x : v) a += x;
          return v.empty() ? 0.0 : a / double(v.size());
        };
        summary.scales.push_back(
            {scale, mean(pm), mean(sm), mean(pf), mean(sf)});
      }
    }
    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      stage_t0)
            .count();
    log.stages.push_back(std::move(summary));
    if (on_stage_end) on_stage_end(field, stage);
  }
  return result;
}

}  // namespace msrf
