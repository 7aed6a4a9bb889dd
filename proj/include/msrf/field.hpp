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
// Growable radiance field: a base MLP block plus appended residual blocks,
// each with its own color/density head. Head L aggregates the base output
// with the residual outputs of blocks 2..L in pre-activation space; the
// aggregated density is rectified and the aggregated color passed through
// a sigmoid at render time.

#pragma once

#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "msrf/autodiff.hpp"
#include "msrf/encoding.hpp"

namespace msrf {

struct FieldConfig {
  int width = 256;
  int d_base = 4;
  int d_res = 2;
  int l_max = 1;
  EncodingConfig encoding;
  bool skip_connections = true;     // forward PE into residual blocks
  bool residual_aggregation = true; // heads predict residuals, summed

  int pos_dim() const { return 6 * encoding.m_pos; }
  int dir_dim() const { return 6 * encoding.m_dir; }
  int color_hidden() const { return std::max(1, width / 2); }

  void validate() const {
    if (width < 1 || d_base < 1 || d_res < 1 || l_max < 1)
      throw InputError("field config counts must be >= 1");
    encoding.validate();
  }
};

template <class Scalar>
struct FieldParams {
  struct Head {
    int sigma_w, sigma_b;      // feature -> 1
    int color_h_w, color_h_b;  // [feature, gamma(d)] -> width/2
    int color_o_w, color_o_b;  // width/2 -> 3
  };
  struct Block {
    std::vector<std::pair<int, int>> layers;  // (w_seg, b_seg) per layer
    Head head;
  };

  FieldConfig config;
  int current_depth = 0;
  ParamVector<Scalar> params;
  std::vector<Block> blocks;

  template <class Other>
  FieldParams<Other> cast() const {
    FieldParams<Other> out;
    out.config = config;
    out.current_depth = current_depth;
    out.params = params.template cast<Other>();
    for (const Block& b : blocks) {
      typename FieldParams<Other>::Block ob;
      ob.layers = b.layers;
      ob.head = {b.head.sigma_w,   b.head.sigma_b,   b.head.color_h_w,
                 b.head.color_h_b, b.head.color_o_w, b.head.color_o_b};
      out.blocks.push_back(std::move(ob));
    }
    return out;
  }
};

namespace detail {

template <class Scalar>
void he_init(Eigen::Map<MatX<Scalar>> w, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(2.0 / double(w.cols())));
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      w(r, c) = static_cast<Scalar>(n(rng));
}

// Registers the segments of block `index` (0 = base). Values start zeroed.
template <class Scalar>
typename FieldParams<Scalar>::Block add_block_segments(FieldParams<Scalar>& f,
                                                       int index) {
  const FieldConfig& c = f.config;
  typename FieldParams<Scalar>::Block blk;
  const std::string p = "block" + std::to_string(index) + ".";
  const int n_layers = index == 0 ? c.d_base : c.d_res;
  int in = index == 0 ? c.pos_dim()
                      : (c.skip_connections ? c.width + c.pos_dim() : c.width);
  for (int l = 0; l < n_layers; ++l) {
    const std::string lp = p + "layer" + std::to_string(l) + ".";
    int w = f.params.add_matrix(lp + "w", c.width, in);
    int b = f.params.add_matrix(lp + "b", c.width, 1);
    blk.layers.push_back({w, b});
    in = c.width;
  }
  blk.head.sigma_w = f.params.add_matrix(p + "head.sigma.w", 1, c.width);
  blk.head.sigma_b = f.params.add_matrix(p + "head.sigma.b", 1, 1);
  blk.head.color_h_w = f.params.add_matrix(p + "head.color_h.w",
                                           c.color_hidden(),
                                           c.width + c.dir_dim());
  blk.head.color_h_b =
      f.params.add_matrix(p + "head.color_h.b", c.color_hidden(), 1);
  blk.head.color_o_w =
      f.params.add_matrix(p + "head.color_o.w", 3, c.color_hidden());
  blk.head.color_o_b = f.params.add_matrix(p + "head.color_o.b", 3, 1);
  return blk;
}

}  // namespace detail

template <class Scalar>
FieldParams<Scalar> init_field(const FieldConfig& config, std::mt19937_64& rng) {
  config.validate();
  FieldParams<Scalar> f;
  f.config = config;
  f.current_depth = 1;
  auto blk = detail::add_block_segments(f, 0);
  for (auto [w, b] : blk.layers) detail::he_init<Scalar>(f.params.matrix(w), rng);
  detail::he_init<Scalar>(f.params.matrix(blk.head.sigma_w), rng);
  detail::he_init<Scalar>(f.params.matrix(blk.head.color_h_w), rng);
  detail::he_init<Scalar>(f.params.matrix(blk.head.color_o_w), rng);
  f.blocks.push_back(std::move(blk));
  return f;
}

// Appends one residual block + head. Hidden layers are He-initialized; the
// head's final affine layers start at zero so the aggregated output at the
// new head equals the previous head at the moment of growth. Pre-existing
// parameters are untouched.
template <class Scalar>
void grow(FieldParams<Scalar>& f, std::mt19937_64& rng) {
  if (f.current_depth >= f.config.l_max)
    throw InputError("grow: already at l_max blocks");
  auto blk = detail::add_block_segments(f, f.current_depth);
  for (auto [w, b] : blk.layers) detail::he_init<Scalar>(f.params.matrix(w), rng);
  detail::he_init<Scalar>(f.params.matrix(blk.head.color_h_w), rng);
  // sigma and color output layers stay zero.
  f.blocks.push_back(std::move(blk));
  f.current_depth += 1;
}

// Per-head aggregated pre-activation outputs for heads 1..exit_head.
// sigma_raw[h] is 1xP, color_raw[h] is 3xP.
struct FieldTapeNodes {
  std::vector<int> sigma_raw;
  std::vector<int> color_raw;
  std::vector<int> features;  // z_l per block
};

template <class Scalar>
FieldTapeNodes field_forward_tape(Tape<Scalar>& tape,
                                  const FieldParams<Scalar>& f, int gx_node,
                                  int gd_node, int exit_head) {
  if (exit_head < 1 || exit_head > f.current_depth)
    throw InputError("forward: exit_head out of range");
  FieldTapeNodes out;
  std::vector<int> sigma_terms, color_terms;
  int z = -1;
  for (int blk_i = 0; blk_i < exit_head; ++blk_i) {
    const auto& blk = f.blocks[blk_i];
    int h;
    if (blk_i == 0)
      h = gx_node;
    else if (f.config.skip_connections)
      h = tape.concat_rows({z, gx_node});
    else
      h = z;
    for (auto [w, b] : blk.layers) h = tape.affine_relu(h, w, b);
    z = h;
    out.features.push_back(z);
    int sig = tape.affine(z, blk.head.sigma_w, blk.head.sigma_b);
    int ch = tape.affine_relu(
        f.config.encoding.m_dir > 0 ? tape.concat_rows({z, gd_node}) : z,
        blk.head.color_h_w, blk.head.color_h_b);
    int col = tape.affine(ch, blk.head.color_o_w, blk.head.color_o_b);
    if (f.config.residual_aggregation) {
      sigma_terms.push_back(sig);
      color_terms.push_back(col);
      out.sigma_raw.push_back(sigma_terms.size() == 1 ? sig
                                                      : tape.sum(sigma_terms));
      out.color_raw.push_back(color_terms.size() == 1 ? col
                                                      : tape.sum(color_terms));
    } else {
      out.sigma_raw.push_back(sig);
      out.color_raw.push_back(col);
    }
  }
  return out;
}

// Convenience non-differentiating forward at a single head: returns the
// render-ready density (rectified) and color (sigmoid), each per column.
template <class Scalar>
std::pair<VecX<Scalar>, MatX<Scalar>> field_forward(
    const FieldParams<Scalar>& f, const MatX<Scalar>& gx,
    const MatX<Scalar>& gd, int exit_head) {
  Tape<Scalar> tape(f.params);
  int gxn = tape.constant(gx);
  int gdn = tape.constant(gd);
  FieldTapeNodes nodes = field_forward_tape(tape, f, gxn, gdn, exit_head);
  VecX<Scalar> sigma = tape.value(nodes.sigma_raw[exit_head - 1])
                           .row(0)
                           .cwiseMax(Scalar(0))
                           .transpose();
  MatX<Scalar> col =
      (Scalar(1) /
       (Scalar(1) +
        (-tape.value(nodes.color_raw[exit_head - 1]).array()).exp()))
          .matrix();
  return {std::move(sigma), std::move(col)};
}

// ---- Parameter file I/O -------------------------------------------------
// Versioned little-endian container: magic, version, FieldConfig fields,
// current depth, the segment table, then every value as a 64-bit float in
// layout order.

inline constexpr char kParamMagic[8] = {'M', 'S', 'R', 'F', 'P', 'R', 'M', '1'};

void save_params(const FieldParams<double>& f, const std::string& path);
FieldParams<double> load_params(const std::string& path);

namespace detail {

inline void write_exact(std::FILE* fp, const void* p, size_t n) {
  if (std::fwrite(p, 1, n, fp) != n) throw RuntimeError("short write");
}
inline void read_exact(std::FILE* fp, void* p, size_t n, const char* what) {
  if (std::fread(p, 1, n, fp) != n)
    throw RuntimeError(std::string("truncated parameter file reading ") + what);
}

}  // namespace detail

inline void save_params(const FieldParams<double>& f, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw RuntimeError("cannot open " + path + " for writing");
  auto w64 = [&](double v) { detail::write_exact(fp, &v, 8); };
  auto wi = [&](int64_t v) { detail::write_exact(fp, &v, 8); };
  detail::write_exact(fp, kParamMagic, 8);
  const FieldConfig& c = f.config;
  wi(c.width); wi(c.d_base); wi(c.d_res); wi(c.l_max);
  wi(c.encoding.m_pos); wi(c.encoding.m_dir);
  w64(c.encoding.scene_center.x());
  w64(c.encoding.scene_center.y());
  w64(c.encoding.scene_center.z());
  w64(c.encoding.scene_radius);
  wi(c.skip_connections ? 1 : 0);
  wi(c.residual_aggregation ? 1 : 0);
  wi(f.current_depth);
  wi(static_cast<int64_t>(f.params.segments().size()));
  for (const auto& s : f.params.segments()) {
    wi(static_cast<int64_t>(s.name.size()));
    detail::write_exact(fp, s.name.data(), s.name.size());
    wi(s.rows); wi(s.cols);
  }
  detail::write_exact(fp, f.params.values().data(),
                      sizeof(double) * f.params.size());
  std::fclose(fp);
}

inline FieldParams<double> load_params(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw RuntimeError("cannot open parameter file " + path);
  struct Closer { std::FILE* fp; ~Closer() { std::fclose(fp); } } closer{fp};
  auto r64 = [&](const char* what) {
    double v; detail::read_exact(fp, &v, 8, what); return v;
  };
  auto ri = [&](const char* what) {
    int64_t v; detail::read_exact(fp, &v, 8, what); return v;
  };
  char magic[8];
  detail::read_exact(fp, magic, 8, "magic");
  if (std::memcmp(magic, kParamMagic, 8) != 0)
    throw RuntimeError("bad magic in parameter file " + path);
  FieldConfig c;
  c.width = static_cast<int>(ri("width"));
  c.d_base = static_cast<int>(ri("d_base"));
  c.d_res = static_cast<int>(ri("d_res"));
  c.l_max = static_cast<int>(ri("l_max"));
  c.encoding.m_pos = static_cast<int>(ri("m_pos"));
  c.encoding.m_dir = static_cast<int>(ri("m_dir"));
  c.encoding.scene_center.x() = r64("center");
  c.encoding.scene_center.y() = r64("center");
  c.encoding.scene_center.z() = r64("center");
  c.encoding.scene_radius = r64("radius");
  c.skip_connections = ri("skip") != 0;
  c.residual_aggregation = ri("residual") != 0;
  c.validate();
  const int depth = static_cast<int>(ri("depth"));
  if (depth < 1 || depth > c.l_max)
    throw RuntimeError("parameter file depth out of range");

  // Rebuild the topology, then check the stored segment table against it.
  FieldParams<double> f;
  f.config = c;
  f.current_depth = depth;
  for (int i = 0; i < depth; ++i)
    f.blocks.push_back(detail::add_block_segments(f, i));

  const auto n_segs = ri("segment count");
  if (n_segs != static_cast<int64_t>(f.params.segments().size()))
    throw RuntimeError("parameter file segment count mismatch");
  for (const auto& s : f.params.segments()) {
    const auto name_len = ri("segment name length");
    std::string name(static_cast<size_t>(name_len), '\0');
    detail::read_exact(fp, name.data(), name.size(), "segment name");
    const int64_t rows = ri("segment rows");
    const int64_t cols = ri("segment cols");
    if (name != s.name || rows != s.rows || cols != s.cols)
      throw RuntimeError("parameter file shape mismatch at segment " + s.name +
                         " (got " + name + " " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ")");
  }
  detail::read_exact(fp, f.params.values().data(),
                     sizeof(double) * f.params.size(), "values");
  if (!f.params.values().allFinite())
    throw RuntimeError("parameter file contains non-finite values");
  return f;
}

// RMS first-layer weight mass per PE frequency band for the given block
// (0 = base input, >=1 = the block's skip input), normalized to sum to 1.
template <class Scalar>
VecXd freq_channel_weights(const FieldParams<Scalar>& f, int block) {
  if (block < 0 || block >= f.current_depth)
    throw InputError("freq_channel_weights: block out of range");
  if (block > 0 && !f.config.skip_connections)
    throw InputError("freq_channel_weights: block has no PE input");
  const int m = f.config.encoding.m_pos;
  auto w = f.params.matrix(f.blocks[block].layers[0].first);
  // PE columns sit after the feature columns in residual blocks.
  const Eigen::Index pe_offset = block == 0 ? 0 : f.config.width;
  VecXd mass(m);
  for (int j = 0; j < m; ++j) {
    double sq = 0;
    Eigen::Index count = 0;
    for (int k = 0; k < 6; ++k) {
      auto colv = w.col(pe_offset + j * 6 + k);
      sq += colv.template cast<double>().squaredNorm();
      count += colv.size();
    }
    mass[j] = std::sqrt(sq / double(count));
  }
  const double total = mass.sum();
  if (total > 0) mass /= total;
  return mass;
}

}  // namespace msrf
