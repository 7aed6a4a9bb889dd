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

#include "msrf/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"

using namespace msrf;

namespace {

FieldConfig small_config(int w = 8, int d_base = 4, int l_max = 3) {
  FieldConfig cfg;
  cfg.width = w;
  cfg.d_base = d_base;
  cfg.d_res = 2;
  cfg.l_max = l_max;
  cfg.encoding.m_pos = 3;
  cfg.encoding.m_dir = 2;
  return cfg;
}

// Closed-form affine parameter count for one block + head.
long long block_param_count(const FieldConfig& c, bool base) {
  const int in0 = base ? c.pos_dim()
                       : (c.skip_connections ? c.width + c.pos_dim() : c.width);
  const int layers = base ? c.d_base : c.d_res;
  long long n = 0;
  int in = in0;
  for (int l = 0; l < layers; ++l) {
    n += 1LL * c.width * in + c.width;
    in = c.width;
  }
  n += c.width + 1;                                            // sigma head
  n += 1LL * c.color_hidden() * (c.width + c.dir_dim()) + c.color_hidden();
  n += 3LL * c.color_hidden() + 3;                             // color out
  return n;
}

MatX<double> random_probe(int rows, int cols, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatXd m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

TEST_CASE("init_field") {
  const FieldConfig cfg = small_config();
  std::mt19937_64 rng(42);
  FieldParams<double> f = init_field<double>(cfg, rng);

  SUBCASE("parameter count matches the closed-form topology count") {
    CHECK(f.params.size() == block_param_count(cfg, true));
  }

  SUBCASE("base-only depth with exactly one head") {
    CHECK(f.current_depth == 1);
    CHECK(f.blocks.size() == 1);
  }

  SUBCASE("same seed gives identical parameters") {
    std::mt19937_64 rng2(42);
    FieldParams<double> g = init_field<double>(cfg, rng2);
    CHECK(f.params.values() == g.params.values());
  }
}

TEST_CASE("grow") {
  const FieldConfig cfg = small_config();
  std::mt19937_64 rng(7);
  FieldParams<double> f = init_field<double>(cfg, rng);
  const VecXd base_params = f.params.values();
  const MatXd gx = random_probe(cfg.pos_dim(), 10, 1);
  const MatXd gd = random_probe(cfg.dir_dim(), 10, 2);
  auto [sigma1, color1] = field_forward(f, gx, gd, 1);

  grow(f, rng);

  SUBCASE("existing parameters are bit-identical after grow") {
    CHECK(f.params.values().head(base_params.size()) == base_params);
    CHECK(f.params.size() ==
          block_param_count(cfg, true) + block_param_count(cfg, false));
  }

  SUBCASE("pre-existing head outputs unchanged") {
    auto [sigma1b, color1b] = field_forward(f, gx, gd, 1);
    CHECK(sigma1 == sigma1b);
    CHECK(color1 == color1b);
  }

  SUBCASE("growth is function-preserving at the new head") {
    auto [sigma2, color2] = field_forward(f, gx, gd, 2);
    CHECK((sigma2 - sigma1).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((color2.array() - color1.array()).abs().maxCoeff() <= 1e-12);
  }

  SUBCASE("grow to l_max, then growing past it errors") {
    grow(f, rng);
    CHECK(f.current_depth == 3);
    CHECK(f.blocks.size() == 3);
    CHECK_THROWS_AS(grow(f, rng), InputError);
  }
}

TEST_CASE("forward") {
  const FieldConfig cfg = small_config();
  std::mt19937_64 rng(99);
  FieldParams<double> f = init_field<double>(cfg, rng);
  grow(f, rng);
  grow(f, rng);
  const MatXd gx = random_probe(cfg.pos_dim(), 6, 3);
  const MatXd gd = random_probe(cfg.dir_dim(), 6, 4);

  SUBCASE("exit_head out of range is rejected") {
    CHECK_THROWS_AS(field_forward(f, gx, gd, 0), InputError);
    CHECK_THROWS_AS(field_forward(f, gx, gd, 4), InputError);
  }

  SUBCASE("outputs are valid: density >= 0, color in [0,1]") {
    for (int head = 1; head <= 3; ++head) {
      auto [sigma, color] = field_forward(f, gx, gd, head);
      CHECK(sigma.minCoeff() >= 0.0);
      CHECK(color.minCoeff() >= 0.0);
      CHECK(color.maxCoeff() <= 1.0);
    }
  }

  SUBCASE("zeroed residual output layers reduce every head to the base") {
    for (int b = 1; b < 3; ++b) {
      f.params.matrix(f.blocks[b].head.sigma_w).setZero();
      f.params.matrix(f.blocks[b].head.sigma_b).setZero();
      f.params.matrix(f.blocks[b].head.color_o_w).setZero();
      f.params.matrix(f.blocks[b].head.color_o_b).setZero();
    }
    auto [s1, c1] = field_forward(f, gx, gd, 1);
    auto [s3, c3] = field_forward(f, gx, gd, 3);
    CHECK((s3 - s1).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((c3 - c1).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("head-L output ignores deeper blocks") {
    auto [s2, c2] = field_forward(f, gx, gd, 2);
    // Perturb block 3.
    for (auto [w, b] : f.blocks[2].layers) {
      f.params.matrix(w).setRandom();
      f.params.matrix(b).setRandom();
    }
    auto [s2b, c2b] = field_forward(f, gx, gd, 2);
    CHECK(s2 == s2b);
    CHECK(c2 == c2b);
  }

  SUBCASE("W=4 toy network matches a hand-rolled matrix evaluation") {
    FieldConfig tiny;
    tiny.width = 4;
    tiny.d_base = 2;
    tiny.d_res = 1;
    tiny.l_max = 1;
    tiny.encoding.m_pos = 1;
    tiny.encoding.m_dir = 1;
    std::mt19937_64 trng(5);
    FieldParams<double> tf = init_field<double>(tiny, trng);
    const MatXd tx = random_probe(6, 1, 6);
    const MatXd td = random_probe(6, 1, 7);
    auto [sigma, color] = field_forward(tf, tx, td, 1);

    // Independent naive evaluation with explicit loops.
    auto mat = [&](int seg) { return MatXd(tf.params.matrix(seg)); };
    auto affine = [&](const MatXd& w, const MatXd& b, const VecXd& v) {
      VecXd out(w.rows());
      for (int r = 0; r < w.rows(); ++r) {
        double acc = b(r, 0);
        for (int c = 0; c < w.cols(); ++c) acc += w(r, c) * v[c];
        out[r] = acc;
      }
      return out;
    };
    auto relu_v = [](VecXd v) {
      for (int i = 0; i < v.size(); ++i) v[i] = std::max(0.0, v[i]);
      return v;
    };
    VecXd z = VecXd(tx.col(0));
    for (auto [w, b] : tf.blocks[0].layers)
      z = relu_v(affine(mat(w), mat(b), z));
    const double sigma_raw =
        affine(mat(tf.blocks[0].head.sigma_w), mat(tf.blocks[0].head.sigma_b),
               z)[0];
    VecXd zd(z.size() + td.rows());
    zd << z, VecXd(td.col(0));
    const VecXd hidden = relu_v(affine(mat(tf.blocks[0].head.color_h_w),
                                       mat(tf.blocks[0].head.color_h_b), zd));
    const VecXd logits = affine(mat(tf.blocks[0].head.color_o_w),
                                mat(tf.blocks[0].head.color_o_b), hidden);
    CHECK(sigma[0] == doctest::Approx(std::max(0.0, sigma_raw)).epsilon(1e-12));
    for (int c = 0; c < 3; ++c)
      CHECK(color(c, 0) ==
            doctest::Approx(1.0 / (1.0 + std::exp(-logits[c]))).epsilon(1e-12));
  }
}

TEST_CASE("head-L loss reaches shallow block parameters through residuals") {
  const FieldConfig cfg = small_config();
  std::mt19937_64 rng(123);
  FieldParams<double> f = init_field<double>(cfg, rng);
  grow(f, rng);
  // Give the head-2 residual nonzero output weights so gradients flow.
  f.params.matrix(f.blocks[1].head.sigma_w).setConstant(0.1);
  f.params.matrix(f.blocks[1].head.color_o_w).setConstant(0.1);

  Tape<double> tape(f.params);
  int gx = tape.constant(random_probe(cfg.pos_dim(), 5, 8));
  int gd = tape.constant(random_probe(cfg.dir_dim(), 5, 9));
  FieldTapeNodes nodes = field_forward_tape(tape, f, gx, gd, 2);
  int pred = tape.sigmoid(nodes.color_raw[1]);
  int loss = tape.weighted_squared_error(pred, MatXd::Constant(3, 5, 0.25),
                                         VecXd::Ones(5));
  const VecXd& g = tape.backward(loss);
  const auto& seg0 = f.params.segments()[f.blocks[0].layers[0].first];
  CHECK(g.segment(seg0.offset, seg0.rows * seg0.cols).cwiseAbs().maxCoeff() >
        0.0);
}

TEST_CASE("save/load round trip") {
  const FieldConfig cfg = small_config();
  std::mt19937_64 rng(31);
  FieldParams<double> f = init_field<double>(cfg, rng);
  grow(f, rng);
  const std::string path = "/tmp/msrf_test_params.bin";

  SUBCASE("forward outputs identical after round trip") {
    save_params(f, path);
    FieldParams<double> g = load_params(path);
    CHECK(g.current_depth == f.current_depth);
    CHECK(g.params.values() == f.params.values());
    const MatXd gx = random_probe(cfg.pos_dim(), 4, 10);
    const MatXd gd = random_probe(cfg.dir_dim(), 4, 11);
    auto [s1, c1] = field_forward(f, gx, gd, 2);
    auto [s2, c2] = field_forward(g, gx, gd, 2);
    CHECK(s1 == s2);
    CHECK(c1 == c2);
  }

  SUBCASE("truncated file is a load error, not a crash") {
    save_params(f, path);
    // Truncate to half.
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    std::fseek(fp, 0, SEEK_END);
    const long size = std::ftell(fp);
    std::fclose(fp);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(load_params(path), RuntimeError);
  }

  SUBCASE("config mismatch is an explicit shape error") {
    save_params(f, path);
    FieldParams<double> g = load_params(path);
    // Corrupt the stored width field (offset 8 for magic).
    std::FILE* fp = std::fopen(path.c_str(), "rb+");
    int64_t bad_width = cfg.width * 2;
    std::fseek(fp, 8, SEEK_SET);
    std::fwrite(&bad_width, 8, 1, fp);
    std::fclose(fp);
    CHECK_THROWS_WITH_AS(load_params(path),
                         doctest::Contains("shape mismatch"), RuntimeError);
  }
}

TEST_CASE("freq_channel_weights") {
  const FieldConfig cfg = small_config();
  std::mt19937_64 rng(77);
  FieldParams<double> f = init_field<double>(cfg, rng);
  grow(f, rng);

  SUBCASE("uniform weights give 1/M per band") {
    f.params.matrix(f.blocks[0].layers[0].first).setConstant(0.3);
    const VecXd mass = freq_channel_weights(f, 0);
    REQUIRE(mass.size() == cfg.encoding.m_pos);
    for (int j = 0; j < mass.size(); ++j)
      CHECK(mass[j] == doctest::Approx(1.0 / cfg.encoding.m_pos));
  }

  SUBCASE("zeroed band columns have exactly zero mass") {
    auto w = f.params.matrix(f.blocks[0].layers[0].first);
    for (int k = 0; k < 6; ++k) w.col(1 * 6 + k).setZero();
    const VecXd mass = freq_channel_weights(f, 0);
    CHECK(mass[1] == 0.0);
  }

  SUBCASE("output is a probability vector") {
    for (int b = 0; b < 2; ++b) {
      const VecXd mass = freq_channel_weights(f, b);
      CHECK(mass.minCoeff() >= 0.0);
      CHECK(mass.sum() == doctest::Approx(1.0).epsilon(1e-10));
    }
  }

  SUBCASE("blocks without PE input are rejected") {
    FieldConfig noskip = small_config();
    noskip.skip_connections = false;
    std::mt19937_64 rng2(1);
    FieldParams<double> g = init_field<double>(noskip, rng2);
    grow(g, rng2);
    CHECK_THROWS_AS(freq_channel_weights(g, 1), InputError);
    CHECK_NOTHROW(freq_channel_weights(g, 0));
  }
}
