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

#include "msrf/curriculum.hpp"

#include <random>

#include "doctest.h"
#include "msrf/trainer.hpp"

using namespace msrf;

namespace {

DatasetImage tiny_image(int stage, const std::string& split, int w, int h) {
  DatasetImage im;
  im.stage = stage;
  im.split = split;
  im.pixels.width = w;
  im.pixels.height = h;
  im.pixels.rgb.assign(size_t(w) * h * 3, 0.5);
  im.camera.width = w;
  im.camera.height = h;
  im.camera.focal_px = double(w);
  im.camera.translation = Vec3d(0, 0, 1.2 * std::pow(2.0, 3 - stage));
  im.camera.target_distance = im.camera.translation.norm();
  return im;
}

StagedDataset tiny_dataset(int l_max) {
  StagedDataset ds;
  ds.d_min = 1.2;
  ds.scene_radius = 3.0;
  ds.l_max = l_max;
  for (int l = 1; l <= l_max; ++l) {
    ds.images.push_back(tiny_image(l, "train", 4, 4));
    ds.images.push_back(tiny_image(l, "train", 2, 2));
    ds.images.push_back(tiny_image(l, "test", 4, 4));
  }
  return ds;
}

}  // namespace

TEST_CASE("assign_stage") {
  const double d_min = 1.2;
  const int l_max = 4;

  SUBCASE("closest band maps to the deepest stage") {
    CHECK(assign_stage(d_min, d_min, l_max) == l_max);
    CHECK(assign_stage(1.99 * d_min, d_min, l_max) == l_max);
  }

  SUBCASE("each doubling moves one stage up") {
    CHECK(assign_stage(2.0 * d_min, d_min, l_max) == l_max - 1);
    CHECK(assign_stage(4.0 * d_min, d_min, l_max) == l_max - 2);
    CHECK(assign_stage(8.0 * d_min, d_min, l_max) == 1);
  }

  SUBCASE("distances beyond the coarsest band clamp to stage 1") {
    CHECK(assign_stage(100.0 * d_min, d_min, l_max) == 1);
  }

  SUBCASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(assign_stage(0.5 * d_min, d_min, l_max), InputError);
    CHECK_THROWS_AS(assign_stage(1.0, 0.0, l_max), InputError);
  }
}

TEST_CASE("stage_loss") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  SUBCASE("single stage reduces to plain summed squared error") {
    MatXd pred(3, 4), gt(3, 4);
    for (int i = 0; i < 12; ++i) {
      pred.data()[i] = u(rng);
      gt.data()[i] = u(rng);
    }
    const std::vector<int> ind(4, 1);
    const double got = stage_loss<double>({pred}, gt, ind, 1);
    CHECK(got == doctest::Approx((pred - gt).squaredNorm()).epsilon(1e-12));
  }

  SUBCASE("a ray contributes at its own head and every deeper one") {
    // Stage 3, one ray with indicator 2: heads 2 and 3 only.
    MatXd gt = MatXd::Zero(3, 1);
    std::vector<MatXd> preds;
    for (int h = 0; h < 3; ++h) preds.push_back(MatXd::Constant(3, 1, h + 1.0));
    const double got = stage_loss<double>(preds, gt, {2}, 3);
    // ||2||^2 * 3 + ||3||^2 * 3 = 12 + 27.
    CHECK(got == doctest::Approx(39.0).epsilon(1e-12));
  }

  SUBCASE("mixed indicators match a direct double-loop evaluation") {
    const int n = 6, L = 3;
    MatXd gt(3, n);
    std::vector<MatXd> preds(L, MatXd(3, n));
    std::vector<int> ind = {1, 2, 3, 1, 3, 2};
    for (int i = 0; i < gt.size(); ++i) gt.data()[i] = u(rng);
    for (auto& p : preds)
      for (int i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
    double expected = 0;
    for (int h = 1; h <= L; ++h)
      for (int r = 0; r < n; ++r)
        if (ind[r] <= h)
          expected += (preds[h - 1].col(r) - gt.col(r)).squaredNorm();
    CHECK(stage_loss<double>(preds, gt, ind, L) ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("indicator beyond the current stage is rejected") {
    MatXd pred = MatXd::Zero(3, 1), gt = MatXd::Zero(3, 1);
    CHECK_THROWS_AS(stage_loss<double>({pred}, gt, {2}, 1), InputError);
  }

  SUBCASE("missing head predictions are rejected") {
    MatXd pred = MatXd::Zero(3, 1), gt = MatXd::Zero(3, 1);
    CHECK_THROWS_AS(stage_loss<double>({pred}, gt, {1}, 2), InputError);
  }
}

TEST_CASE("RayPool::locate") {
  RayPool pool;
  pool.image_indices = {0, 2, 5};
  pool.cumulative_pixels = {16, 20, 36};
  pool.total_pixels = 36;
  CHECK(pool.locate(0) == std::make_pair(0, size_t(0)));
  CHECK(pool.locate(15) == std::make_pair(0, size_t(15)));
  CHECK(pool.locate(16) == std::make_pair(2, size_t(0)));
  CHECK(pool.locate(19) == std::make_pair(2, size_t(3)));
  CHECK(pool.locate(20) == std::make_pair(5, size_t(0)));
  CHECK(pool.locate(35) == std::make_pair(5, size_t(15)));
}

TEST_CASE("expand_training_set") {
  StagedDataset ds = tiny_dataset(3);

  SUBCASE("stage 1 includes exactly the coarsest train images") {
    RayPool pool = expand_training_set(ds, 1);
    CHECK(pool.image_indices.size() == 2);
    CHECK(pool.total_pixels == 16 + 4);
  }

  SUBCASE("deeper stages accumulate every coarser scale") {
    RayPool pool = expand_training_set(ds, 3);
    CHECK(pool.image_indices.size() == 6);
    CHECK(pool.total_pixels == 3 * (16 + 4));
    // Test-split images never enter the pool.
    for (int i : pool.image_indices) CHECK(ds.images[i].split == "train");
  }

  SUBCASE("stage out of range is rejected") {
    CHECK_THROWS_AS(expand_training_set(ds, 0), InputError);
    CHECK_THROWS_AS(expand_training_set(ds, 4), InputError);
  }

  SUBCASE("a scale with no train images is an error") {
    StagedDataset bad = tiny_dataset(3);
    std::erase_if(bad.images,
                  [](const DatasetImage& im) {
                    return im.stage == 2 && im.split == "train";
                  });
    CHECK_NOTHROW(expand_training_set(bad, 1));
    CHECK_THROWS_AS(expand_training_set(bad, 2), InputError);
    CHECK_THROWS_AS(expand_training_set(bad, 3), InputError);
  }
}
