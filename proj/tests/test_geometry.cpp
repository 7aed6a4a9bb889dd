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

#include "msrf/geometry.hpp"

#include "doctest.h"

using namespace msrf;

namespace {

Camera identity_camera(int w, int h, double focal) {
  Camera cam;
  cam.width = w;
  cam.height = h;
  cam.focal_px = focal;
  return cam;
}

}  // namespace

TEST_CASE("generate_ray pinhole directions") {
  const SceneBounds bounds{Vec3d(0, 0, -5), 1.0};

  SUBCASE("corner pixel of a 2x2 image") {
    const Ray ray = generate_ray(identity_camera(2, 2, 1.0), 0, 0, bounds);
    const Vec3d expected = Vec3d(-0.5, 0.5, -1).normalized();
    CHECK((ray.direction - expected).norm() < 1e-12);
    CHECK(ray.origin.norm() == 0.0);
  }

  SUBCASE("center pixel looks down the optical axis") {
    const Ray ray = generate_ray(identity_camera(3, 3, 1.0), 1, 1, bounds);
    CHECK((ray.direction - Vec3d(0, 0, -1)).norm() < 1e-12);
  }

  SUBCASE("rotating the camera 180 degrees about y flips the axis") {
    Camera cam = identity_camera(3, 3, 1.0);
    cam.rotation = Eigen::AngleAxisd(std::numbers::pi, Vec3d::UnitY())
                       .toRotationMatrix();
    const Ray ray = generate_ray(cam, 1, 1, bounds);
    CHECK((ray.direction - Vec3d(0, 0, 1)).norm() < 1e-12);
  }

  SUBCASE("near/far come from the bounding sphere") {
    const Ray ray = generate_ray(identity_camera(3, 3, 1.0), 1, 1, bounds);
    CHECK(ray.t_near == doctest::Approx(4.0));
    CHECK(ray.t_far == doctest::Approx(6.0));
  }

  SUBCASE("camera inside the sphere clamps near to epsilon") {
    const SceneBounds inside{Vec3d(0, 0, -0.5), 2.0};
    const Ray ray = generate_ray(identity_camera(3, 3, 1.0), 1, 1, inside);
    CHECK(ray.t_near == doctest::Approx(1e-3));
  }

  SUBCASE("out-of-range pixels are rejected") {
    CHECK_THROWS_AS(generate_ray(identity_camera(2, 2, 1.0), 2, 0, bounds),
                    InputError);
    CHECK_THROWS_AS(generate_ray(identity_camera(2, 2, 1.0), 0, -1, bounds),
                    InputError);
  }

  SUBCASE("directions are unit for random cameras and pixels") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      Camera cam = identity_camera(17, 13, 0.5 + 3 * u(rng));
      cam.rotation =
          Eigen::AngleAxisd(u(rng) * 6, Vec3d(u(rng), u(rng), 1 + u(rng)).normalized())
              .toRotationMatrix();
      cam.translation = Vec3d(u(rng), u(rng), u(rng));
      const Ray ray =
          generate_ray(cam, u(rng) * 16.99, u(rng) * 12.99, bounds);
      CHECK(std::abs(ray.direction.norm() - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("camera validation") {
  Camera cam = identity_camera(4, 4, 1.0);
  CHECK_NOTHROW(cam.validate());
  cam.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(cam.validate(), InputError);
}

TEST_CASE("stratified_samples") {
  Ray ray;
  ray.origin = Vec3d::Zero();
  ray.direction = Vec3d(0, 0, -1);
  std::mt19937_64 rng(3);

  SUBCASE("midpoints when jitter is off") {
    ray.t_near = 0;
    ray.t_far = 1;
    const SampleVector sv = stratified_samples(ray, 4, rng, false);
    const std::vector<double> expected{0.125, 0.375, 0.625, 0.875};
    REQUIRE(sv.t_values.size() == 4);
    for (int i = 0; i < 4; ++i)
      CHECK(sv.t_values[i] == doctest::Approx(expected[i]));
    CHECK(stratified_samples(ray, 1, rng, false).t_values[0] ==
          doctest::Approx(0.5));
  }

  SUBCASE("jittered samples stay inside their bins") {
    ray.t_near = 2;
    ray.t_far = 4;
    for (int rep = 0; rep < 100; ++rep) {
      const SampleVector sv = stratified_samples(ray, 2, rng, true);
      CHECK(sv.t_values[0] >= 2.0);
      CHECK(sv.t_values[0] < 3.0);
      CHECK(sv.t_values[1] >= 3.0);
      CHECK(sv.t_values[1] < 4.0);
      CHECK(sv.t_values[0] < sv.t_values[1]);
    }
  }

  SUBCASE("strictly ascending for any n") {
    ray.t_near = 0.5;
    ray.t_far = 7.25;
    for (int n : {1, 2, 3, 17, 128}) {
      for (bool jitter : {false, true}) {
        const SampleVector sv = stratified_samples(ray, n, rng, jitter);
        for (size_t i = 1; i < sv.t_values.size(); ++i)
          CHECK(sv.t_values[i] > sv.t_values[i - 1]);
        CHECK(sv.t_values.front() >= ray.t_near);
        CHECK(sv.t_values.back() <= ray.t_far);
      }
    }
  }

  SUBCASE("deterministic without jitter regardless of rng state") {
    ray.t_near = 0;
    ray.t_far = 1;
    std::mt19937_64 rng_a(1), rng_b(999);
    const SampleVector a = stratified_samples(ray, 8, rng_a, false);
    const SampleVector b = stratified_samples(ray, 8, rng_b, false);
    CHECK(a.t_values == b.t_values);
  }

  SUBCASE("n = 0 is an input error") {
    CHECK_THROWS_AS(stratified_samples(ray, 0, rng, false), InputError);
  }
}
