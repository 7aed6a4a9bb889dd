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
#include <random>
#include <vector>

#include "msrf/types.hpp"

namespace msrf {

// Scene bounding sphere; rays are clipped against it.
struct SceneBounds {
  Vec3d center = Vec3d::Zero();
  double radius = 1.0;
};

// Pinhole camera. Right-handed, looks along -z, y up in camera space;
// image y runs downward.
struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // cam -> world
  Vec3d translation = Vec3d::Zero();                       // camera center
  double focal_px = 1.0;
  int width = 1;
  int height = 1;
  double target_distance = 1.0;

  void validate() const {
    if ((rotation * rotation.transpose() - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff() > 1e-6)
      throw InputError("camera rotation is not orthonormal");
    if (focal_px <= 0) throw InputError("focal_px must be positive");
    if (width <= 0 || height <= 0) throw InputError("image size must be positive");
    if (target_distance <= 0) throw InputError("target_distance must be positive");
  }
};

struct Ray {
  Vec3d origin;
  Vec3d direction;  // unit norm
  double t_near = 0.0;
  double t_far = 1.0;
};

// Sorted quadrature distances along a ray.
struct SampleVector {
  std::vector<double> t_values;
};

inline constexpr double kNearEpsilon = 1e-3;

inline Ray generate_ray(const Camera& cam, double px, double py,
                        const SceneBounds& bounds) {
  if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
    throw InputError("pixel coordinates out of range");
  const double cx = 0.5 * cam.width;
  const double cy = 0.5 * cam.height;
  Vec3d dir_cam((px + 0.5 - cx) / cam.focal_px,
                -(py + 0.5 - cy) / cam.focal_px, -1.0);
  Ray ray;
  ray.origin = cam.translation;
  ray.direction = (cam.rotation * dir_cam).normalized();
  const double dist_to_center = (bounds.center - ray.origin).norm();
  ray.t_near = std::max(kNearEpsilon, dist_to_center - bounds.radius);
  ray.t_far = dist_to_center + bounds.radius;
  return ray;
}

// n equal bins over [t_near, t_far]; midpoints when jitter is off,
// one uniform draw per bin otherwise.
inline SampleVector stratified_samples(const Ray& ray, int n, std::mt19937_64& rng,
                                       bool jitter) {
  if (n < 1) throw InputError("sample count must be >= 1");
  SampleVector out;
  out.t_values.resize(n);
  const double bin = (ray.t_far - ray.t_near) / n;
  if (jitter) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i)
      out.t_values[i] = ray.t_near + (i + u(rng)) * bin;
  } else {
    for (int i = 0; i < n; ++i)
      out.t_values[i] = ray.t_near + (i + 0.5) * bin;
  }
  return out;
}

}  // namespace msrf
