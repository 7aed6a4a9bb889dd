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
// Analytic multi-scale test scenes: a textured ground disk plus a few
// axis-aligned boxes, rendered exactly by ray casting. Ground albedo is a
// normalized sum of sin(2^b x + phi) sin(2^b y + psi) bands, so close
// views need high encoding frequencies while remote views alias them away.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "msrf/geometry.hpp"
#include "msrf/image.hpp"

namespace msrf {

struct SceneBox {
  Vec3d lo, hi;
  // Per face (0..5: -x,+x,-y,+y,-z,+z), per channel, per band phases.
  std::vector<std::array<Vec3d, 6>> phase_u, phase_v;  // [band][face][chan]
};

struct SyntheticScene {
  int bands = 9;
  // Ground texture phases, per band and channel.
  std::vector<Vec3d> ground_phi, ground_psi;  // [band][channel]
  std::vector<SceneBox> boxes;
  Vec3d scene_center = Vec3d::Zero();
  double scene_radius = 3.0;

  // Albedo of the ground plane at (x, y), each channel in [0, 1].
  Vec3d ground_albedo(double x, double y) const;
};

SyntheticScene build_synthetic_scene(uint64_t seed, int bands, int box_count);

Image oracle_render(const SyntheticScene& scene, const Camera& camera);

struct DatasetImage {
  std::string file;
  Camera camera;
  int stage = 1;
  std::string split = "train";  // "train" | "test"
  Image pixels;                 // may be empty when not loaded
};

struct StagedDataset {
  std::vector<DatasetImage> images;
  double d_min = 1.0;
  Vec3d scene_center = Vec3d::Zero();
  double scene_radius = 1.0;
  int l_max = 1;

  void validate() const;
};

struct OrbitOptions {
  int width = 96;
  int height = 96;
  double d_min = 1.2;
  double elevation_rad = 0.7853981633974483;  // 45 degrees
  double focal_factor = 0.8;                  // focal_px = factor * width
};

// Circular orbits, one per scale: scale l sits at distance d_min*2^(l_max-l)
// with the orbit radius expanding with altitude. All cameras aim at the
// scene center; the last view of each scale is tagged as test.
StagedDataset generate_orbit_dataset(const SyntheticScene& scene, int l_max,
                                     int views_per_scale, uint64_t seed,
                                     const OrbitOptions& opt = {});

void save_dataset(const StagedDataset& ds, const std::string& dir);
StagedDataset load_dataset(const std::string& dir, bool load_images = true);

}  // namespace msrf
