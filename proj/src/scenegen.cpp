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

#include "msrf/scenegen.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "msrf/curriculum.hpp"

namespace msrf {

namespace {

// Box face textures repeat the ground band construction on face-local
// coordinates, scaled up so small boxes still show detail.
constexpr double kBoxFreqScale = 4.0;

double band_sum(int bands, double u, double v,
                const std::vector<Vec3d>& phi, const std::vector<Vec3d>& psi,
                int channel, double freq_scale) {
  double acc = 0;
  double f = freq_scale;
  for (int b = 0; b < bands; ++b) {
    acc += std::sin(f * u + phi[b][channel]) * std::sin(f * v + psi[b][channel]);
    f *= 2;
  }
  return 0.5 + 0.5 * acc / bands;
}

}  // namespace

Vec3d SyntheticScene::ground_albedo(double x, double y) const {
  Vec3d out;
  for (int c = 0; c < 3; ++c)
    out[c] = band_sum(bands, x, y, ground_phi, ground_psi, c, 1.0);
  return out;
}

SyntheticScene build_synthetic_scene(uint64_t seed, int bands, int box_count) {
  if (bands < 1) throw InputError("bands must be >= 1");
  SyntheticScene scene;
  scene.bands = bands;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto phase = [&] {
    return Vec3d(2 * std::numbers::pi * u01(rng),
                 2 * std::numbers::pi * u01(rng),
                 2 * std::numbers::pi * u01(rng));
  };
  for (int b = 0; b < bands; ++b) {
    scene.ground_phi.push_back(phase());
    scene.ground_psi.push_back(phase());
  }
  for (int i = 0; i < box_count; ++i) {
    SceneBox box;
    const double ang = 2 * std::numbers::pi * u01(rng);
    const double rad = 0.4 + 1.4 * u01(rng);
    const double hx = 0.15 + 0.2 * u01(rng);
    const double hy = 0.15 + 0.2 * u01(rng);
    const double hz = 0.2 + 0.4 * u01(rng);
    const Vec3d center(rad * std::cos(ang), rad * std::sin(ang), hz);
    box.lo = center - Vec3d(hx, hy, hz);
    box.hi = center + Vec3d(hx, hy, hz);
    box.phase_u.resize(bands);
    box.phase_v.resize(bands);
    for (int b = 0; b < bands; ++b)
      for (int fidx = 0; fidx < 6; ++fidx) {
        box.phase_u[b][fidx] = phase();
        box.phase_v[b][fidx] = phase();
      }
    scene.boxes.push_back(std::move(box));
  }
  return scene;
}

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3d albedo = Vec3d::Ones();
};

bool intersect_box(const SceneBox& box, const Vec3d& o, const Vec3d& d,
                   double* t_out, int* face_out) {
  double t0 = 0, t1 = std::numeric_limits<double>::infinity();
  int enter_face = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < box.lo[a] || o[a] > box.hi[a]) return false;
      continue;
    }
    double tn = (box.lo[a] - o[a]) / d[a];
    double tf = (box.hi[a] - o[a]) / d[a];
    int face = 2 * a + (d[a] > 0 ? 0 : 1);  // which slab plane we enter
    if (tn > tf) std::swap(tn, tf);
    if (tn > t0) {
      t0 = tn;
      enter_face = face;
    }
    t1 = std::min(t1, tf);
    if (t0 > t1) return false;
  }
  if (enter_face < 0 || t0 <= 1e-9) return false;  // origin inside or behind
  *t_out = t0;
  *face_out = enter_face;
  return true;
}

Vec3d box_albedo(const SyntheticScene& scene, const SceneBox& box, int face,
                 const Vec3d& p) {
  const int axis = face / 2;
  const int ua = (axis + 1) % 3;
  const int va = (axis + 2) % 3;
  Vec3d out;
  for (int c = 0; c < 3; ++c) {
    double acc = 0;
    double f = kBoxFreqScale;
    for (int b = 0; b < scene.bands; ++b) {
      acc += std::sin(f * p[ua] + box.phase_u[b][face][c]) *
             std::sin(f * p[va] + box.phase_v[b][face][c]);
      f *= 2;
    }
    out[c] = 0.5 + 0.5 * acc / scene.bands;
  }
  return out;
}

Hit trace(const SyntheticScene& scene, const Vec3d& o, const Vec3d& d) {
  Hit hit;
  // Ground disk at z = 0, bounded by the scene sphere.
  if (std::abs(d.z()) > 1e-15) {
    const double t = -o.z() / d.z();
    if (t > 1e-9) {
      const Vec3d p = o + t * d;
      const double r2 = (p.x() - scene.scene_center.x()) * (p.x() - scene.scene_center.x()) +
                        (p.y() - scene.scene_center.y()) * (p.y() - scene.scene_center.y());
      if (r2 <= scene.scene_radius * scene.scene_radius && t < hit.t) {
        hit.t = t;
        hit.albedo = scene.ground_albedo(p.x(), p.y());
      }
    }
  }
  for (const SceneBox& box : scene.boxes) {
    double t;
    int face;
    if (intersect_box(box, o, d, &t, &face) && t < hit.t) {
      hit.t = t;
      hit.albedo = box_albedo(scene, box, face, o + t * d);
    }
  }
  return hit;
}

}  // namespace

Image oracle_render(const SyntheticScene& scene, const Camera& camera) {
  camera.validate();
  const SceneBounds bounds{scene.scene_center, scene.scene_radius};
  Image img(camera.width, camera.height);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      const Ray ray = generate_ray(camera, x, y, bounds);
      const Hit hit = trace(scene, ray.origin, ray.direction);
      double* px = img.pixel(x, y);
      px[0] = hit.albedo[0];
      px[1] = hit.albedo[1];
      px[2] = hit.albedo[2];
    }
  return img;
}

void StagedDataset::validate() const {
  std::vector<int> train_count(l_max + 1, 0), test_count(l_max + 1, 0);
  for (const DatasetImage& im : images) {
    if (im.stage < 1 || im.stage > l_max)
      throw InputError("dataset: stage indicator out of [1, l_max] for " +
                       im.file);
    if (im.split != "train" && im.split != "test")
      throw InputError("dataset: unknown split tag '" + im.split + "'");
    if (assign_stage(im.camera.target_distance, d_min, l_max) != im.stage)
      throw InputError("dataset: stage inconsistent with camera distance for " +
                       im.file);
    (im.split == "train" ? train_count : test_count)[im.stage] += 1;
  }
  for (int l = 1; l <= l_max; ++l)
    if (train_count[l] == 0 || test_count[l] == 0)
      throw InputError("dataset: scale " + std::to_string(l) +
                       " needs at least one train and one test image");
}

StagedDataset generate_orbit_dataset(const SyntheticScene& scene, int l_max,
                                     int views_per_scale, uint64_t seed,
                                     const OrbitOptions& opt) {
  if (l_max < 1) throw InputError("l_max must be >= 1");
  if (views_per_scale < 2) throw InputError("views_per_scale must be >= 2");
  StagedDataset ds;
  ds.d_min = opt.d_min;
  ds.scene_center = scene.scene_center;
  ds.scene_radius = scene.scene_radius;
  ds.l_max = l_max;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Vec3d up_world(0, 0, 1);
  int index = 0;
  for (int l = 1; l <= l_max; ++l) {
    const double d = opt.d_min * std::pow(2.0, l_max - l);
    const double azimuth0 = 2 * std::numbers::pi * u01(rng);
    for (int v = 0; v < views_per_scale; ++v) {
      const double az = azimuth0 + 2 * std::numbers::pi * v / views_per_scale;
      const Vec3d pos =
          scene.scene_center +
          d * Vec3d(std::cos(opt.elevation_rad) * std::cos(az),
                    std::cos(opt.elevation_rad) * std::sin(az),
                    std::sin(opt.elevation_rad));
      const Vec3d forward = (scene.scene_center - pos).normalized();
      const Vec3d right = forward.cross(up_world).normalized();
      const Vec3d cam_up = right.cross(forward);
      Camera cam;
      cam.rotation.col(0) = right;
      cam.rotation.col(1) = cam_up;
      cam.rotation.col(2) = -forward;
      cam.translation = pos;
      cam.focal_px = opt.focal_factor * opt.width;
      cam.width = opt.width;
      cam.height = opt.height;
      cam.target_distance = d;
      DatasetImage im;
      char name[64];
      std::snprintf(name, sizeof(name), "images/%04d.png", index++);
      im.file = name;
      im.camera = cam;
      im.stage = l;
      im.split = v == views_per_scale - 1 ? "test" : "train";
      im.pixels = oracle_render(scene, cam);
      ds.images.push_back(std::move(im));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace msrf
