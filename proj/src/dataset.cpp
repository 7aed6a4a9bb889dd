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

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "msrf/scenegen.hpp"

namespace msrf {

namespace fs = std::filesystem;
using nlohmann::json;

void save_dataset(const StagedDataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  json manifest;
  manifest["scene_center"] = {ds.scene_center.x(), ds.scene_center.y(),
                              ds.scene_center.z()};
  manifest["scene_radius"] = ds.scene_radius;
  manifest["d_min"] = ds.d_min;
  manifest["l_max"] = ds.l_max;
  json images = json::array();
  for (const DatasetImage& im : ds.images) {
    json rec;
    rec["file"] = im.file;
    std::vector<double> pose(12);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) pose[r * 4 + c] = im.camera.rotation(r, c);
      pose[r * 4 + 3] = im.camera.translation[r];
    }
    rec["cam_to_world"] = pose;
    rec["focal_px"] = im.camera.focal_px;
    rec["width"] = im.camera.width;
    rec["height"] = im.camera.height;
    rec["target_distance"] = im.camera.target_distance;
    rec["stage"] = im.stage;
    rec["split"] = im.split;
    images.push_back(std::move(rec));
    if (im.pixels.width > 0)
      write_png(im.pixels, (fs::path(dir) / im.file).string());
  }
  manifest["images"] = std::move(images);
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw RuntimeError("cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

StagedDataset load_dataset(const std::string& dir, bool load_images) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw RuntimeError("missing manifest: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw RuntimeError("malformed manifest " + manifest_path.string() + ": " +
                       e.what());
  }
  StagedDataset ds;
  try {
    const auto& c = manifest.at("scene_center");
    ds.scene_center = Vec3d(c.at(0), c.at(1), c.at(2));
    ds.scene_radius = manifest.at("scene_radius");
    ds.d_min = manifest.at("d_min");
    ds.l_max = manifest.at("l_max");
    for (const json& rec : manifest.at("images")) {
      DatasetImage im;
      im.file = rec.at("file");
      const auto& pose = rec.at("cam_to_world");
      if (pose.size() != 12)
        throw RuntimeError("cam_to_world must have 12 entries in " + im.file);
      for (int r = 0; r < 3; ++r) {
        for (int col = 0; col < 3; ++col)
          im.camera.rotation(r, col) = pose.at(r * 4 + col);
        im.camera.translation[r] = pose.at(r * 4 + 3);
      }
      im.camera.focal_px = rec.at("focal_px");
      im.camera.width = rec.at("width");
      im.camera.height = rec.at("height");
      im.camera.target_distance = rec.at("target_distance");
      im.stage = rec.at("stage");
      im.split = rec.at("split");
      im.camera.validate();
      if (load_images) {
        const fs::path img_path = fs::path(dir) / im.file;
        if (!fs::exists(img_path))
          throw RuntimeError("manifest references missing image: " +
                             img_path.string());
        im.pixels = read_png(img_path.string());
        if (im.pixels.width != im.camera.width ||
            im.pixels.height != im.camera.height)
          throw RuntimeError("image size disagrees with manifest for " +
                             im.file);
      }
      ds.images.push_back(std::move(im));
    }
  } catch (const json::exception& e) {
    throw RuntimeError("malformed manifest " + manifest_path.string() + ": " +
                       e.what());
  }
  ds.validate();
  return ds;
}

}  // namespace msrf
