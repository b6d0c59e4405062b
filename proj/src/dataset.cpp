// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "revgen/common.hpp"
#include "revgen/rng.hpp"
#include "revgen/scene.hpp"

namespace revgen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json camera_to_json(const Camera& c) {
  json j;
  j["fx"] = c.fx();
  j["fy"] = c.fy();
  j["cx"] = c.cx();
  j["cy"] = c.cy();
  j["width"] = c.width();
  j["height"] = c.height();
  j["rotation"] = std::vector<double>(c.rotation().m.begin(), c.rotation().m.end());
  j["translation"] = {c.translation().x, c.translation().y, c.translation().z};
  return j;
}

Camera camera_from_json(const json& j) {
  Mat3 r;
  const auto rot = j.at("rotation").get<std::vector<double>>();
  REVGEN_CHECK(rot.size() == 9, "cameras.json: rotation must have 9 entries");
  std::copy(rot.begin(), rot.end(), r.m.begin());
  const auto t = j.at("translation").get<std::vector<double>>();
  REVGEN_CHECK(t.size() == 3, "cameras.json: translation must have 3 entries");
  return Camera(j.at("fx"), j.at("fy"), j.at("cx"), j.at("cy"), j.at("width"), j.at("height"), r,
                Vec3{t[0], t[1], t[2]});
}

std::string view_name(int i) {
  std::ostringstream os;
  os << "view_" << std::setw(3) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

void save_cameras_json(const std::string& path, const std::vector<Camera>& cams) {
  json j = json::array();
  for (const auto& c : cams) j.push_back(camera_to_json(c));
  std::ofstream f(path);
  REVGEN_CHECK(f.good(), "save_cameras_json: cannot open '" + path + "'");
  f << j.dump(2) << "\n";
}

std::vector<Camera> load_cameras_json(const std::string& path) {
  std::ifstream f(path);
  REVGEN_CHECK(f.good(), "load_cameras_json: cannot open '" + path + "'");
  json j = json::parse(f);
  std::vector<Camera> cams;
  for (const auto& e : j) cams.push_back(camera_from_json(e));
  return cams;
}

DatasetManifest make_dataset(int n_objects, int n_views, const std::string& out_dir, uint64_t seed,
                             int image_size, int resolution) {
  REVGEN_CHECK(n_objects >= 1 && n_views >= 1, "make_dataset: counts must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  REVGEN_CHECK(!ec && fs::is_directory(out_dir),
               "make_dataset: cannot create output directory '" + out_dir + "'");

  DatasetManifest manifest;
  manifest.n_objects = n_objects;
  manifest.n_views = n_views;
  manifest.image_size = image_size;
  manifest.resolution = resolution;
  manifest.seed = seed;

  RenderConfig rc;
  for (int i = 0; i < n_objects; ++i) {
    DatasetObjectEntry entry;
    entry.seed = seed * 1000003ull + i;
    entry.level = 1 + i % 4;
    entry.n_views = n_views;
    {
      std::ostringstream os;
      os << "obj_" << std::setw(4) << std::setfill('0') << i;
      entry.id = os.str();
    }
    entry.dir = entry.id;

    const fs::path obj_dir = fs::path(out_dir) / entry.dir;
    fs::create_directories(obj_dir / "views");
    fs::create_directories(obj_dir / "depths");

    VoxelObject obj = make_object(entry.seed, entry.level, resolution);
    std::vector<Camera> cams = sample_cameras(n_views, CameraMode::kUniform, entry.seed,
                                              image_size);
    for (int v = 0; v < n_views; ++v) {
      RenderOutput out = render(obj, cams[v], image_size, rc);
      save_png((obj_dir / "views" / (view_name(v) + ".png")).string(), out.rgb);
      Array depth;
      depth.shape = {image_size, image_size};
      depth.data = out.depth;
      save_tensor((obj_dir / "depths" / (view_name(v) + ".bin")).string(), depth);
    }
    save_cameras_json((obj_dir / "cameras.json").string(), cams);
    save_tensor((obj_dir / "gt_voxels.bin").string(), obj.to_array());
    {
      Array ss;
      ss.shape = {resolution, resolution, resolution};
      ss.data.resize(obj.cell_count());
      for (size_t c = 0; c < obj.cell_count(); ++c) ss.data[c] = obj.occupancy[c] ? 1.0 : -1.0;
      save_tensor((obj_dir / "gt_ss.bin").string(), ss);
    }
    {
      json j;
      j["id"] = entry.id;
      j["seed"] = entry.seed;
      j["level"] = entry.level;
      j["n_views"] = entry.n_views;
      j["image_size"] = image_size;
      j["resolution"] = resolution;
      std::ofstream f(obj_dir / "manifest.json");
      f << j.dump(2) << "\n";
    }
    manifest.objects.push_back(entry);
  }

  json j;
  j["n_objects"] = manifest.n_objects;
  j["n_views"] = manifest.n_views;
  j["image_size"] = manifest.image_size;
  j["resolution"] = manifest.resolution;
  j["seed"] = manifest.seed;
  json objs = json::array();
  for (const auto& e : manifest.objects)
    objs.push_back({{"id", e.id},
                    {"seed", e.seed},
                    {"level", e.level},
                    {"n_views", e.n_views},
                    {"dir", e.dir}});
  j["objects"] = objs;
  std::ofstream f(fs::path(out_dir) / "manifest.json");
  REVGEN_CHECK(f.good(), "make_dataset: cannot write manifest");
  f << j.dump(2) << "\n";
  return manifest;
}

DatasetManifest load_manifest(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  REVGEN_CHECK(f.good(), "load_manifest: missing manifest.json in '" + dir + "'");
  json j = json::parse(f);
  DatasetManifest m;
  m.n_objects = j.at("n_objects");
  m.n_views = j.at("n_views");
  m.image_size = j.at("image_size");
  m.resolution = j.at("resolution");
  m.seed = j.at("seed");
  for (const auto& e : j.at("objects")) {
    DatasetObjectEntry entry;
    entry.id = e.at("id");
    entry.seed = e.at("seed");
    entry.level = e.at("level");
    entry.n_views = e.at("n_views");
    entry.dir = e.at("dir");
    m.objects.push_back(entry);
  }
  return m;
}

ViewSet load_views(const std::string& object_dir) {
  ViewSet vs;
  const fs::path dir(object_dir);
  std::vector<fs::path> pngs;
  REVGEN_CHECK(fs::is_directory(dir / "views"), "load_views: missing views/ in '" + object_dir + "'");
  for (const auto& e : fs::directory_iterator(dir / "views"))
    if (e.path().extension() == ".png") pngs.push_back(e.path());
  std::sort(pngs.begin(), pngs.end());
  REVGEN_CHECK(!pngs.empty(), "load_views: no PNG views in '" + object_dir + "'");
  for (const auto& p : pngs) vs.images.push_back(load_png(p.string()));
  if (fs::exists(dir / "cameras.json"))
    vs.cameras = load_cameras_json((dir / "cameras.json").string());
  if (fs::is_directory(dir / "depths")) {
    std::vector<fs::path> bins;
    for (const auto& e : fs::directory_iterator(dir / "depths"))
      if (e.path().extension() == ".bin") bins.push_back(e.path());
    std::sort(bins.begin(), bins.end());
    for (const auto& p : bins) vs.depths.push_back(load_tensor(p.string()).data);
  }
  return vs;
}

VoxelObject load_gt_object(const std::string& object_dir) {
  return VoxelObject::from_array(load_tensor((fs::path(object_dir) / "gt_voxels.bin").string()));
}

std::vector<Camera> novel_cameras(const DatasetObjectEntry& entry, int image_size) {
  // Seed offset keeps these disjoint from the training views.
  return sample_cameras(4, CameraMode::kUniform, entry.seed ^ 0x9e3779b97f4a7c15ull, image_size);
}

}  // namespace revgen
