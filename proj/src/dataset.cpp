#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hdrsplat/datagen.hpp"
#include "hdrsplat/errors.hpp"
#include "hdrsplat/image_io.hpp"

namespace hdrsplat {
namespace {

constexpr const char* kManifestHeader = "hdrsplat-manifest v1";

// round-trip exact
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int DatasetManifest::frame_count() const {
  std::set<int> frames;
  for (const auto& e : entries) frames.insert(e.frame);
  return static_cast<int>(frames.size());
}

void DatasetManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << kManifestHeader << '\n';
  out << "scene " << scene_file.generic_string() << '\n';
  out << "calib " << calib_file.generic_string() << '\n';
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const auto& k = cameras[c];
    out << "C " << c << ' ' << k.width << ' ' << k.height << ' ' << fmt17(k.fx)
        << ' ' << fmt17(k.fy) << ' ' << fmt17(k.cx) << ' ' << fmt17(k.cy) << '\n';
  }
  for (const auto& e : entries) {
    const auto& q = e.pose.rotation;
    const auto& t = e.pose.translation;
    out << "F " << e.frame << ' ' << e.camera << ' ' << e.iso << ' '
        << fmt17(e.exposure) << ' ' << e.image.generic_string() << ' '
        << fmt17(q.w()) << ' ' << fmt17(q.x()) << ' ' << fmt17(q.y()) << ' '
        << fmt17(q.z()) << ' ' << fmt17(t.x()) << ' ' << fmt17(t.y()) << ' '
        << fmt17(t.z()) << '\n';
    if (!e.gt_image.empty()) {
      out << "G " << e.frame << ' ' << e.camera << ' ' << e.gt_image.generic_string() << '\n';
    }
    if (!e.sky_mask.empty()) {
      out << "S " << e.frame << ' ' << e.camera << ' ' << e.sky_mask.generic_string() << '\n';
    }
  }
  out.flush();
  if (!out) throw DataError("write failed: " + path.string());
}

DatasetManifest DatasetManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  const std::string source = path.string();
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0, record = 0;
  bool header = false;
  auto find_entry = [&](int frame, int cam) -> ManifestEntry& {
    for (auto& e : m.entries) {
      if (e.frame == frame && e.camera == cam) return e;
    }
    throw ParseError(source, line_no, record, "record refers to an unknown frame/camera");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kManifestHeader) throw ParseError(source, line_no, 0, "bad manifest header");
      header = true;
      continue;
    }
    ++record;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    auto fail = [&](const std::string& msg) {
      throw ParseError(source, line_no, record, msg);
    };
    if (tag == "scene") {
      std::string p;
      if (!(ss >> p)) fail("scene record needs a path");
      m.scene_file = p;
    } else if (tag == "calib") {
      std::string p;
      if (!(ss >> p)) fail("calib record needs a path");
      m.calib_file = p;
    } else if (tag == "C") {
      std::size_t idx;
      CameraIntrinsics k;
      if (!(ss >> idx >> k.width >> k.height >> k.fx >> k.fy >> k.cx >> k.cy)) {
        fail("C record needs 7 fields");
      }
      if (idx != m.cameras.size()) fail("C records out of order");
      try {
        k.validate();
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
      m.cameras.push_back(k);
    } else if (tag == "F") {
      ManifestEntry e;
      std::string img;
      double qw, qx, qy, qz, tx, ty, tz;
      if (!(ss >> e.frame >> e.camera >> e.iso >> e.exposure >> img >> qw >> qx >>
            qy >> qz >> tx >> ty >> tz)) {
        fail("F record needs 12 fields");
      }
      if (e.camera < 0 || e.camera >= static_cast<int>(m.cameras.size())) {
        fail("F record camera index has no C record");
      }
      if (e.frame < 0 || !(e.exposure > 0.0)) fail("F record has invalid frame or exposure");
      e.image = img;
      e.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
      e.pose.translation = {tx, ty, tz};
      try {
        e.pose.validate();
      } catch (const std::invalid_argument& ex) {
        fail(ex.what());
      }
      m.entries.push_back(e);
    } else if (tag == "G" || tag == "S") {
      int frame, cam;
      std::string p;
      if (!(ss >> frame >> cam >> p)) fail(tag + " record needs 3 fields");
      auto& e = find_entry(frame, cam);
      (tag == "G" ? e.gt_image : e.sky_mask) = p;
    } else {
      fail("unknown manifest record '" + tag + "'");
    }
    std::string extra;
    if (ss >> extra) fail("trailing fields in record");
  }
  if (!header) throw ParseError(source, line_no, 0, "empty manifest");
  if (m.scene_file.empty()) throw ParseError(source, line_no, record, "missing scene record");
  return m;
}

Scene load_dataset(const std::filesystem::path& manifest_path, DatasetSplit split) {
  const DatasetManifest m = DatasetManifest::read(manifest_path);
  const auto root = manifest_path.parent_path();
  Scene base = load_scene(root / m.scene_file);
  Scene scene;
  scene.sh_degree = base.sh_degree;
  scene.gaussians = std::move(base.gaussians);
  const int cams = m.camera_count();
  for (const auto& e : m.entries) {
    CameraView v;
    v.id = e.view_id(cams);
    v.pose = e.pose;
    v.intrinsics = m.cameras[static_cast<std::size_t>(e.camera)];
    v.exposure = e.exposure;
    v.gamma = kGeneratorGamma;
    v.iso = e.iso;
    std::filesystem::path img = e.image;
    if (split == DatasetSplit::kGroundTruth) {
      if (e.gt_image.empty()) throw DataError("manifest has no GT image for a view");
      img = e.gt_image;
      v.exposure = 1.0;
      v.iso = kIsoReference;
    }
    v.observation = read_ppm(root / img);
    if (v.observation.width() != v.intrinsics.width ||
        v.observation.height() != v.intrinsics.height) {
      throw DataError("image size does not match calibration: " + (root / img).string());
    }
    scene.views.push_back(std::move(v));
  }
  try {
    scene.validate(false);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("dataset: ") + e.what());
  }
  return scene;
}

}  // namespace hdrsplat
