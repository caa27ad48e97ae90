#include "hdrsplat/scene.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hdrsplat/errors.hpp"

namespace hdrsplat {
namespace {

constexpr const char* kTextHeader = "hdrsplat-scene v1";
constexpr char kBinaryMagic[8] = {'H', 'S', 'P', 'L', 'B', 'I', 'N', '1'};
constexpr double kUnitTolerance = 1e-6;

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("binary scene: unexpected end of data");
  return v;
}

}  // namespace

Gaussian Gaussian::from_activated(const Eigen::Vector3d& mu,
                                  const Eigen::Quaterniond& rot,
                                  const Eigen::Vector3d& scale, double opacity,
                                  const Eigen::Vector3d& color) {
  if ((scale.array() <= 0.0).any()) {
    throw std::invalid_argument("Gaussian scale must be positive");
  }
  if (!(opacity > 0.0 && opacity < 1.0)) {
    throw std::invalid_argument("Gaussian opacity must lie in (0,1)");
  }
  Gaussian g;
  g.mu = mu;
  g.rot = rot;
  g.log_scale = scale.array().log();
  g.opacity_logit = logit(opacity);
  g.color = color;
  return g;
}

Eigen::Matrix3d covariance_of(const Gaussian& g) {
  const Eigen::Matrix3d r = g.rot.normalized().toRotationMatrix();
  const Eigen::Vector3d s = g.scale();
  const Eigen::Matrix3d m = r * s.asDiagonal();
  Eigen::Matrix3d cov = m * m.transpose();
  // Exact symmetry regardless of rounding in the product.
  cov = 0.5 * (cov + cov.transpose()).eval();
  return cov;
}

void CameraIntrinsics::validate() const {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("intrinsics: width and height must be >= 1");
  }
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("intrinsics: focal lengths must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw std::invalid_argument("intrinsics: principal point outside image");
  }
}

CameraIntrinsics intrinsics_from_fov(int width, int height, double hfov_deg) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("intrinsics_from_fov: size must be >= 1");
  }
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) {
    throw std::invalid_argument("intrinsics_from_fov: hfov must be in (0,180)");
  }
  const double half = 0.5 * hfov_deg * std::numbers::pi / 180.0;
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = width / (2.0 * std::tan(half));
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  return k;
}

void CameraPose::validate() const {
  if (std::abs(rotation.norm() - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("pose: rotation quaternion is not unit length");
  }
  if (!translation.allFinite()) {
    throw std::invalid_argument("pose: translation is not finite");
  }
}

void CameraView::validate() const {
  pose.validate();
  intrinsics.validate();
  if (!(exposure > 0.0)) throw std::invalid_argument("view: exposure must be > 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("view: gamma must be > 0");
  if (!observation.empty() && (observation.width() != intrinsics.width ||
                               observation.height() != intrinsics.height)) {
    throw std::invalid_argument("view: observation size does not match intrinsics");
  }
}

void Scene::validate(bool for_training) const {
  if (sh_degree != 0 && sh_degree != 1) {
    throw std::invalid_argument("scene: sh_degree must be 0 or 1");
  }
  std::set<int> ids;
  for (const auto& v : views) {
    v.validate();
    if (!ids.insert(v.id).second) {
      throw std::invalid_argument("scene: duplicate view id " +
                                  std::to_string(v.id));
    }
  }
  for (const auto& g : gaussians) {
    if (!g.mu.allFinite() || !g.log_scale.allFinite() ||
        !std::isfinite(g.opacity_logit) || !g.color.allFinite()) {
      throw std::invalid_argument("scene: non-finite Gaussian parameter");
    }
    if ((g.color.array() < 0.0).any()) {
      throw std::invalid_argument("scene: negative Gaussian radiance");
    }
    if (g.rot.norm() == 0.0) {
      throw std::invalid_argument("scene: zero rotation quaternion");
    }
  }
  if (for_training) {
    if (gaussians.empty()) throw std::invalid_argument("scene: no Gaussians");
    if (views.empty()) throw std::invalid_argument("scene: no views");
    for (const auto& v : views) {
      if (v.observation.empty()) {
        throw std::invalid_argument("scene: view " + std::to_string(v.id) +
                                    " has no observation");
      }
    }
  }
}

const CameraView& Scene::view_by_id(int id) const {
  for (const auto& v : views) {
    if (v.id == id) return v;
  }
  throw std::out_of_range("unknown view id " + std::to_string(id));
}

std::optional<std::size_t> Scene::view_index(int id) const {
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].id == id) return i;
  }
  return std::nullopt;
}

double round_to_text_precision(double value) {
  return std::strtod(fmt9(value).c_str(), nullptr);
}

void write_scene_text(const Scene& scene, std::ostream& out) {
  out << kTextHeader << '\n';
  for (const auto& g : scene.gaussians) {
    const Eigen::Vector3d s = g.scale();
    out << "G " << fmt9(g.mu.x()) << ' ' << fmt9(g.mu.y()) << ' '
        << fmt9(g.mu.z()) << ' ' << fmt9(g.rot.w()) << ' ' << fmt9(g.rot.x())
        << ' ' << fmt9(g.rot.y()) << ' ' << fmt9(g.rot.z()) << ' '
        << fmt9(s.x()) << ' ' << fmt9(s.y()) << ' ' << fmt9(s.z()) << ' '
        << fmt9(g.opacity()) << ' ' << fmt9(g.color.x()) << ' '
        << fmt9(g.color.y()) << ' ' << fmt9(g.color.z());
    if (scene.sh_degree == 1) {
      for (const auto& b : g.sh1) {
        out << ' ' << fmt9(b.x()) << ' ' << fmt9(b.y()) << ' ' << fmt9(b.z());
      }
    }
    out << '\n';
  }
  for (const auto& v : scene.views) {
    const auto& q = v.pose.rotation;
    const auto& t = v.pose.translation;
    const auto& k = v.intrinsics;
    out << "V " << v.id << ' ' << fmt9(q.w()) << ' ' << fmt9(q.x()) << ' '
        << fmt9(q.y()) << ' ' << fmt9(q.z()) << ' ' << fmt9(t.x()) << ' '
        << fmt9(t.y()) << ' ' << fmt9(t.z()) << ' ' << k.width << ' '
        << k.height << ' ' << fmt9(k.fx) << ' ' << fmt9(k.fy) << ' '
        << fmt9(k.cx) << ' ' << fmt9(k.cy) << ' ' << fmt9(v.exposure) << ' '
        << fmt9(v.gamma);
    if (v.iso) out << ' ' << *v.iso;
    out << '\n';
  }
}

Scene read_scene_text(std::istream& in, const std::string& source) {
  Scene scene;
  std::string line;
  std::size_t line_no = 0;
  std::size_t record = 0;
  bool header_seen = false;
  bool any_sh1 = false;
  bool any_sh0 = false;

  auto fail = [&](const std::string& msg) {
    throw ParseError(source, line_no, record, msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kTextHeader) fail("expected header '" + std::string(kTextHeader) + "'");
      header_seen = true;
      continue;
    }
    ++record;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);

    auto num = [&](std::size_t i) {
      const char* s = tokens[i].c_str();
      char* end = nullptr;
      const double v = std::strtod(s, &end);
      if (end == s || *end != '\0') fail("field " + std::to_string(i + 1) + " is not a number: '" + tokens[i] + "'");
      if (!std::isfinite(v)) fail("field " + std::to_string(i + 1) + " is not finite");
      return v;
    };
    auto integer = [&](std::size_t i) {
      const char* s = tokens[i].c_str();
      char* end = nullptr;
      const long v = std::strtol(s, &end, 10);
      if (end == s || *end != '\0') fail("field " + std::to_string(i + 1) + " is not an integer: '" + tokens[i] + "'");
      return static_cast<int>(v);
    };

    if (tag == "G") {
      if (tokens.size() != 14 && tokens.size() != 23) {
        fail("G record needs 14 or 23 fields, got " + std::to_string(tokens.size()));
      }
      Gaussian g;
      g.mu = {num(0), num(1), num(2)};
      g.rot = Eigen::Quaterniond(num(3), num(4), num(5), num(6));
      if (g.rot.norm() == 0.0) fail("zero rotation quaternion");
      const Eigen::Vector3d s(num(7), num(8), num(9));
      if ((s.array() <= 0.0).any()) fail("negative or zero scale in Gaussian record");
      const double a = num(10);
      if (!(a > 0.0 && a < 1.0)) fail("opacity outside (0,1)");
      g.log_scale = s.array().log();
      g.opacity_logit = logit(a);
      g.color = {num(11), num(12), num(13)};
      if ((g.color.array() < 0.0).any()) fail("negative radiance");
      if (tokens.size() == 23) {
        any_sh1 = true;
        for (int b = 0; b < 3; ++b) {
          g.sh1[b] = {num(14 + 3 * b), num(15 + 3 * b), num(16 + 3 * b)};
        }
      } else {
        any_sh0 = true;
      }
      scene.gaussians.push_back(g);
    } else if (tag == "V") {
      if (tokens.size() != 16 && tokens.size() != 17) {
        fail("V record needs 16 or 17 fields, got " + std::to_string(tokens.size()));
      }
      CameraView v;
      v.id = integer(0);
      v.pose.rotation = Eigen::Quaterniond(num(1), num(2), num(3), num(4));
      v.pose.translation = {num(5), num(6), num(7)};
      v.intrinsics.width = integer(8);
      v.intrinsics.height = integer(9);
      v.intrinsics.fx = num(10);
      v.intrinsics.fy = num(11);
      v.intrinsics.cx = num(12);
      v.intrinsics.cy = num(13);
      v.exposure = num(14);
      v.gamma = num(15);
      if (tokens.size() == 17) v.iso = integer(16);
      try {
        v.validate();
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
      scene.views.push_back(std::move(v));
    } else {
      fail("unknown record tag '" + tag + "'");
    }
  }
  if (!header_seen) throw ParseError(source, line_no, 0, "missing header");
  if (any_sh1 && any_sh0) {
    throw ParseError(source, line_no, record, "mixed SH degrees in Gaussian records");
  }
  scene.sh_degree = any_sh1 ? 1 : 0;
  try {
    scene.validate(false);
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, line_no, record, e.what());
  }
  return scene;
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  write_scene_text(scene, out);
  if (!out) throw DataError("write failed: " + path.string());
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  return read_scene_text(in, path.string());
}

void write_scene_binary(const Scene& scene, std::ostream& out) {
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  put<std::int32_t>(out, scene.sh_degree);
  put<std::uint64_t>(out, scene.gaussians.size());
  put<std::uint64_t>(out, scene.views.size());
  for (const auto& g : scene.gaussians) {
    for (int i = 0; i < 3; ++i) put(out, g.mu[i]);
    put(out, g.rot.w());
    put(out, g.rot.x());
    put(out, g.rot.y());
    put(out, g.rot.z());
    for (int i = 0; i < 3; ++i) put(out, g.log_scale[i]);
    put(out, g.opacity_logit);
    for (int i = 0; i < 3; ++i) put(out, g.color[i]);
    for (const auto& b : g.sh1) {
      for (int i = 0; i < 3; ++i) put(out, b[i]);
    }
  }
  for (const auto& v : scene.views) {
    put<std::int32_t>(out, v.id);
    put(out, v.pose.rotation.w());
    put(out, v.pose.rotation.x());
    put(out, v.pose.rotation.y());
    put(out, v.pose.rotation.z());
    for (int i = 0; i < 3; ++i) put(out, v.pose.translation[i]);
    put<std::int32_t>(out, v.intrinsics.width);
    put<std::int32_t>(out, v.intrinsics.height);
    put(out, v.intrinsics.fx);
    put(out, v.intrinsics.fy);
    put(out, v.intrinsics.cx);
    put(out, v.intrinsics.cy);
    put(out, v.exposure);
    put(out, v.gamma);
    put<std::int32_t>(out, v.iso.has_value() ? 1 : 0);
    put<std::int32_t>(out, v.iso.value_or(0));
  }
}

Scene read_scene_binary(std::istream& in) {
  char magic[sizeof(kBinaryMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBinaryMagic, sizeof(magic)) != 0) {
    throw DataError("binary scene: bad magic");
  }
  Scene scene;
  scene.sh_degree = get<std::int32_t>(in);
  const auto n_g = get<std::uint64_t>(in);
  const auto n_v = get<std::uint64_t>(in);
  if (n_g > (1ull << 32) || n_v > (1ull << 32)) {
    throw DataError("binary scene: implausible record counts");
  }
  scene.gaussians.resize(n_g);
  for (auto& g : scene.gaussians) {
    for (int i = 0; i < 3; ++i) g.mu[i] = get<double>(in);
    const double w = get<double>(in), x = get<double>(in), y = get<double>(in),
                 z = get<double>(in);
    g.rot = Eigen::Quaterniond(w, x, y, z);
    for (int i = 0; i < 3; ++i) g.log_scale[i] = get<double>(in);
    g.opacity_logit = get<double>(in);
    for (int i = 0; i < 3; ++i) g.color[i] = get<double>(in);
    for (auto& b : g.sh1) {
      for (int i = 0; i < 3; ++i) b[i] = get<double>(in);
    }
  }
  scene.views.resize(n_v);
  for (auto& v : scene.views) {
    v.id = get<std::int32_t>(in);
    const double w = get<double>(in), x = get<double>(in), y = get<double>(in),
                 z = get<double>(in);
    v.pose.rotation = Eigen::Quaterniond(w, x, y, z);
    for (int i = 0; i < 3; ++i) v.pose.translation[i] = get<double>(in);
    v.intrinsics.width = get<std::int32_t>(in);
    v.intrinsics.height = get<std::int32_t>(in);
    v.intrinsics.fx = get<double>(in);
    v.intrinsics.fy = get<double>(in);
    v.intrinsics.cx = get<double>(in);
    v.intrinsics.cy = get<double>(in);
    v.exposure = get<double>(in);
    v.gamma = get<double>(in);
    const bool has_iso = get<std::int32_t>(in) != 0;
    const int iso = get<std::int32_t>(in);
    if (has_iso) v.iso = iso;
  }
  return scene;
}

void save_scene_binary(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  write_scene_binary(scene, out);
  if (!out) throw DataError("write failed: " + path.string());
}

Scene load_scene_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  return read_scene_binary(in);
}

}  // namespace hdrsplat
