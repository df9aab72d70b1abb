#include "vvnet/geometry.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "vvnet/error.hpp"

namespace vvnet {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidConfig("focal lengths must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw InvalidConfig("non-finite principal point");
}

CameraIntrinsics CameraIntrinsics::scaled(double factor) const {
  return {fx * factor, fy * factor, cx * factor, cy * factor};
}

DepthImage::DepthImage(int w, int h, float fill)
    : width(w), height(h), depth(std::size_t(w) * std::size_t(h), fill) {}

void VoxelGrid::validate() const {
  if (!(voxel_size > 0.0)) throw InvalidConfig("voxel_size must be positive");
  for (int d : dims) {
    if (d < 1) throw InvalidConfig("grid dims must be positive");
  }
}

Vec3 VoxelGrid::center(const VoxelIndex& v) const {
  return {origin.x + (v[0] + 0.5) * voxel_size, origin.y + (v[1] + 0.5) * voxel_size,
          origin.z + (v[2] + 0.5) * voxel_size};
}

bool VoxelGrid::contains(const Vec3& p) const { return voxel_of(p, *this).has_value(); }

VoxelGrid VoxelGrid::rescaled(double factor) const {
  VoxelGrid g = *this;
  g.voxel_size = voxel_size * factor;
  for (int a = 0; a < 3; ++a) {
    double n = dims[a] / factor;
    g.dims[a] = static_cast<int>(std::lround(n));
    if (std::abs(n - g.dims[a]) > 1e-9 || g.dims[a] < 1) {
      throw InvalidConfig("grid dim " + std::to_string(dims[a]) + " not divisible by scale " +
                          std::to_string(factor));
    }
  }
  return g;
}

VoxelIndex VoxelGrid::unlinear(std::int64_t i) const {
  VoxelIndex v;
  v[2] = static_cast<int>(i % dims[2]);
  i /= dims[2];
  v[1] = static_cast<int>(i % dims[1]);
  v[0] = static_cast<int>(i / dims[1]);
  return v;
}

Vec3 unproject(double u, double v, double z, const CameraIntrinsics& k) {
  if (!(z > 0.0) || !std::isfinite(z)) throw InvalidDepth("depth " + std::to_string(z));
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

NormalMap compute_normals(const DepthImage& d, const CameraIntrinsics& k) {
  NormalMap n;
  n.width = d.width;
  n.height = d.height;
  n.normal.assign(std::size_t(d.width) * d.height, Vec3{});
  for (int v = 1; v + 1 < d.height; ++v) {
    for (int u = 1; u + 1 < d.width; ++u) {
      if (!d.valid(u, v) || !d.valid(u - 1, v) || !d.valid(u + 1, v) || !d.valid(u, v - 1) ||
          !d.valid(u, v + 1)) {
        continue;
      }
      auto p = [&](int uu, int vv) { return unproject(uu, vv, d.at(uu, vv), k); };
      Vec3 c = p(u + 1, v) - p(u - 1, v);
      Vec3 r = p(u, v + 1) - p(u, v - 1);
      Vec3 nrm = c.cross(r);
      double len = nrm.norm();
      if (!(len > 0.0)) continue;
      nrm = nrm * (1.0 / len);
      if (nrm.dot(p(u, v)) > 0.0) nrm = nrm * -1.0;
      n.normal[std::size_t(v) * d.width + u] = nrm;
    }
  }
  return n;
}

std::optional<VoxelIndex> voxel_of(const Vec3& p, const VoxelGrid& g) {
  const double rel[3] = {(p.x - g.origin.x) / g.voxel_size, (p.y - g.origin.y) / g.voxel_size,
                         (p.z - g.origin.z) / g.voxel_size};
  VoxelIndex idx;
  for (int a = 0; a < 3; ++a) {
    double f = std::floor(rel[a]);
    if (!(f >= 0.0) || f >= g.dims[a]) return std::nullopt;
    idx[a] = static_cast<int>(f);
  }
  return idx;
}

double suggest_voxel_size(const DepthImage& d, const CameraIntrinsics& k) {
  double total = 0.0;
  std::int64_t pairs = 0;
  for (int v = 0; v < d.height; ++v) {
    for (int u = 0; u < d.width; ++u) {
      if (!d.valid(u, v)) continue;
      Vec3 p = unproject(u, v, d.at(u, v), k);
      if (u + 1 < d.width && d.valid(u + 1, v)) {
        total += (unproject(u + 1, v, d.at(u + 1, v), k) - p).norm();
        ++pairs;
      }
      if (v + 1 < d.height && d.valid(u, v + 1)) {
        total += (unproject(u, v + 1, d.at(u, v + 1), k) - p).norm();
        ++pairs;
      }
    }
  }
  if (pairs == 0) throw DegenerateDepth("no valid neighbouring depth pixels");
  return 2.0 * total / double(pairs);
}

DepthImage downsample_depth(const DepthImage& d, int factor) {
  if (factor < 1 || d.width % factor != 0 || d.height % factor != 0) {
    throw IndivisibleDims(std::to_string(d.width) + "x" + std::to_string(d.height) +
                          " by factor " + std::to_string(factor));
  }
  DepthImage out(d.width / factor, d.height / factor);
  for (int v = 0; v < out.height; ++v) {
    for (int u = 0; u < out.width; ++u) {
      // First valid pixel of the block in raster order, top-left first.
      for (int dv = 0; dv < factor && out.at(u, v) == 0.0f; ++dv) {
        for (int du = 0; du < factor; ++du) {
          if (d.valid(u * factor + du, v * factor + dv)) {
            out.at(u, v) = d.at(u * factor + du, v * factor + dv);
            break;
          }
        }
      }
    }
  }
  return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& source) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(source + ":" + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

namespace {

double parse_double(const std::string& s, const std::string& key, const std::string& source) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(source + ": bad number for '" + key + "': '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, const std::string& key, const std::string& source) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(source + ": bad integer for '" + key + "': '" + s + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const std::set<std::string> kCameraKeys = {
    "fx",          "fy",          "cx",          "cy",         "grid_origin_x", "grid_origin_y",
    "grid_origin_z", "voxel_size", "grid_x",      "grid_y",     "grid_z"};

}  // namespace

CameraGrid parse_camera_grid(const std::string& text, const std::string& source) {
  auto kv = parse_key_values(text, source);
  for (const auto& [key, value] : kv) {
    if (!kCameraKeys.count(key)) throw ParseError(source + ": unknown key '" + key + "'");
  }
  for (const auto& key : kCameraKeys) {
    if (!kv.count(key)) throw ParseError(source + ": missing key '" + key + "'");
  }
  auto num = [&](const char* key) { return parse_double(kv.at(key), key, source); };
  auto integer = [&](const char* key) { return parse_int(kv.at(key), key, source); };
  CameraGrid cg;
  cg.camera = {num("fx"), num("fy"), num("cx"), num("cy")};
  cg.grid.origin = {num("grid_origin_x"), num("grid_origin_y"), num("grid_origin_z")};
  cg.grid.voxel_size = num("voxel_size");
  cg.grid.dims = {integer("grid_x"), integer("grid_y"), integer("grid_z")};
  try {
    cg.camera.validate();
    cg.grid.validate();
  } catch (const InvalidConfig& e) {
    throw ParseError(source + ": " + e.what());
  }
  return cg;
}

std::string format_camera_grid(const CameraGrid& cg) {
  std::ostringstream os;
  os << "fx=" << format_double(cg.camera.fx) << '\n'
     << "fy=" << format_double(cg.camera.fy) << '\n'
     << "cx=" << format_double(cg.camera.cx) << '\n'
     << "cy=" << format_double(cg.camera.cy) << '\n'
     << "grid_origin_x=" << format_double(cg.grid.origin.x) << '\n'
     << "grid_origin_y=" << format_double(cg.grid.origin.y) << '\n'
     << "grid_origin_z=" << format_double(cg.grid.origin.z) << '\n'
     << "voxel_size=" << format_double(cg.grid.voxel_size) << '\n'
     << "grid_x=" << cg.grid.dims[0] << '\n'
     << "grid_y=" << cg.grid.dims[1] << '\n'
     << "grid_z=" << cg.grid.dims[2] << '\n';
  return os.str();
}

CameraGrid read_camera_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_camera_grid(ss.str(), path);
}

void write_camera_grid(const std::string& path, const CameraGrid& cg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << format_camera_grid(cg);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace vvnet
