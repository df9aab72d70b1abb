#include "vvnet/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "binary.hpp"
#include "vvnet/error.hpp"

namespace vvnet {

namespace {

using detail::put_f32;
using detail::put_u32;
using detail::Reader;

constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

std::uint64_t checked_product(std::initializer_list<std::uint32_t> dims,
                              const std::string& source) {
  std::uint64_t n = 1;
  for (auto d : dims) {
    if (d == 0) throw DimOverflow(source + ": zero dimension");
    n *= d;
    if (n > kMaxElements) throw DimOverflow(source + ": dimensions too large");
  }
  return n;
}

}  // namespace

std::vector<std::uint8_t> encode_depth(const DepthImage& d) {
  std::vector<std::uint8_t> out{'V', 'V', 'D', 'M'};
  out.reserve(12 + d.depth.size() * 4);
  put_u32(out, static_cast<std::uint32_t>(d.width));
  put_u32(out, static_cast<std::uint32_t>(d.height));
  for (float f : d.depth) put_f32(out, f);
  return out;
}

DepthImage decode_depth(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  Reader r(bytes, source);
  r.magic("VVDM");
  auto w = r.u32();
  auto h = r.u32();
  auto n = checked_product({w, h}, source);
  if (w > std::uint32_t(std::numeric_limits<int>::max()) ||
      h > std::uint32_t(std::numeric_limits<int>::max())) {
    throw DimOverflow(source + ": dimensions too large");
  }
  r.need(n * 4);
  DepthImage d(static_cast<int>(w), static_cast<int>(h));
  for (auto& f : d.depth) {
    f = r.f32();
    if (!std::isfinite(f) || f < 0.0f) throw ParseError(source + ": invalid depth value");
  }
  r.finish();
  return d;
}

std::vector<std::uint8_t> encode_volume(const LabelVolume& v) {
  std::vector<std::uint8_t> out{'V', 'V', 'V', 'L'};
  const auto n = static_cast<std::size_t>(v.count());
  out.reserve(16 + 2 * n);
  for (int a = 0; a < 3; ++a) put_u32(out, static_cast<std::uint32_t>(v.dims[a]));
  for (const auto* field : {&v.label, &v.mask}) {
    for (int z = 0; z < v.dims[2]; ++z)
      for (int y = 0; y < v.dims[1]; ++y)
        for (int x = 0; x < v.dims[0]; ++x) out.push_back((*field)[v.linear(x, y, z)]);
  }
  return out;
}

LabelVolume decode_volume(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  Reader r(bytes, source);
  r.magic("VVVL");
  auto X = r.u32(), Y = r.u32(), Z = r.u32();
  auto n = checked_product({X, Y, Z}, source);
  r.need(2 * n);
  LabelVolume v({static_cast<int>(X), static_cast<int>(Y), static_cast<int>(Z)});
  for (auto* field : {&v.label, &v.mask}) {
    for (int z = 0; z < v.dims[2]; ++z)
      for (int y = 0; y < v.dims[1]; ++y)
        for (int x = 0; x < v.dims[0]; ++x) (*field)[v.linear(x, y, z)] = r.u8();
  }
  for (auto m : v.mask) {
    if (m > 5) throw ParseError(source + ": mask code " + std::to_string(m) + " out of range");
  }
  r.finish();
  return v;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

void write_depth(const std::string& path, const DepthImage& d) {
  write_file(path, encode_depth(d));
}

DepthImage read_depth(const std::string& path) { return decode_depth(read_file(path), path); }

void write_volume(const std::string& path, const LabelVolume& v) {
  write_file(path, encode_volume(v));
}

LabelVolume read_volume(const std::string& path) { return decode_volume(read_file(path), path); }

std::string scene_stem(const std::string& dir, int id) {
  char name[32];
  std::snprintf(name, sizeof name, "scene_%05d", id);
  return (std::filesystem::path(dir) / name).string();
}

void write_scene(const std::string& dir, const SceneRecord& scene) {
  auto stem = scene_stem(dir, scene.id);
  write_depth(stem + ".vvd", scene.depth);
  write_volume(stem + ".vvl", scene.volume);
  write_camera_grid(stem + ".cam", scene.camera);
}

SceneRecord read_scene(const std::string& dir, int id) {
  auto stem = scene_stem(dir, id);
  SceneRecord s;
  s.id = id;
  s.depth = read_depth(stem + ".vvd");
  s.volume = read_volume(stem + ".vvl");
  s.camera = read_camera_grid(stem + ".cam");
  if (s.volume.dims != s.camera.grid.dims) {
    throw ParseError(stem + ": volume dims disagree with .cam grid");
  }
  return s;
}

void write_manifest(const std::string& dir, const std::vector<int>& ids) {
  std::string text;
  char line[32];
  for (int id : ids) {
    std::snprintf(line, sizeof line, "%05d\n", id);
    text += line;
  }
  write_file((std::filesystem::path(dir) / "manifest.txt").string(),
             std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<int> read_manifest(const std::string& dir) {
  auto path = (std::filesystem::path(dir) / "manifest.txt").string();
  auto bytes = read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<int> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    try {
      std::size_t used = 0;
      int id = std::stoi(line, &used);
      if (id < 0 || line.find_first_not_of(" \r", used) != std::string::npos) throw 0;
      ids.push_back(id);
    } catch (...) {
      throw ParseError(path + ": bad scene id '" + line + "'");
    }
  }
  return ids;
}

std::uint64_t scene_seed(std::uint64_t dataset_seed, int id) {
  // splitmix64 of the pair
  std::uint64_t z = dataset_seed * 0x9E3779B97F4A7C15ULL + std::uint64_t(id) + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SceneRecord make_scene(const DatasetOptions& opt, int id) {
  const auto seed = scene_seed(opt.seed, id);
  SceneSpec spec = gen_scene(seed, opt.layout);
  SceneRecord rec;
  rec.id = id;
  rec.depth = render_depth(spec, opt.camera, opt.width, opt.height,
                           {opt.noise_sigma, seed ^ 0xD1B54A32D192ED03ULL});
  auto labels = voxelize_labels(spec, opt.layout.grid);
  rec.volume = classify_visibility(labels, rec.depth, opt.camera, opt.layout.grid, spec.room);
  rec.camera = {opt.camera, opt.layout.grid};
  return rec;
}

void generate_dataset(const std::string& dir, const DatasetOptions& opt) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir);
  std::vector<int> ids;
  for (int i = 0; i < opt.count; ++i) {
    write_scene(dir, make_scene(opt, i));
    ids.push_back(i);
  }
  write_manifest(dir, ids);
}

std::vector<SceneRecord> load_dataset(const std::string& dir) {
  std::vector<SceneRecord> scenes;
  for (int id : read_manifest(dir)) scenes.push_back(read_scene(dir, id));
  return scenes;
}

}  // namespace vvnet
