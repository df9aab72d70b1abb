#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vvnet/geometry.hpp"
#include "vvnet/scene.hpp"

namespace vvnet {

// ".vvd": "VVDM", u32 LE width, u32 LE height, width*height f32 LE depths.
std::vector<std::uint8_t> encode_depth(const DepthImage& d);
DepthImage decode_depth(const std::vector<std::uint8_t>& bytes, const std::string& source);
void write_depth(const std::string& path, const DepthImage& d);
DepthImage read_depth(const std::string& path);

// ".vvl": "VVVL", u32 LE X, Y, Z, X*Y*Z u8 labels, X*Y*Z u8 masks, x fastest.
std::vector<std::uint8_t> encode_volume(const LabelVolume& v);
LabelVolume decode_volume(const std::vector<std::uint8_t>& bytes, const std::string& source);
void write_volume(const std::string& path, const LabelVolume& v);
LabelVolume read_volume(const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

/// One scene of a dataset directory.
struct SceneRecord {
  int id = 0;
  DepthImage depth;
  LabelVolume volume;
  CameraGrid camera;
};

std::string scene_stem(const std::string& dir, int id);  // DIR/scene_%05d
void write_scene(const std::string& dir, const SceneRecord& scene);
SceneRecord read_scene(const std::string& dir, int id);

void write_manifest(const std::string& dir, const std::vector<int>& ids);
std::vector<int> read_manifest(const std::string& dir);

struct DatasetOptions {
  int count = 4;
  std::uint64_t seed = 0;
  int width = 80;
  int height = 60;
  CameraIntrinsics camera = default_intrinsics(80, 60);
  SceneLayout layout = SceneLayout::desk();
  double noise_sigma = 0.0;
};

// Per-scene generator seed derived from the dataset seed.
std::uint64_t scene_seed(std::uint64_t dataset_seed, int id);
SceneRecord make_scene(const DatasetOptions& opt, int id);
void generate_dataset(const std::string& dir, const DatasetOptions& opt);
std::vector<SceneRecord> load_dataset(const std::string& dir);

}  // namespace vvnet
