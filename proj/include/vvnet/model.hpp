#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vvnet/geometry.hpp"
#include "vvnet/layers.hpp"
#include "vvnet/projection.hpp"
#include "vvnet/tensor.hpp"

namespace vvnet {

/// Network variants. The number is the projected feature-volume resolution
/// of the full-size model; the R variants use the pooled backbone.
enum class Variant : std::uint8_t {
  kVVNet120 = 0,
  kVVNetR120 = 1,
  kVVNetR60 = 2,
  kVVNetR30 = 3,
};

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);
bool uses_pooled_backbone(Variant v);
// 2D pooling stages before projection: 1, 2 or 3.
int view_stages(Variant v);
// Projected grid voxel size relative to the label grid: 0.5, 1 or 2.
double projection_voxel_scale(Variant v);

inline constexpr int kInputChannels = 4;  // depth + normal xyz

struct ModelConfig {
  int depth_width = 80;
  int depth_height = 60;
  VoxelGrid label_grid;  // output resolution
  int num_classes = 4;   // N object classes; the network emits N + 1
  int base_channels = 8;

  void validate() const;
  VoxelGrid projection_grid(Variant v) const;

  // 80x60 depth, 10x6x10 labels over a 4 x 2.4 x 4 m volume, N=4, C0=8.
  static ModelConfig desk();
  // 16x12 depth, 4x2x4 labels, N=2, C0=2.
  static ModelConfig tiny();
  // 640x480 depth, 60x36x60 labels; for cost accounting.
  static ModelConfig full_size();
};

enum class LayerKind {
  kInput,
  kConv,
  kBatchNorm,
  kRelu,
  kMaxPool,
  kResBlock,
  kUpsample,
  kProject,
  kDeconv,
  kConcat,
};

std::string_view layer_kind_name(LayerKind k);

struct Layer {
  LayerKind kind = LayerKind::kInput;
  std::string name;
  std::vector<int> inputs;
  Shape out_shape;
  int param = -1;  // index into Network::convs / norms / blocks
};

/// Layer DAG plus parameter storage. Layers are stored in execution order.
class Network {
 public:
  int input(Shape shape);
  int conv(int from, int out_channels, int kernel, int stride, int padding, int dilation,
           Rng& rng, std::string name);
  int deconv(int from, int out_channels, int kernel, int stride, int padding, Rng& rng,
             std::string name);
  int batch_norm(int from, std::string name);
  int relu(int from);
  int max_pool(int from);
  int resblock(int from, int dilation, Rng& rng, std::string name);
  int upsample(int from, int height, int width);
  int project(int from, const VoxelGrid& grid);
  int concat(std::vector<int> from);
  void set_output(int id) { output_ = id; }

  const std::vector<Layer>& layers() const { return layers_; }
  int output() const { return output_; }
  const Layer& layer(int id) const { return layers_.at(id); }

  struct RunOptions {
    bool training = true;
    const ProjectionTable* table = nullptr;  // needed by projection layers
  };
  Tensor run(const Tensor& input, const RunOptions& opt);

  // Named parameters and buffers in a fixed order.
  std::vector<NamedTensor> state();
  std::vector<Tensor> parameters();

  std::vector<ConvParams> convs;
  std::vector<BatchNormParams> norms;
  std::vector<ResBlockParams> blocks;

 private:
  int push(Layer l);
  int spatial_rank(int id) const { return static_cast<int>(layers_.at(id).out_shape.size()) - 1; }

  std::vector<Layer> layers_;
  int output_ = -1;
};

struct ModelSpec {
  Variant variant = Variant::kVVNetR120;
  ModelConfig config;
  VoxelGrid projection_grid;
  Network net;
  int view_output = -1;  // last 2D layer before upsampling

  Shape output_shape() const;
};

ModelSpec build(Variant variant, const ModelConfig& cfg, std::uint64_t seed = 0);

enum class InputMode { kDepthNormal, kDepthOnly };

/// Network input [4, H, W]: depth, then normal xyz (zero in depth-only mode).
Tensor make_input(const DepthImage& depth, const NormalMap& normals, InputMode mode);

Tensor forward(ModelSpec& m, const Tensor& input, const ProjectionTable& table, bool training);
Tensor forward(ModelSpec& m, const DepthImage& depth, const NormalMap& normals,
               const CameraIntrinsics& k, bool training = false);

struct ReceptiveField {
  std::array<double, 3> volume{1, 1, 1};  // in projected-volume voxels
  std::array<double, 2> view{1, 1};       // in input pixels (rows, cols)
};

/// Analytic receptive field of one output unit, accumulated through kernel
/// extents, strides and dilations. The volume part starts at the first 3D
/// layer (projection or a 3D input).
ReceptiveField receptive_field(const Network& net);
ReceptiveField receptive_field(const ModelSpec& m);

struct Cost {
  std::int64_t macs = 0;              // conv and deconv multiply-accumulates
  std::int64_t peak_activation = 0;   // floats retained for the backward pass
  std::int64_t params = 0;            // trainable scalars
};

Cost count_cost(const Network& net);
Cost count_cost(const ModelSpec& m);

// Checkpoint: "VVCK", u32 version, u8 variant, then records
// [u32 name length, name, u32 rank, u32 dims..., f32 payload], all LE.
inline constexpr std::uint32_t kCheckpointVersion = 1;

// The first record, "config", holds [depth_width, depth_height, grid_x,
// grid_y, grid_z, num_classes, base_channels, depth_only]. Grid placement is
// not stored; it comes from the dataset's camera/grid file.
struct CheckpointHeader {
  Variant variant = Variant::kVVNetR120;
  int depth_width = 0;
  int depth_height = 0;
  std::array<int, 3> grid_dims{0, 0, 0};
  int num_classes = 0;
  int base_channels = 0;
  InputMode mode = InputMode::kDepthNormal;

  // Config for `label_grid`, checked against the stored dims.
  ModelConfig config_for(const VoxelGrid& label_grid) const;
};

std::vector<std::uint8_t> encode_checkpoint(ModelSpec& m, InputMode mode);
void save_checkpoint(const std::string& path, ModelSpec& m, InputMode mode);
CheckpointHeader decode_checkpoint_header(const std::vector<std::uint8_t>& bytes,
                                          const std::string& source);
// Loads into an already built model; rejects variant, name or shape mismatches.
void load_checkpoint_into(const std::vector<std::uint8_t>& bytes, const std::string& source,
                          ModelSpec& m);
// Rebuilds the model the file describes on `label_grid` and loads it.
ModelSpec load_checkpoint(const std::string& path, const VoxelGrid& label_grid,
                          CheckpointHeader* header = nullptr);

}  // namespace vvnet
