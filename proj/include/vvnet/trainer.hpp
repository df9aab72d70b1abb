#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vvnet/io.hpp"
#include "vvnet/metrics.hpp"
#include "vvnet/model.hpp"

namespace vvnet {

struct TrainOptions {
  Variant variant = Variant::kVVNetR120;
  int num_classes = 4;
  int base_channels = 8;
  int iterations = 500;
  int batch = 1;  // scenes per step, accumulated
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int lr_decay_at = 0;  // 0 disables the step decay
  double lr_decay_to = 0.001;
  std::uint64_t seed = 0;
  InputMode mode = InputMode::kDepthNormal;
  bool half_res = false;
};

/// Model config implied by a dataset scene and the run options.
ModelConfig model_config_for(const SceneRecord& scene, int num_classes, int base_channels,
                             bool half_res);

/// Everything one forward pass needs, computed once per scene.
struct PreparedScene {
  Tensor input;
  ProjectionTable table;
  std::vector<int> targets;  // label where mask is 1, 2 or 3; -1 elsewhere
  std::int64_t included = 0;
  const SceneRecord* source = nullptr;
};

PreparedScene prepare_scene(const SceneRecord& scene, const ModelSpec& m, InputMode mode,
                            bool half_res);

struct IterationLog {
  int iteration = 0;  // 1-based
  double loss = 0.0;
  double lr = 0.0;
};

/// SGD over the scenes in order, cycling. Calls `on_iteration` after each step.
std::vector<IterationLog> train(ModelSpec& m, const std::vector<PreparedScene>& scenes,
                                const TrainOptions& opt,
                                const std::function<void(const IterationLog&)>& on_iteration = {});

/// Argmax class per voxel in VoxelGrid::linear order (eval mode, no graph).
std::vector<std::uint8_t> predict(ModelSpec& m, const PreparedScene& scene);

/// Micro-aggregated metrics over the scenes.
EvalReport evaluate_model(ModelSpec& m, const std::vector<PreparedScene>& scenes);

}  // namespace vvnet
