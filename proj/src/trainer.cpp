#include "vvnet/trainer.hpp"

#include "vvnet/error.hpp"

namespace vvnet {

ModelConfig model_config_for(const SceneRecord& scene, int num_classes, int base_channels,
                             bool half_res) {
  ModelConfig c;
  c.depth_width = half_res ? scene.depth.width / 2 : scene.depth.width;
  c.depth_height = half_res ? scene.depth.height / 2 : scene.depth.height;
  c.label_grid = scene.camera.grid;
  c.num_classes = num_classes;
  c.base_channels = base_channels;
  c.validate();
  return c;
}

PreparedScene prepare_scene(const SceneRecord& scene, const ModelSpec& m, InputMode mode,
                            bool half_res) {
  DepthImage depth = half_res ? downsample_depth(scene.depth, 2) : scene.depth;
  CameraIntrinsics k = half_res ? scene.camera.camera.scaled(0.5) : scene.camera.camera;
  if (depth.width != m.config.depth_width || depth.height != m.config.depth_height) {
    throw ShapeMismatch("scene " + std::to_string(scene.id) + " depth " +
                        std::to_string(depth.width) + "x" + std::to_string(depth.height) +
                        " does not match the model input");
  }
  if (scene.volume.dims != m.config.label_grid.dims) {
    throw ShapeMismatch("scene " + std::to_string(scene.id) + " label grid differs from model");
  }
  PreparedScene p;
  p.source = &scene;
  NormalMap normals;
  if (mode == InputMode::kDepthNormal) normals = compute_normals(depth, k);
  p.input = make_input(depth, normals, mode);
  p.table = build_projection_table(depth, k, m.projection_grid);
  const auto& vol = scene.volume;
  p.targets.assign(vol.label.size(), -1);
  for (std::size_t i = 0; i < vol.label.size(); ++i) {
    const int mask = vol.mask[i];
    if (mask >= 1 && mask <= 3) {
      if (vol.label[i] > m.config.num_classes) {
        throw InvalidConfig("scene " + std::to_string(scene.id) + " has label " +
                            std::to_string(vol.label[i]) + " above num_classes " +
                            std::to_string(m.config.num_classes));
      }
      p.targets[i] = vol.label[i];
      ++p.included;
    }
  }
  return p;
}

std::vector<IterationLog> train(ModelSpec& m, const std::vector<PreparedScene>& scenes,
                                const TrainOptions& opt,
                                const std::function<void(const IterationLog&)>& on_iteration) {
  if (scenes.empty()) throw InvalidConfig("no training scenes");
  if (opt.iterations < 1 || opt.batch < 1) throw InvalidConfig("iterations and batch must be >= 1");
  std::vector<Tensor> params = m.net.parameters();
  SgdState sgd;
  sgd.lr = opt.lr;
  sgd.momentum = opt.momentum;
  sgd.weight_decay = opt.weight_decay;

  std::vector<IterationLog> log;
  std::size_t next = 0;
  for (int it = 1; it <= opt.iterations; ++it) {
    if (opt.lr_decay_at > 0 && it > opt.lr_decay_at) sgd.lr = opt.lr_decay_to;
    zero_grad(params);
    double total = 0.0;
    for (int b = 0; b < opt.batch; ++b) {
      const PreparedScene& s = scenes[next];
      next = (next + 1) % scenes.size();
      Tensor logits = forward(m, s.input, s.table, true);
      MaskedLoss ml = masked_softmax_ce(logits, s.targets);
      if (ml.included != s.included) {
        throw Error("loss counted " + std::to_string(ml.included) + " voxels, mask allows " +
                    std::to_string(s.included));
      }
      total += ml.loss.item();
      backward(opt.batch == 1 ? ml.loss : scale(ml.loss, 1.0 / opt.batch));
    }
    sgd_step(params, sgd);
    IterationLog entry{it, total / opt.batch, sgd.lr};
    log.push_back(entry);
    if (on_iteration) on_iteration(entry);
  }
  return log;
}

std::vector<std::uint8_t> predict(ModelSpec& m, const PreparedScene& scene) {
  NoGradGuard guard;
  Tensor logits = forward(m, scene.input, scene.table, false);
  const std::int64_t k = logits.dim(0);
  const std::int64_t n = logits.numel() / k;
  auto v = logits.data();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < k; ++c) {
      if (v[c * n + i] > v[best * n + i]) best = c;
    }
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

EvalReport evaluate_model(ModelSpec& m, const std::vector<PreparedScene>& scenes) {
  std::vector<EvalReport> reports;
  for (const auto& s : scenes) {
    reports.push_back(evaluate(predict(m, s), s.source->volume, m.config.num_classes));
  }
  return aggregate(reports);
}

}  // namespace vvnet
