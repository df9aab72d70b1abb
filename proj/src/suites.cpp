#include "vvnet/suites.hpp"

#include <algorithm>

#include "vvnet/error.hpp"
#include "vvnet/layers.hpp"
#include "vvnet/model.hpp"
#include "vvnet/projection.hpp"
#include "vvnet/random.hpp"
#include "vvnet/scene.hpp"

namespace vvnet {

namespace {

constexpr double kLayerTol = 1e-4;
constexpr double kModelTol = 1e-3;

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = true) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Generic scalar readout: sum(y * r) with a fixed random r.
Tensor readout(const Tensor& y, const Tensor& r) { return sum(mul(y, r)); }

GradCheckOptions layer_options(std::uint64_t seed) {
  GradCheckOptions o;
  o.tol = kLayerTol;
  o.seed = seed;
  return o;
}

CheckReport check_conv(int rank, std::uint64_t seed) {
  Rng rng(seed);
  Shape xs = rank == 2 ? Shape{2, 5, 6} : Shape{2, 4, 3, 5};
  Shape ws = rank == 2 ? Shape{3, 2, 3, 3} : Shape{3, 2, 3, 3, 3};
  Tensor x = random_tensor(xs, rng);
  Tensor w = random_tensor(ws, rng, 0.5);
  Tensor b = random_tensor({3}, rng);
  const auto opt = ConvOptions::uniform(rank, 1, 2, 2);
  Tensor r = random_tensor(conv(x, w, b, opt).shape(), rng, 1.0, false);
  std::vector<Tensor> in{x, w, b};
  return grad_check([&] { return readout(conv(x, w, b, opt), r); }, in, layer_options(seed));
}

CheckReport check_deconv3d(std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = random_tensor({3, 2, 3, 2}, rng);
  Tensor w = random_tensor({3, 2, 4, 4, 4}, rng, 0.5);
  Tensor b = random_tensor({2}, rng);
  const auto opt = ConvOptions::uniform(3, 2, 1, 1);
  Tensor r = random_tensor(conv_transpose(x, w, b, opt).shape(), rng, 1.0, false);
  std::vector<Tensor> in{x, w, b};
  return grad_check([&] { return readout(conv_transpose(x, w, b, opt), r); }, in,
                    layer_options(seed));
}

CheckReport check_batch_norm(std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = random_tensor({3, 4, 5}, rng);
  Tensor gamma = random_tensor({3}, rng);
  Tensor beta = random_tensor({3}, rng);
  Tensor r = random_tensor(x.shape(), rng, 1.0, false);
  std::vector<Tensor> in{x, gamma, beta};
  return grad_check(
      [&] {
        // Fresh running stats each call: only the training-mode output is checked.
        Tensor rm = Tensor::zeros({3});
        Tensor rv = Tensor::full({3}, 1.0);
        return readout(batch_norm(x, gamma, beta, rm, rv, true, 1e-5, 0.1), r);
      },
      in, layer_options(seed));
}

CheckReport check_pool(bool max, std::uint64_t seed) {
  Rng rng(seed);
  // Distinct values keep every max-pool window away from ties.
  Shape s{2, 4, 6, 4};
  std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.01 * double(i);
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.next() % i]);
  Tensor x = Tensor::from(s, std::move(v), true);
  Tensor r = random_tensor({2, 2, 3, 2}, rng, 1.0, false);
  std::vector<Tensor> in{x};
  return grad_check([&] { return readout(max ? max_pool2(x) : avg_pool2(x), r); }, in,
                    layer_options(seed));
}

void randomize_biases(std::vector<NamedTensor> state, Rng& rng) {
  for (auto& nt : state) {
    const bool is_bias = nt.name.ends_with(".bias") || nt.name.ends_with(".beta");
    const bool is_gamma = nt.name.ends_with(".gamma");
    if (!is_bias && !is_gamma) continue;
    for (auto& x : nt.tensor.data()) x = is_gamma ? rng.uniform(0.5, 1.5) : 0.2 * rng.normal();
  }
}

CheckReport check_resblock(int dims, std::uint64_t seed) {
  Rng rng(seed);
  ResBlockParams p = make_resblock(dims, 2, dims == 2 ? 1 : 2, rng);
  std::vector<NamedTensor> state;
  collect("block", p, state);
  randomize_biases(state, rng);
  Tensor x = random_tensor(dims == 2 ? Shape{2, 5, 4} : Shape{2, 4, 3, 4}, rng);
  Tensor r = random_tensor(x.shape(), rng, 1.0, false);
  std::vector<Tensor> in{x};
  for (auto& nt : state) {
    if (nt.trainable) in.push_back(nt.tensor);
  }
  return grad_check([&] { return readout(resnet_block(x, p, true), r); }, in,
                    layer_options(seed));
}

CheckReport check_masked_ce(std::uint64_t seed) {
  Rng rng(seed);
  Tensor logits = random_tensor({4, 3, 2, 3}, rng, 2.0);
  std::vector<int> targets(18);
  for (auto& t : targets) t = rng.uniform_int(-1, 3);
  targets[0] = 2;  // never empty
  std::vector<Tensor> in{logits};
  return grad_check([&] { return masked_softmax_ce(logits, targets).loss; }, in,
                    layer_options(seed));
}

// Random depth over a 16x16 raster with some invalid pixels; features at half
// resolution go through upsampling and projection onto an 8^3 grid.
CheckReport check_projection(std::uint64_t seed) {
  Rng rng(seed);
  DepthImage depth(16, 16);
  for (auto& d : depth.depth) d = rng.uniform() < 0.2 ? 0.0f : float(rng.uniform(0.5, 4.0));
  const CameraIntrinsics k = default_intrinsics(16, 16);
  VoxelGrid grid;
  grid.origin = {-2.0, -2.0, 0.0};
  grid.voxel_size = 0.5;
  grid.dims = {8, 8, 8};
  const ProjectionTable table = build_projection_table(depth, k, grid);
  Tensor f = random_tensor({3, 8, 8}, rng);
  Tensor r = random_tensor({3, 8, 8, 8}, rng, 1.0, false);
  std::vector<Tensor> in{f};
  return grad_check([&] { return readout(project(upsample_nn(f, 16, 16), table), r); }, in,
                    layer_options(seed));
}

CheckReport check_model(std::uint64_t seed) {
  Rng rng(seed);
  ModelSpec m = build(Variant::kVVNetR120, ModelConfig::tiny(), seed);
  randomize_biases(m.net.state(), rng);
  const auto& cfg = m.config;
  DepthImage depth(cfg.depth_width, cfg.depth_height);
  for (auto& d : depth.depth) d = rng.uniform() < 0.1 ? 0.0f : float(rng.uniform(0.8, 3.8));
  const CameraIntrinsics k = default_intrinsics(cfg.depth_width, cfg.depth_height);
  const ProjectionTable table = build_projection_table(depth, k, m.projection_grid);
  Tensor input = make_input(depth, compute_normals(depth, k), InputMode::kDepthNormal);
  std::vector<int> targets(static_cast<std::size_t>(cfg.label_grid.count()));
  for (auto& t : targets) t = rng.uniform_int(-1, cfg.num_classes);
  targets[0] = 1;
  std::vector<Tensor> in = m.net.parameters();
  GradCheckOptions o;
  o.tol = kModelTol;
  o.seed = seed;
  // Parameters only: perturbing the input can break max-pool ties between
  // identical empty-voxel responses, where the loss is not differentiable.
  return grad_check(
      [&] { return masked_softmax_ce(forward(m, input, table, true), targets).loss; }, in, o);
}

}  // namespace

std::vector<std::string> layer_suite_names() {
  return {"conv2d",   "conv3d",     "batch_norm", "max_pool",  "avg_pool",
          "deconv3d", "resblock2d", "resblock3d", "masked_ce"};
}

std::vector<std::string> all_suite_names() {
  auto names = layer_suite_names();
  names.push_back("projection");
  names.push_back("model");
  return names;
}

SuiteResult run_suite(const std::string& name, std::uint64_t seed, double tol) {
  SuiteResult r;
  r.name = name;
  r.seed = seed;
  r.tol = name == "model" ? kModelTol : kLayerTol;
  if (name == "conv2d") r.report = check_conv(2, seed);
  else if (name == "conv3d") r.report = check_conv(3, seed);
  else if (name == "batch_norm") r.report = check_batch_norm(seed);
  else if (name == "max_pool") r.report = check_pool(true, seed);
  else if (name == "avg_pool") r.report = check_pool(false, seed);
  else if (name == "deconv3d") r.report = check_deconv3d(seed);
  else if (name == "resblock2d") r.report = check_resblock(2, seed);
  else if (name == "resblock3d") r.report = check_resblock(3, seed);
  else if (name == "masked_ce") r.report = check_masked_ce(seed);
  else if (name == "projection") r.report = check_projection(seed);
  else if (name == "model") r.report = check_model(seed);
  else throw InvalidConfig("unknown gradient suite '" + name + "'");
  if (tol > 0.0) {
    r.tol = tol;
    r.report.passed = r.report.max_rel_error <= tol;
  }
  return r;
}

}  // namespace vvnet
