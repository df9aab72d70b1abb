#include "vvnet/model.hpp"

#include <algorithm>
#include <cmath>

#include "binary.hpp"
#include "vvnet/error.hpp"
#include "vvnet/io.hpp"

namespace vvnet {

namespace {

using detail::put_f32;
using detail::put_u32;
using detail::Reader;

constexpr char kCheckpointMagic[] = "VVCK";
constexpr int kConfigFields = 8;

Shape spatial(const Shape& s) { return Shape(s.begin() + 1, s.end()); }

Shape with_channels(std::int64_t c, const Shape& sp) {
  Shape s{c};
  s.insert(s.end(), sp.begin(), sp.end());
  return s;
}

std::int64_t conv_extent(std::int64_t n, int k, int s, int p, int d) {
  std::int64_t span = n + 2 * p - std::int64_t{d} * (k - 1) - 1;
  if (span < 0) return 0;
  return span / s + 1;
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kVVNet120: return "VVNet-120";
    case Variant::kVVNetR120: return "VVNetR-120";
    case Variant::kVVNetR60: return "VVNetR-60";
    case Variant::kVVNetR30: return "VVNetR-30";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (auto v : {Variant::kVVNet120, Variant::kVVNetR120, Variant::kVVNetR60, Variant::kVVNetR30}) {
    if (variant_name(v) == name) return v;
  }
  return std::nullopt;
}

bool uses_pooled_backbone(Variant v) { return v != Variant::kVVNet120; }

int view_stages(Variant v) {
  switch (v) {
    case Variant::kVVNetR60: return 2;
    case Variant::kVVNetR30: return 3;
    default: return 1;
  }
}

double projection_voxel_scale(Variant v) {
  switch (v) {
    case Variant::kVVNetR60: return 1.0;
    case Variant::kVVNetR30: return 2.0;
    default: return 0.5;
  }
}

void ModelConfig::validate() const {
  if (depth_width < 1 || depth_height < 1) throw InvalidConfig("depth resolution must be positive");
  if (num_classes < 1) throw InvalidConfig("num_classes must be >= 1");
  if (base_channels < 1) throw InvalidConfig("base_channels must be >= 1");
  label_grid.validate();
}

VoxelGrid ModelConfig::projection_grid(Variant v) const {
  return label_grid.rescaled(projection_voxel_scale(v));
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.depth_width = 80;
  c.depth_height = 60;
  c.label_grid.origin = {-2.0, -1.2, 0.0};
  c.label_grid.voxel_size = 0.4;
  c.label_grid.dims = {10, 6, 10};
  c.num_classes = 4;
  c.base_channels = 8;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.depth_width = 16;
  c.depth_height = 12;
  c.label_grid.origin = {-2.0, -1.0, 0.0};
  c.label_grid.voxel_size = 1.0;
  c.label_grid.dims = {4, 2, 4};
  c.num_classes = 2;
  c.base_channels = 2;
  return c;
}

ModelConfig ModelConfig::full_size() {
  ModelConfig c;
  c.depth_width = 640;
  c.depth_height = 480;
  c.label_grid.origin = {-2.4, -1.44, 0.0};
  c.label_grid.voxel_size = 0.08;
  c.label_grid.dims = {60, 36, 60};
  c.num_classes = 11;
  c.base_channels = 8;
  return c;
}

std::string_view layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kInput: return "input";
    case LayerKind::kConv: return "conv";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "max_pool";
    case LayerKind::kResBlock: return "resblock";
    case LayerKind::kUpsample: return "upsample";
    case LayerKind::kProject: return "project";
    case LayerKind::kDeconv: return "deconv";
    case LayerKind::kConcat: return "concat";
  }
  return "?";
}

// ---- Network builder ----

int Network::push(Layer l) {
  for (auto& s : l.out_shape) {
    if (s < 1) {
      throw InvalidConfig("layer '" + l.name + "' has empty output " + shape_str(l.out_shape));
    }
  }
  layers_.push_back(std::move(l));
  output_ = static_cast<int>(layers_.size()) - 1;
  return output_;
}

int Network::input(Shape shape) {
  if (shape.size() != 3 && shape.size() != 4) {
    throw InvalidConfig("input must be [C,H,W] or [C,X,Y,Z], got " + shape_str(shape));
  }
  return push({LayerKind::kInput, "input", {}, std::move(shape), -1});
}

int Network::conv(int from, int out_channels, int kernel, int stride, int padding,
                  int dilation, Rng& rng, std::string name) {
  const Shape& in = layer(from).out_shape;
  const int rank = spatial_rank(from);
  Shape out{out_channels};
  for (int a = 0; a < rank; ++a) {
    out.push_back(conv_extent(in[a + 1], kernel, stride, padding, dilation));
  }
  convs.push_back(make_conv(rank, static_cast<int>(in[0]), out_channels, kernel, stride, padding,
                            dilation, rng));
  return push({LayerKind::kConv, std::move(name), {from}, std::move(out),
               static_cast<int>(convs.size()) - 1});
}

int Network::deconv(int from, int out_channels, int kernel, int stride, int padding, Rng& rng,
                    std::string name) {
  const Shape& in = layer(from).out_shape;
  const int rank = spatial_rank(from);
  Shape out{out_channels};
  for (int a = 0; a < rank; ++a) {
    out.push_back((in[a + 1] - 1) * stride - 2 * padding + kernel);
  }
  convs.push_back(
      make_deconv(rank, static_cast<int>(in[0]), out_channels, kernel, stride, padding, rng));
  return push({LayerKind::kDeconv, std::move(name), {from}, std::move(out),
               static_cast<int>(convs.size()) - 1});
}

int Network::batch_norm(int from, std::string name) {
  norms.push_back(make_batch_norm(static_cast<int>(layer(from).out_shape[0])));
  return push({LayerKind::kBatchNorm, std::move(name), {from}, layer(from).out_shape,
               static_cast<int>(norms.size()) - 1});
}

int Network::relu(int from) {
  return push({LayerKind::kRelu, "relu" + std::to_string(layers_.size()), {from},
               layer(from).out_shape, -1});
}

int Network::max_pool(int from) {
  Shape out = layer(from).out_shape;
  for (std::size_t a = 1; a < out.size(); ++a) {
    if (out[a] % 2 != 0) {
      throw InvalidConfig("max_pool on odd extent " + shape_str(layer(from).out_shape));
    }
    out[a] /= 2;
  }
  return push({LayerKind::kMaxPool, "pool" + std::to_string(layers_.size()), {from},
               std::move(out), -1});
}

int Network::resblock(int from, int dilation, Rng& rng, std::string name) {
  const int rank = spatial_rank(from);
  blocks.push_back(
      make_resblock(rank, static_cast<int>(layer(from).out_shape[0]), dilation, rng));
  return push({LayerKind::kResBlock, std::move(name), {from}, layer(from).out_shape,
               static_cast<int>(blocks.size()) - 1});
}

int Network::upsample(int from, int height, int width) {
  const Shape& in = layer(from).out_shape;
  if (in.size() != 3) throw InvalidConfig("upsample expects a 2D feature stack");
  if (height % in[1] != 0 || width % in[2] != 0 || height / in[1] != width / in[2]) {
    throw InvalidConfig("cannot upsample " + shape_str(in) + " to " + std::to_string(height) +
                        "x" + std::to_string(width) + " by an integer factor");
  }
  return push({LayerKind::kUpsample, "upsample" + std::to_string(layers_.size()), {from},
               Shape{in[0], height, width}, -1});
}

int Network::project(int from, const VoxelGrid& grid) {
  const Shape& in = layer(from).out_shape;
  if (in.size() != 3) throw InvalidConfig("project expects a 2D feature stack");
  return push({LayerKind::kProject, "project", {from},
               Shape{in[0], grid.dims[0], grid.dims[1], grid.dims[2]}, -1});
}

int Network::concat(std::vector<int> from) {
  if (from.empty()) throw InvalidConfig("concat of nothing");
  const Shape sp = spatial(layer(from[0]).out_shape);
  std::int64_t channels = 0;
  for (int id : from) {
    if (spatial(layer(id).out_shape) != sp) {
      throw InvalidConfig("concat of mismatched extents " + shape_str(layer(from[0]).out_shape) +
                          " and " + shape_str(layer(id).out_shape));
    }
    channels += layer(id).out_shape[0];
  }
  return push({LayerKind::kConcat, "concat" + std::to_string(layers_.size()), std::move(from),
               with_channels(channels, sp), -1});
}

Tensor Network::run(const Tensor& input, const RunOptions& opt) {
  if (layers_.empty()) return input;
  std::vector<Tensor> v(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    auto arg = [&](int k) -> const Tensor& { return v[l.inputs[k]]; };
    switch (l.kind) {
      case LayerKind::kInput:
        if (input.shape() != l.out_shape) {
          throw ShapeMismatch("network input " + shape_str(input.shape()) + ", expected " +
                              shape_str(l.out_shape));
        }
        v[i] = input;
        break;
      case LayerKind::kConv: v[i] = vvnet::conv(arg(0), convs[l.param]); break;
      case LayerKind::kDeconv: v[i] = vvnet::deconv(arg(0), convs[l.param]); break;
      case LayerKind::kBatchNorm:
        v[i] = vvnet::batch_norm(arg(0), norms[l.param], opt.training);
        break;
      case LayerKind::kRelu: v[i] = vvnet::relu(arg(0)); break;
      case LayerKind::kMaxPool: v[i] = max_pool2(arg(0)); break;
      case LayerKind::kResBlock: v[i] = resnet_block(arg(0), blocks[l.param], opt.training); break;
      case LayerKind::kUpsample:
        v[i] = upsample_nn(arg(0), static_cast<int>(l.out_shape[1]),
                           static_cast<int>(l.out_shape[2]));
        break;
      case LayerKind::kProject:
        if (opt.table == nullptr) throw TableMismatch("projection layer run without a table");
        if (opt.table->grid.dims != std::array<int, 3>{static_cast<int>(l.out_shape[1]),
                                                       static_cast<int>(l.out_shape[2]),
                                                       static_cast<int>(l.out_shape[3])}) {
          throw TableMismatch("projection table grid does not match the network");
        }
        v[i] = vvnet::project(arg(0), *opt.table);
        break;
      case LayerKind::kConcat: {
        std::vector<Tensor> parts;
        for (int id : l.inputs) parts.push_back(v[id]);
        v[i] = vvnet::concat(std::span<const Tensor>(parts));
        break;
      }
    }
  }
  return v[output_];
}

std::vector<NamedTensor> Network::state() {
  std::vector<NamedTensor> out;
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerKind::kConv:
      case LayerKind::kDeconv: collect(l.name, convs[l.param], out); break;
      case LayerKind::kBatchNorm: collect(l.name, norms[l.param], out); break;
      case LayerKind::kResBlock: collect(l.name, blocks[l.param], out); break;
      default: break;
    }
  }
  return out;
}

std::vector<Tensor> Network::parameters() {
  std::vector<Tensor> out;
  for (auto& nt : state()) {
    if (nt.trainable) out.push_back(nt.tensor);
  }
  return out;
}

// ---- Architecture ----

Shape ModelSpec::output_shape() const { return net.layer(net.output()).out_shape; }

namespace {

// SSCNet-style trunk: two dilated blocks, dense concat, 1x1 fusion.
int trunk(Network& n, int x, int channels, Rng& rng, const std::string& prefix) {
  int b1 = n.resblock(x, 2, rng, prefix + ".block0");
  int b2 = n.resblock(b1, 2, rng, prefix + ".block1");
  int cat = n.concat({x, b1, b2});
  int h = n.conv(cat, channels, 1, 1, 0, 1, rng, prefix + ".fuse");
  return n.relu(h);
}

}  // namespace

ModelSpec build(Variant variant, const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelSpec m;
  m.variant = variant;
  m.config = cfg;
  m.projection_grid = cfg.projection_grid(variant);
  Rng rng(seed);
  Network& n = m.net;

  int c = cfg.base_channels;
  int x = n.input({kInputChannels, cfg.depth_height, cfg.depth_width});
  x = n.conv(x, c, 3, 1, 1, 1, rng, "view.stem");
  x = n.batch_norm(x, "view.stem_bn");
  x = n.relu(x);
  for (int s = 0; s < view_stages(variant); ++s) {
    const std::string p = "view.stage" + std::to_string(s);
    x = n.resblock(x, 1, rng, p + ".block0");
    x = n.resblock(x, 1, rng, p + ".block1");
    x = n.max_pool(x);
    x = n.conv(x, 2 * c, 3, 1, 1, 1, rng, p + ".widen");
    x = n.batch_norm(x, p + ".widen_bn");
    x = n.relu(x);
    c *= 2;
  }
  m.view_output = x;
  x = n.upsample(x, cfg.depth_height, cfg.depth_width);
  x = n.project(x, m.projection_grid);

  x = n.resblock(x, 1, rng, "volume.front0");
  x = n.resblock(x, 1, rng, "volume.front1");
  if (variant == Variant::kVVNet120 || variant == Variant::kVVNetR120) {
    x = n.max_pool(x);
    x = n.relu(n.conv(x, 2 * c, 3, 1, 1, 1, rng, "volume.down"));
    c *= 2;
  } else if (variant == Variant::kVVNetR30) {
    x = n.relu(n.deconv(x, c / 2, 4, 2, 1, rng, "volume.up"));
    c /= 2;
  }

  if (uses_pooled_backbone(variant)) {
    const int skip = x;
    x = n.max_pool(x);
    x = trunk(n, x, c, rng, "backbone.trunk");
    x = n.relu(n.deconv(x, c, 4, 2, 1, rng, "backbone.up"));
    x = n.concat({skip, x});
    x = n.relu(n.conv(x, c, 3, 1, 1, 1, rng, "backbone.merge"));
  } else {
    x = trunk(n, x, c, rng, "backbone.trunk");
  }
  x = n.conv(x, cfg.num_classes + 1, 1, 1, 0, 1, rng, "head.logits");
  n.set_output(x);

  const Shape expected{cfg.num_classes + 1, cfg.label_grid.dims[0], cfg.label_grid.dims[1],
                       cfg.label_grid.dims[2]};
  if (m.output_shape() != expected) {
    throw InvalidConfig("network emits " + shape_str(m.output_shape()) + ", expected " +
                        shape_str(expected));
  }
  return m;
}

Tensor make_input(const DepthImage& depth, const NormalMap& normals, InputMode mode) {
  const std::int64_t hw = depth.pixels();
  std::vector<double> v(static_cast<std::size_t>(kInputChannels * hw), 0.0);
  for (std::int64_t i = 0; i < hw; ++i) v[i] = depth.depth[i];
  if (mode == InputMode::kDepthNormal) {
    if (normals.width != depth.width || normals.height != depth.height) {
      throw ShapeMismatch("normal map size differs from depth size");
    }
    for (std::int64_t i = 0; i < hw; ++i) {
      v[hw + i] = normals.normal[i].x;
      v[2 * hw + i] = normals.normal[i].y;
      v[3 * hw + i] = normals.normal[i].z;
    }
  }
  return Tensor::from({kInputChannels, depth.height, depth.width}, std::move(v));
}

Tensor forward(ModelSpec& m, const Tensor& input, const ProjectionTable& table, bool training) {
  return m.net.run(input, {training, &table});
}

Tensor forward(ModelSpec& m, const DepthImage& depth, const NormalMap& normals,
               const CameraIntrinsics& k, bool training) {
  if (depth.width != m.config.depth_width || depth.height != m.config.depth_height) {
    throw ShapeMismatch("depth " + std::to_string(depth.width) + "x" +
                        std::to_string(depth.height) + " does not match the model");
  }
  const bool has_normals = normals.width == depth.width && normals.height == depth.height;
  ProjectionTable table = build_projection_table(depth, k, m.projection_grid);
  Tensor in = make_input(depth, normals, has_normals ? InputMode::kDepthNormal
                                                     : InputMode::kDepthOnly);
  return forward(m, in, table, training);
}

// ---- Receptive field ----

ReceptiveField receptive_field(const Network& net) {
  struct State {
    std::array<double, 3> rf{1, 1, 1};
    std::array<double, 3> jump{1, 1, 1};
  };
  const auto& layers = net.layers();
  std::vector<State> st(layers.size());
  ReceptiveField out;
  bool seen_view = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    State s = l.inputs.empty() ? State{} : st[l.inputs[0]];
    const int axes = static_cast<int>(l.out_shape.size()) - 1;
    auto grow = [&](double by_jump_units) {
      for (int a = 0; a < axes; ++a) s.rf[a] += by_jump_units * s.jump[a];
    };
    switch (l.kind) {
      case LayerKind::kInput:
        s = State{};
        seen_view = axes == 2;
        break;
      case LayerKind::kConv: {
        const auto& p = net.convs[l.param];
        const int k = static_cast<int>(p.kernel.shape()[2]);
        grow(double(p.options.dilation[0]) * (k - 1));
        for (int a = 0; a < axes; ++a) s.jump[a] *= p.options.stride[a];
        break;
      }
      case LayerKind::kResBlock: {
        const auto& p = net.blocks[l.param].conv1;
        const int k = static_cast<int>(p.kernel.shape()[2]);
        grow(2.0 * p.options.dilation[0] * (k - 1));
        break;
      }
      case LayerKind::kMaxPool:
        grow(1.0);
        for (int a = 0; a < axes; ++a) s.jump[a] *= 2;
        break;
      case LayerKind::kDeconv: {
        const auto& p = net.convs[l.param];
        const int k = static_cast<int>(p.kernel.shape()[2]);
        const int stride = p.options.stride[0];
        const int taps = (k + stride - 1) / stride;
        grow(taps - 1.0);
        for (int a = 0; a < axes; ++a) s.jump[a] /= stride;
        break;
      }
      case LayerKind::kUpsample: {
        const double f = double(l.out_shape[1]) / layers[l.inputs[0]].out_shape[1];
        for (int a = 0; a < axes; ++a) s.jump[a] /= f;
        break;
      }
      case LayerKind::kProject:
        out.view = {s.rf[0], s.rf[1]};
        seen_view = false;
        s = State{};
        break;
      case LayerKind::kConcat:
        for (int id : l.inputs) {
          for (int a = 0; a < axes; ++a) {
            s.rf[a] = std::max(s.rf[a], st[id].rf[a]);
            s.jump[a] = std::min(s.jump[a], st[id].jump[a]);
          }
        }
        break;
      case LayerKind::kBatchNorm:
      case LayerKind::kRelu: break;
    }
    st[i] = s;
  }
  if (net.output() >= 0) {
    const auto& s = st[net.output()];
    if (seen_view) {
      out.view = {s.rf[0], s.rf[1]};
    } else {
      out.volume = s.rf;
    }
  }
  return out;
}

ReceptiveField receptive_field(const ModelSpec& m) { return receptive_field(m.net); }

// ---- Cost ----

Cost count_cost(const Network& net) {
  Cost c;
  for (const auto& l : net.layers()) {
    const std::int64_t numel = shape_numel(l.out_shape);
    switch (l.kind) {
      case LayerKind::kInput: break;
      case LayerKind::kConv: {
        const auto& k = net.convs[l.param].kernel;
        c.macs += numel * k.shape()[1] * shape_numel(Shape(k.shape().begin() + 2, k.shape().end()));
        c.peak_activation += numel;
        break;
      }
      case LayerKind::kDeconv: {
        const auto& k = net.convs[l.param].kernel;
        const std::int64_t in = shape_numel(net.layer(l.inputs[0]).out_shape);
        c.macs += in * k.shape()[1] * shape_numel(Shape(k.shape().begin() + 2, k.shape().end()));
        c.peak_activation += numel;
        break;
      }
      case LayerKind::kResBlock: {
        const auto& b = net.blocks[l.param];
        const auto& k = b.conv1.kernel;
        const std::int64_t taps = shape_numel(Shape(k.shape().begin() + 2, k.shape().end()));
        c.macs += 2 * numel * k.shape()[1] * taps;
        // conv, [bn], relu, conv, [bn], add, relu
        c.peak_activation += numel * (b.bn1 ? 7 : 5);
        break;
      }
      default: c.peak_activation += numel; break;
    }
  }
  auto& mut = const_cast<Network&>(net);
  for (auto& t : mut.parameters()) c.params += t.numel();
  return c;
}

Cost count_cost(const ModelSpec& m) { return count_cost(m.net); }

// ---- Checkpoint ----

ModelConfig CheckpointHeader::config_for(const VoxelGrid& label_grid) const {
  if (label_grid.dims != grid_dims) {
    throw ShapeMismatch("checkpoint grid " + std::to_string(grid_dims[0]) + "x" +
                        std::to_string(grid_dims[1]) + "x" + std::to_string(grid_dims[2]) +
                        " does not match the dataset grid");
  }
  ModelConfig c;
  c.depth_width = depth_width;
  c.depth_height = depth_height;
  c.label_grid = label_grid;
  c.num_classes = num_classes;
  c.base_channels = base_channels;
  return c;
}

namespace {

void put_record(std::vector<std::uint8_t>& out, const std::string& name, const Shape& shape,
                std::span<const double> values) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : values) put_f32(out, static_cast<float>(v));
}

struct Record {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

Record read_record(Reader& r) {
  Record rec;
  const std::uint32_t len = r.u32();
  if (len > 4096) throw ParseError(r.source() + ": record name too long");
  rec.name = r.bytes(len);
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw ParseError(r.source() + ": record rank " + std::to_string(rank));
  std::uint64_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t d = r.u32();
    if (d == 0) throw DimOverflow(r.source() + ": zero dimension in '" + rec.name + "'");
    n *= d;
    if (n > (std::uint64_t{1} << 31)) throw DimOverflow(r.source() + ": record too large");
    rec.shape.push_back(d);
  }
  r.need(static_cast<std::size_t>(n) * 4);
  rec.values.resize(static_cast<std::size_t>(n));
  for (auto& v : rec.values) v = r.f32();
  return rec;
}

CheckpointHeader read_header(Reader& r) {
  r.magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError(r.source() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint8_t variant = r.u8();
  if (variant > static_cast<std::uint8_t>(Variant::kVVNetR30)) {
    throw ParseError(r.source() + ": unknown variant code " + std::to_string(variant));
  }
  Record cfg = read_record(r);
  if (cfg.name != "config" || cfg.shape != Shape{kConfigFields}) {
    throw ParseError(r.source() + ": missing config record");
  }
  CheckpointHeader h;
  h.variant = static_cast<Variant>(variant);
  auto field = [&](int i) {
    const float f = cfg.values[i];
    if (!(f >= 0.0f && f < 1e7f) || f != std::floor(f)) {
      throw ParseError(r.source() + ": bad config field " + std::to_string(i));
    }
    return static_cast<int>(f);
  };
  h.depth_width = field(0);
  h.depth_height = field(1);
  h.grid_dims = {field(2), field(3), field(4)};
  h.num_classes = field(5);
  h.base_channels = field(6);
  h.mode = field(7) != 0 ? InputMode::kDepthOnly : InputMode::kDepthNormal;
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(ModelSpec& m, InputMode mode) {
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
  put_u32(out, kCheckpointVersion);
  out.push_back(static_cast<std::uint8_t>(m.variant));
  const auto& c = m.config;
  const std::vector<double> cfg{double(c.depth_width),
                                double(c.depth_height),
                                double(c.label_grid.dims[0]),
                                double(c.label_grid.dims[1]),
                                double(c.label_grid.dims[2]),
                                double(c.num_classes),
                                double(c.base_channels),
                                mode == InputMode::kDepthOnly ? 1.0 : 0.0};
  put_record(out, "config", Shape{kConfigFields}, cfg);
  for (auto& nt : m.net.state()) put_record(out, nt.name, nt.tensor.shape(), nt.tensor.data());
  return out;
}

void save_checkpoint(const std::string& path, ModelSpec& m, InputMode mode) {
  write_file(path, encode_checkpoint(m, mode));
}

CheckpointHeader decode_checkpoint_header(const std::vector<std::uint8_t>& bytes,
                                          const std::string& source) {
  Reader r(bytes, source);
  return read_header(r);
}

void load_checkpoint_into(const std::vector<std::uint8_t>& bytes, const std::string& source,
                          ModelSpec& m) {
  Reader r(bytes, source);
  const CheckpointHeader h = read_header(r);
  if (h.variant != m.variant) {
    throw VariantMismatch(source + ": checkpoint holds " + std::string(variant_name(h.variant)) +
                          ", model is " + std::string(variant_name(m.variant)));
  }
  const auto& c = m.config;
  if (h.depth_width != c.depth_width || h.depth_height != c.depth_height ||
      h.grid_dims != c.label_grid.dims || h.num_classes != c.num_classes ||
      h.base_channels != c.base_channels) {
    throw ShapeMismatch(source + ": checkpoint config differs from the model config");
  }
  auto state = m.net.state();
  std::vector<Record> records;
  records.reserve(state.size());
  for (const auto& nt : state) {
    Record rec = read_record(r);
    if (rec.name != nt.name) {
      throw ShapeMismatch(source + ": expected '" + nt.name + "', found '" + rec.name + "'");
    }
    if (rec.shape != nt.tensor.shape()) {
      throw ShapeMismatch(source + ": '" + nt.name + "' has shape " + shape_str(rec.shape) +
                          ", model wants " + shape_str(nt.tensor.shape()));
    }
    records.push_back(std::move(rec));
  }
  r.finish();
  // Only touch the model once the whole file has been validated.
  for (std::size_t i = 0; i < state.size(); ++i) {
    auto dst = state[i].tensor.data();
    std::copy(records[i].values.begin(), records[i].values.end(), dst.begin());
  }
}

ModelSpec load_checkpoint(const std::string& path, const VoxelGrid& label_grid,
                          CheckpointHeader* header) {
  const auto bytes = read_file(path);
  const CheckpointHeader h = decode_checkpoint_header(bytes, path);
  ModelSpec m = build(h.variant, h.config_for(label_grid));
  load_checkpoint_into(bytes, path, m);
  if (header != nullptr) *header = h;
  return m;
}

}  // namespace vvnet
