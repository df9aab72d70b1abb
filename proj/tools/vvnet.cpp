// vvnet: dataset generation, training, evaluation and diagnostics.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 data/format error,
// 3 check failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vvnet/error.hpp"
#include "vvnet/io.hpp"
#include "vvnet/model.hpp"
#include "vvnet/suites.hpp"
#include "vvnet/trainer.hpp"

namespace {

using namespace vvnet;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheck = 3;

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inserts "--key=value" for every config-file key the command line does not
// already set, so that flags override the file.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::string text;
  {
    auto bytes = read_file(path);
    text.assign(bytes.begin(), bytes.end());
  }
  std::set<std::string> given;
  for (const auto& a : args) {
    if (!a.starts_with("--")) continue;
    given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos
                                                              : a.find('=') - 2));
  }
  for (const auto& [key, value] : parse_key_values(text, path)) {
    if (key == "config") throw ParseError(path + ": config files cannot nest");
    if (!given.contains(key)) args.push_back("--" + key + "=" + value);
  }
  return args;
}

Variant variant_or_throw(const std::string& name) {
  auto v = parse_variant(name);
  if (!v) throw InvalidConfig("unknown variant '" + name + "'");
  return *v;
}

InputMode mode_or_throw(const std::string& name) {
  if (name == "depth+normal") return InputMode::kDepthNormal;
  if (name == "depth") return InputMode::kDepthOnly;
  throw InvalidConfig("input mode must be 'depth' or 'depth+normal', got '" + name + "'");
}

// ---- gen ----

struct GenArgs {
  int scenes = 4;
  std::uint64_t seed = 0;
  std::string out;
  int width = 80;
  int height = 60;
  int num_classes = 4;
  double noise_sigma = 0.0;
};

int cmd_gen(const GenArgs& a) {
  if (a.scenes < 0) throw InvalidConfig("--scenes must be >= 0");
  DatasetOptions opt;
  opt.count = a.scenes;
  opt.seed = a.seed;
  opt.width = a.width;
  opt.height = a.height;
  opt.camera = default_intrinsics(a.width, a.height);
  opt.layout.num_classes = a.num_classes;
  opt.noise_sigma = a.noise_sigma;
  generate_dataset(a.out, opt);
  std::printf("wrote %d scenes to %s\n", a.scenes, a.out.c_str());
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::string out;
  std::string variant = "VVNetR-120";
  std::string input_mode = "depth+normal";
  bool deterministic = false;
  TrainOptions opt;
};

int cmd_train(TrainArgs& a) {
  a.opt.variant = variant_or_throw(a.variant);
  a.opt.mode = mode_or_throw(a.input_mode);
  if (a.opt.iterations < 1 || a.opt.batch < 1 || !(a.opt.lr > 0) || a.opt.base_channels < 1 ||
      a.opt.num_classes < 1 || a.opt.momentum < 0 || a.opt.weight_decay < 0 ||
      a.opt.lr_decay_at < 0 || !(a.opt.lr_decay_to > 0)) {
    throw InvalidConfig("numeric training options must be positive");
  }
  // Everything that can fail on config or data happens before the first step.
  const auto scenes = load_dataset(a.data);
  if (scenes.empty()) throw ParseError(a.data + ": dataset has no scenes");
  ModelConfig cfg =
      model_config_for(scenes[0], a.opt.num_classes, a.opt.base_channels, a.opt.half_res);
  ModelSpec m = build(a.opt.variant, cfg, a.opt.seed);
  std::vector<PreparedScene> prepared;
  for (const auto& s : scenes) prepared.push_back(prepare_scene(s, m, a.opt.mode, a.opt.half_res));

  // Kernels reduce in a fixed order at any thread count, so runs are
  // reproducible with or without --deterministic.
  train(m, prepared, a.opt, [](const IterationLog& l) {
    std::printf("%d\t%.9g\n", l.iteration, l.loss);
    std::fflush(stdout);
  });
  save_checkpoint(a.out, m, a.opt.mode);
  return 0;
}

// ---- eval / export ----

struct LoadedModel {
  ModelSpec model;
  CheckpointHeader header;
  bool half_res = false;
};

LoadedModel load_for(const std::string& ckpt, const SceneRecord& scene) {
  LoadedModel lm;
  lm.model = load_checkpoint(ckpt, scene.camera.grid, &lm.header);
  if (scene.depth.width == lm.header.depth_width &&
      scene.depth.height == lm.header.depth_height) {
    lm.half_res = false;
  } else if (scene.depth.width == 2 * lm.header.depth_width &&
             scene.depth.height == 2 * lm.header.depth_height) {
    lm.half_res = true;
  } else {
    throw ShapeMismatch(ckpt + ": model input " + std::to_string(lm.header.depth_width) + "x" +
                        std::to_string(lm.header.depth_height) + " does not fit scene depth " +
                        std::to_string(scene.depth.width) + "x" +
                        std::to_string(scene.depth.height));
  }
  return lm;
}

struct EvalArgs {
  std::string data;
  std::string ckpt;
  std::string variant;  // optional expectation
};

int cmd_eval(const EvalArgs& a) {
  const auto scenes = load_dataset(a.data);
  if (scenes.empty()) throw EmptyEvalDomain(a.data + ": dataset has no scenes");
  LoadedModel lm = load_for(a.ckpt, scenes[0]);
  if (!a.variant.empty() && variant_or_throw(a.variant) != lm.model.variant) {
    throw VariantMismatch(a.ckpt + " holds " + std::string(variant_name(lm.model.variant)) +
                          ", expected " + a.variant);
  }
  std::vector<PreparedScene> prepared;
  for (const auto& s : scenes) {
    prepared.push_back(prepare_scene(s, lm.model, lm.header.mode, lm.half_res));
  }
  std::printf("%s", format_report(evaluate_model(lm.model, prepared)).c_str());
  return 0;
}

struct ExportArgs {
  std::string data;
  std::string ckpt;
  int scene = 0;
  std::string out;
};

int cmd_export(const ExportArgs& a) {
  const SceneRecord scene = read_scene(a.data, a.scene);
  LoadedModel lm = load_for(a.ckpt, scene);
  const PreparedScene p = prepare_scene(scene, lm.model, lm.header.mode, lm.half_res);
  LabelVolume out = scene.volume;
  out.label = predict(lm.model, p);
  write_volume(a.out, out);
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

// ---- gradcheck ----

struct GradcheckArgs {
  std::vector<std::string> suites;
  int seeds = 5;
  double tol = 0.0;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  auto names = a.suites.empty() ? all_suite_names() : a.suites;
  int failures = 0;
  for (const auto& name : names) {
    // The whole-model check is slow; one seed exercises every layer.
    const int seeds = name == "model" ? 1 : a.seeds;
    for (int s = 1; s <= seeds; ++s) {
      SuiteResult r = run_suite(name, static_cast<std::uint64_t>(s), a.tol);
      std::printf("%-11s seed %d  tol %.0e  %s\n", name.c_str(), s, r.tol,
                  r.report.summary().c_str());
      std::fflush(stdout);
      if (!r.report.passed) ++failures;
    }
  }
  if (failures > 0) throw CheckFailed(std::to_string(failures) + " gradient check(s) failed");
  return 0;
}

// ---- cost ----

struct CostArgs {
  std::string variant = "all";
  std::string scale = "full";
  int base_channels = 8;
};

int cmd_cost(const CostArgs& a) {
  ModelConfig cfg;
  if (a.scale == "full") cfg = ModelConfig::full_size();
  else if (a.scale == "desk") cfg = ModelConfig::desk();
  else throw InvalidConfig("--scale must be 'desk' or 'full'");
  cfg.base_channels = a.base_channels;

  std::vector<Variant> variants;
  if (a.variant == "all") {
    variants = {Variant::kVVNetR30, Variant::kVVNetR60, Variant::kVVNetR120, Variant::kVVNet120};
  } else {
    variants = {variant_or_throw(a.variant)};
  }
  std::printf("variant\tmacs\tpeak_activation\tparams\trf_volume\trf_view\n");
  for (Variant v : variants) {
    ModelSpec m;
    try {
      m = build(v, cfg);
    } catch (const InvalidConfig& e) {
      if (variants.size() == 1) throw;
      std::fprintf(stderr, "%s: %s\n", std::string(variant_name(v)).c_str(), e.what());
      continue;
    }
    const Cost c = count_cost(m);
    const ReceptiveField rf = receptive_field(m);
    std::printf("%s\t%lld\t%lld\t%lld\t%gx%gx%g\t%gx%g\n", std::string(variant_name(v)).c_str(),
                static_cast<long long>(c.macs), static_cast<long long>(c.peak_activation),
                static_cast<long long>(c.params), rf.volume[0], rf.volume[1], rf.volume[2],
                rf.view[0], rf.view[1]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VVNet semantic scene completion on synthetic scenes", "vvnet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  std::string config_path;
  const char* config_help = "key=value file; command-line flags take precedence";

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset");
  g->add_option("--scenes", gen.scenes, "Number of scenes")->capture_default_str();
  g->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--width", gen.width, "Depth width")->capture_default_str();
  g->add_option("--height", gen.height, "Depth height")->capture_default_str();
  g->add_option("--num-classes", gen.num_classes, "Object classes N")->capture_default_str();
  g->add_option("--noise-sigma", gen.noise_sigma, "Depth noise (m)")->capture_default_str();
  g->add_option("--config", config_path, config_help);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--variant", tr.variant, "VVNet-120, VVNetR-120, VVNetR-60 or VVNetR-30")
      ->capture_default_str();
  t->add_option("--iters", tr.opt.iterations, "SGD iterations")->capture_default_str();
  t->add_option("--batch", tr.opt.batch, "Scenes per step")->capture_default_str();
  t->add_option("--lr", tr.opt.lr, "Learning rate")->capture_default_str();
  t->add_option("--lr-decay-at", tr.opt.lr_decay_at, "Iteration after which the lr drops (0: never)")
      ->capture_default_str();
  t->add_option("--lr-decay-to", tr.opt.lr_decay_to, "Learning rate after the drop")
      ->capture_default_str();
  t->add_option("--momentum", tr.opt.momentum, "SGD momentum")->capture_default_str();
  t->add_option("--weight-decay", tr.opt.weight_decay, "L2 weight decay")->capture_default_str();
  t->add_option("--seed", tr.opt.seed, "Initialisation seed")->capture_default_str();
  t->add_option("--num-classes", tr.opt.num_classes, "Object classes N")->capture_default_str();
  t->add_option("--base-channels", tr.opt.base_channels, "Stem width C0")->capture_default_str();
  t->add_option("--input-mode", tr.input_mode, "depth+normal or depth")->capture_default_str();
  t->add_flag("--half-res", tr.opt.half_res, "Train on 2x downsampled depth");
  t->add_flag("--deterministic", tr.deterministic, "Bitwise reproducible run");
  t->add_option("--config", config_path, config_help);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--ckpt", ev.ckpt, "Checkpoint path")->required();
  e->add_option("--variant", ev.variant, "Fail unless the checkpoint holds this variant");
  e->add_flag("--deterministic", "Accepted for symmetry; evaluation is always deterministic");
  e->add_option("--config", config_path, config_help);

  GradcheckArgs gc;
  auto* c = app.add_subcommand("gradcheck", "Run the finite-difference gradient suites");
  c->add_option("--suite", gc.suites, "Suite name (repeatable; default all)");
  c->add_option("--seeds", gc.seeds, "Seeds per layer suite")->capture_default_str();
  c->add_option("--tol", gc.tol, "Override the suite tolerance (0: suite default)")
      ->check(CLI::NonNegativeNumber);
  c->add_option("--config", config_path, config_help);

  CostArgs co;
  auto* k = app.add_subcommand("cost", "Report MACs, activations and receptive fields");
  k->add_option("--variant", co.variant, "Variant name or 'all'")->capture_default_str();
  k->add_option("--scale", co.scale, "full (640x480 / 60x36x60) or desk")->capture_default_str();
  k->add_option("--base-channels", co.base_channels, "Stem width C0")->capture_default_str();
  k->add_option("--config", config_path, config_help);

  ExportArgs ex;
  auto* x = app.add_subcommand("export", "Write a predicted label volume");
  x->add_option("--data", ex.data, "Dataset directory")->required();
  x->add_option("--ckpt", ex.ckpt, "Checkpoint path")->required();
  x->add_option("--scene", ex.scene, "Scene id")->required();
  x->add_option("--out", ex.out, "Output .vvl path")->required();
  x->add_option("--config", config_path, config_help);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  } catch (const vvnet::InvalidConfig& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const vvnet::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*c) return cmd_gradcheck(gc);
    if (*k) return cmd_cost(co);
    if (*x) return cmd_export(ex);
  } catch (const CheckFailed& err) {
    std::cerr << "check failed: " << err.what() << "\n";
    return kExitCheck;
  } catch (const vvnet::InvalidConfig& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const vvnet::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
