// geocloak command-line tool.
//
// Exit codes: 0 success, 1 runtime or metric failure, 2 usage error,
// 3 optimization aborted on a non-finite loss.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geocloak/cloak.hpp"
#include "geocloak/encoder.hpp"
#include "geocloak/metrics.hpp"
#include "geocloak/patterns.hpp"
#include "geocloak/png_io.hpp"
#include "geocloak/render.hpp"
#include "geocloak/report.hpp"
#include "geocloak/scene.hpp"

namespace fs = std::filesystem;
using namespace geocloak;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAborted = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("GEOCLOAK_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("GEOCLOAK_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return 7;
}

encoder::ReferenceEncoder make_encoder(const std::string& weights, std::uint64_t seed) {
  if (!weights.empty()) return encoder::ReferenceEncoder::load(weights);
  return encoder::ReferenceEncoder(seed);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_manifest(const fs::path& output, report::Manifest manifest) {
  report::write_json(report::manifest_path(output), manifest.to_json());
}

struct PatternArgs {
  std::string character;
  std::size_t points = 512;
  std::uint64_t seed = 0;
  std::string input;
  bool normalize = false;
  std::string output;
};

int run_pattern_glyph(const PatternArgs& a) {
  if (a.character.size() != 1) throw UsageError("--char takes exactly one character");
  const auto pattern = patterns::glyph_to_pattern(a.character[0], a.points, a.seed);
  patterns::save_pattern(a.output, pattern);
  write_manifest(a.output, {"pattern glyph",
                            {{"char", a.character}, {"points", a.points}, {"seed", a.seed}},
                            {},
                            {{"pattern", a.output}},
                            {{"pattern", a.seed}}});
  return 0;
}

int run_pattern_file(const PatternArgs& a) {
  const auto pattern = patterns::load_custom_pattern(a.input, a.normalize);
  patterns::save_pattern(a.output, pattern);
  write_manifest(a.output, {"pattern from-file",
                            {{"normalize", a.normalize}, {"points", pattern.size()}},
                            {{"cloud", a.input}},
                            {{"pattern", a.output}},
                            {}});
  return 0;
}

struct CloakArgs {
  std::string image, mask, mode = "targeted", pattern, view, weights, output, report;
  double eps = 8.0, alpha = 0.001;
  std::size_t steps = 100;
  std::uint64_t seed = 7;
};

int run_cloak(const CloakArgs& a) {
  cloak::CloakConfig config;
  try {
    config.mode = cloak::parse_mode(a.mode);
    if (!a.view.empty()) config.view = geometry::ViewDirection::parse(a.view);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  config.epsilon = a.eps;
  config.alpha = a.alpha;
  config.steps = a.steps;
  config.seed = a.seed;
  if (!a.pattern.empty()) config.pattern = patterns::load_pattern(a.pattern);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const auto enc = make_encoder(a.weights, a.seed);
  const Image clean = png::read_image(a.image);
  enc.check_resolution(clean);
  std::optional<Mask> mask;
  if (!a.mask.empty()) mask = png::read_mask(a.mask);

  const auto result = cloak::run(clean, enc, config, mask);
  const Image shipped = cloak::quantize_cloak(clean, result.cloaked, config.epsilon);
  png::write_image(a.output, shipped);

  double final_cd = 0.0;
  if (config.mode == cloak::Mode::Targeted) {
    const auto view = config.view.value_or(geometry::ViewDirection::parse("xy"));
    final_cd = cloak::pattern_distance(enc, shipped, *config.pattern, view);
  } else {
    final_cd = geometry::chamfer_accelerated(enc.encode(shipped), enc.encode(clean));
  }
  std::map<std::string, std::string> outputs{{"image", a.output}};
  if (!a.report.empty()) {
    report::write_json(a.report, report::cloak_report(config, result, final_cd, cloak::linf_distance(shipped, clean)));
    outputs["report"] = a.report;
  }
  std::map<std::string, std::string> inputs{{"image", a.image}};
  if (!a.mask.empty()) inputs["mask"] = a.mask;
  if (!a.pattern.empty()) inputs["pattern"] = a.pattern;
  if (!a.weights.empty()) inputs["weights"] = a.weights;
  write_manifest(a.output, {"cloak", report::cloak_config_json(config), inputs, outputs,
                            {{"encoder", enc.seed()}, {"cloak", config.seed}}});
  return 0;
}

struct ReconArgs {
  std::string image, weights, output, render = "", render_out = ".";
  std::size_t size = render::kDefaultPreviewSize;
  std::uint64_t seed = 7;
};

int run_recon(const ReconArgs& a) {
  std::vector<std::pair<std::string, geometry::ViewDirection>> views;
  try {
    for (const auto& name : split(a.render, ',')) views.emplace_back(name, geometry::ViewDirection::parse(name));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto enc = make_encoder(a.weights, a.seed);
  const Image image = png::read_image(a.image);
  const auto rec = enc.reconstruct(image);
  patterns::write_xyz(a.output, rec.cloud, {"geocloak reconstruction", "seed: " + std::to_string(enc.seed())});

  std::map<std::string, std::string> outputs{{"cloud", a.output}};
  if (!views.empty()) fs::create_directories(a.render_out);
  for (const auto& [name, view] : views) {
    const fs::path out = fs::path(a.render_out) / (name + ".png");
    png::write_image(out, render::render_preview(rec.cloud, rec.attributes, view, a.size));
    outputs["render:" + name] = out.string();
  }
  std::map<std::string, std::string> inputs{{"image", a.image}};
  if (!a.weights.empty()) inputs["weights"] = a.weights;
  write_manifest(a.output, {"recon", {{"render", a.render}, {"size", a.size}}, inputs, outputs,
                            {{"encoder", enc.seed()}}});
  return 0;
}

struct EvalArgs {
  std::string clean, perturbed, weights, output;
  bool distortions = false;
  std::uint64_t seed = 7;
};

int run_eval(const EvalArgs& a) {
  const auto enc = make_encoder(a.weights, a.seed);
  const Image clean = png::read_image(a.clean);
  const Image perturbed = png::read_image(a.perturbed);
  enc.check_resolution(clean);
  enc.check_resolution(perturbed);
  std::vector<metrics::Distortion> menu;
  if (a.distortions) menu = metrics::distortion_menu(a.seed);
  const auto rep = metrics::evaluate(clean, perturbed, enc, menu);
  report::write_json(a.output, metrics::to_json(rep));
  std::map<std::string, std::string> inputs{{"clean", a.clean}, {"perturbed", a.perturbed}};
  if (!a.weights.empty()) inputs["weights"] = a.weights;
  write_manifest(a.output, {"eval", {{"distortions", a.distortions}}, inputs, {{"metrics", a.output}},
                            {{"encoder", enc.seed()}}});
  return 0;
}

struct SceneArgs {
  std::string output, mask_output;
};

int run_scene(const SceneArgs& a) {
  const auto s = scene::bundled_scene();
  png::write_image(a.output, s.image);
  if (!a.mask_output.empty()) png::write_mask(a.mask_output, s.mask);
  return 0;
}

struct CheckArgs {
  std::string clean, cloaked;
  double eps = 8.0;
};

int run_check_budget(const CheckArgs& a) {
  const Image clean = png::read_image(a.clean);
  const Image cloaked = png::read_image(a.cloaked);
  if (!clean.same_shape(cloaked)) {
    std::cerr << "check-budget: image sizes differ\n";
    return kExitRuntime;
  }
  const auto x = png::to_bytes(clean), y = png::to_bytes(cloaked);
  int worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(int(x[i]) - int(y[i])));
  const bool ok = worst <= static_cast<int>(std::floor(a.eps));
  std::cout << "max 8-bit difference " << worst << (ok ? " <= " : " > ") << a.eps << "\n";
  return ok ? 0 : kExitRuntime;
}

struct ExportArgs {
  std::string output;
  std::uint64_t seed = 7;
};

int run_export(const ExportArgs& a) {
  encoder::ReferenceEncoder(a.seed).save(a.output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geocloak: geometry cloaks for single-image 3D reconstruction"};
  app.require_subcommand(1);

  std::uint64_t seed = 7;
  try {
    seed = default_seed();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  PatternArgs pattern_args;
  auto* pattern = app.add_subcommand("pattern", "build a target pattern");
  pattern->require_subcommand(1);
  auto* glyph = pattern->add_subcommand("glyph", "sample a 2D pattern from a glyph");
  glyph->add_option("--char", pattern_args.character, "character (A-Z, 1-9)")->required();
  glyph->add_option("--points", pattern_args.points, "sample count")->check(CLI::PositiveNumber);
  glyph->add_option("--seed", pattern_args.seed, "sampling seed");
  glyph->add_option("-o,--output", pattern_args.output, "output pattern file")->required();
  auto* from_file = pattern->add_subcommand("from-file", "load a 3D pattern from an XYZ file");
  from_file->add_option("cloud", pattern_args.input, "XYZ point file")->required()->check(CLI::ExistingFile);
  from_file->add_flag("--normalize", pattern_args.normalize, "centre and scale into [-0.5, 0.5]^3");
  from_file->add_option("-o,--output", pattern_args.output, "output pattern file")->required();

  CloakArgs cloak_args;
  cloak_args.seed = seed;
  auto* cloak_cmd = app.add_subcommand("cloak", "compute a perturbation and write the cloaked PNG");
  cloak_cmd->add_option("--image", cloak_args.image, "input RGB PNG")->required()->check(CLI::ExistingFile);
  cloak_cmd->add_option("--mask", cloak_args.mask, "foreground mask PNG (>127 is foreground)")
      ->check(CLI::ExistingFile);
  cloak_cmd->add_option("--mode", cloak_args.mode, "targeted | untargeted-geometry | adv-image | gauss-noise");
  cloak_cmd->add_option("--pattern", cloak_args.pattern, "pattern file (targeted mode)")->check(CLI::ExistingFile);
  cloak_cmd->add_option("--view", cloak_args.view, "xy | xz | yz | front | side | top | angle:<deg>");
  cloak_cmd->add_option("--eps", cloak_args.eps, "budget in 8-bit units");
  cloak_cmd->add_option("--alpha", cloak_args.alpha, "step size");
  cloak_cmd->add_option("--steps", cloak_args.steps, "iterations");
  cloak_cmd->add_option("--seed", cloak_args.seed, "encoder and cloak seed (default $GEOCLOAK_SEED or 7)");
  cloak_cmd->add_option("--weights", cloak_args.weights, "encoder weight bundle")->check(CLI::ExistingFile);
  cloak_cmd->add_option("-o,--output", cloak_args.output, "cloaked PNG")->required();
  cloak_cmd->add_option("--report", cloak_args.report, "JSON report");

  ReconArgs recon_args;
  recon_args.seed = seed;
  auto* recon = app.add_subcommand("recon", "reconstruct a point cloud and preview renders");
  recon->add_option("--image", recon_args.image, "input RGB PNG")->required()->check(CLI::ExistingFile);
  recon->add_option("--seed", recon_args.seed, "encoder seed");
  recon->add_option("--weights", recon_args.weights, "encoder weight bundle")->check(CLI::ExistingFile);
  recon->add_option("-o,--output", recon_args.output, "output XYZ cloud")->required();
  recon->add_option("--render", recon_args.render, "comma-separated views, e.g. front,side,top");
  recon->add_option("--render-out", recon_args.render_out, "directory for preview PNGs");
  recon->add_option("--size", recon_args.size, "preview size in pixels")->check(CLI::PositiveNumber);

  EvalArgs eval_args;
  eval_args.seed = seed;
  auto* eval = app.add_subcommand("eval", "compare clean and perturbed reconstructions");
  eval->add_option("--clean", eval_args.clean, "clean PNG")->required()->check(CLI::ExistingFile);
  eval->add_option("--perturbed", eval_args.perturbed, "perturbed PNG")->required()->check(CLI::ExistingFile);
  eval->add_option("--seed", eval_args.seed, "encoder and distortion seed");
  eval->add_option("--weights", eval_args.weights, "encoder weight bundle")->check(CLI::ExistingFile);
  eval->add_flag("--distortions", eval_args.distortions, "add one sub-report per distortion");
  eval->add_option("-o,--output", eval_args.output, "metrics JSON")->required();

  SceneArgs scene_args;
  auto* scene_cmd = app.add_subcommand("scene", "write the bundled synthetic scene");
  scene_cmd->add_option("-o,--output", scene_args.output, "scene PNG")->required();
  scene_cmd->add_option("--mask-out", scene_args.mask_output, "object mask PNG");

  CheckArgs check_args;
  auto* check = app.add_subcommand("check-budget", "verify |cloaked - clean| <= eps on 8-bit values");
  check->add_option("--clean", check_args.clean, "clean PNG")->required()->check(CLI::ExistingFile);
  check->add_option("--cloaked", check_args.cloaked, "cloaked PNG")->required()->check(CLI::ExistingFile);
  check->add_option("--eps", check_args.eps, "budget in 8-bit units");

  ExportArgs export_args;
  export_args.seed = seed;
  auto* export_cmd = app.add_subcommand("export-encoder", "write the seeded encoder's weight bundle");
  export_cmd->add_option("--seed", export_args.seed, "encoder seed");
  export_cmd->add_option("-o,--output", export_args.output, "bundle path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (glyph->parsed()) return run_pattern_glyph(pattern_args);
    if (from_file->parsed()) return run_pattern_file(pattern_args);
    if (cloak_cmd->parsed()) return run_cloak(cloak_args);
    if (recon->parsed()) return run_recon(recon_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (scene_cmd->parsed()) return run_scene(scene_args);
    if (check->parsed()) return run_check_budget(check_args);
    if (export_cmd->parsed()) return run_export(export_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cloak::OptimizationAborted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
