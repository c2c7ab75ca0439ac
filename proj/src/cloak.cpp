#include "geocloak/cloak.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "geocloak/random.hpp"

namespace geocloak::cloak {

namespace {

struct Evaluation {
  double loss = 0.0;
  std::vector<double> gradient;
};

using Objective = std::function<Evaluation(const Image& current, bool want_gradient)>;

void check_mask(const Image& image, const std::optional<Mask>& mask) {
  if (mask && (mask->height() != image.height() || mask->width() != image.width())) {
    throw std::invalid_argument("mask " + shape_string(mask->height(), mask->width()) + " does not match image " +
                                shape_string(image.height(), image.width()));
  }
}

// Projects onto the ε-ball around `clean`, then onto [0, 1].
void project_onto_budget(Image& current, const Image& clean, double budget) {
  auto cur = current.values();
  auto ref = clean.values();
  for (std::size_t i = 0; i < cur.size(); ++i) {
    cur[i] = std::clamp(cur[i], ref[i] - budget, ref[i] + budget);
    cur[i] = std::clamp(cur[i], 0.0, 1.0);
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Image difference(const Image& a, const Image& b) {
  Image out(a.height(), a.width());
  auto o = out.values();
  auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  return out;
}

Evaluation evaluate_guarded(const Objective& objective, const Image& current, bool want_gradient,
                            std::size_t iteration) {
  Evaluation e;
  try {
    e = objective(current, want_gradient);
  } catch (const ndiff::NonFiniteError& err) {
    throw OptimizationAborted(iteration, err.what());
  }
  if (!std::isfinite(e.loss)) throw OptimizationAborted(iteration, "loss is not finite");
  return e;
}

// Shared sign-descent loop starting at the clean image.
CloakResult descend(const Image& clean, const CloakConfig& config, const std::optional<Mask>& mask,
                    const Objective& objective, const IterationObserver& observer) {
  const auto t0 = std::chrono::steady_clock::now();
  const double budget = config.budget();

  CloakResult result;
  Image current = clean;
  Rng rng(config.seed);
  Evaluation eval = evaluate_guarded(objective, current, true, 0);
  result.initial_loss = eval.loss;
  result.loss_trace.reserve(config.steps);

  double best = 0.0;
  Image best_image;
  std::vector<double> update(current.size());
  for (std::size_t i = 0; i < config.steps; ++i) {
    const bool stationary =
        std::all_of(eval.gradient.begin(), eval.gradient.end(), [](double g) { return g == 0.0; });
    for (std::size_t k = 0; k < update.size(); ++k) {
      const double s = stationary ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : sign(eval.gradient[k]);
      update[k] = -config.alpha * s;
    }
    if (mask) apply_mask(update, *mask);
    auto cur = current.values();
    for (std::size_t k = 0; k < update.size(); ++k) cur[k] += update[k];
    project_onto_budget(current, clean, budget);

    const bool last = i + 1 == config.steps;
    eval = evaluate_guarded(objective, current, !last, i + 1);
    result.loss_trace.push_back(eval.loss);
    if (i == 0 || eval.loss < best) {
      best = eval.loss;
      best_image = current;
      result.best_index = i;
    }
    if (observer) observer({i, clean, current, eval.loss});
  }

  result.cloaked = std::move(best_image);
  result.perturbation = difference(result.cloaked, clean);
  result.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

Evaluation run_tape(ndiff::Tape& tape, const ndiff::Tensor& input, const ndiff::Tensor& loss, bool want_gradient) {
  Evaluation e{loss.item(), {}};
  if (want_gradient) {
    tape.backward(loss);
    auto g = input.grad();
    e.gradient.assign(g.begin(), g.end());
  }
  return e;
}

ndiff::Tensor leaf(const encoder::ReferenceEncoder& encoder, const Image& image) {
  auto t = encoder.image_tensor(image);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

OptimizationAborted::OptimizationAborted(std::size_t iteration, const std::string& what)
    : std::runtime_error("optimization aborted at iteration " + std::to_string(iteration) + ": " + what),
      iteration_(iteration) {}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Targeted: return "targeted";
    case Mode::UntargetedGeometry: return "untargeted-geometry";
    case Mode::AdvImage: return "adv-image";
    case Mode::GaussNoise: return "gauss-noise";
  }
  return "targeted";
}

Mode parse_mode(std::string_view text) {
  for (Mode m : {Mode::Targeted, Mode::UntargetedGeometry, Mode::AdvImage, Mode::GaussNoise}) {
    if (text == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown mode '" + std::string(text) +
                              "' (expected targeted, untargeted-geometry, adv-image or gauss-noise)");
}

void CloakConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be non-negative");
  if (steps == 0) throw std::invalid_argument("steps must be at least 1");
  if (mode == Mode::Targeted) {
    if (!pattern) throw std::invalid_argument("targeted mode requires a pattern");
    if (pattern->dims() == 2 && !view) throw std::invalid_argument("targeted mode with a 2D pattern requires a view");
  }
}

void apply_mask(std::span<double> update, const Mask& mask) {
  const std::size_t plane = mask.height() * mask.width();
  if (plane == 0 || update.size() % plane != 0) {
    throw std::invalid_argument("mask " + shape_string(mask.height(), mask.width()) +
                                " does not match update of " + std::to_string(update.size()) + " values");
  }
  auto m = mask.values();
  for (std::size_t k = 0; k < update.size(); ++k) {
    if (m[k % plane] == 0) update[k] = 0.0;
  }
}

CloakResult cloak_targeted(const Image& image, const encoder::ReferenceEncoder& encoder, const CloakConfig& config,
                           const std::optional<Mask>& mask, const IterationObserver& observer) {
  if (config.mode != Mode::Targeted) throw std::invalid_argument("cloak_targeted: mode must be targeted");
  config.validate();
  encoder.check_resolution(image);
  check_mask(image, mask);

  const auto target = config.pattern->tensor();
  const bool project_first = config.pattern->dims() == 2;
  const auto view = config.view.value_or(geometry::ViewDirection::axes(geometry::AxisPair::XY));
  Objective objective = [&](const Image& current, bool want_gradient) {
    ndiff::Tape tape;
    auto input = leaf(encoder, current);
    auto cloud = encoder.encode(tape, input);
    if (project_first) cloud = geometry::project(tape, cloud, view);
    return run_tape(tape, input, geometry::chamfer(tape, cloud, target), want_gradient);
  };
  return descend(image, config, mask, objective, observer);
}

CloakResult cloak_untargeted(const Image& image, const encoder::ReferenceEncoder& encoder, const CloakConfig& config,
                             const std::optional<Mask>& mask, const IterationObserver& observer) {
  if (config.mode != Mode::UntargetedGeometry && config.mode != Mode::AdvImage) {
    throw std::invalid_argument("cloak_untargeted: mode must be untargeted-geometry or adv-image");
  }
  config.validate();
  encoder.check_resolution(image);
  check_mask(image, mask);

  const bool on_points = config.mode == Mode::UntargetedGeometry;
  ndiff::Tensor reference;
  try {
    ndiff::Tape tape;
    auto input = encoder.image_tensor(image);
    reference = on_points ? encoder.encode(tape, input) : encoder.features(tape, input);
  } catch (const ndiff::NonFiniteError& err) {
    throw OptimizationAborted(0, err.what());
  }
  Objective objective = [&](const Image& current, bool want_gradient) {
    ndiff::Tape tape;
    auto input = leaf(encoder, current);
    auto out = on_points ? encoder.encode(tape, input) : encoder.features(tape, input);
    auto deviation = tape.sum(tape.square(tape.sub(out, reference)));
    return run_tape(tape, input, tape.scale(deviation, -1.0), want_gradient);
  };
  return descend(image, config, mask, objective, observer);
}

CloakResult gauss_noise(const Image& image, const CloakConfig& config, const std::optional<Mask>& mask) {
  if (config.mode != Mode::GaussNoise) throw std::invalid_argument("gauss_noise: mode must be gauss-noise");
  config.validate();
  check_mask(image, mask);
  const auto t0 = std::chrono::steady_clock::now();

  const double budget = config.budget();
  Rng rng(config.seed);
  std::vector<double> delta(image.size());
  for (double& v : delta) v = std::clamp(budget * rng.normal(), -budget, budget);
  if (mask) apply_mask(delta, *mask);

  CloakResult result;
  result.cloaked = image;
  auto out = result.cloaked.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::clamp(out[k] + delta[k], 0.0, 1.0);
  result.perturbation = difference(result.cloaked, image);
  result.loss_trace.assign(config.steps, 0.0);
  result.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

CloakResult run(const Image& image, const encoder::ReferenceEncoder& encoder, const CloakConfig& config,
                const std::optional<Mask>& mask, const IterationObserver& observer) {
  switch (config.mode) {
    case Mode::Targeted: return cloak_targeted(image, encoder, config, mask, observer);
    case Mode::UntargetedGeometry:
    case Mode::AdvImage: return cloak_untargeted(image, encoder, config, mask, observer);
    case Mode::GaussNoise: return gauss_noise(image, config, mask);
  }
  throw std::invalid_argument("unknown mode");
}

double pattern_distance(const encoder::ReferenceEncoder& encoder, const Image& image, const patterns::Pattern& pattern,
                        const geometry::ViewDirection& view) {
  const auto cloud = encoder.encode(image);
  if (pattern.dims() == 3) return geometry::chamfer_accelerated(cloud, pattern.points3d());
  return geometry::chamfer_accelerated(geometry::project(cloud, view), pattern.points2d());
}

double linf_distance(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("linf_distance: shape mismatch");
  double m = 0.0;
  auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

Image quantize_cloak(const Image& clean, const Image& cloaked, double epsilon) {
  if (!clean.same_shape(cloaked)) throw std::invalid_argument("quantize_cloak: shape mismatch");
  const double bound = std::floor(epsilon);
  Image out(clean.height(), clean.width());
  auto o = out.values();
  auto ref = clean.values(), cur = cloaked.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double base = std::round(ref[i] * 255.0);
    double q = std::round(std::clamp(cur[i], 0.0, 1.0) * 255.0);
    q = std::clamp(q, base - bound, base + bound);
    q = std::clamp(q, 0.0, 255.0);
    o[i] = q / 255.0;
  }
  return out;
}

}  // namespace geocloak::cloak
