#pragma once

// View-specific projected gradient descent and its baselines.
//
// Every gradient mode runs the same loop: evaluate the loss at the current
// iterate, take a masked sign step of size α against the gradient, project
// back onto the ε-ball around the clean image and onto [0, 1]. The loss
// trace holds the loss after each of the N steps; the returned image is the
// iterate with the lowest traced loss. When the gradient vanishes
// everywhere, the step follows a seeded random sign pattern instead.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "geocloak/encoder.hpp"
#include "geocloak/geometry.hpp"
#include "geocloak/image.hpp"
#include "geocloak/patterns.hpp"

namespace geocloak::cloak {

enum class Mode { Targeted, UntargetedGeometry, AdvImage, GaussNoise };

std::string to_string(Mode mode);
// "targeted", "untargeted-geometry", "adv-image", "gauss-noise"
Mode parse_mode(std::string_view text);

struct CloakConfig {
  Mode mode = Mode::Targeted;
  double epsilon = 8.0;  // 8-bit units; the [0,1] budget is epsilon / 255
  double alpha = 0.001;
  std::size_t steps = 100;
  std::optional<geometry::ViewDirection> view;
  std::optional<patterns::Pattern> pattern;
  std::uint64_t seed = 0;

  double budget() const { return epsilon / 255.0; }
  // Throws std::invalid_argument on ε ≤ 0, α < 0, N = 0, or a targeted
  // config without a pattern (or without a view for a 2D pattern).
  void validate() const;
};

struct CloakResult {
  Image cloaked;
  Image perturbation;  // cloaked − clean
  std::vector<double> loss_trace;
  double initial_loss = 0.0;
  std::size_t best_index = 0;
  double elapsed_ms = 0.0;

  double best_loss() const { return loss_trace.empty() ? initial_loss : loss_trace[best_index]; }
};

// Raised when a loss or gradient turns non-finite mid-optimization.
class OptimizationAborted : public std::runtime_error {
 public:
  OptimizationAborted(std::size_t iteration, const std::string& what);
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

struct IterationState {
  std::size_t iteration;  // 0-based step index
  const Image& clean;
  const Image& current;
  double loss;
};
using IterationObserver = std::function<void(const IterationState&)>;

// Zeroes `update` (C×H×W planar) wherever the mask is 0.
void apply_mask(std::span<double> update, const Mask& mask);

CloakResult cloak_targeted(const Image& image, const encoder::ReferenceEncoder& encoder, const CloakConfig& config,
                           const std::optional<Mask>& mask = std::nullopt, const IterationObserver& observer = {});

// untargeted-geometry ascends |encode(Î) − encode(I)|²; adv-image ascends
// the same norm on the conv feature map. The deviation gradient vanishes at
// Î = I, so the first step is the seeded random one. Traced loss is
// −|deviation|².
CloakResult cloak_untargeted(const Image& image, const encoder::ReferenceEncoder& encoder, const CloakConfig& config,
                             const std::optional<Mask>& mask = std::nullopt, const IterationObserver& observer = {});

// δ = clip(σ·g, ±ε/255) with σ = ε/255 and g ~ N(0,1) per masked value.
CloakResult gauss_noise(const Image& image, const CloakConfig& config, const std::optional<Mask>& mask = std::nullopt);

// Dispatches on config.mode.
CloakResult run(const Image& image, const encoder::ReferenceEncoder& encoder, const CloakConfig& config,
                const std::optional<Mask>& mask = std::nullopt, const IterationObserver& observer = {});

// Chamfer distance between the (projected, for 2D patterns) reconstruction
// of `image` and the pattern: the targeted objective.
double pattern_distance(const encoder::ReferenceEncoder& encoder, const Image& image, const patterns::Pattern& pattern,
                        const geometry::ViewDirection& view);

// Largest |cloaked − clean| over all values.
double linf_distance(const Image& a, const Image& b);

// Re-quantizes a float cloak to 8 bits so that |Î₈ − I₈| ≤ ⌊ε⌋ holds on
// the shipped bytes. `clean` must hold exact k/255 values.
Image quantize_cloak(const Image& clean, const Image& cloaked, double epsilon);

}  // namespace geocloak::cloak
