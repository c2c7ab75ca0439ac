#pragma once

// Image and geometry quality metrics plus the distortion menu used for
// robustness sweeps.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geocloak/encoder.hpp"
#include "geocloak/image.hpp"

namespace geocloak::metrics {

// 10·log10(1 / MSE) over every value; +inf when the images are identical.
double psnr(const Image& a, const Image& b);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// Normalized 1D Gaussian taps; the 2D window is their outer product.
std::vector<double> gaussian_taps(std::size_t size = kSsimWindow, double sigma = kSsimSigma);

// Single-scale SSIM over valid windows, per channel, averaged. Throws
// std::invalid_argument if either side is smaller than the window.
double ssim(const Image& a, const Image& b);

enum class DistortionKind { Gauss, Brightness, Downsample };

struct Distortion {
  DistortionKind kind = DistortionKind::Gauss;
  // Gauss: σ in 8-bit units (1 or 2). Brightness: factor in [1, 2].
  // Downsample: factor 2 or 4.
  double parameter = 1.0;
  std::uint64_t seed = 0;

  std::string name() const;
};

// "gauss:1", "brightness:1.5", "downsample:4", ...
Distortion parse_distortion(std::string_view text, std::uint64_t seed = 0);
std::vector<Distortion> distortion_menu(std::uint64_t seed = 0);

// Output has the input's resolution and lies in [0, 1].
Image apply_distortion(const Image& image, const Distortion& distortion);

struct DistortionReport {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  double cd = 0.0;

  friend bool operator==(const DistortionReport&, const DistortionReport&) = default;
};

struct EvalReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double cd = 0.0;
  std::vector<DistortionReport> distortions;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// PSNR/SSIM compare front-view preview renders of both reconstructions; CD
// compares the two 3D clouds. Each distortion is applied to `perturbed`
// before it is reconstructed.
EvalReport evaluate(const Image& clean, const Image& perturbed, const encoder::ReferenceEncoder& encoder,
                    const std::vector<Distortion>& distortions = {});

// Schema 1; PSNR +inf is written as the string "inf"; "lpips" is null.
nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

// JSON number, or "inf"/"-inf" for infinities.
nlohmann::json number_or_inf(double v);
double parse_number_or_inf(const nlohmann::json& j);

}  // namespace geocloak::metrics
