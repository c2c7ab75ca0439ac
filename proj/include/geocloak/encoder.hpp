#pragma once

// Seeded reference image-to-point-cloud encoder.
//
// Pipeline: 3×H×W image → conv(3→8, 3×3, stride 2, pad 1) → relu
//                        → conv(8→16, 3×3, stride 2, pad 1) → relu
//                        → flatten → linear → 0.5·tanh → N×3 points.
// All outputs therefore lie in the canonical box [−0.5, 0.5]³. The point
// path is differentiable end to end; the triplane and Gaussian decoder are
// forward-only and feed the preview renderer.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "geocloak/geometry.hpp"
#include "geocloak/image.hpp"
#include "geocloak/ndiff.hpp"

namespace geocloak::encoder {

struct EncoderConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t points = 2048;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t triplane_channels = 8;
  std::size_t triplane_size = 32;
  std::size_t decoder_hidden = 32;

  std::size_t feature_height() const;
  std::size_t feature_width() const;
  std::size_t feature_count() const { return conv2_channels * feature_height() * feature_width(); }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct Triplane {
  ndiff::Tensor xy, xz, yz;  // each C×H_t×W_t

  std::size_t channels() const { return xy.dim(0); }
};

struct GaussianAttributes {
  std::array<double, 3> offset{};  // Δx′, canonical-box units, |·| ≤ 0.05 per axis
  double opacity = 0.0;            // [0, 1]
  std::array<double, 3> scale{};   // > 0
  std::array<double, 4> rotation{1.0, 0.0, 0.0, 0.0};  // unit quaternion (w, x, y, z)
  std::array<double, 3> sh{};      // degree-0 color coefficients

  friend bool operator==(const GaussianAttributes&, const GaussianAttributes&) = default;
};

inline constexpr std::size_t kRawAttributeCount = 14;

// Squashes one row of raw decoder output: offset = 0.05·tanh, opacity =
// logistic, scale = exp, rotation normalized (identity if the raw quaternion
// is zero), sh passed through.
GaussianAttributes attributes_from_raw(std::span<const double, kRawAttributeCount> raw);

// f_t = interp(T_xy, P_xy) ⊕ interp(T_xz, P_xz) ⊕ interp(T_yz, P_yz), with
// box coordinates mapped affinely from [−0.5, 0.5] to [0, 1]. Returns N×3C.
ndiff::Tensor sample_triplane_features(const Triplane& triplane, const geometry::PointCloud3D& cloud);

// Two-layer MLP φ_g: (x ⊕ f_t ⊕ f_l) → hidden (relu) → 14 raw outputs.
class GaussianDecoder {
 public:
  GaussianDecoder() = default;
  GaussianDecoder(ndiff::Tensor w1, ndiff::Tensor b1, ndiff::Tensor w2, ndiff::Tensor b2);

  std::size_t input_width() const { return w1_.dim(0); }

  // f_t: N×3C, f_l: N×C_l, cloud: N points. Throws on row-count mismatch.
  std::vector<GaussianAttributes> decode(const ndiff::Tensor& f_t, const ndiff::Tensor& f_l,
                                         const geometry::PointCloud3D& cloud) const;

  const ndiff::Tensor& w1() const { return w1_; }
  const ndiff::Tensor& b1() const { return b1_; }
  const ndiff::Tensor& w2() const { return w2_; }
  const ndiff::Tensor& b2() const { return b2_; }

 private:
  ndiff::Tensor w1_, b1_, w2_, b2_;
};

struct Reconstruction {
  geometry::PointCloud3D cloud;
  std::vector<GaussianAttributes> attributes;
};

class ReferenceEncoder {
 public:
  explicit ReferenceEncoder(std::uint64_t seed, EncoderConfig config = {});

  std::uint64_t seed() const { return seed_; }
  const EncoderConfig& config() const { return config_; }
  const Triplane& triplane() const { return triplane_; }
  const GaussianDecoder& decoder() const { return decoder_; }

  // Throws std::invalid_argument naming expected and actual sizes.
  void check_resolution(const Image& image) const;
  // 3×H×W tensor of the image values (no grad).
  ndiff::Tensor image_tensor(const Image& image) const;

  // Conv feature map C2×H2×W2.
  ndiff::Tensor features(ndiff::Tape& tape, const ndiff::Tensor& image) const;
  // N×3 points from a conv feature map.
  ndiff::Tensor points(ndiff::Tape& tape, const ndiff::Tensor& features) const;
  // N×3 points, differentiable w.r.t. `image`.
  ndiff::Tensor encode(ndiff::Tape& tape, const ndiff::Tensor& image) const;

  geometry::PointCloud3D encode(const Image& image) const;
  Reconstruction reconstruct(const Image& image) const;

  // Local image features: bilinear lookup of the conv map at each point's
  // orthographic (x, y) image position. Returns N×C2.
  ndiff::Tensor local_features(const ndiff::Tensor& feature_map, const geometry::PointCloud3D& cloud) const;

  // Binary weight bundle: "GCENC1", u64 seed, u64 config fields, then every
  // parameter as little-endian f64 in a fixed order.
  void save(const std::filesystem::path& path) const;
  static ReferenceEncoder load(const std::filesystem::path& path);

  // All parameters in serialization order.
  std::vector<ndiff::Tensor> parameters() const;

 private:
  ReferenceEncoder(std::uint64_t seed, EncoderConfig config, std::vector<ndiff::Tensor> parameters);

  std::uint64_t seed_;
  EncoderConfig config_;
  ndiff::Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_, head_w_, head_b_;
  Triplane triplane_;
  GaussianDecoder decoder_;
};

}  // namespace geocloak::encoder
