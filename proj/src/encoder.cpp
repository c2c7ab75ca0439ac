#include "geocloak/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "geocloak/random.hpp"

namespace geocloak::encoder {

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kStride = 2;
constexpr std::size_t kPadding = 1;
constexpr double kOffsetScale = 0.05;
constexpr char kMagic[6] = {'G', 'C', 'E', 'N', 'C', '1'};

std::size_t conv_out(std::size_t in) { return (in + 2 * kPadding - kKernel) / kStride + 1; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Each parameter draws from its own stream so resizing one layer leaves
// the others untouched.
ndiff::Tensor uniform_tensor(std::uint64_t seed, std::uint64_t stream, ndiff::Shape shape, double bound) {
  Rng rng(splitmix64(seed ^ splitmix64(stream)));
  std::vector<double> v(ndiff::element_count(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return ndiff::Tensor::from(std::move(shape), std::move(v));
}

double xavier(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

std::vector<ndiff::Shape> parameter_shapes(const EncoderConfig& c) {
  const std::size_t decoder_in = 3 + 3 * c.triplane_channels + c.conv2_channels;
  return {
      {c.conv1_channels, 3, kKernel, kKernel},
      {c.conv1_channels},
      {c.conv2_channels, c.conv1_channels, kKernel, kKernel},
      {c.conv2_channels},
      {c.feature_count(), 3 * c.points},
      {1, 3 * c.points},
      {c.triplane_channels, c.triplane_size, c.triplane_size},
      {c.triplane_channels, c.triplane_size, c.triplane_size},
      {c.triplane_channels, c.triplane_size, c.triplane_size},
      {decoder_in, c.decoder_hidden},
      {1, c.decoder_hidden},
      {c.decoder_hidden, kRawAttributeCount},
      {1, kRawAttributeCount},
  };
}

std::vector<ndiff::Tensor> generate(std::uint64_t seed, const EncoderConfig& c) {
  const auto shapes = parameter_shapes(c);
  const double conv1 = xavier(3 * kKernel * kKernel, c.conv1_channels * kKernel * kKernel);
  const double conv2 = xavier(c.conv1_channels * kKernel * kKernel, c.conv2_channels * kKernel * kKernel);
  const double head = xavier(c.feature_count(), 3 * c.points);
  const double dec1 = xavier(shapes[9][0], c.decoder_hidden);
  const double dec2 = xavier(c.decoder_hidden, kRawAttributeCount);
  const std::array<double, 13> bounds{conv1, conv1, conv2, conv2, head, head, 1.0,
                                      1.0,   1.0,   dec1,  dec1,  dec2, dec2};
  std::vector<ndiff::Tensor> params;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    params.push_back(uniform_tensor(seed, i + 1, shapes[i], bounds[i]));
  }
  return params;
}

void validate_config(const EncoderConfig& c) {
  if (c.height < 2 || c.width < 2) throw std::invalid_argument("encoder resolution must be at least 2x2");
  if (c.points == 0 || c.conv1_channels == 0 || c.conv2_channels == 0 || c.triplane_channels == 0 ||
      c.decoder_hidden == 0) {
    throw std::invalid_argument("encoder dimensions must be positive");
  }
  if (c.triplane_size < 2) throw std::invalid_argument("triplane planes must be at least 2x2");
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename T>
void write_le(std::ofstream& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::ifstream& in) {
  std::array<char, sizeof(T)> bytes{};
  if (!in.read(bytes.data(), bytes.size())) throw std::runtime_error("weight bundle truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

std::size_t EncoderConfig::feature_height() const { return conv_out(conv_out(height)); }
std::size_t EncoderConfig::feature_width() const { return conv_out(conv_out(width)); }

GaussianAttributes attributes_from_raw(std::span<const double, kRawAttributeCount> raw) {
  GaussianAttributes a;
  for (std::size_t d = 0; d < 3; ++d) a.offset[d] = kOffsetScale * std::tanh(raw[d]);
  a.opacity = logistic(raw[3]);
  for (std::size_t d = 0; d < 3; ++d) a.scale[d] = std::exp(raw[4 + d]);
  double norm = 0.0;
  for (std::size_t d = 0; d < 4; ++d) norm += raw[7 + d] * raw[7 + d];
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (std::size_t d = 0; d < 4; ++d) a.rotation[d] = raw[7 + d] / norm;
  }
  for (std::size_t d = 0; d < 3; ++d) a.sh[d] = raw[11 + d];
  return a;
}

ndiff::Tensor sample_triplane_features(const Triplane& triplane, const geometry::PointCloud3D& cloud) {
  const std::size_t n = cloud.size();
  if (n == 0) throw std::invalid_argument("sample_triplane_features: empty cloud");
  const std::size_t c = triplane.channels();
  if (triplane.xz.shape() != triplane.xy.shape() || triplane.yz.shape() != triplane.xy.shape()) {
    throw ndiff::ShapeError("triplane planes must share C×H×W");
  }
  constexpr std::array<std::array<std::size_t, 2>, 3> axes{{{0, 1}, {0, 2}, {1, 2}}};
  const std::array<const ndiff::Tensor*, 3> planes{&triplane.xy, &triplane.xz, &triplane.yz};

  ndiff::Tape tape;
  std::vector<double> out(n * 3 * c);
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> uv(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      uv[2 * i] = cloud[i][axes[k][0]] + 0.5;
      uv[2 * i + 1] = cloud[i][axes[k][1]] + 0.5;
    }
    auto sampled = tape.bilinear_sample(*planes[k], ndiff::Tensor::from({n, 2}, std::move(uv)));
    auto s = sampled.data();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(s.data() + i * c, c, out.data() + i * 3 * c + k * c);
    }
  }
  return ndiff::Tensor::from({n, 3 * c}, std::move(out));
}

GaussianDecoder::GaussianDecoder(ndiff::Tensor w1, ndiff::Tensor b1, ndiff::Tensor w2, ndiff::Tensor b2)
    : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)) {}

std::vector<GaussianAttributes> GaussianDecoder::decode(const ndiff::Tensor& f_t, const ndiff::Tensor& f_l,
                                                        const geometry::PointCloud3D& cloud) const {
  const std::size_t n = cloud.size();
  if (f_t.rank() != 2 || f_l.rank() != 2 || f_t.dim(0) != n || f_l.dim(0) != n) {
    throw ndiff::ShapeError("decode_gaussian_attributes: feature rows " + ndiff::to_string(f_t.shape()) +
                            " / " + ndiff::to_string(f_l.shape()) + " do not match " + std::to_string(n) +
                            " points");
  }
  const std::size_t in_width = 3 + f_t.dim(1) + f_l.dim(1);
  if (in_width != input_width()) {
    throw ndiff::ShapeError("decode_gaussian_attributes: input width " + std::to_string(in_width) +
                            ", decoder expects " + std::to_string(input_width()));
  }
  const std::size_t hidden = w1_.dim(1);
  auto w1 = w1_.data(), b1 = b1_.data(), w2 = w2_.data(), b2 = b2_.data();
  auto ft = f_t.data(), fl = f_l.data();

  std::vector<GaussianAttributes> out;
  out.reserve(n);
  std::vector<double> input(in_width), h(hidden);
  std::array<double, kRawAttributeCount> raw{};
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(cloud[i].begin(), cloud[i].end(), input.begin());
    std::copy_n(ft.data() + i * f_t.dim(1), f_t.dim(1), input.begin() + 3);
    std::copy_n(fl.data() + i * f_l.dim(1), f_l.dim(1), input.begin() + 3 + f_t.dim(1));
    for (std::size_t j = 0; j < hidden; ++j) {
      double acc = b1[j];
      for (std::size_t p = 0; p < in_width; ++p) acc += input[p] * w1[p * hidden + j];
      h[j] = acc > 0.0 ? acc : 0.0;
    }
    for (std::size_t j = 0; j < kRawAttributeCount; ++j) {
      double acc = b2[j];
      for (std::size_t p = 0; p < hidden; ++p) acc += h[p] * w2[p * kRawAttributeCount + j];
      raw[j] = acc;
    }
    out.push_back(attributes_from_raw(raw));
  }
  return out;
}

ReferenceEncoder::ReferenceEncoder(std::uint64_t seed, EncoderConfig config)
    : ReferenceEncoder(seed, config, (validate_config(config), generate(seed, config))) {}

ReferenceEncoder::ReferenceEncoder(std::uint64_t seed, EncoderConfig config, std::vector<ndiff::Tensor> p)
    : seed_(seed), config_(config) {
  conv1_w_ = p[0];
  conv1_b_ = p[1];
  conv2_w_ = p[2];
  conv2_b_ = p[3];
  head_w_ = p[4];
  head_b_ = p[5];
  triplane_ = {p[6], p[7], p[8]};
  decoder_ = GaussianDecoder(p[9], p[10], p[11], p[12]);
}

std::vector<ndiff::Tensor> ReferenceEncoder::parameters() const {
  return {conv1_w_,    conv1_b_,    conv2_w_,    conv2_b_,     head_w_,      head_b_,     triplane_.xy,
          triplane_.xz, triplane_.yz, decoder_.w1(), decoder_.b1(), decoder_.w2(), decoder_.b2()};
}

void ReferenceEncoder::check_resolution(const Image& image) const {
  if (image.height() != config_.height || image.width() != config_.width) {
    throw std::invalid_argument("image resolution " + shape_string(image.height(), image.width()) +
                                " does not match encoder input " +
                                shape_string(config_.height, config_.width));
  }
}

ndiff::Tensor ReferenceEncoder::image_tensor(const Image& image) const {
  check_resolution(image);
  return ndiff::Tensor::from({Image::kChannels, image.height(), image.width()},
                             std::vector<double>(image.values().begin(), image.values().end()));
}

ndiff::Tensor ReferenceEncoder::features(ndiff::Tape& tape, const ndiff::Tensor& image) const {
  const ndiff::Shape expected{Image::kChannels, config_.height, config_.width};
  if (image.shape() != expected) {
    throw std::invalid_argument("encoder input " + ndiff::to_string(image.shape()) + " does not match expected " +
                                ndiff::to_string(expected));
  }
  auto h = tape.relu(tape.conv2d(image, conv1_w_, conv1_b_, kStride, kPadding));
  return tape.relu(tape.conv2d(h, conv2_w_, conv2_b_, kStride, kPadding));
}

ndiff::Tensor ReferenceEncoder::points(ndiff::Tape& tape, const ndiff::Tensor& features) const {
  auto flat = tape.reshape(features, {1, config_.feature_count()});
  auto z = tape.add(tape.matmul(flat, head_w_), head_b_);
  auto bounded = tape.scale(tape.tanh(z), 0.5);
  return tape.reshape(bounded, {config_.points, 3});
}

ndiff::Tensor ReferenceEncoder::encode(ndiff::Tape& tape, const ndiff::Tensor& image) const {
  return points(tape, features(tape, image));
}

geometry::PointCloud3D ReferenceEncoder::encode(const Image& image) const {
  ndiff::Tape tape;
  return geometry::from_tensor<3>(encode(tape, image_tensor(image)));
}

ndiff::Tensor ReferenceEncoder::local_features(const ndiff::Tensor& feature_map,
                                               const geometry::PointCloud3D& cloud) const {
  const std::size_t n = cloud.size();
  std::vector<double> uv(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    uv[2 * i] = cloud[i][0] + 0.5;      // x → column
    uv[2 * i + 1] = 0.5 - cloud[i][1];  // y is up, rows run down
  }
  ndiff::Tape tape;
  return tape.bilinear_sample(feature_map, ndiff::Tensor::from({n, 2}, std::move(uv)));
}

Reconstruction ReferenceEncoder::reconstruct(const Image& image) const {
  ndiff::Tape tape;
  auto feature_map = features(tape, image_tensor(image));
  Reconstruction r;
  r.cloud = geometry::from_tensor<3>(points(tape, feature_map));
  r.attributes = decoder_.decode(sample_triplane_features(triplane_, r.cloud),
                                 local_features(feature_map, r.cloud), r.cloud);
  return r;
}

void ReferenceEncoder::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weight bundle " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_le<std::uint64_t>(out, seed_);
  for (std::size_t field : {config_.height, config_.width, config_.points, config_.conv1_channels,
                            config_.conv2_channels, config_.triplane_channels, config_.triplane_size,
                            config_.decoder_hidden}) {
    write_le<std::uint64_t>(out, field);
  }
  for (const auto& t : parameters()) {
    for (double v : t.data()) write_le<double>(out, v);
  }
  if (!out) throw std::runtime_error("failed writing weight bundle " + path.string());
}

ReferenceEncoder ReferenceEncoder::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight bundle " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error(path.string() + " is not a GCENC1 weight bundle");
  }
  const auto seed = read_le<std::uint64_t>(in);
  EncoderConfig c;
  for (std::size_t* field : {&c.height, &c.width, &c.points, &c.conv1_channels, &c.conv2_channels,
                             &c.triplane_channels, &c.triplane_size, &c.decoder_hidden}) {
    *field = static_cast<std::size_t>(read_le<std::uint64_t>(in));
  }
  validate_config(c);
  std::vector<ndiff::Tensor> params;
  for (auto& shape : parameter_shapes(c)) {
    std::vector<double> v(ndiff::element_count(shape));
    for (double& x : v) x = read_le<double>(in);
    params.push_back(ndiff::Tensor::from(shape, std::move(v)));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("weight bundle " + path.string() + " has trailing bytes");
  }
  return ReferenceEncoder(seed, c, std::move(params));
}

}  // namespace geocloak::encoder
