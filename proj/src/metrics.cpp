#include "geocloak/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "geocloak/geometry.hpp"
#include "geocloak/random.hpp"
#include "geocloak/render.hpp"

namespace geocloak::metrics {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a.height(), a.width()) +
                                " vs " + shape_string(b.height(), b.width()));
  }
}

// Valid-region separable filter of one H×W plane.
std::vector<double> filter_valid(const double* plane, std::size_t h, std::size_t w, const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t ow = w - k + 1, oh = h - k + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += taps[t] * plane[y * w + x + t];
      rows[y * ow + x] = s;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += taps[t] * rows[(y + t) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  auto x = a.values(), y = b.values();
  if (x.empty()) throw std::invalid_argument("psnr: empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  std::vector<double> taps(size);
  const double centre = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - centre;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  const std::size_t h = a.height(), w = a.width();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw std::invalid_argument("ssim: image " + shape_string(h, w) + " is smaller than the " +
                                std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) + " window");
  }
  const auto taps = gaussian_taps();
  const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
  const std::size_t plane = h * w;

  double total = 0.0;
  std::vector<double> xx(plane), yy(plane), xy(plane);
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    const double* x = a.values().data() + c * plane;
    const double* y = b.values().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, taps);
    const auto my = filter_valid(y, h, w, taps);
    const auto sxx = filter_valid(xx.data(), h, w, taps);
    const auto syy = filter_valid(yy.data(), h, w, taps);
    const auto sxy = filter_valid(xy.data(), h, w, taps);
    double channel = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      channel += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += channel / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(Image::kChannels);
}

std::string Distortion::name() const {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, parameter);
  (void)ec;
  const std::string p(buf, end);
  switch (kind) {
    case DistortionKind::Gauss: return "gauss:" + p;
    case DistortionKind::Brightness: return "brightness:" + p;
    case DistortionKind::Downsample: return "downsample:" + p;
  }
  return p;
}

Distortion parse_distortion(std::string_view text, std::uint64_t seed) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("distortion '" + std::string(text) + "' lacks ':'");
  const auto kind = text.substr(0, colon);
  const auto value = text.substr(colon + 1);
  double p = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), p);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("distortion '" + std::string(text) + "' has a bad parameter");
  }
  Distortion d{DistortionKind::Gauss, p, seed};
  if (kind == "gauss") {
    if (p != 1.0 && p != 2.0) throw std::invalid_argument("gauss sigma must be 1 or 2 (8-bit units)");
  } else if (kind == "brightness") {
    d.kind = DistortionKind::Brightness;
    if (!(p >= 1.0 && p <= 2.0)) throw std::invalid_argument("brightness factor must lie in [1, 2]");
  } else if (kind == "downsample") {
    d.kind = DistortionKind::Downsample;
    if (p != 2.0 && p != 4.0) throw std::invalid_argument("downsample factor must be 2 or 4");
  } else {
    throw std::invalid_argument("unknown distortion '" + std::string(kind) +
                                "' (expected gauss, brightness or downsample)");
  }
  return d;
}

std::vector<Distortion> distortion_menu(std::uint64_t seed) {
  std::vector<Distortion> menu;
  for (const char* s : {"gauss:1", "gauss:2", "brightness:1.5", "brightness:2", "downsample:2", "downsample:4"}) {
    menu.push_back(parse_distortion(s, seed));
  }
  return menu;
}

Image apply_distortion(const Image& image, const Distortion& d) {
  Image out = image;
  auto o = out.values();
  switch (d.kind) {
    case DistortionKind::Gauss: {
      Rng rng(d.seed);
      const double sigma = d.parameter / 255.0;
      for (double& v : o) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
      break;
    }
    case DistortionKind::Brightness:
      for (double& v : o) v = std::clamp(v * d.parameter, 0.0, 1.0);
      break;
    case DistortionKind::Downsample: {
      const auto f = static_cast<std::size_t>(d.parameter);
      if (f == 0) throw std::invalid_argument("downsample factor must be positive");
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        for (std::size_t y = 0; y < image.height(); ++y) {
          for (std::size_t x = 0; x < image.width(); ++x) {
            out.at(c, y, x) = std::clamp(image.at(c, (y / f) * f, (x / f) * f), 0.0, 1.0);
          }
        }
      }
      break;
    }
  }
  return out;
}

namespace {

struct Reconstructed {
  geometry::PointCloud3D cloud;
  Image render;
};

Reconstructed reconstruct_and_render(const Image& image, const encoder::ReferenceEncoder& encoder) {
  auto rec = encoder.reconstruct(image);
  auto render = render::render_preview(rec.cloud, rec.attributes, geometry::ViewDirection::parse("front"));
  return {std::move(rec.cloud), std::move(render)};
}

}  // namespace

EvalReport evaluate(const Image& clean, const Image& perturbed, const encoder::ReferenceEncoder& encoder,
                    const std::vector<Distortion>& distortions) {
  require_same_shape(clean, perturbed, "evaluate");
  const auto base = reconstruct_and_render(clean, encoder);
  auto compare = [&](const Image& other) {
    const auto r = reconstruct_and_render(other, encoder);
    return DistortionReport{"", psnr(base.render, r.render), ssim(base.render, r.render),
                            geometry::chamfer_accelerated(base.cloud, r.cloud)};
  };
  const auto main = compare(perturbed);
  EvalReport report{main.psnr, main.ssim, main.cd, {}};
  for (const auto& d : distortions) {
    auto sub = compare(apply_distortion(perturbed, d));
    sub.name = d.name();
    report.distortions.push_back(std::move(sub));
  }
  return report;
}

nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

double parse_number_or_inf(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("expected a number or \"inf\", got \"" + s + "\"");
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["schema"] = 1;
  j["psnr"] = number_or_inf(report.psnr);
  j["ssim"] = report.ssim;
  j["cd"] = report.cd;
  j["lpips"] = nullptr;
  auto subs = nlohmann::json::array();
  for (const auto& d : report.distortions) {
    subs.push_back({{"name", d.name}, {"psnr", number_or_inf(d.psnr)}, {"ssim", d.ssim}, {"cd", d.cd}});
  }
  j["distortions"] = subs;
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  if (j.at("schema").get<int>() != 1) throw std::invalid_argument("unsupported eval report schema");
  EvalReport r{parse_number_or_inf(j.at("psnr")), j.at("ssim").get<double>(), j.at("cd").get<double>(), {}};
  for (const auto& d : j.at("distortions")) {
    r.distortions.push_back(
        {d.at("name").get<std::string>(), parse_number_or_inf(d.at("psnr")), d.at("ssim").get<double>(),
         d.at("cd").get<double>()});
  }
  return r;
}

}  // namespace geocloak::metrics
