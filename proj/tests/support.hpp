#pragma once

// Shared helpers for the test binaries: seeded random data, central
// differences, golden files and scratch directories.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geocloak/geometry.hpp"
#include "geocloak/image.hpp"
#include "geocloak/ndiff.hpp"
#include "geocloak/random.hpp"

namespace geocloak::testkit {

inline std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Image random_image(Rng& rng, std::size_t h, std::size_t w) {
  return Image(h, w, random_values(rng, Image::kChannels * h * w, 0.0, 1.0));
}

template <std::size_t D>
geometry::PointCloud<D> random_cloud(Rng& rng, std::size_t n, double lo = -0.5, double hi = 0.5) {
  geometry::PointCloud<D> c(n);
  for (auto& p : c) {
    for (double& x : p) x = rng.uniform(lo, hi);
  }
  return c;
}

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ‖a − b‖ / max(‖a‖, ‖b‖), or the absolute error when both are ~0.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

// FNV-1a over the bit patterns of the doubles.
inline std::uint64_t hash_doubles(std::span<const double> values) {
  std::uint64_t h = 1469598103934665603ull;
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

inline std::filesystem::path golden_path(const std::string& name) {
  return std::filesystem::path(GEOCLOAK_GOLDEN_DIR) / name;
}

// Loads a golden JSON file. When GEOCLOAK_UPDATE_GOLDEN=1 and the file is
// missing, writes `current` and returns it; goldens are never overwritten.
inline nlohmann::json golden(const std::string& name, const nlohmann::json& current) {
  const auto path = golden_path(name);
  if (!std::filesystem::exists(path)) {
    const char* update = std::getenv("GEOCLOAK_UPDATE_GOLDEN");
    if (update && std::string(update) == "1") {
      std::ofstream(path) << current.dump(2) << '\n';
      return current;
    }
    ADD_FAILURE() << "missing golden file " << path;
    return current;
  }
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("geocloak_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace geocloak::testkit
