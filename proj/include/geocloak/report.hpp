#pragma once

// JSON artifacts: cloak reports and the run manifest written beside every
// command's outputs.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geocloak/cloak.hpp"

namespace geocloak::report {

inline constexpr int kSchema = 1;
inline constexpr const char* kToolVersion = "0.1.0";

// Honour SOURCE_DATE_EPOCH: when set, timestamps come from it and elapsed
// times are written as 0 so reruns are byte-identical.
bool reproducible_timestamps();
std::string wall_clock_utc();  // ISO 8601
double reported_elapsed_ms(double measured);

nlohmann::json cloak_config_json(const cloak::CloakConfig& config);

// `final_cd` is measured on the shipped (8-bit) image; `linf` likewise.
nlohmann::json cloak_report(const cloak::CloakConfig& config, const cloak::CloakResult& result, double final_cd,
                            double linf);

struct Manifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::map<std::string, std::uint64_t> seeds;

  nlohmann::json to_json() const;
};

std::filesystem::path manifest_path(const std::filesystem::path& output);

// Two-space indented, trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace geocloak::report
