#include "geocloak/report.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "geocloak/metrics.hpp"

namespace geocloak::report {

namespace {

const char* source_date_epoch() {
  const char* v = std::getenv("SOURCE_DATE_EPOCH");
  return v && *v ? v : nullptr;
}

}  // namespace

bool reproducible_timestamps() { return source_date_epoch() != nullptr; }

std::string wall_clock_utc() {
  std::time_t t = 0;
  if (const char* epoch = source_date_epoch()) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double reported_elapsed_ms(double measured) { return reproducible_timestamps() ? 0.0 : measured; }

nlohmann::json cloak_config_json(const cloak::CloakConfig& config) {
  nlohmann::json j;
  j["mode"] = cloak::to_string(config.mode);
  j["eps"] = config.epsilon;
  j["alpha"] = config.alpha;
  j["steps"] = config.steps;
  j["seed"] = config.seed;
  j["view"] = config.view ? nlohmann::json(config.view->to_string()) : nlohmann::json(nullptr);
  if (config.pattern) {
    const auto& p = *config.pattern;
    j["pattern"] = {{"kind", p.kind == patterns::PatternKind::Predefined ? "predefined" : "customized"},
                    {"dims", p.dims()},
                    {"points", p.size()},
                    {"source", p.source}};
  } else {
    j["pattern"] = nullptr;
  }
  return j;
}

nlohmann::json cloak_report(const cloak::CloakConfig& config, const cloak::CloakResult& result, double final_cd,
                            double linf) {
  nlohmann::json j;
  j["schema"] = kSchema;
  j["config"] = cloak_config_json(config);
  j["initial_loss"] = result.initial_loss;
  j["loss_trace"] = result.loss_trace;
  j["best_index"] = result.best_index;
  j["best_loss"] = result.best_loss();
  j["final_cd"] = metrics::number_or_inf(final_cd);
  j["linf"] = linf;
  j["elapsed_ms"] = reported_elapsed_ms(result.elapsed_ms);
  return j;
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json j;
  j["schema"] = kSchema;
  j["command"] = command;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["seeds"] = seeds;
  j["tool_version"] = kToolVersion;
  j["wall_clock"] = wall_clock_utc();
  return j;
}

std::filesystem::path manifest_path(const std::filesystem::path& output) {
  auto p = output;
  p += ".manifest.json";
  return p;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  return nlohmann::json::parse(in);
}

}  // namespace geocloak::report
