#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "ceal/loop.hpp"

namespace ceal {

/// Configuration problem. field() names the offending key path when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Builds a validated config from JSON. Unknown keys are rejected; missing
/// optional keys take their documented defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Fully resolved form; config_from_json(config_to_json(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& config);

ExperimentConfig parse_config(const std::filesystem::path& path);

}  // namespace ceal
