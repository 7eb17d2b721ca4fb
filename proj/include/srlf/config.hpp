#pragma once

// Flat key=value run configuration. One setting per line, '#' starts a
// comment, unknown keys are rejected and every problem is reported at once.

#include "srlf/data.hpp"
#include "srlf/training.hpp"

#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srlf {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct RunConfig {
  TrainConfig train;
  SynthConfig synth;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> embeddings;
  std::filesystem::path out = "out";
};

struct ConfigKey {
  std::string_view key;
  std::string_view description;
};

/// Every accepted key with a one-line description.
const std::vector<ConfigKey>& config_keys();

/// Applies one setting; returns an error message on failure.
std::optional<std::string> apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Reads settings on top of `base`. Throws ConfigError listing every bad line.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base = {});

/// Applies "key=value" overrides; throws ConfigError listing every bad one.
void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides);

/// Validation of the assembled config (training and synthesis parts).
std::vector<std::string> validate(const RunConfig& config);

/// Canonical key=value text; parse_config(echo(c)) reproduces c.
std::string echo(const RunConfig& config);

std::string_view to_string(Ablation a);
std::string_view to_string(ReturnMode m);
std::string_view to_string(AgentView v);
std::string_view to_string(NoPolicyActions a);

}  // namespace srlf
