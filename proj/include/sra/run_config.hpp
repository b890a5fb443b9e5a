#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sra/explain.hpp"
#include "sra/metrics.hpp"
#include "sra/model.hpp"
#include "sra/trainer.hpp"

namespace sra {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Profile names accepted by --profile and the `profile` key.
const std::vector<std::string>& profile_names();

/// Every key with the value the named profile gives it.
std::map<std::string, std::string> profile_defaults(const std::string& profile);

/// `key = value` lines; `#` starts a comment; blank lines ignored. Keys must
/// be known and appear once.
std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

struct RunConfig {
  std::string profile = "desk";
  ModelConfig model;
  TrainConfig train;
  ExtractionStrategy strategy;
  ReportOptions report;
  int min_freq = 1;
  std::uint64_t split_seed = 0;
  std::string data;
  std::string split;
  std::string out_dir = "out";
  unsigned threads = 0;

  // Resolved key/value pairs and where each came from (profile name, file, flag).
  std::map<std::string, std::string> values;
  std::map<std::string, std::string> sources;

  nlohmann::json to_json() const;
};

/// Layers profile defaults, then the file, then flag overrides. The profile
/// itself is taken from the flags, else the file, else "desk".
RunConfig resolve_config(const std::map<std::string, std::string>& file_values, const std::string& file_origin,
                         const std::map<std::string, std::string>& flag_values);

// Typed view of a fully resolved key map. Throws ConfigError on bad values.
RunConfig config_from_values(const std::map<std::string, std::string>& values);

ExtractionStrategy parse_strategy(const std::string& name, double rho, double tau);

}  // namespace sra
