#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "hprn/metrics.hpp"
#include "hprn/model.hpp"
#include "hprn/trainer.hpp"

namespace hprn {

/// Unparseable or unknown configuration entry.
class ConfigError : public IoError {
 public:
  using IoError::IoError;
};

/// Everything a subcommand can be configured with. Keys match field names.
struct RunConfig {
  HPRNConfig model;
  TrainConfig train;
  PsnrFormula psnr_formula = PsnrFormula::standard;
  int precision = 32;  // 32 or 64

  void validate() const;
};

using ConfigMap = std::map<std::string, std::string>;

/// Lines of `key = value`; '#' starts a comment; blank lines are ignored.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);
/// Parses `key=value`.
std::pair<std::string, std::string> parse_assignment(const std::string& entry);

void apply_config(RunConfig& cfg, const ConfigMap& entries);
void apply_config(RunConfig& cfg, const std::string& key, const std::string& value);

/// Every key with its current value, in the same syntax parse_config_text reads.
std::string format_config(const RunConfig& cfg);

}  // namespace hprn
