#pragma once

#include <filesystem>
#include <string>

#include "classic/error.hpp"
#include "classic/harness/sequence.hpp"

namespace classic::cli {

/// A config problem tied to a key and, when known, a line of the file.
class ConfigFileError : public ConfigError {
 public:
  ConfigFileError(const std::string& key, std::size_t line, const std::string& what);
  const std::string& key() const { return key_; }
  std::size_t line() const { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

/// Parses "key = value" lines under [model] [training] [losses] [data] [run].
/// '#' and ';' start comments. Unknown sections or keys, duplicates and bad
/// values throw ConfigFileError; data.source has no default and is required.
/// Every other field falls back to the RunConfig default.
harness::RunConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
harness::RunConfig load_config(const std::filesystem::path& path);

/// "full", "none", "" or a comma list of -CED / -CKS / -CSC (case-insensitive).
losses::Ablation parse_ablation(const std::string& text);

/// The config back as text (round-trips through parse_config).
std::string format_config(const harness::RunConfig& config);

}  // namespace classic::cli
