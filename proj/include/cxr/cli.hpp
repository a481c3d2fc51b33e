#pragma once
// Command-line driver: synth, train-findings, train-diagnosis, evaluate,
// explain. Exit codes: 0 success, 1 usage, 2 data, 3 numerical failure.

#include <exception>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/findings.hpp"
#include "cxr/kvfile.hpp"
#include "cxr/tree.hpp"

namespace cxr::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int exit_code_for(const std::exception& e);

struct ConfigKey {
  std::string_view key;  // "section.name"
  std::string_view default_value;
  std::string_view help;
};

// Every accepted config key with its default.
std::span<const ConfigKey> config_keys();

// Defaults, then the config file, then "section.key=value" overrides.
// Unknown keys are rejected so typos cannot silently fall back to defaults.
class RunConfig {
 public:
  static RunConfig resolve(const std::filesystem::path* file,
                           const std::vector<std::string>& overrides);

  std::string get(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::size_t get_size(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  void set(std::string_view key, std::string value);

  TrainConfig findings_train() const;
  TrainConfig head_train() const;
  TreeParams tree_params() const;

  std::string to_text() const;
  // Writes <dir>/run_config.txt.
  void write_snapshot(const std::filesystem::path& dir) const;

 private:
  // Prefixes a value error with where the key was set ("<file> line N").
  std::string located(std::string_view key, const std::string& message) const;

  KeyValueFile kv_;
  std::map<std::string, std::string> source_;
};

int run(int argc, char** argv);

}  // namespace cxr::cli
