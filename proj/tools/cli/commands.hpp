#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"

namespace esqpt::cli {

enum ExitStatus : int { kSuccess = 0, kConfigFailure = 2, kNumericFailure = 3 };

struct Invocation {
  std::string subcommand;
  std::filesystem::path config;
  std::filesystem::path out;
  Overrides overrides;
};

/// Collects the files a subcommand writes into its output directory.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root);
  const std::filesystem::path& root() const { return root_; }
  /// Opens `name` for writing, records it and hands the stream to `fill`.
  template <class F>
  void write(const std::string& name, F&& fill);
  void write_json(const std::string& name, const json& value);
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::ofstream open(const std::string& name);
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

/// Runs one subcommand on a resolved config; returns its summary (also
/// printed by the front-end).
json run_subcommand(const RunConfig& config, OutputDir& out);

/// Full invocation: parse, validate, run, manifest. Never throws.
int run(const Invocation& inv, std::ostream& log);

template <class F>
void OutputDir::write(const std::string& name, F&& fill) {
  std::ofstream os = open(name);
  fill(os);
  if (!os) throw std::runtime_error("failed writing " + (root_ / name).string());
}

}  // namespace esqpt::cli
