#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace roughflow::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kSchemaViolation = 2, kNumericalFailure = 3 };

/// Config does not match the schema; `path()` is the offending field, e.g. "pipeline[2].step".
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct CheckResult {
  std::string name;
  std::string check;
  std::string tolerance;
  double value;
  double threshold;
  bool pass;
};

struct RunRecord {
  std::string config_sha256;
  std::string input_sha1;
  std::vector<CheckResult> checks;
  double wall_time = 0.0;
  bool pass() const;
};

struct RunOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

nlohmann::json read_config(const std::filesystem::path& file);

/// Parses and type-checks the whole pipeline without running it.
void validate_config(const nlohmann::json& config);

/// Runs the pipeline and writes record.jsonl, timing.json and the data files.
RunRecord run_config(const nlohmann::json& config, const std::string& raw_text, const std::filesystem::path& out_dir,
                     const RunOptions& options, std::ostream& log);

/// Output directory: --out, then ROUGHFLOW_OUT, then the config's output_dir.
std::filesystem::path resolve_output_dir(const nlohmann::json& config, const RunOptions& options);

/// Alphabetized kernels, vector-field families and checks; kernels declared
/// in `config` are included.
std::string list_registry(const nlohmann::json* config = nullptr);

/// Full command handlers returning the process exit code.
int command_run(const std::filesystem::path& file, const RunOptions& options, std::ostream& out, std::ostream& err);
int command_validate(const std::filesystem::path& file, std::ostream& out, std::ostream& err);
int command_list(const std::optional<std::filesystem::path>& config, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& data);
/// Git blob id: sha1("blob <size>\0" + data).
std::string git_blob_sha1(const std::string& data);

}  // namespace roughflow::cli
