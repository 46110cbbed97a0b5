#pragma once

#include "dichotomy/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dichotomy {

inline constexpr int scenario_schema_version = 1;
inline constexpr const char* toolkit_version = "0.1.0";

struct Diagnostic {
    enum class Severity { Error, Warning };

    Severity severity = Severity::Error;
    /// JSON-pointer-like location, e.g. "/task_params/datko/gamma".
    std::string path;
    std::string message;
};

[[nodiscard]] std::string format(const Diagnostic& d);

/// Schema, range and task-order diagnostics; never runs numerics.
[[nodiscard]] std::vector<Diagnostic> validate_scenario(const nlohmann::json& scenario);

/// Parses the file first; a parse failure is reported as a diagnostic.
[[nodiscard]] std::vector<Diagnostic> validate_scenario_file(const std::filesystem::path& path);

[[nodiscard]] bool has_errors(const std::vector<Diagnostic>& diagnostics);

struct RunFlags {
    std::filesystem::path out_dir = ".";
    bool validate_only = false;
    std::optional<std::uint64_t> seed_override;
    Scalar tolerance_scale = 1;
};

enum ExitCode : int { exit_pass = 0, exit_failed = 1, exit_input = 2, exit_numerical = 3 };

/// Runs the scenario's tasks in order, writes report.json and curve CSVs to
/// `out_dir`, and returns the exit code. Diagnostics go to `err`.
[[nodiscard]] int run_scenario(const std::filesystem::path& path, const RunFlags& flags, std::ostream& err);

/// Same on an already parsed scenario; returns the report alongside the exit code.
struct RunResult {
    int exit_code = exit_pass;
    nlohmann::json report;
};

[[nodiscard]] RunResult run_scenario(const nlohmann::json& scenario, const RunFlags& flags, std::ostream& err);

}  // namespace dichotomy
