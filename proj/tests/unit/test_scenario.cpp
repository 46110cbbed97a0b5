#include "dichotomy/scenario.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dichotomy;
using nlohmann::json;

namespace {

json base_scenario() {
    return json::parse(R"({
        "schema_version": 1,
        "system": {"example": "Ex2_5"},
        "grid": {"t_max": 6, "time_points": 13},
        "tasks": ["compatibility", "envelope"]
    })");
}

bool mentions(const std::vector<Diagnostic>& ds, const std::string& path, const std::string& needle) {
    for (const auto& d : ds) {
        if (d.path == path && d.message.find(needle) != std::string::npos) return true;
    }
    return false;
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("dichotomy_unit_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

RunFlags flags_for(const std::filesystem::path& dir) {
    RunFlags flags;
    flags.out_dir = dir;
    return flags;
}

RunFlags validate_only_flags(const std::filesystem::path& dir) {
    RunFlags flags = flags_for(dir);
    flags.validate_only = true;
    return flags;
}

RunFlags seeded_flags(const std::filesystem::path& dir, std::uint64_t seed) {
    RunFlags flags = flags_for(dir);
    flags.seed_override = seed;
    return flags;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("a clean similarity scenario validates without diagnostics", "[scenario][validate]") {
    auto s = base_scenario();
    s["system"] = {{"example", "Ex2_6"}, {"params", {{"a", 1}}}};
    REQUIRE(validate_scenario(s).empty());
}

TEST_CASE("task order violations are reported", "[scenario][validate]") {
    auto s = base_scenario();
    s["tasks"] = {"datko", "compatibility"};
    s["task_params"] = {{"datko", {{"gamma", 1}}}};
    const auto ds = validate_scenario(s);
    REQUIRE(has_errors(ds));
    REQUIRE(mentions(ds, "/tasks/0", "must come after"));
}

TEST_CASE("nonpositive gamma is reported at its path", "[scenario][validate]") {
    auto s = base_scenario();
    s["tasks"] = {"datko"};
    s["task_params"] = {{"datko", {{"gamma", -0.5}}}};
    const auto ds = validate_scenario(s);
    REQUIRE(has_errors(ds));
    bool found = false;
    for (const auto& d : ds) found |= d.path == "/task_params/datko/gamma";
    REQUIRE(found);
}

TEST_CASE("structural problems are all reported", "[scenario][validate]") {
    auto s = base_scenario();
    s["system"] = {{"example", "Ex2_6"}, {"params", {{"a", 0}}}};
    s["tasks"] = {"envelope", "envelope", "teleport"};
    s["grid"]["time_points"] = 1;
    const auto ds = validate_scenario(s);
    REQUIRE(ds.size() >= 4);
    REQUIRE(mentions(ds, "/system/params/a", ""));
    REQUIRE(mentions(ds, "/grid/time_points", ""));
}

TEST_CASE("beta not below gamma is a warning only", "[scenario][validate]") {
    auto s = base_scenario();
    s["tasks"] = {"datko"};
    s["task_params"] = {{"datko", {{"gamma", 1}, {"beta", 2}}}};
    const auto ds = validate_scenario(s);
    REQUIRE_FALSE(has_errors(ds));
    REQUIRE_FALSE(ds.empty());
    REQUIRE(ds.front().severity == Diagnostic::Severity::Warning);
}

TEST_CASE("inline ODE systems validate", "[scenario][validate]") {
    const auto s = json::parse(R"({
        "schema_version": 1,
        "system": {
            "family": {"kind": "ode", "A0": [[-1, 0], [0, 2]]},
            "projection": {"kind": "constant", "P": [[1, 0], [0, 0]]}
        },
        "tasks": ["envelope"]
    })");
    REQUIRE(validate_scenario(s).empty());
}

TEST_CASE("malformed input exits with 2", "[scenario][run]") {
    const auto dir = fresh_dir("malformed");
    std::filesystem::create_directories(dir);
    const auto path = dir / "bad.json";
    std::ofstream(path) << "{ \"schema_version\": 1, \"tasks\": [";
    std::ostringstream err;
    REQUIRE(run_scenario(path, flags_for(dir / "out"), err) == exit_input);
    REQUIRE_FALSE(err.str().empty());

    auto invalid = base_scenario();
    invalid["tasks"] = json::array();
    std::ostringstream err2;
    REQUIRE(run_scenario(invalid, flags_for(dir / "out2"), err2).exit_code == exit_input);
}

TEST_CASE("a passing scenario exits 0 and writes report and curves", "[scenario][run]") {
    const auto dir = fresh_dir("pass");
    std::ostringstream err;
    const auto result = run_scenario(base_scenario(), flags_for(dir), err);
    REQUIRE(result.exit_code == exit_pass);
    REQUIRE(result.report["exit_code"] == 0);
    REQUIRE(result.report["schema_version"] == scenario_schema_version);
    REQUIRE(std::filesystem::exists(dir / "report.json"));
    const auto csv = slurp(dir / "p_forward_norm.csv");
    REQUIRE(csv.rfind("series,abscissa,value,error_estimate\n", 0) == 0);
}

TEST_CASE("validate-only runs no numerics", "[scenario][run]") {
    const auto dir = fresh_dir("validate_only");
    std::ostringstream err;
    const auto result = run_scenario(base_scenario(), validate_only_flags(dir), err);
    REQUIRE(result.exit_code == exit_pass);
    REQUIRE_FALSE(std::filesystem::exists(dir / "p_forward_norm.csv"));
}

TEST_CASE("a failed hypothesis exits with 1", "[scenario][run]") {
    auto s = base_scenario();
    s["system"] = {{"example", "Ex3_2"}};
    s["tasks"] = {"datko"};
    s["task_params"] = {{"datko", {{"p", 2}, {"gamma", 0.5}, {"beta", 1}}}};
    std::ostringstream err;
    REQUIRE(run_scenario(s, flags_for(fresh_dir("fail")), err).exit_code == exit_failed);
}

TEST_CASE("a divergent tail exits with 3", "[scenario][run]") {
    auto s = base_scenario();
    s["tasks"] = {"datko"};
    s["task_params"] = {{"datko", {{"p", 2}, {"gamma", 3.5}, {"beta", 1}}}};
    std::ostringstream err;
    const auto result = run_scenario(s, flags_for(fresh_dir("divergent")), err);
    REQUIRE(result.exit_code == exit_numerical);
}

TEST_CASE("two runs produce byte-identical reports", "[scenario][run]") {
    auto s = base_scenario();
    s["tasks"] = {"axioms", "compatibility", "envelope", "datko"};
    s["task_params"] = {{"datko", {{"gamma", 1.5}, {"beta", 1}}}};
    const auto a = fresh_dir("det_a");
    const auto b = fresh_dir("det_b");
    std::ostringstream err;
    REQUIRE(run_scenario(s, flags_for(a), err).exit_code == exit_pass);
    REQUIRE(run_scenario(s, flags_for(b), err).exit_code == exit_pass);
    REQUIRE(slurp(a / "report.json") == slurp(b / "report.json"));
    REQUIRE(slurp(a / "datko_functional.csv") == slurp(b / "datko_functional.csv"));
}

TEST_CASE("seed override is recorded in provenance", "[scenario][run]") {
    std::ostringstream err;
    const auto result = run_scenario(base_scenario(), seeded_flags(fresh_dir("seed"), 42), err);
    REQUIRE(result.report["provenance"]["direction_seed"] == 42);
}
