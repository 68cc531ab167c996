#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradest/evolve.hpp"
#include "gradest/grid.hpp"
#include "gradest/verify.hpp"

namespace gradest {

inline constexpr int kScenarioSchemaVersion = 1;

/// A scenario configuration: JSON with a fixed schema version. Unknown keys
/// anywhere are a ConfigError.
struct Scenario {
    std::string name;
    std::string statement;  // the result the scenario exercises
    std::string description;
    nlohmann::ordered_json model;
    nlohmann::ordered_json domain;
    nlohmann::ordered_json initial;
    nlohmann::ordered_json evolve;   // null: no time evolution
    nlohmann::ordered_json barrier;  // null: none
    nlohmann::ordered_json checks = nlohmann::ordered_json::array();
    nlohmann::ordered_json fault;    // null: none (negative controls plant one)
    nlohmann::ordered_json output = nlohmann::ordered_json::object();
    std::uint64_t seed = 11;
    bool expect_failure = false;

    static Scenario from_json(const nlohmann::ordered_json& j);
    static Scenario load(const std::filesystem::path& path);
    nlohmann::ordered_json to_json() const;
    /// Cross-block rules (check/boundary compatibility, required blocks).
    void validate() const;
};

DomainSpec parse_domain(const nlohmann::ordered_json& block);

struct RunOptions {
    std::filesystem::path out_root;  // empty: no artifacts
    std::optional<std::uint64_t> seed;
    double tolerance_scale = 1.0;
    Exec exec = Exec::Parallel;
    std::ostream* log = nullptr;
};

struct ScenarioResult {
    std::string name;
    std::vector<VerificationReport> reports;
    nlohmann::ordered_json info = nlohmann::ordered_json::object();
    std::vector<Checkpoint> checkpoints;
    std::filesystem::path artifact_dir;

    bool pass() const;
    nlohmann::ordered_json to_json() const;
};

/// Builds everything, evolves, runs the checks and writes artifacts. Throws
/// ConfigError / NumericalFailure; check failures are reported, not thrown.
ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& opt);

/// 0 pass, 2 check failure.
int exit_status(const ScenarioResult& r);

struct ScenarioListing {
    std::string file;
    std::string name;
    std::string statement;
    std::string description;
};

/// *.json files of `dir` sorted by file name; files that fail to parse are
/// listed with the error as description.
std::vector<ScenarioListing> list_scenarios(const std::filesystem::path& dir);

/// Sets a dotted path ("model.p", "domain.resolution") inside a config.
void set_path(nlohmann::ordered_json& j, const std::string& dotted, const nlohmann::ordered_json& value);

struct SweepRow {
    nlohmann::ordered_json assignment;
    std::string name;
    int status = 0;  // 0 pass, 2 check failure, 1 error
    double worst_margin = 0.0;
    double best_ratio = 0.0;
    std::string error;
};

/// Cartesian product of `axes` (dotted path -> list of values) applied to
/// `base`; runs up to `workers` scenarios concurrently, each in its own
/// artifact directory. Rows come back in product order.
std::vector<SweepRow> run_sweep(const nlohmann::ordered_json& base, const nlohmann::ordered_json& axes, int workers,
                                const RunOptions& opt);
std::string sweep_table(const std::vector<SweepRow>& rows);

/// Writes u to `path` in the format named by the extension (.csv or .bin).
void write_snapshot(const std::filesystem::path& path, const GridFunction& u);

}  // namespace gradest
