#pragma once

#include "repcap/engine.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace repcap::cli {

struct SweepAxis {
    std::string name;  // substituted as `$name` in literals, policies and delta
    std::vector<double> values;
};

struct BoundSettings {
    std::string kind = "auto";  // auto | pause | homogeneous
    std::string estimator = "exact";  // exact | mc
    std::uint64_t paths = 100000;
    int grid = 16;
};

struct ExperimentConfig {
    std::string name;
    std::vector<std::string> servers;  // distribution literals, may contain `$name`
    std::string delta = "0";
    std::vector<std::string> policies;
    std::string mode = "saturated";  // saturated | poisson
    std::vector<double> lambdas;
    std::uint64_t jobs = 100000;
    std::uint64_t runs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<SweepAxis> sweep;
    BoundSettings bound;
    std::uint64_t state_cap = 1'000'000;
};

/// Throws ConfigError on unknown keys, wrong types or missing fields.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

/// Command-line values that take precedence over the file.
struct Overrides {
    std::optional<std::uint64_t> seed, runs, jobs, paths;
    std::optional<std::string> estimator;
    std::optional<int> grid;
};
void apply(ExperimentConfig& c, const Overrides& o);

/// 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_digest(const ExperimentConfig& c);

/// One concrete system per sweep value (a single point without a sweep).
struct SweepPoint {
    std::optional<double> value;
    SystemConfig system;
    std::vector<PolicyInstance> policies;
    std::vector<std::string> policy_specs;
};
std::vector<SweepPoint> expand(const ExperimentConfig& c);

/// `norep`, ..., or `tabular:PATH` for a policy table written by the mdp command.
PolicyInstance make_policy(const std::string& spec, int num_servers);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// Worst outcome among rows: 0 ok, 2 contract violation, 3 numeric failure.
    int status = 0;
};

struct RunOptions {
    unsigned threads = 1;
    std::string policy_out;  // mdp: where to write policy tables
};

Table cmd_analytic(const ExperimentConfig& c, const RunOptions& o);
Table cmd_simulate(const ExperimentConfig& c, const RunOptions& o);
Table cmd_bound(const ExperimentConfig& c, const RunOptions& o);
Table cmd_mdp(const ExperimentConfig& c, const RunOptions& o);

/// Comment line with the run time, header, rows; every row ends with digest and version.
std::string to_csv(const Table& t, const std::string& command, const std::string& digest);

/// Entry point used by the `repcap` binary. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace repcap::cli
