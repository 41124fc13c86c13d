#include "cli.hpp"

#include "repcap/analytic.hpp"
#include "repcap/bounds.hpp"
#include "repcap/error.hpp"
#include "repcap/literal.hpp"
#include "repcap/mdp.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace repcap::cli {

namespace {

using json = nlohmann::json;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

template <class T>
T get(const json& j, const char* key, const char* type) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        config_error(fmt::format("'{}' must be {}", key, type));
    }
}

// Replaces `$name` where it is not followed by another identifier character.
std::string substitute(std::string text, const std::string& name, double value) {
    const std::string needle = "$" + name;
    const std::string repl = fmt::format("{}", value);
    for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos)) {
        const std::size_t end = pos + needle.size();
        if (end < text.size() && (std::isalnum(static_cast<unsigned char>(text[end])) || text[end] == '_')) {
            pos = end;
            continue;
        }
        text.replace(pos, needle.size(), repl);
        pos += repl.size();
    }
    return text;
}

std::string cell(double x) { return fmt::format("{}", x); }

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

struct Row {
    std::vector<std::string> cells;
    int status = 0;
};

// Runs `body`; a library error becomes an error cell so one bad sweep point
// does not discard the rest of the table.
Row guarded(std::vector<std::string> prefix, std::size_t width, const std::function<std::vector<std::string>()>& body) {
    Row r;
    try {
        auto rest = body();
        r.cells = std::move(prefix);
        r.cells.insert(r.cells.end(), rest.begin(), rest.end());
        r.cells.emplace_back();
        return r;
    } catch (const Error& e) {
        r.status = e.is_numeric() ? 3 : 2;
        r.cells = std::move(prefix);
        r.cells.resize(r.cells.size() + width);
        r.cells.emplace_back(e.what());
        return r;
    }
}

// Tasks run on a small pool; results land in task order, so output does not
// depend on scheduling.
Table fan_out(std::vector<std::string> header, std::size_t n, unsigned threads,
              const std::function<std::vector<Row>(std::size_t)>& task) {
    std::vector<std::vector<Row>> results(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) results[i] = task(i);
    };
    const unsigned pool_size = static_cast<unsigned>(std::min<std::size_t>(std::max(threads, 1u), std::max<std::size_t>(n, 1)));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < pool_size; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    Table table;
    table.header = std::move(header);
    table.header.emplace_back("error");
    for (auto& rs : results)
        for (auto& r : rs) {
            table.status = std::max(table.status, r.status);
            table.rows.push_back(std::move(r.cells));
        }
    return table;
}

std::vector<std::string> sweep_cells(const ExperimentConfig& c, const SweepPoint& p) {
    if (!p.value) return {"", ""};
    return {c.sweep->name, cell(*p.value)};
}

bool homogeneous(const SystemConfig& s) {
    return std::all_of(s.servers.begin(), s.servers.end(), [&](const auto& d) { return d == s.servers.front(); });
}

std::string join(const std::vector<Time>& xs, char sep) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? std::string(1, sep) : "") + cell(xs[i]);
    return out;
}

std::string policy_path(const RunOptions& o, std::size_t index, std::size_t count) {
    if (o.policy_out.empty()) return {};
    if (count == 1) return o.policy_out;
    const std::filesystem::path p(o.policy_out);
    return (p.parent_path() / fmt::format("{}-{}{}", p.stem().string(), index, p.extension().string())).string();
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) config_error("config must be a JSON object");
    static const std::set<std::string> known{"name", "servers", "k", "delta", "policies", "mode", "lambdas",
                                             "jobs", "runs", "seed", "sweep", "bound", "state_cap"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) config_error(fmt::format("unknown config key '{}'", key));

    ExperimentConfig c;
    if (j.contains("name")) c.name = get<std::string>(j, "name", "a string");
    if (!j.contains("servers")) config_error("config needs 'servers'");
    c.servers = get<std::vector<std::string>>(j, "servers", "a list of distribution literals");
    if (c.servers.empty()) config_error("'servers' must not be empty");
    if (j.contains("k")) {
        const int k = get<int>(j, "k", "an integer");
        if (c.servers.size() != 1 || k < 1) config_error("'k' repeats a single server literal and must be >= 1");
        c.servers.assign(static_cast<std::size_t>(k), c.servers.front());
    }
    if (j.contains("delta")) {
        const auto& d = j.at("delta");
        if (d.is_number()) c.delta = cell(d.get<double>());
        else if (d.is_string()) c.delta = d.get<std::string>();
        else config_error("'delta' must be a number or an expression string");
    }
    if (j.contains("policies")) c.policies = get<std::vector<std::string>>(j, "policies", "a list of policy specs");
    if (j.contains("mode")) c.mode = get<std::string>(j, "mode", "a string");
    if (c.mode != "saturated" && c.mode != "poisson") config_error("'mode' must be saturated or poisson");
    if (j.contains("lambdas")) c.lambdas = get<std::vector<double>>(j, "lambdas", "a list of rates");
    if (j.contains("jobs")) c.jobs = get<std::uint64_t>(j, "jobs", "a positive integer");
    if (j.contains("runs")) c.runs = get<std::uint64_t>(j, "runs", "a positive integer");
    if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "a nonnegative integer");
    if (j.contains("state_cap")) c.state_cap = get<std::uint64_t>(j, "state_cap", "a positive integer");
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        if (!s.is_object() || !s.contains("param") || !s.contains("values"))
            config_error("'sweep' needs 'param' and 'values'");
        SweepAxis axis{get<std::string>(s, "param", "a string"), get<std::vector<double>>(s, "values", "a list of numbers")};
        if (axis.name.empty() || axis.values.empty()) config_error("'sweep' needs a name and at least one value");
        c.sweep = std::move(axis);
    }
    if (j.contains("bound")) {
        const auto& b = j.at("bound");
        if (!b.is_object()) config_error("'bound' must be an object");
        for (const auto& [key, _] : b.items())
            if (key != "kind" && key != "estimator" && key != "paths" && key != "grid")
                config_error(fmt::format("unknown bound key '{}'", key));
        if (b.contains("kind")) c.bound.kind = get<std::string>(b, "kind", "a string");
        if (b.contains("estimator")) c.bound.estimator = get<std::string>(b, "estimator", "a string");
        if (b.contains("paths")) c.bound.paths = get<std::uint64_t>(b, "paths", "a positive integer");
        if (b.contains("grid")) c.bound.grid = get<int>(b, "grid", "an integer");
    }
    return c;
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["servers"] = c.servers;
    j["delta"] = c.delta;
    j["policies"] = c.policies;
    j["mode"] = c.mode;
    j["lambdas"] = c.lambdas;
    j["jobs"] = c.jobs;
    j["runs"] = c.runs;
    if (c.seed) j["seed"] = *c.seed;
    if (c.sweep) j["sweep"] = {{"param", c.sweep->name}, {"values", c.sweep->values}};
    j["bound"] = {{"kind", c.bound.kind}, {"estimator", c.bound.estimator}, {"paths", c.bound.paths}, {"grid", c.bound.grid}};
    j["state_cap"] = c.state_cap;
    return j;
}

void apply(ExperimentConfig& c, const Overrides& o) {
    if (o.seed) c.seed = o.seed;
    if (o.runs) c.runs = *o.runs;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.paths) c.bound.paths = *o.paths;
    if (o.estimator) c.bound.estimator = *o.estimator;
    if (o.grid) c.bound.grid = *o.grid;
}

std::string config_digest(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

PolicyInstance make_policy(const std::string& spec, int num_servers) {
    if (spec.starts_with("tabular:")) {
        const std::string path = spec.substr(8);
        std::ifstream in(path);
        if (!in) config_error("cannot read policy table " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        return std::make_shared<TabularPolicy>(TabularPolicy::from_csv(buf.str(), num_servers));
    }
    return parse_policy(spec, num_servers);
}

std::vector<SweepPoint> expand(const ExperimentConfig& c) {
    if (!c.seed) config_error("a seed is required (config 'seed' or --seed)");
    if (c.jobs < 1) config_error("'jobs' must be >= 1");
    if (c.runs < 1) config_error("'runs' must be >= 1");
    if (c.mode == "poisson" && c.lambdas.empty()) config_error("poisson mode needs 'lambdas'");
    if (c.bound.estimator != "exact" && c.bound.estimator != "mc") config_error("estimator must be exact or mc");
    if (c.bound.kind != "auto" && c.bound.kind != "pause" && c.bound.kind != "homogeneous")
        config_error("bound kind must be auto, pause or homogeneous");
    if (c.bound.paths < 1) config_error("'paths' must be >= 1");

    std::vector<std::optional<double>> values;
    if (c.sweep)
        for (double v : c.sweep->values) values.emplace_back(v);
    else
        values.emplace_back();

    std::vector<SweepPoint> points;
    for (const auto& v : values) {
        auto sub = [&](const std::string& s) { return v ? substitute(s, c.sweep->name, *v) : s; };
        auto check = [](const std::string& s) {
            const auto dollar = s.find('$');
            if (dollar != std::string::npos) config_error(fmt::format("unbound sweep variable in '{}'", s));
            return s;
        };
        SweepPoint p;
        p.value = v;
        for (const auto& s : c.servers) p.system.servers.push_back(parse_distribution(check(sub(s))));
        p.system.delta = parse_number(check(sub(c.delta)));
        if (!(p.system.delta >= 0.0) || !std::isfinite(p.system.delta)) config_error("'delta' must be finite and >= 0");
        for (const auto& s : c.policies) {
            p.policy_specs.push_back(check(sub(s)));
            p.policies.push_back(make_policy(p.policy_specs.back(), p.system.num_servers()));
        }
        points.push_back(std::move(p));
    }
    return points;
}

Table cmd_analytic(const ExperimentConfig& c, const RunOptions& o) {
    const auto points = expand(c);
    return fan_out({"sweep_param", "sweep_value", "policy", "params", "throughput"}, points.size(), o.threads,
                   [&](std::size_t i) {
                       const auto& p = points[i];
                       const auto& ds = p.system.servers;
                       const Time delta = p.system.delta;
                       const auto pre = sweep_cells(c, p);
                       auto with = [&](std::string name) {
                           auto v = pre;
                           v.push_back(std::move(name));
                           return v;
                       };
                       std::vector<Row> rows;
                       rows.push_back(guarded(with("norep"), 2, [&]() -> std::vector<std::string> {
                           return {"", cell(throughput_norep(ds).value)};
                       }));
                       rows.push_back(guarded(with("fullrep"), 2, [&]() -> std::vector<std::string> {
                           return {"", cell(throughput_fullrep(ds, delta).value)};
                       }));
                       rows.push_back(guarded(with("upfront-best"), 2, [&]() -> std::vector<std::string> {
                           const auto best = best_partition(ds, delta);
                           return {best.partition.to_string(), cell(best.report.value)};
                       }));
                       for (std::size_t k = 0; k < p.policies.size(); ++k) {
                           const auto* up = dynamic_cast<const Upfront*>(p.policies[k].get());
                           if (!up) continue;
                           rows.push_back(guarded(with("upfront"), 2, [&]() -> std::vector<std::string> {
                               return {up->partition().to_string(), cell(throughput_upfront(up->partition(), ds, delta).value)};
                           }));
                       }
                       if (homogeneous(p.system)) {
                           const int k = p.system.num_servers();
                           std::optional<HomogeneousR> best;
                           rows.push_back(guarded(with("upfront-r*"), 2, [&]() -> std::vector<std::string> {
                               best = best_homogeneous_r(ds.front(), delta, k);
                               return {fmt::format("r={};attainable={}", best->r, best->attainable), cell(best->bound)};
                           }));
                           // The whole curve over r, as K / (r (E[X_{1:r}] + delta)).
                           if (best)
                               for (int r = 1; r <= k; ++r)
                                   rows.push_back(guarded(with("upfront-r"), 2, [&]() -> std::vector<std::string> {
                                       return {fmt::format("r={}", r), cell(k / best->cost[static_cast<std::size_t>(r - 1)])};
                                   }));
                       }
                       return rows;
                   });
}

Table cmd_simulate(const ExperimentConfig& c, const RunOptions& o) {
    const auto points = expand(c);
    if (c.policies.empty()) config_error("simulate needs at least one policy");
    const bool poisson = c.mode == "poisson";
    const std::vector<double> lambdas = poisson ? c.lambdas : std::vector<double>{0.0};
    const std::size_t per_point = c.policies.size() * lambdas.size();
    const std::vector<std::string> header{"sweep_param", "sweep_value", "policy", "mode", "lambda", "jobs", "runs", "seed",
                                          "throughput", "throughput_stderr", "computing_time", "computing_time_stderr",
                                          "work_rate", "work_rate_stderr", "mean_response", "response_stderr",
                                          "unstable"};
    return fan_out(header, points.size() * per_point, o.threads, [&](std::size_t i) {
        const auto& p = points[i / per_point];
        const std::size_t k = i % per_point / lambdas.size();
        const double lambda = lambdas[i % lambdas.size()];
        auto pre = sweep_cells(c, p);
        pre.insert(pre.end(), {p.policy_specs[k], c.mode, cell(lambda), std::to_string(c.jobs),
                               std::to_string(poisson ? c.runs : 1), std::to_string(*c.seed)});
        return std::vector<Row>{guarded(pre, 8, [&]() -> std::vector<std::string> {
            auto r = poisson ? run_poisson(p.system, p.policies[k], lambda, c.jobs, c.runs, *c.seed)
                             : run_saturated(p.system, p.policies[k], c.jobs, *c.seed);
            if (poisson) {
                // Rates and batch errors only exist for the saturated system.
                constexpr double na = std::numeric_limits<double>::quiet_NaN();
                r.throughput = r.throughput_stderr = r.computing_time_stderr = r.work_rate = r.work_rate_stderr = na;
            }
            return {cell(r.throughput), cell(r.throughput_stderr), cell(r.mean_computing_time),
                    cell(r.computing_time_stderr), cell(r.work_rate), cell(r.work_rate_stderr), cell(r.mean_response),
                    cell(r.response_stderr), r.unstable ? "1" : "0"};
        })};
    });
}

Table cmd_bound(const ExperimentConfig& c, const RunOptions& o) {
    const auto points = expand(c);
    return fan_out({"sweep_param", "sweep_value", "kind", "estimator", "bound", "argument", "stderr", "cost", "evaluations"},
                   points.size(), o.threads, [&](std::size_t i) {
                       const auto& p = points[i];
                       const auto& s = p.system;
                       std::string kind = c.bound.kind;
                       if (kind == "auto") kind = s.num_servers() == 2 && !homogeneous(s) ? "pause" : "homogeneous";
                       auto pre = sweep_cells(c, p);
                       pre.push_back(kind);
                       pre.push_back(kind == "pause" ? "exact" : c.bound.estimator);
                       return std::vector<Row>{guarded(pre, 5, [&]() -> std::vector<std::string> {
                           BoundReport r;
                           if (kind == "pause") {
                               r = optimize_pause_bound(s.servers, s.delta);
                           } else {
                               if (!homogeneous(s)) config_error("the homogeneous bound needs identical servers");
                               MinimizerConfig m;
                               m.n_paths = c.bound.estimator == "mc" ? c.bound.paths : 0;
                               m.seed = *c.seed;
                               m.log_points = c.bound.grid;
                               r = homogeneous_bound(s.servers.front(), s.delta, s.num_servers(), m);
                           }
                           return {cell(r.bound), join(r.argument, ';'), cell(r.stderr), cell(r.cost),
                                   std::to_string(r.evaluations)};
                       })};
                   });
}

Table cmd_mdp(const ExperimentConfig& c, const RunOptions& o) {
    const auto points = expand(c);
    return fan_out({"sweep_param", "sweep_value", "states", "unit", "gain", "throughput", "outer_iterations", "policy_file"},
                   points.size(), o.threads, [&](std::size_t i) {
                       const auto& s = points[i].system;
                       return std::vector<Row>{guarded(sweep_cells(c, points[i]), 6, [&]() -> std::vector<std::string> {
                           const auto kernel = build_mdp(s.servers, s.delta, c.state_cap);
                           const auto sol = solve_average_cost(kernel);
                           const auto path = policy_path(o, i, points.size());
                           if (!path.empty()) {
                               std::ofstream out(path);
                               if (!out) config_error("cannot write " + path);
                               out << policy_to_csv(kernel, sol.policy);
                           }
                           return {std::to_string(kernel.size()), cell(kernel.unit), cell(sol.gain), cell(sol.throughput),
                                   std::to_string(sol.outer_iterations), path};
                       })};
                   });
}

std::string to_csv(const Table& t, const std::string& command, const std::string& digest) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::string out = fmt::format("# repcap {} {} {:%Y-%m-%dT%H:%M:%SZ}\n", REPCAP_VERSION, command, fmt::gmtime(now));
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_escape(cells[i]);
    };
    line(t.header);
    out += ",digest,version\n";
    for (const auto& r : t.rows) {
        line(r);
        out += fmt::format(",{},{}\n", digest, REPCAP_VERSION);
    }
    return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Throughput, simulation and capacity bounds for multi-server systems with job replication"};
    app.require_subcommand(1);
    app.set_version_flag("--version", REPCAP_VERSION);

    std::string config_path, out_path, policy_out, estimator;
    std::uint64_t seed = 0, runs = 0, jobs = 0, paths = 0;
    int grid = 0;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    struct Flags {
        CLI::Option *seed, *runs, *jobs, *paths, *estimator, *grid;
    };
    std::map<std::string, Flags> flags;
    const std::pair<const char*, const char*> commands[] = {
        {"analytic", "closed-form throughput of NoRep, FullRep and upfront partitions"},
        {"simulate", "event-driven simulation, saturated or with Poisson arrivals"},
        {"bound", "capacity upper bound (pause bound or homogeneous bound)"},
        {"mdp", "optimal policy of the lattice decision process"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", out_path, "CSV output path (default: stdout)");
        sub->add_option("--threads", threads, "worker threads for sweep points");
        Flags f{};
        f.seed = sub->add_option("--seed", seed, "random seed");
        f.runs = sub->add_option("--runs", runs, "independent Poisson runs");
        f.jobs = sub->add_option("--jobs", jobs, "jobs per run");
        f.paths = sub->add_option("--paths", paths, "Monte Carlo paths for the homogeneous bound");
        f.estimator = sub->add_option("--estimator", estimator, "exact or mc");
        f.grid = sub->add_option("--grid", grid, "log-spaced start-time grid points");
        if (std::string(name) == "mdp") sub->add_option("--policy-out", policy_out, "policy table CSV path");
        flags[name] = f;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const auto* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    const auto& f = flags.at(command);
    try {
        std::ifstream in(config_path);
        if (!in) config_error("cannot read " + config_path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            config_error(fmt::format("{}: {}", config_path, e.what()));
        }
        auto cfg = parse_config(j);
        Overrides o;
        if (f.seed->count()) o.seed = seed;
        if (f.runs->count()) o.runs = runs;
        if (f.jobs->count()) o.jobs = jobs;
        if (f.paths->count()) o.paths = paths;
        if (f.estimator->count()) o.estimator = estimator;
        if (f.grid->count()) o.grid = grid;
        apply(cfg, o);

        RunOptions ro;
        ro.threads = threads;
        ro.policy_out = policy_out;
        if (command == "mdp" && ro.policy_out.empty() && !out_path.empty()) {
            std::filesystem::path p(out_path);
            ro.policy_out = (p.parent_path() / (p.stem().string() + ".policy.csv")).string();
        }
        Table t = command == "analytic" ? cmd_analytic(cfg, ro)
                  : command == "simulate" ? cmd_simulate(cfg, ro)
                  : command == "bound"    ? cmd_bound(cfg, ro)
                                          : cmd_mdp(cfg, ro);
        const auto csv = to_csv(t, command, config_digest(cfg));
        if (out_path.empty()) {
            out << csv;
        } else {
            std::ofstream file(out_path);
            if (!file) config_error("cannot write " + out_path);
            file << csv;
        }
        for (const auto& r : t.rows)
            if (!r.back().empty()) err << r.back() << '\n';
        return t.status;
    } catch (const Error& e) {
        err << e.what() << '\n';
        return e.is_numeric() ? 3 : 2;
    }
}

}  // namespace repcap::cli
