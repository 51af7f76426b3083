#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "algctl/coadjoint.hpp"
#include "algctl/config.hpp"

namespace algctl {

// ---------------------------------------------------------------------------
// logging, ALGCTL_LOG in {error, warn, info, debug}

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("ALGCTL_LOG");
        if (!env) return LogLevel::Warn;
        const std::string v(env);
        if (v == "error") return LogLevel::Error;
        if (v == "warn") return LogLevel::Warn;
        if (v == "info") return LogLevel::Info;
        if (v == "debug") return LogLevel::Debug;
        std::cerr << "[algctl] ignoring unknown ALGCTL_LOG value '" << v << "'\n";
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_msg(LogLevel level, const std::string& msg) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (static_cast<int>(level) <= static_cast<int>(log_level()))
        std::cerr << "[algctl][" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// exit codes

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitUsage = 3;

struct RunOptions {
    std::string config_path;
    std::optional<std::string> out_path;
    std::optional<double> tol;
    std::optional<unsigned> seed;
    bool quiet = false;
};

struct RunReport {
    std::string command;
    std::string config_digest;
    double wall_seconds = 0.0;
    std::vector<std::string> output_paths;
    std::map<std::string, std::string> diagnostics;

    std::string to_text() const {
        std::ostringstream os;
        os << "command: " << command << "\n";
        os << "config digest: " << config_digest << "\n";
        for (const auto& [key, value] : diagnostics) os << key << ": " << value << "\n";
        for (const std::string& p : output_paths) os << "output: " << p << "\n";
        os << "wall time: " << fmt_double(wall_seconds) << "s\n";
        return os.str();
    }
};

struct RunOutcome {
    int exit_code = kExitOk;
    RunReport report;
};

// ---------------------------------------------------------------------------
// CSV emission and re-parsing

// Header: t,x1..xn,eta1..etar,u1..um,H,stat_res[,casimir_1..]. One row per
// accepted step, round-trip decimal formatting, "\n" line endings.
inline void write_trajectory_csv(const TrajectoryRecord& rec, std::ostream& out) {
    out << "t";
    for (int i = 0; i < rec.base_dim; ++i) out << ",x" << i + 1;
    for (int a = 0; a < rec.rank; ++a) out << ",eta" << a + 1;
    for (int c = 0; c < rec.control_dim; ++c) out << ",u" << c + 1;
    out << ",H,stat_res";
    for (std::size_t k = 0; k < rec.casimir_labels.size(); ++k) out << ",casimir_" << k + 1;
    out << "\n";
    for (std::size_t k = 0; k < rec.size(); ++k) {
        out << fmt_double(rec.times[k]);
        for (int i = 0; i < rec.base_dim; ++i) out << "," << fmt_double(rec.x[k][i]);
        for (int a = 0; a < rec.rank; ++a) out << "," << fmt_double(rec.eta[k][a]);
        for (int c = 0; c < rec.control_dim; ++c) out << "," << fmt_double(rec.u[k][c]);
        out << "," << fmt_double(rec.hamiltonian[k]) << "," << fmt_double(rec.stationarity[k]);
        for (int i = 0; i < rec.casimir_values[k].size(); ++i) out << "," << fmt_double(rec.casimir_values[k][i]);
        out << "\n";
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline TrajectoryRecord read_trajectory_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw Error("empty trajectory CSV");
    const std::vector<std::string> cols = split_csv_line(header);
    TrajectoryRecord rec;
    std::size_t casimirs = 0;
    for (const std::string& c : cols) {
        if (c.rfind('x', 0) == 0 && c != "x") ++rec.base_dim;
        else if (c.rfind("eta", 0) == 0) ++rec.rank;
        else if (c[0] == 'u' && c.size() > 1) ++rec.control_dim;
        else if (c.rfind("casimir_", 0) == 0) ++casimirs;
    }
    for (std::size_t k = 0; k < casimirs; ++k) rec.casimir_labels.push_back("casimir_" + std::to_string(k + 1));

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != cols.size())
            throw Error("trajectory CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(cols.size()));
        std::size_t at = 0;
        rec.times.push_back(parse_double(fields[at++]));
        Eigen::VectorXd x(rec.base_dim), eta(rec.rank), u(rec.control_dim), cas(static_cast<Eigen::Index>(casimirs));
        for (int i = 0; i < rec.base_dim; ++i) x[i] = parse_double(fields[at++]);
        for (int a = 0; a < rec.rank; ++a) eta[a] = parse_double(fields[at++]);
        for (int c = 0; c < rec.control_dim; ++c) u[c] = parse_double(fields[at++]);
        rec.x.push_back(x);
        rec.eta.push_back(eta);
        rec.u.push_back(u);
        rec.hamiltonian.push_back(parse_double(fields[at++]));
        rec.stationarity.push_back(parse_double(fields[at++]));
        for (std::size_t k = 0; k < casimirs; ++k) cas[static_cast<Eigen::Index>(k)] = parse_double(fields[at++]);
        rec.casimir_values.push_back(cas);
    }
    return rec;
}

namespace detail {

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write output file '" + path + "'");
    return out;
}

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

} // namespace detail

// ---------------------------------------------------------------------------
// commands

// Certifies the configured algebroid at 50 random base points in [-2,2]^n
// (the single empty point when n = 0). Exit 0 iff certification passes at
// the configured tolerance (default 1e-8). With --out, the report is also
// written as JSON.
inline RunOutcome run_validate(const RunOptions& options) {
    detail::Stopwatch watch;
    RunOutcome outcome;
    outcome.report.command = "validate";

    LoadResult loaded = load_config(options.config_path);
    if (!loaded.ok()) {
        for (const std::string& e : loaded.errors) log_msg(LogLevel::Error, e);
        outcome.exit_code = loaded.io_error ? kExitUsage : kExitValidation;
        outcome.report.diagnostics["error"] = loaded.errors.front();
        return outcome;
    }
    const ProblemConfig& cfg = *loaded.config;
    outcome.report.config_digest = cfg.digest;

    try {
        const AlgebroidModel model = cfg.build_model();
        std::vector<Eigen::VectorXd> samples;
        if (model.base_dim() == 0) {
            samples.emplace_back(0);
        } else {
            std::mt19937 rng(options.seed.value_or(0));
            std::uniform_real_distribution<double> dist(-2.0, 2.0);
            for (int k = 0; k < 50; ++k) {
                Eigen::VectorXd x(model.base_dim());
                for (int i = 0; i < model.base_dim(); ++i) x[i] = dist(rng);
                samples.push_back(std::move(x));
            }
        }
        const double tolerance = options.tol.value_or(1e-8);
        const AxiomReport report = certify(model, samples, tolerance);

        outcome.report.diagnostics["model"] = model.kind();
        outcome.report.diagnostics["antisymmetry residual"] = fmt_double(report.antisymmetry_residual);
        outcome.report.diagnostics["anchor residual"] = fmt_double(report.anchor_residual);
        outcome.report.diagnostics["jacobi residual"] = fmt_double(report.jacobi_residual);
        outcome.report.diagnostics["certification"] = report.pass ? "pass" : "fail";

        if (!options.quiet) std::cout << report.summary();

        if (options.out_path) {
            nlohmann::json j;
            j["model"] = model.kind();
            j["tolerance"] = report.tolerance;
            j["pass"] = report.pass;
            j["antisymmetry_residual"] = report.antisymmetry_residual;
            j["anchor_residual"] = report.anchor_residual;
            j["jacobi_residual"] = report.jacobi_residual;
            j["worst_jacobi"] = report.worst_jacobi;
            j["worst_anchor"] = report.worst_anchor;
            j["samples"] = report.samples_used.size();
            j["notes"] = report.notes;
            auto out = detail::open_output(*options.out_path);
            out << j.dump(2) << "\n";
            outcome.report.output_paths.push_back(*options.out_path);
        }
        outcome.exit_code = report.pass ? kExitOk : kExitValidation;
    } catch (const IoError& e) {
        outcome.exit_code = kExitUsage;
        outcome.report.diagnostics["error"] = e.what();
    } catch (const NumericalError& e) {
        outcome.exit_code = kExitNumerical;
        outcome.report.diagnostics["error"] = e.what();
    } catch (const Error& e) {
        outcome.exit_code = kExitValidation;
        outcome.report.diagnostics["error"] = e.what();
    }
    outcome.report.wall_seconds = watch.seconds();
    if (!options.quiet) std::cout << outcome.report.to_text();
    return outcome;
}

// Integrates the configured critical-trajectory problem and writes the
// trajectory CSV to --out.
inline RunOutcome run_solve(const RunOptions& options) {
    detail::Stopwatch watch;
    RunOutcome outcome;
    outcome.report.command = "solve";

    if (!options.out_path) {
        log_msg(LogLevel::Error, "solve requires --out");
        outcome.exit_code = kExitUsage;
        return outcome;
    }
    LoadResult loaded = load_config(options.config_path);
    if (!loaded.ok()) {
        for (const std::string& e : loaded.errors) log_msg(LogLevel::Error, e);
        outcome.exit_code = loaded.io_error ? kExitUsage : kExitValidation;
        outcome.report.diagnostics["error"] = loaded.errors.front();
        return outcome;
    }
    const ProblemConfig& cfg = *loaded.config;
    outcome.report.config_digest = cfg.digest;

    try {
        if (!cfg.integrate) throw ConfigError("solve requires an [integrate] section");
        if (!cfg.integrate->eta0) throw ConfigError("solve requires eta0 in [integrate]");
        ControlProblem problem = cfg.build_problem();
        log_msg(LogLevel::Info, "integrating " + std::to_string(cfg.integrate->steps) + " " +
                                    cfg.integrate->method + " steps on [" + fmt_double(problem.t0) + ", " +
                                    fmt_double(problem.t1) + "]");
        const TrajectoryRecord rec =
            critical_trajectory(problem, cfg.integrate->steps, integration_method_from(cfg.integrate->method));

        auto out = detail::open_output(*options.out_path);
        write_trajectory_csv(rec, out);
        out.close();

        outcome.report.output_paths.push_back(*options.out_path);
        outcome.report.diagnostics["rows"] = std::to_string(rec.size());
        outcome.report.diagnostics["energy drift"] = fmt_double(rec.energy_drift());
        outcome.report.diagnostics["max stationarity residual"] = fmt_double(rec.max_stationarity());
        if (!rec.casimir_labels.empty())
            outcome.report.diagnostics["casimir drift"] = fmt_double(rec.casimir_drift());
    } catch (const IoError& e) {
        outcome.exit_code = kExitUsage;
        outcome.report.diagnostics["error"] = e.what();
    } catch (const NumericalError& e) {
        outcome.exit_code = kExitNumerical;
        outcome.report.diagnostics["error"] = e.what();
        outcome.report.diagnostics["last good time"] = fmt_double(e.last_good_time());
    } catch (const Error& e) {
        outcome.exit_code = kExitValidation;
        outcome.report.diagnostics["error"] = e.what();
    }
    outcome.report.wall_seconds = watch.seconds();
    if (!options.quiet) std::cout << outcome.report.to_text();
    return outcome;
}

// Newton shooting on the initial costate; prints eta0_star and writes the
// optimal trajectory CSV to --out.
inline RunOutcome run_shoot(const RunOptions& options) {
    detail::Stopwatch watch;
    RunOutcome outcome;
    outcome.report.command = "shoot";

    if (!options.out_path) {
        log_msg(LogLevel::Error, "shoot requires --out");
        outcome.exit_code = kExitUsage;
        return outcome;
    }
    LoadResult loaded = load_config(options.config_path);
    if (!loaded.ok()) {
        for (const std::string& e : loaded.errors) log_msg(LogLevel::Error, e);
        outcome.exit_code = loaded.io_error ? kExitUsage : kExitValidation;
        outcome.report.diagnostics["error"] = loaded.errors.front();
        return outcome;
    }
    const ProblemConfig& cfg = *loaded.config;
    outcome.report.config_digest = cfg.digest;

    try {
        if (!cfg.shoot) throw ConfigError("shoot requires a [shoot] section");
        if (!cfg.integrate) throw ConfigError("shoot requires an [integrate] section");
        ControlProblem problem = cfg.build_problem();
        const Eigen::VectorXd guess =
            cfg.integrate->eta0 ? *cfg.integrate->eta0 : Eigen::VectorXd::Zero(problem.model().rank());
        const double tol = options.tol.value_or(cfg.shoot->tol);
        const ShootResult result =
            shoot(problem, guess, tol, cfg.integrate->steps, integration_method_from(cfg.integrate->method));

        std::ostringstream value;
        value << "eta0_star =";
        for (int a = 0; a < result.eta0.size(); ++a) value << " " << fmt_double_17(result.eta0[a]);
        std::cout << value.str() << "\n";

        auto out = detail::open_output(*options.out_path);
        write_trajectory_csv(result.trajectory, out);
        out.close();

        outcome.report.output_paths.push_back(*options.out_path);
        outcome.report.diagnostics["endpoint error"] = fmt_double(result.endpoint_error);
        outcome.report.diagnostics["newton iterations"] = std::to_string(result.iterations);
    } catch (const IoError& e) {
        outcome.exit_code = kExitUsage;
        outcome.report.diagnostics["error"] = e.what();
    } catch (const NumericalError& e) {
        outcome.exit_code = kExitNumerical;
        outcome.report.diagnostics["error"] = e.what();
    } catch (const Error& e) {
        outcome.exit_code = kExitValidation;
        outcome.report.diagnostics["error"] = e.what();
    }
    outcome.report.wall_seconds = watch.seconds();
    if (!options.quiet) std::cout << outcome.report.to_text();
    return outcome;
}

// Samples the coadjoint orbit of xi and writes one lambda row per sample.
inline RunOutcome run_orbit(const RunOptions& options) {
    detail::Stopwatch watch;
    RunOutcome outcome;
    outcome.report.command = "orbit";

    if (!options.out_path) {
        log_msg(LogLevel::Error, "orbit requires --out");
        outcome.exit_code = kExitUsage;
        return outcome;
    }
    LoadResult loaded = load_config(options.config_path);
    if (!loaded.ok()) {
        for (const std::string& e : loaded.errors) log_msg(LogLevel::Error, e);
        outcome.exit_code = loaded.io_error ? kExitUsage : kExitValidation;
        outcome.report.diagnostics["error"] = loaded.errors.front();
        return outcome;
    }
    const ProblemConfig& cfg = *loaded.config;
    outcome.report.config_digest = cfg.digest;

    try {
        if (!cfg.orbit) throw ConfigError("orbit requires an [orbit] section");
        if (!cfg.algebra)
            throw ConfigError("orbit requires an algebroid kind with a matrix-group realization (algebra key)");
        const MatrixGroupContext ctx = make_group_context(*cfg.algebra, cfg.rank.value_or(3));
        const unsigned seed = options.seed.value_or(cfg.orbit->seed);
        log_msg(LogLevel::Info, "sampling " + std::to_string(cfg.orbit->samples) + " orbit points on " +
                                    ctx.name + " with seed " + std::to_string(seed));
        const CoadjointOrbitSample sample =
            sample_orbit(ctx, cfg.orbit->xi, cfg.orbit->samples, seed, cfg.orbit->spread);

        auto out = detail::open_output(*options.out_path);
        for (int a = 0; a < ctx.rank(); ++a) out << (a ? "," : "") << "lambda" << a + 1;
        out << "\n";
        for (const Eigen::VectorXd& p : sample.points) {
            for (int a = 0; a < p.size(); ++a) out << (a ? "," : "") << fmt_double(p[a]);
            out << "\n";
        }
        out.close();

        double min_norm = std::numeric_limits<double>::infinity(), max_norm = 0.0;
        for (const Eigen::VectorXd& p : sample.points) {
            min_norm = std::min(min_norm, p.norm());
            max_norm = std::max(max_norm, p.norm());
        }
        outcome.report.output_paths.push_back(*options.out_path);
        outcome.report.diagnostics["samples"] = std::to_string(sample.points.size());
        outcome.report.diagnostics["seed"] = std::to_string(seed);
        outcome.report.diagnostics["min |lambda|"] = fmt_double(min_norm);
        outcome.report.diagnostics["max |lambda|"] = fmt_double(max_norm);
    } catch (const IoError& e) {
        outcome.exit_code = kExitUsage;
        outcome.report.diagnostics["error"] = e.what();
    } catch (const NumericalError& e) {
        outcome.exit_code = kExitNumerical;
        outcome.report.diagnostics["error"] = e.what();
    } catch (const Error& e) {
        outcome.exit_code = kExitValidation;
        outcome.report.diagnostics["error"] = e.what();
    }
    outcome.report.wall_seconds = watch.seconds();
    if (!options.quiet) std::cout << outcome.report.to_text();
    return outcome;
}

// Evaluates the Poisson bracket {F, G} at a phase point given as the ordered
// list [x1..xn, eta1..etar]; prints the value with 17 significant digits.
inline RunOutcome run_bracket(const RunOptions& options, const std::string& f_source,
                              const std::string& g_source, const std::string& at_source) {
    detail::Stopwatch watch;
    RunOutcome outcome;
    outcome.report.command = "bracket";

    LoadResult loaded = load_config(options.config_path);
    if (!loaded.ok()) {
        for (const std::string& e : loaded.errors) log_msg(LogLevel::Error, e);
        outcome.exit_code = loaded.io_error ? kExitUsage : kExitValidation;
        outcome.report.diagnostics["error"] = loaded.errors.front();
        return outcome;
    }
    const ProblemConfig& cfg = *loaded.config;
    outcome.report.config_digest = cfg.digest;

    // --at parsing is a usage concern, not a config one
    Eigen::VectorXd at;
    try {
        std::string inner = at_source;
        if (!inner.empty() && inner.front() == '[' && inner.back() == ']') inner = inner.substr(1, inner.size() - 2);
        std::vector<double> values;
        std::string item;
        std::istringstream items(inner);
        while (std::getline(items, item, ',')) {
            std::size_t b = item.find_first_not_of(" \t");
            std::size_t e = item.find_last_not_of(" \t");
            if (b == std::string::npos) throw Error("empty value in --at list");
            values.push_back(parse_double(item.substr(b, e - b + 1)));
        }
        at = detail::to_vector(values);
    } catch (const Error& e) {
        log_msg(LogLevel::Error, std::string("cannot parse --at: ") + e.what());
        outcome.exit_code = kExitUsage;
        return outcome;
    }

    try {
        const AlgebroidModel model = cfg.build_model();
        if (at.size() != model.base_dim() + model.rank())
            throw DimensionError("--at has " + std::to_string(at.size()) + " values but the model needs " +
                                 std::to_string(model.base_dim() + model.rank()) + " (x1..xn, eta1..etar)");
        const PhasePoint p{at.head(model.base_dim()), at.tail(model.rank())};
        const double value = poisson_bracket(model, Expression::parse(f_source), Expression::parse(g_source), p);
        std::cout << fmt_double_17(value) << "\n";
        outcome.report.diagnostics["bracket"] = fmt_double_17(value);
    } catch (const ParseError& e) {
        outcome.exit_code = kExitUsage;
        outcome.report.diagnostics["error"] = e.what();
        log_msg(LogLevel::Error, e.what());
    } catch (const EvalError& e) {
        outcome.exit_code = kExitNumerical;
        outcome.report.diagnostics["error"] = e.what();
    } catch (const NumericalError& e) {
        outcome.exit_code = kExitNumerical;
        outcome.report.diagnostics["error"] = e.what();
    } catch (const Error& e) {
        outcome.exit_code = kExitValidation;
        outcome.report.diagnostics["error"] = e.what();
    }
    outcome.report.wall_seconds = watch.seconds();
    if (!options.quiet) std::cout << outcome.report.to_text();
    return outcome;
}

} // namespace algctl
