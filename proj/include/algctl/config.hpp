#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "algctl/optctl.hpp"

namespace algctl {

// One parsed configuration value: a number, a bare name, a quoted string,
// a numeric list, or a quoted-string list.
struct ConfigValue {
    enum class Kind { Number, Name, String, NumberList, StringList };
    Kind kind = Kind::Number;
    double number = 0.0;
    std::string text;
    std::vector<double> numbers;
    std::vector<std::string> strings;
    int line = 0;
};

struct IntegrateSpec {
    double t0 = 0.0, t1 = 1.0;
    int steps = 1;
    std::string method = "rk4";
    std::optional<Eigen::VectorXd> x0, eta0, u0;
};

struct ShootSpec {
    Eigen::VectorXd target;
    double tol = 1e-10;
};

struct OrbitSpec {
    Eigen::VectorXd xi;
    int samples = 100;
    unsigned seed = 0;
    double spread = 1.0;
};

struct ProblemConfig {
    std::string kind;
    int base_dim = 0;
    std::optional<int> rank;
    std::optional<std::string> algebra;
    std::vector<std::vector<std::string>> anchor_rows;
    struct StructureSpec {
        int gamma = 0, alpha = 0, beta = 0; // 0-based
        std::string expr;
        int line = 0;
    };
    std::vector<StructureSpec> structure;

    std::optional<std::vector<std::string>> control_f;
    std::optional<std::string> control_L;
    std::optional<std::string> hamiltonian_h;

    std::optional<IntegrateSpec> integrate;
    std::optional<ShootSpec> shoot;
    std::optional<OrbitSpec> orbit;

    std::string digest; // stable hash of the raw config bytes

    bool has_control_section() const { return control_f.has_value() || control_L.has_value(); }

    // Number of controls, inferred from the u1..um variables referenced by
    // the control system and cost.
    int control_dim() const {
        int m = 0;
        auto scan = [&m](const Expression& e) {
            for (const std::string& v : e.free_variables()) {
                if (v.size() < 2 || v[0] != 'u') continue;
                bool digits = true;
                for (std::size_t i = 1; i < v.size(); ++i)
                    if (!std::isdigit(static_cast<unsigned char>(v[i]))) digits = false;
                if (!digits) continue;
                m = std::max(m, std::stoi(v.substr(1)));
            }
        };
        if (control_f)
            for (const std::string& src : *control_f) scan(Expression::parse(src));
        if (control_L) scan(Expression::parse(*control_L));
        return m;
    }

    LieAlgebra resolve_algebra() const {
        if (!algebra) throw ConfigError("kind '" + kind + "' requires the 'algebra' key");
        return lie_algebra_by_name(*algebra, rank.value_or(3));
    }

    AlgebroidModel build_model() const {
        if (kind == "tangent") {
            if (base_dim < 1) throw ConfigError("tangent algebroid requires base_dim >= 1");
            return make_tangent(base_dim);
        }
        if (kind == "lie_algebra") {
            if (base_dim != 0) throw ConfigError("lie_algebra kind lives over a point; base_dim must be 0");
            return make_lie_algebra(resolve_algebra());
        }
        if (kind == "trivial") return make_trivial(base_dim, resolve_algebra());
        if (kind == "coadjoint") {
            if (!orbit) throw ConfigError("coadjoint kind reads xi from the [orbit] section, which is missing");
            return make_coadjoint(resolve_algebra(), orbit->xi, base_dim);
        }
        if (kind == "custom") {
            if (!rank) throw ConfigError("custom algebroid requires the 'rank' key");
            std::vector<std::vector<Expression>> rows;
            for (const auto& row : anchor_rows) {
                std::vector<Expression> r;
                for (const std::string& src : row) r.push_back(Expression::parse(src));
                rows.push_back(std::move(r));
            }
            std::vector<std::tuple<int, int, int, Expression>> entries;
            for (const StructureSpec& s : structure)
                entries.emplace_back(s.gamma, s.alpha, s.beta, Expression::parse(s.expr));
            return make_custom(base_dim, *rank, std::move(rows), std::move(entries));
        }
        throw ConfigError("unknown algebroid kind '" + kind +
                          "' (expected tangent, lie_algebra, trivial, coadjoint, or custom)");
    }

    ControlProblem build_problem() const {
        AlgebroidModel model = build_model();
        ControlProblem problem = [&]() {
            if (hamiltonian_h) return ControlProblem::with_hamiltonian(std::move(model), Expression::parse(*hamiltonian_h));
            std::vector<Expression> f;
            for (const std::string& src : *control_f) f.push_back(Expression::parse(src));
            const int m = control_dim();
            if (m < 1) throw ConfigError("control system references no u variables");
            return ControlProblem::with_controls(std::move(model), std::move(f), Expression::parse(*control_L), m);
        }();

        problem.x0 = Eigen::VectorXd::Zero(problem.model().base_dim());
        if (integrate) {
            problem.t0 = integrate->t0;
            problem.t1 = integrate->t1;
            if (integrate->x0) problem.x0 = *integrate->x0;
            problem.eta0 = integrate->eta0;
            problem.u0 = integrate->u0;
        }
        if (shoot) problem.target = shoot->target;
        problem.validate_boundary();
        return problem;
    }
};

struct LoadResult {
    std::optional<ProblemConfig> config;
    std::vector<std::string> errors;
    bool io_error = false;
    bool ok() const { return errors.empty() && config.has_value(); }
};

namespace detail {

inline std::string fnv1a_digest(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

class ConfigParser {
public:
    ConfigParser(std::string_view text, std::vector<std::string>& errors) : text_(text), errors_(errors) {}

    // section -> ordered (key, value) pairs; repeated keys are kept
    std::map<std::string, std::vector<std::pair<std::string, ConfigValue>>> run() {
        std::istringstream in{std::string(text_)};
        std::string raw;
        int lineno = 0;
        std::string section;
        while (std::getline(in, raw)) {
            ++lineno;
            std::string line = strip_comment(raw);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']' || trimmed.size() < 3) {
                    error(lineno, "malformed section header '" + trimmed + "'");
                    continue;
                }
                section = trimmed.substr(1, trimmed.size() - 2);
                sections_[section]; // mark present even if empty
                continue;
            }
            if (section.empty()) {
                error(lineno, "entry before any [section] header");
                continue;
            }
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos) {
                error(lineno, "expected 'key = value' but found '" + trimmed + "'");
                continue;
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value_text = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                error(lineno, "missing key before '='");
                continue;
            }
            ConfigValue value;
            if (parse_value(value_text, lineno, value)) sections_[section].emplace_back(key, value);
        }
        return sections_;
    }

private:
    static std::string strip_comment(const std::string& line) {
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) return line.substr(0, i);
        }
        return line;
    }

    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    void error(int line, const std::string& msg) { errors_.push_back("line " + std::to_string(line) + ": " + msg); }

    bool parse_value(const std::string& text, int line, ConfigValue& out) {
        out.line = line;
        if (text.empty()) {
            error(line, "missing value after '='");
            return false;
        }
        if (text.front() == '"') {
            if (text.size() < 2 || text.back() != '"') {
                error(line, "unterminated quoted string");
                return false;
            }
            out.kind = ConfigValue::Kind::String;
            out.text = text.substr(1, text.size() - 2);
            return true;
        }
        if (text.front() == '[') {
            if (text.back() != ']') {
                error(line, "unterminated list");
                return false;
            }
            const std::string inner = trim(text.substr(1, text.size() - 2));
            out.kind = ConfigValue::Kind::NumberList;
            if (inner.empty()) return true; // empty numeric list
            std::vector<std::string> items;
            std::string current;
            bool quoted = false;
            for (char c : inner) {
                if (c == '"') quoted = !quoted;
                if (c == ',' && !quoted) {
                    items.push_back(trim(current));
                    current.clear();
                } else {
                    current += c;
                }
            }
            items.push_back(trim(current));
            const bool string_list = !items.empty() && !items.front().empty() && items.front().front() == '"';
            out.kind = string_list ? ConfigValue::Kind::StringList : ConfigValue::Kind::NumberList;
            for (const std::string& item : items) {
                if (item.empty()) {
                    error(line, "empty list item");
                    return false;
                }
                if (string_list) {
                    if (item.size() < 2 || item.front() != '"' || item.back() != '"') {
                        error(line, "list mixes quoted strings and other values");
                        return false;
                    }
                    out.strings.push_back(item.substr(1, item.size() - 2));
                } else {
                    try {
                        out.numbers.push_back(parse_double(item));
                    } catch (const Error&) {
                        error(line, "invalid number '" + item + "' in list");
                        return false;
                    }
                }
            }
            return true;
        }
        // bare name or number
        try {
            out.number = parse_double(text);
            out.kind = ConfigValue::Kind::Number;
            return true;
        } catch (const Error&) {
            static const std::regex ident("[A-Za-z_][A-Za-z0-9_]*");
            if (std::regex_match(text, ident)) {
                out.kind = ConfigValue::Kind::Name;
                out.text = text;
                return true;
            }
            error(line, "cannot parse value '" + text + "'");
            return false;
        }
    }

    std::string_view text_;
    std::vector<std::string>& errors_;
    std::map<std::string, std::vector<std::pair<std::string, ConfigValue>>> sections_;
};

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

} // namespace detail

// Parses and validates a configuration file. All validation errors are
// collected and reported together, not just the first one.
inline LoadResult load_config_text(std::string_view text) {
    LoadResult result;
    auto sections = detail::ConfigParser(text, result.errors).run();

    ProblemConfig cfg;
    cfg.digest = detail::fnv1a_digest(text);

    auto err = [&result](int line, const std::string& msg) {
        result.errors.push_back((line > 0 ? "line " + std::to_string(line) + ": " : "") + msg);
    };

    const std::set<std::string> known_sections{"algebroid", "control", "hamiltonian", "integrate", "shoot", "orbit"};
    for (const auto& [name, entries] : sections) {
        (void)entries;
        if (!known_sections.count(name)) err(0, "unknown section [" + name + "]");
    }

    auto section_entries = [&sections](const std::string& name)
        -> const std::vector<std::pair<std::string, ConfigValue>>* {
        auto it = sections.find(name);
        return it == sections.end() ? nullptr : &it->second;
    };

    // ---- [algebroid] --------------------------------------------------------
    const auto* alg = section_entries("algebroid");
    if (!alg) {
        err(0, "missing required section [algebroid]");
    } else {
        for (const auto& [key, value] : *alg) {
            if (key == "kind") {
                if (value.kind != ConfigValue::Kind::Name) err(value.line, "kind must be a bare name");
                else cfg.kind = value.text;
            } else if (key == "base_dim") {
                if (value.kind != ConfigValue::Kind::Number || value.number != std::floor(value.number) ||
                    value.number < 0)
                    err(value.line, "base_dim must be a nonnegative integer");
                else cfg.base_dim = static_cast<int>(value.number);
            } else if (key == "rank") {
                if (value.kind != ConfigValue::Kind::Number || value.number != std::floor(value.number) ||
                    value.number < 1)
                    err(value.line, "rank must be a positive integer");
                else cfg.rank = static_cast<int>(value.number);
            } else if (key == "algebra") {
                if (value.kind != ConfigValue::Kind::Name) err(value.line, "algebra must be a bare name");
                else cfg.algebra = value.text;
            } else if (key == "anchor") {
                if (value.kind == ConfigValue::Kind::StringList) cfg.anchor_rows.push_back(value.strings);
                else err(value.line, "anchor must be a list of quoted expressions, one row per anchor line");
            } else if (key == "structure") {
                if (value.kind != ConfigValue::Kind::String) {
                    err(value.line, "structure must be a quoted \"gamma,alpha,beta = expr\" triple");
                    continue;
                }
                static const std::regex triple(R"(^\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*=\s*(.*\S)\s*$)");
                std::smatch m;
                if (!std::regex_match(value.text, m, triple)) {
                    err(value.line, "structure entry '" + value.text + "' is not of the form \"gamma,alpha,beta = expr\"");
                    continue;
                }
                ProblemConfig::StructureSpec s;
                s.gamma = std::stoi(m[1]) - 1;
                s.alpha = std::stoi(m[2]) - 1;
                s.beta = std::stoi(m[3]) - 1;
                s.expr = m[4];
                s.line = value.line;
                cfg.structure.push_back(std::move(s));
            } else {
                err(value.line, "unknown key '" + key + "' in [algebroid]");
            }
        }
        if (cfg.kind.empty()) err(0, "[algebroid] requires the 'kind' key");
    }

    // ---- [control] / [hamiltonian] ------------------------------------------
    if (const auto* ctl = section_entries("control")) {
        for (const auto& [key, value] : *ctl) {
            if (key == "f") {
                if (value.kind == ConfigValue::Kind::StringList) cfg.control_f = value.strings;
                else err(value.line, "f must be a list of quoted expressions");
            } else if (key == "L") {
                if (value.kind == ConfigValue::Kind::String) cfg.control_L = value.text;
                else err(value.line, "L must be a quoted expression");
            } else {
                err(value.line, "unknown key '" + key + "' in [control]");
            }
        }
        if (!cfg.control_f) err(0, "[control] requires the 'f' key");
        if (!cfg.control_L) err(0, "[control] requires the 'L' key");
    }
    if (const auto* ham = section_entries("hamiltonian")) {
        for (const auto& [key, value] : *ham) {
            if (key == "h") {
                if (value.kind == ConfigValue::Kind::String) cfg.hamiltonian_h = value.text;
                else err(value.line, "h must be a quoted expression");
            } else {
                err(value.line, "unknown key '" + key + "' in [hamiltonian]");
            }
        }
        if (!cfg.hamiltonian_h) err(0, "[hamiltonian] requires the 'h' key");
    }
    const bool has_control = cfg.control_f.has_value() && cfg.control_L.has_value();
    const bool has_ham = cfg.hamiltonian_h.has_value();
    if (has_control == has_ham)
        err(0, has_ham ? "exactly one of [control] and [hamiltonian] may be present"
                       : "exactly one of [control] (f, L) and [hamiltonian] (h) is required");

    // ---- [integrate] ---------------------------------------------------------
    if (const auto* integ = section_entries("integrate")) {
        IntegrateSpec spec;
        for (const auto& [key, value] : *integ) {
            if (key == "t0" || key == "t1") {
                if (value.kind != ConfigValue::Kind::Number) err(value.line, key + " must be a number");
                else (key == "t0" ? spec.t0 : spec.t1) = value.number;
            } else if (key == "steps") {
                if (value.kind != ConfigValue::Kind::Number || value.number != std::floor(value.number) ||
                    value.number < 1)
                    err(value.line, "steps must be an integer >= 1");
                else spec.steps = static_cast<int>(value.number);
            } else if (key == "method") {
                if (value.kind != ConfigValue::Kind::Name) err(value.line, "method must be rk4 or midpoint");
                else spec.method = value.text;
            } else if (key == "x0" || key == "eta0" || key == "u0") {
                if (value.kind != ConfigValue::Kind::NumberList) {
                    err(value.line, key + " must be a numeric list");
                } else {
                    Eigen::VectorXd v = detail::to_vector(value.numbers);
                    if (key == "x0") spec.x0 = v;
                    else if (key == "eta0") spec.eta0 = v;
                    else spec.u0 = v;
                }
            } else {
                err(value.line, "unknown key '" + key + "' in [integrate]");
            }
        }
        if (spec.method != "rk4" && spec.method != "midpoint")
            err(0, "method '" + spec.method + "' is not rk4 or midpoint");
        if (spec.t1 <= spec.t0) err(0, "[integrate] requires t1 > t0");
        cfg.integrate = std::move(spec);
    }

    // ---- [shoot] --------------------------------------------------------------
    if (const auto* sh = section_entries("shoot")) {
        ShootSpec spec;
        bool have_target = false;
        for (const auto& [key, value] : *sh) {
            if (key == "target") {
                if (value.kind != ConfigValue::Kind::NumberList) err(value.line, "target must be a numeric list");
                else {
                    spec.target = detail::to_vector(value.numbers);
                    have_target = true;
                }
            } else if (key == "tol") {
                if (value.kind != ConfigValue::Kind::Number || value.number <= 0)
                    err(value.line, "tol must be a positive number");
                else spec.tol = value.number;
            } else {
                err(value.line, "unknown key '" + key + "' in [shoot]");
            }
        }
        if (!have_target) err(0, "[shoot] requires the 'target' key");
        cfg.shoot = std::move(spec);
    }

    // ---- [orbit] ---------------------------------------------------------------
    if (const auto* orb = section_entries("orbit")) {
        OrbitSpec spec;
        bool have_xi = false;
        for (const auto& [key, value] : *orb) {
            if (key == "xi") {
                if (value.kind != ConfigValue::Kind::NumberList) err(value.line, "xi must be a numeric list");
                else {
                    spec.xi = detail::to_vector(value.numbers);
                    have_xi = true;
                }
            } else if (key == "samples") {
                if (value.kind != ConfigValue::Kind::Number || value.number != std::floor(value.number) ||
                    value.number < 1)
                    err(value.line, "samples must be an integer >= 1");
                else spec.samples = static_cast<int>(value.number);
            } else if (key == "seed") {
                if (value.kind != ConfigValue::Kind::Number || value.number != std::floor(value.number) ||
                    value.number < 0)
                    err(value.line, "seed must be a nonnegative integer");
                else spec.seed = static_cast<unsigned>(value.number);
            } else if (key == "spread") {
                if (value.kind != ConfigValue::Kind::Number || value.number <= 0)
                    err(value.line, "spread must be a positive number");
                else spec.spread = value.number;
            } else {
                err(value.line, "unknown key '" + key + "' in [orbit]");
            }
        }
        if (!have_xi) err(0, "[orbit] requires the 'xi' key");
        cfg.orbit = std::move(spec);
    }

    if (!result.errors.empty()) return result;

    // ---- semantic validation: expressions parse, dimensions line up ----------
    auto check_expr = [&err](const std::string& src, int line, const std::string& what) {
        try {
            Expression::parse(src);
        } catch (const ParseError& p) {
            err(line, what + ": " + p.what());
        }
    };
    for (const auto& row : cfg.anchor_rows)
        for (const std::string& src : row) check_expr(src, 0, "anchor expression '" + src + "'");
    for (const auto& s : cfg.structure) check_expr(s.expr, s.line, "structure expression '" + s.expr + "'");
    if (cfg.control_f)
        for (const std::string& src : *cfg.control_f) check_expr(src, 0, "control expression '" + src + "'");
    if (cfg.control_L) check_expr(*cfg.control_L, 0, "cost expression");
    if (cfg.hamiltonian_h) check_expr(*cfg.hamiltonian_h, 0, "hamiltonian expression");
    if (!result.errors.empty()) return result;

    try {
        const AlgebroidModel model = cfg.build_model();
        if (cfg.integrate) {
            const IntegrateSpec& spec = *cfg.integrate;
            if (spec.x0 && spec.x0->size() != model.base_dim())
                err(0, "x0 has length " + std::to_string(spec.x0->size()) + " but base_dim is " +
                           std::to_string(model.base_dim()));
            if (!spec.x0 && model.base_dim() > 0)
                err(0, "[integrate] requires x0 for a model with base_dim " + std::to_string(model.base_dim()));
            if (spec.eta0 && spec.eta0->size() != model.rank())
                err(0, "eta0 has length " + std::to_string(spec.eta0->size()) + " but rank is " +
                           std::to_string(model.rank()));
        }
        if (cfg.shoot && cfg.shoot->target.size() != model.base_dim())
            err(0, "target has length " + std::to_string(cfg.shoot->target.size()) + " but base_dim is " +
                       std::to_string(model.base_dim()));
        if (cfg.orbit && cfg.algebra) {
            const LieAlgebra a = cfg.resolve_algebra();
            if (cfg.orbit->xi.size() != a.dim)
                err(0, "xi has length " + std::to_string(cfg.orbit->xi.size()) + " but the algebra dimension is " +
                           std::to_string(a.dim));
        }
        if (has_control) {
            const int m = cfg.control_dim();
            if (m < 1) err(0, "control system references no u variables");
            if (cfg.integrate && cfg.integrate->u0 && cfg.integrate->u0->size() != m)
                err(0, "u0 has length " + std::to_string(cfg.integrate->u0->size()) + " but control_dim is " +
                           std::to_string(m));
        }
        if (result.errors.empty()) {
            // final end-to-end build; reports variable-usage mistakes
            if (cfg.integrate || cfg.shoot) (void)cfg.build_problem();
        }
    } catch (const Error& e) {
        err(0, e.what());
    }

    if (result.errors.empty()) result.config = std::move(cfg);
    return result;
}

inline LoadResult load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        LoadResult r;
        r.io_error = true;
        r.errors.push_back("cannot open config file '" + path + "'");
        return r;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load_config_text(buffer.str());
}

} // namespace algctl
