#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "algctl/poisson.hpp"

namespace algctl {

enum class IntegrationMethod { Rk4, Midpoint };

inline IntegrationMethod integration_method_from(std::string_view name) {
    if (name == "rk4") return IntegrationMethod::Rk4;
    if (name == "midpoint") return IntegrationMethod::Midpoint;
    throw Error("unknown integration method '" + std::string(name) + "' (expected rk4 or midpoint)");
}

// An optimal control problem on a Lie algebroid. Either a control system
// (f^alpha(x,u), cost L(x,u)) or a direct Hamiltonian H(x,eta,t) is given;
// in the first case the Pontryagin Hamiltonian <eta, f(x,u)> - L(x,u) is
// assembled once up front.
class ControlProblem {
public:
    static ControlProblem with_controls(AlgebroidModel model, std::vector<Expression> f, Expression cost,
                                        int control_dim) {
        if (static_cast<int>(f.size()) != model.rank())
            throw DimensionError("control system has " + std::to_string(f.size()) + " components but rank is " +
                                 std::to_string(model.rank()));
        if (control_dim < 1) throw DimensionError("control system needs control_dim >= 1");

        ControlProblem p(std::move(model));
        p.control_dim_ = control_dim;
        for (int c = 0; c < control_dim; ++c) p.control_labels_.push_back("u" + std::to_string(c + 1));

        auto check_xu = [&p](const Expression& e, const std::string& what) {
            for (const std::string& v : e.free_variables()) {
                const bool ok = std::find(p.model_.base_labels().begin(), p.model_.base_labels().end(), v) !=
                                    p.model_.base_labels().end() ||
                                std::find(p.control_labels_.begin(), p.control_labels_.end(), v) !=
                                    p.control_labels_.end();
                if (!ok)
                    throw DimensionError(what + " depends on '" + v + "', expected x and u variables only");
            }
        };
        for (std::size_t a = 0; a < f.size(); ++a)
            check_xu(f[a], "control system component " + std::to_string(a + 1));
        check_xu(cost, "cost");

        Expression H = Expression::constant(0.0);
        for (int a = 0; a < p.model_.rank(); ++a) {
            Expression term =
                Expression::variable(p.model_.fiber_labels()[static_cast<std::size_t>(a)]) * f[static_cast<std::size_t>(a)];
            H = (a == 0) ? std::move(term) : H + term;
        }
        p.hamiltonian_ = H - cost;
        p.control_system_ = std::move(f);
        p.cost_ = std::move(cost);
        return p;
    }

    static ControlProblem with_hamiltonian(AlgebroidModel model, Expression H) {
        ControlProblem p(std::move(model));
        for (const std::string& v : H.free_variables()) {
            const bool ok = v == "t" ||
                            std::find(p.model_.base_labels().begin(), p.model_.base_labels().end(), v) !=
                                p.model_.base_labels().end() ||
                            std::find(p.model_.fiber_labels().begin(), p.model_.fiber_labels().end(), v) !=
                                p.model_.fiber_labels().end();
            if (!ok)
                throw DimensionError("Hamiltonian depends on '" + v + "', expected x, eta, and t only");
        }
        p.hamiltonian_ = std::move(H);
        return p;
    }

    const AlgebroidModel& model() const noexcept { return model_; }
    int control_dim() const noexcept { return control_dim_; }
    bool has_controls() const noexcept { return control_dim_ > 0; }
    const std::vector<std::string>& control_labels() const noexcept { return control_labels_; }
    const std::vector<Expression>& control_system() const noexcept { return control_system_; }
    const Expression& hamiltonian() const noexcept { return hamiltonian_; }
    const std::optional<Expression>& cost() const noexcept { return cost_; }

    double t0 = 0.0;
    double t1 = 1.0;
    Eigen::VectorXd x0;
    std::optional<Eigen::VectorXd> eta0;
    std::optional<Eigen::VectorXd> u0;    // Newton warm start for the first stage
    std::optional<Eigen::VectorXd> target; // terminal base point, for shooting

    void validate_boundary() const {
        if (t1 <= t0) throw DimensionError("horizon requires t1 > t0");
        if (x0.size() != model_.base_dim())
            throw DimensionError("x0 has length " + std::to_string(x0.size()) + " but base_dim is " +
                                 std::to_string(model_.base_dim()));
        if (eta0 && eta0->size() != model_.rank())
            throw DimensionError("eta0 has length " + std::to_string(eta0->size()) + " but rank is " +
                                 std::to_string(model_.rank()));
        if (u0 && u0->size() != control_dim_)
            throw DimensionError("u0 has length " + std::to_string(u0->size()) + " but control_dim is " +
                                 std::to_string(control_dim_));
        if (target && target->size() != model_.base_dim())
            throw DimensionError("target has length " + std::to_string(target->size()) + " but base_dim is " +
                                 std::to_string(model_.base_dim()));
    }

private:
    explicit ControlProblem(AlgebroidModel model) : model_(std::move(model)), hamiltonian_(Expression::constant(0.0)) {}

    AlgebroidModel model_;
    int control_dim_ = 0;
    std::vector<std::string> control_labels_;
    std::vector<Expression> control_system_;
    std::optional<Expression> cost_;
    Expression hamiltonian_;
};

// H(eta, x, u) = <eta, f(x,u)> - L(x,u), or the direct Hamiltonian.
inline double pontryagin_hamiltonian(const ControlProblem& problem, const PhasePoint& p,
                                     const Eigen::VectorXd& u, double t = 0.0) {
    if (u.size() != problem.control_dim())
        throw DimensionError("u has length " + std::to_string(u.size()) + " but control_dim is " +
                             std::to_string(problem.control_dim()));
    Binding env = detail::phase_binding(problem.model(), p);
    for (int c = 0; c < problem.control_dim(); ++c)
        env.set(problem.control_labels()[static_cast<std::size_t>(c)], u[c]);
    env.set("t", t);
    return problem.hamiltonian().evaluate(env);
}

struct StationarityResult {
    Eigen::VectorXd u;
    double residual = 0.0;
    int iterations = 0;
};

namespace detail {

inline Eigen::VectorXd control_gradient(const ControlProblem& problem, const PhasePoint& p,
                                        const Eigen::VectorXd& u, double t) {
    Binding env = phase_binding(problem.model(), p);
    for (int c = 0; c < problem.control_dim(); ++c)
        env.set(problem.control_labels()[static_cast<std::size_t>(c)], u[c]);
    env.set("t", t);
    return gradient_over(problem.hamiltonian(), problem.control_labels(), env);
}

inline constexpr double kControlJacobianStep = 1e-6;
inline constexpr int kStationarityMaxIterations = 50;
inline constexpr double kSingularConditionLimit = 1e12;

} // namespace detail

// Solves dH/du = 0 by damped Newton. The Jacobian d2H/du2 is built from
// central differences of the forward-mode gradient (step 1e-6) and rejected
// when its condition estimate exceeds 1e12.
inline StationarityResult stationarity_solve(const ControlProblem& problem, const PhasePoint& p,
                                             const Eigen::VectorXd& u_guess, double tol, double t = 0.0) {
    if (!problem.has_controls()) throw Error("stationarity_solve requires a control system");
    if (u_guess.size() != problem.control_dim())
        throw DimensionError("u_guess has length " + std::to_string(u_guess.size()) + " but control_dim is " +
                             std::to_string(problem.control_dim()));

    const int m = problem.control_dim();
    Eigen::VectorXd u = u_guess;
    Eigen::VectorXd r = detail::control_gradient(problem, p, u, t);
    double rn = r.lpNorm<Eigen::Infinity>();

    for (int iter = 0; iter < detail::kStationarityMaxIterations; ++iter) {
        if (rn < tol) return {u, rn, iter};

        Eigen::MatrixXd J(m, m);
        for (int j = 0; j < m; ++j) {
            Eigen::VectorXd up = u, um = u;
            up[j] += detail::kControlJacobianStep;
            um[j] -= detail::kControlJacobianStep;
            J.col(j) = (detail::control_gradient(problem, p, up, t) - detail::control_gradient(problem, p, um, t)) /
                       (2.0 * detail::kControlJacobianStep);
        }

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (sv[m - 1] <= 0.0 || sv[0] / sv[m - 1] > detail::kSingularConditionLimit)
            throw NumericalError("singular control Hessian (condition estimate " +
                                 fmt_double(sv[m - 1] <= 0.0 ? std::numeric_limits<double>::infinity()
                                                             : sv[0] / sv[m - 1]) +
                                 ") at t=" + fmt_double(t),
                                 t);

        const Eigen::VectorXd step = svd.solve(-r);
        double lambda = 1.0;
        for (;;) {
            const Eigen::VectorXd u_try = u + lambda * step;
            const Eigen::VectorXd r_try = detail::control_gradient(problem, p, u_try, t);
            const double rn_try = r_try.lpNorm<Eigen::Infinity>();
            if (rn_try <= rn || lambda < 1e-6) {
                u = u_try;
                r = r_try;
                rn = rn_try;
                break;
            }
            lambda *= 0.5;
        }
    }
    if (rn < tol) return {u, rn, detail::kStationarityMaxIterations};
    throw NumericalError("stationarity Newton did not converge after " +
                             std::to_string(detail::kStationarityMaxIterations) +
                             " iterations (residual " + fmt_double(rn) + ") at t=" + fmt_double(t),
                         t);
}

// Time series of a critical trajectory with per-step diagnostics.
struct TrajectoryRecord {
    int base_dim = 0, rank = 0, control_dim = 0;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> x, eta, u;
    std::vector<double> hamiltonian;
    std::vector<double> stationarity;
    std::vector<std::string> casimir_labels;
    std::vector<Eigen::VectorXd> casimir_values;

    std::size_t size() const noexcept { return times.size(); }

    double max_stationarity() const {
        double m = 0.0;
        for (double s : stationarity) m = std::max(m, s);
        return m;
    }

    double energy_drift() const {
        double m = 0.0;
        for (double h : hamiltonian) m = std::max(m, std::abs(h - hamiltonian.front()));
        return m;
    }

    double casimir_drift() const {
        double m = 0.0;
        for (const Eigen::VectorXd& c : casimir_values)
            for (int i = 0; i < c.size(); ++i)
                m = std::max(m, std::abs(c[i] - casimir_values.front()[i]));
        return m;
    }
};

namespace detail {

inline constexpr double kStationarityStageTol = 1e-12;

// One right-hand-side evaluation of the critical-trajectory system. For
// control problems the control is eliminated algebraically first (index-1
// elimination of 0 = dH/du), warm-starting Newton from `u_warm`; the
// Hamiltonian field is then evaluated at (x, eta, u*).
struct CriticalRhs {
    const ControlProblem& problem;
    Eigen::VectorXd u_warm;
    double last_residual = 0.0;

    Eigen::VectorXd operator()(double t, const Eigen::VectorXd& y) {
        const int n = problem.model().base_dim();
        const int r = problem.model().rank();
        PhasePoint p{y.head(n), y.tail(r)};
        Binding extra;
        if (problem.has_controls()) {
            const StationarityResult sol = stationarity_solve(problem, p, u_warm, kStationarityStageTol, t);
            u_warm = sol.u;
            last_residual = sol.residual;
            for (int c = 0; c < problem.control_dim(); ++c)
                extra.set(problem.control_labels()[static_cast<std::size_t>(c)], sol.u[c]);
        }
        extra.set("t", t);
        const HamiltonianField f = hamiltonian_vector_field(problem.model(), problem.hamiltonian(), p, extra);
        Eigen::VectorXd dy(n + r);
        dy << f.xdot, f.etadot;
        return dy;
    }
};

} // namespace detail

// Integrates the critical-trajectory equations
//   xdot^i   = rho^i_alpha dH/deta_alpha
//   etadot_a = -(rho^i_a dH/dx^i + eta_gamma C^gamma_{a beta} dH/deta_beta)
//   0        = dH/du^c
// with fixed-step rk4 or midpoint. The algebraic condition is re-solved at
// every integrator stage; u is warm-started from the previous stage.
inline TrajectoryRecord critical_trajectory(const ControlProblem& problem, int steps, IntegrationMethod method) {
    problem.validate_boundary();
    if (!problem.eta0) throw DimensionError("critical_trajectory requires eta0");
    if (steps < 1) throw DimensionError("steps must be >= 1");

    const AlgebroidModel& model = problem.model();
    const int n = model.base_dim();
    const int r = model.rank();
    const double h = (problem.t1 - problem.t0) / steps;

    TrajectoryRecord rec;
    rec.base_dim = n;
    rec.rank = r;
    rec.control_dim = problem.control_dim();
    for (const auto& c : model.casimirs()) rec.casimir_labels.push_back(c.label);

    detail::CriticalRhs rhs{problem,
                            problem.u0.value_or(Eigen::VectorXd::Zero(problem.control_dim())), 0.0};

    Eigen::VectorXd y(n + r);
    y << problem.x0, *problem.eta0;

    auto record_sample = [&](double t, const Eigen::VectorXd& state) {
        PhasePoint p{state.head(n), state.tail(r)};
        Eigen::VectorXd u_here(0);
        double residual = 0.0;
        if (problem.has_controls()) {
            const StationarityResult sol =
                stationarity_solve(problem, p, rhs.u_warm, detail::kStationarityStageTol, t);
            rhs.u_warm = sol.u;
            u_here = sol.u;
            residual = sol.residual;
        }
        rec.times.push_back(t);
        rec.x.push_back(p.x);
        rec.eta.push_back(p.eta);
        rec.u.push_back(u_here);
        rec.hamiltonian.push_back(pontryagin_hamiltonian(problem, p, u_here, t));
        rec.stationarity.push_back(residual);
        Eigen::VectorXd cas(static_cast<Eigen::Index>(model.casimirs().size()));
        Binding env = detail::phase_binding(model, p);
        for (std::size_t i = 0; i < model.casimirs().size(); ++i)
            cas[static_cast<Eigen::Index>(i)] = model.casimirs()[i].expr.evaluate(env);
        rec.casimir_values.push_back(cas);
    };

    record_sample(problem.t0, y);

    for (int k = 0; k < steps; ++k) {
        const double t = problem.t0 + k * h;
        Eigen::VectorXd y_next;
        if (method == IntegrationMethod::Rk4) {
            const Eigen::VectorXd k1 = rhs(t, y);
            const Eigen::VectorXd k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1);
            const Eigen::VectorXd k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2);
            const Eigen::VectorXd k4 = rhs(t + h, y + h * k3);
            y_next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } else {
            const Eigen::VectorXd k1 = rhs(t, y);
            const Eigen::VectorXd k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1);
            y_next = y + h * k2;
        }
        if (!y_next.allFinite())
            throw NumericalError("non-finite state after t=" + fmt_double(t), t);
        y = y_next;
        record_sample(problem.t0 + (k + 1) * h, y);
    }
    return rec;
}

struct ShootResult {
    Eigen::VectorXd eta0;
    int iterations = 0;
    double endpoint_error = 0.0;
    std::vector<double> residual_history;
    TrajectoryRecord trajectory;
};

namespace detail {

inline constexpr int kShootMaxIterations = 30;
inline constexpr double kShootSensitivityStep = 1e-6;

} // namespace detail

// Newton iteration on the endpoint residual x(t1; eta0) - target, with the
// sensitivity matrix built from forward differences of full trajectory
// integrations (step 1e-6).
inline ShootResult shoot(const ControlProblem& problem, const Eigen::VectorXd& eta0_guess, double tol,
                         int steps, IntegrationMethod method) {
    if (!problem.target) throw DimensionError("shoot requires a target");
    if (eta0_guess.size() != problem.model().rank())
        throw DimensionError("eta0 guess has length " + std::to_string(eta0_guess.size()) + " but rank is " +
                             std::to_string(problem.model().rank()));

    const int n = problem.model().base_dim();
    const int r = problem.model().rank();
    if (n == 0) throw DimensionError("shoot requires a positive-dimensional base");

    auto endpoint = [&](const Eigen::VectorXd& eta0) {
        ControlProblem trial = problem;
        trial.eta0 = eta0;
        TrajectoryRecord rec = critical_trajectory(trial, steps, method);
        return std::pair<Eigen::VectorXd, TrajectoryRecord>(rec.x.back() - *problem.target, std::move(rec));
    };

    Eigen::VectorXd eta0 = eta0_guess;
    auto [g, rec] = endpoint(eta0);
    double gn = g.lpNorm<Eigen::Infinity>();
    ShootResult result;
    result.residual_history.push_back(gn);

    for (int iter = 0; iter < detail::kShootMaxIterations; ++iter) {
        if (gn < tol) {
            result.eta0 = eta0;
            result.iterations = iter;
            result.endpoint_error = gn;
            result.trajectory = std::move(rec);
            return result;
        }

        Eigen::MatrixXd S(n, r);
        for (int j = 0; j < r; ++j) {
            Eigen::VectorXd ep = eta0;
            ep[j] += detail::kShootSensitivityStep;
            S.col(j) = (endpoint(ep).first - g) / detail::kShootSensitivityStep;
        }

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (sv.size() == 0 || sv[0] <= 0.0 ||
            sv[std::min<Eigen::Index>(sv.size() - 1, n - 1)] < 1e-14 * std::max(1.0, sv[0]))
            throw NumericalError("singular shooting sensitivity matrix at iteration " + std::to_string(iter));

        eta0 += svd.solve(-g);
        std::tie(g, rec) = endpoint(eta0);
        gn = g.lpNorm<Eigen::Infinity>();
        result.residual_history.push_back(gn);
    }
    if (gn < tol) {
        result.eta0 = eta0;
        result.iterations = detail::kShootMaxIterations;
        result.endpoint_error = gn;
        result.trajectory = std::move(rec);
        return result;
    }
    std::string log;
    for (double v : result.residual_history) log += " " + fmt_double(v);
    throw NumericalError("shooting did not converge after " + std::to_string(detail::kShootMaxIterations) +
                         " iterations; residual history:" + log);
}

} // namespace algctl
