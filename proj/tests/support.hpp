#pragma once

// Shared test helpers: fixture paths, independent numerical oracles, and
// random generators. Everything here is deliberately implemented without
// touching the code paths under test.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "algctl/coadjoint.hpp"
#include "algctl/optctl.hpp"

#ifndef ALGCTL_FIXTURE_DIR
#define ALGCTL_FIXTURE_DIR "fixtures"
#endif

namespace testsupport {

using namespace algctl;

inline std::string fixture(const std::string& name) { return std::string(ALGCTL_FIXTURE_DIR) + "/" + name; }

// --- finite-difference oracles ----------------------------------------------

inline double fd_derivative(const Expression& e, const std::string& var, const Binding& env, double h = 1e-6) {
    Binding up = env, down = env;
    up.set(var, env.get(var) + h);
    down.set(var, env.get(var) - h);
    return (e.evaluate(up) - e.evaluate(down)) / (2.0 * h);
}

// Poisson bracket {B, K} with a black-box first argument, its partials taken
// by central differences (step 1e-5). Used to exercise nested brackets the
// way a user of the public API would.
inline double outer_bracket(const AlgebroidModel& model, const std::function<double(const PhasePoint&)>& B,
                            const Expression& K, const PhasePoint& p) {
    const double h = 1e-5;
    const int n = model.base_dim();
    const int r = model.rank();

    Eigen::VectorXd Bx(n), Be(r);
    for (int i = 0; i < n; ++i) {
        PhasePoint up = p, down = p;
        up.x[i] += h;
        down.x[i] -= h;
        Bx[i] = (B(up) - B(down)) / (2.0 * h);
    }
    for (int a = 0; a < r; ++a) {
        PhasePoint up = p, down = p;
        up.eta[a] += h;
        down.eta[a] -= h;
        Be[a] = (B(up) - B(down)) / (2.0 * h);
    }

    const Binding env = [&] {
        Binding b;
        for (int i = 0; i < n; ++i) b.set(model.base_labels()[static_cast<std::size_t>(i)], p.x[i]);
        for (int a = 0; a < r; ++a) b.set(model.fiber_labels()[static_cast<std::size_t>(a)], p.eta[a]);
        return b;
    }();
    Eigen::VectorXd Kx(n), Ke(r);
    for (int i = 0; i < n; ++i) Kx[i] = K.derivative(model.base_labels()[static_cast<std::size_t>(i)], env);
    for (int a = 0; a < r; ++a) Ke[a] = K.derivative(model.fiber_labels()[static_cast<std::size_t>(a)], env);

    const Eigen::MatrixXd rho = model.eval_anchor(p.x);
    const StructureTensor c = model.eval_structure(p.x);

    double out = 0.0;
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < r; ++a) out += rho(i, a) * (Bx[i] * Ke[a] - Kx[i] * Be[a]);
    for (int g = 0; g < r; ++g)
        for (int a = 0; a < r; ++a)
            for (int b = 0; b < r; ++b) out -= c(g, a, b) * p.eta[g] * Be[a] * Ke[b];
    return out;
}

// --- random expression trees --------------------------------------------------

// Polynomial/trig trees over the given variables: +, -, *, sin, cos, an
// occasional exp, and integer powers. Bounded leaves keep every binding in
// [-1, 1] far from domain singularities.
class TreeGen {
public:
    TreeGen(unsigned seed, std::vector<std::string> vars) : rng_(seed), vars_(std::move(vars)) {}

    Expression tree(int depth) {
        if (depth <= 0) return leaf();
        std::uniform_int_distribution<int> pick(0, 8);
        switch (pick(rng_)) {
        case 0:
        case 1: return tree(depth - 1) + tree(depth - 1);
        case 2: return tree(depth - 1) - tree(depth - 1);
        case 3:
        case 4: return tree(depth - 1) * tree(depth - 1);
        case 5: return apply("sin", tree(depth - 1));
        case 6: return apply("cos", tree(depth - 1));
        case 7: return apply("exp", Expression::constant(0.3) * leaf());
        default: {
            std::uniform_int_distribution<int> e(2, 3);
            return power(leaf(), e(rng_));
        }
        }
    }

    Binding binding() {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        Binding env;
        for (const std::string& v : vars_) env.set(v, dist(rng_));
        return env;
    }

    std::mt19937& rng() { return rng_; }
    const std::vector<std::string>& vars() const { return vars_; }

private:
    Expression leaf() {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        std::uniform_int_distribution<int> pick(0, 3);
        if (pick(rng_) == 0) return Expression::constant(dist(rng_));
        std::uniform_int_distribution<std::size_t> which(0, vars_.size() - 1);
        return Expression::variable(vars_[which(rng_)]);
    }

    static Expression apply(const std::string& fn, const Expression& arg) {
        return Expression::parse(fn + "(" + arg.to_string() + ")");
    }

    static Expression power(const Expression& base, int e) {
        return Expression::parse("(" + base.to_string() + ")^" + std::to_string(e));
    }

    std::mt19937 rng_;
    std::vector<std::string> vars_;
};

// Random low-degree polynomial in the given variables, built from the
// expression combinators (constant + linear + quadratic terms).
inline Expression random_polynomial(std::mt19937& rng, const std::vector<std::string>& vars) {
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> which(0, vars.size() - 1);
    std::uniform_int_distribution<int> terms(2, 5);
    Expression e = Expression::constant(coeff(rng));
    const int count = terms(rng);
    for (int k = 0; k < count; ++k) {
        Expression term = Expression::constant(coeff(rng)) * Expression::variable(vars[which(rng)]);
        if (k % 2 == 0) term = term * Expression::variable(vars[which(rng)]);
        e = e + term;
    }
    return e;
}

inline Binding bind_phase(const AlgebroidModel& model, const PhasePoint& p) {
    Binding b;
    for (int i = 0; i < model.base_dim(); ++i) b.set(model.base_labels()[static_cast<std::size_t>(i)], p.x[i]);
    for (int a = 0; a < model.rank(); ++a) b.set(model.fiber_labels()[static_cast<std::size_t>(a)], p.eta[a]);
    return b;
}

inline PhasePoint random_phase_point(std::mt19937& rng, const AlgebroidModel& model, double spread = 1.0) {
    std::uniform_real_distribution<double> dist(-spread, spread);
    PhasePoint p{Eigen::VectorXd(model.base_dim()), Eigen::VectorXd(model.rank())};
    for (int i = 0; i < model.base_dim(); ++i) p.x[i] = dist(rng);
    for (int a = 0; a < model.rank(); ++a) p.eta[a] = dist(rng);
    return p;
}

// --- rotation-group oracles ----------------------------------------------------

// Independent coefficient extraction: the catalog bases are Frobenius-
// orthogonal, so projection recovers coefficients without the library's
// least-squares path.
inline Eigen::VectorXd frobenius_coefficients(const MatrixGroupContext& ctx, const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(ctx.rank());
    for (int a = 0; a < ctx.rank(); ++a) {
        const Eigen::MatrixXd& E = ctx.basis[static_cast<std::size_t>(a)];
        out[a] = (E.array() * X.array()).sum() / (E.array() * E.array()).sum();
    }
    return out;
}

inline Eigen::Vector3d cross_oracle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& omega) {
    const double theta = omega.norm();
    if (theta == 0.0) return Eigen::Matrix3d::Identity();
    const Eigen::Vector3d axis = omega / theta;
    Eigen::Matrix3d K;
    K << 0, -axis[2], axis[1], axis[2], 0, -axis[0], -axis[1], axis[0], 0;
    return Eigen::Matrix3d::Identity() + std::sin(theta) * K + (1.0 - std::cos(theta)) * K * K;
}

// Row-echelon rank over the rationals-in-doubles, independent of the SVD
// path used by the library.
inline int elimination_rank(Eigen::MatrixXd m, double tol = 1e-9) {
    int rank = 0;
    for (int col = 0; col < m.cols() && rank < m.rows(); ++col) {
        int pivot = -1;
        double best = tol;
        for (int row = rank; row < m.rows(); ++row)
            if (std::abs(m(row, col)) > best) {
                best = std::abs(m(row, col));
                pivot = row;
            }
        if (pivot < 0) continue;
        m.row(pivot).swap(m.row(rank));
        for (int row = rank + 1; row < m.rows(); ++row) m.row(row) -= (m(row, col) / m(rank, col)) * m.row(rank);
        ++rank;
    }
    return rank;
}

// --- catalog conservation problems ---------------------------------------------

struct NamedProblem {
    std::string name;
    ControlProblem problem;
};

// The long-horizon conservation suite: bounded dynamics on every catalog
// model that registers a Casimir, plus the pendulum on the tangent algebroid.
inline std::vector<NamedProblem> conservation_problems(double t1 = 10.0) {
    std::vector<NamedProblem> out;

    {
        ControlProblem p = ControlProblem::with_controls(make_tangent(1), {Expression::parse("u1")},
                                                         Expression::parse("0.5*u1^2 + cos(x1)"), 1);
        p.t1 = t1;
        p.x0 = Eigen::VectorXd::Constant(1, 2.5);
        p.eta0 = Eigen::VectorXd::Constant(1, 0.3);
        out.push_back({"pendulum(tangent n=1)", std::move(p)});
    }
    {
        ControlProblem p = ControlProblem::with_controls(
            make_lie_algebra(lie_algebra_so3()),
            {Expression::parse("u1"), Expression::parse("u2"), Expression::parse("u3")},
            Expression::parse("0.5*(u1^2 + 2*u2^2 + 3*u3^2)"), 3);
        p.t1 = t1;
        p.x0 = Eigen::VectorXd(0);
        p.eta0 = Eigen::Vector3d(1.0, 0.1, 0.0);
        out.push_back({"rigid body(so3)", std::move(p)});
    }
    {
        ControlProblem p = ControlProblem::with_controls(
            make_lie_algebra(lie_algebra_heisenberg3()),
            {Expression::parse("u1"), Expression::parse("u2"), Expression::parse("0")},
            Expression::parse("0.5*(u1^2 + u2^2)"), 2);
        p.t1 = t1;
        p.x0 = Eigen::VectorXd(0);
        p.eta0 = Eigen::Vector3d(1.0, 0.0, 2.0);
        out.push_back({"rotation(heisenberg3)", std::move(p)});
    }
    {
        ControlProblem p = ControlProblem::with_controls(
            make_lie_algebra(lie_algebra_se2()),
            {Expression::parse("u1"), Expression::parse("u2"), Expression::parse("u3")},
            Expression::parse("0.5*(u1^2 + 2*u2^2 + 3*u3^2)"), 3);
        p.t1 = t1;
        p.x0 = Eigen::VectorXd(0);
        p.eta0 = Eigen::Vector3d(0.4, 1.0, 0.2);
        out.push_back({"anisotropic(se2)", std::move(p)});
    }
    {
        ControlProblem p = ControlProblem::with_controls(
            make_trivial(1, lie_algebra_so3()),
            {Expression::parse("u1"), Expression::parse("u2"), Expression::parse("u3"), Expression::parse("u4")},
            Expression::parse("0.5*(u1^2 + u2^2 + 2*u3^2 + 3*u4^2) + cos(x1)"), 4);
        p.t1 = t1;
        p.x0 = Eigen::VectorXd::Constant(1, 0.5);
        p.eta0 = Eigen::VectorXd(4);
        *p.eta0 << 0.2, 1.0, 0.1, 0.0;
        out.push_back({"trivial(1, so3)", std::move(p)});
    }
    {
        ControlProblem p = ControlProblem::with_controls(
            make_lie_algebra(lie_algebra_abelian(3)),
            {Expression::parse("u1"), Expression::parse("u2"), Expression::parse("u3")},
            Expression::parse("0.5*(u1^2 + u2^2 + u3^2)"), 3);
        p.t1 = t1;
        p.x0 = Eigen::VectorXd(0);
        p.eta0 = Eigen::Vector3d(0.3, -1.0, 2.0);
        out.push_back({"abelian(3)", std::move(p)});
    }
    return out;
}

// Catalog algebroids used by certification checks.
inline std::vector<std::pair<std::string, AlgebroidModel>> catalog_models() {
    std::vector<std::pair<std::string, AlgebroidModel>> out;
    out.emplace_back("so3", make_lie_algebra(lie_algebra_so3()));
    out.emplace_back("heisenberg3", make_lie_algebra(lie_algebra_heisenberg3()));
    out.emplace_back("se2", make_lie_algebra(lie_algebra_se2()));
    out.emplace_back("abelian3", make_lie_algebra(lie_algebra_abelian(3)));
    out.emplace_back("tangent1", make_tangent(1));
    out.emplace_back("tangent2", make_tangent(2));
    out.emplace_back("tangent3", make_tangent(3));
    out.emplace_back("trivial(1,so3)", make_trivial(1, lie_algebra_so3()));
    out.emplace_back("trivial(2,heisenberg3)", make_trivial(2, lie_algebra_heisenberg3()));
    out.emplace_back("trivial(1,se2)", make_trivial(1, lie_algebra_se2()));
    out.emplace_back("trivial(2,abelian3)", make_trivial(2, lie_algebra_abelian(3)));
    return out;
}

inline std::vector<Eigen::VectorXd> random_points(std::mt19937& rng, int n, int count, double spread = 2.0) {
    std::uniform_real_distribution<double> dist(-spread, spread);
    std::vector<Eigen::VectorXd> out;
    if (n == 0) {
        out.emplace_back(0);
        return out;
    }
    for (int k = 0; k < count; ++k) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = dist(rng);
        out.push_back(std::move(x));
    }
    return out;
}

// The deliberately broken structure tensor: C^1_{12} = 1, C^2_{23} = 1.
// The cyclic bracket sum [[e1,e2],e3] + [[e2,e3],e1] + [[e3,e1],e2] = -e1.
inline AlgebroidModel broken_jacobi_model() {
    AlgebroidModel m("broken", 0, 3);
    m.set_structure_entry(0, 0, 1, Expression::constant(1.0));
    m.set_structure_entry(1, 1, 2, Expression::constant(1.0));
    return m;
}

} // namespace testsupport
