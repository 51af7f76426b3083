#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "algctl/optctl.hpp"

namespace algctl {

// Matrix exponential by scaling-and-squaring with an order-18 Taylor kernel.
// Accurate to well below 1e-12 for ||A|| <= 5; enormous norms are rejected
// instead of silently overflowing.
inline Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) throw DimensionError("matrix_exp requires a square matrix");
    if (!A.allFinite()) throw NumericalError("matrix_exp: non-finite entries");

    const double norm = A.size() == 0 ? 0.0 : A.cwiseAbs().rowwise().sum().maxCoeff();
    if (norm > 700.0)
        throw NumericalError("matrix_exp overflow: ||A||_inf = " + fmt_double(norm));

    int squarings = 0;
    double scaled = norm;
    while (scaled > 0.5) {
        scaled *= 0.5;
        ++squarings;
    }
    const Eigen::MatrixXd B = A / std::ldexp(1.0, squarings);

    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    Eigen::MatrixXd sum = term;
    for (int k = 1; k <= 18; ++k) {
        term = (term * B) / static_cast<double>(k);
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) sum = sum * sum;
    if (!sum.allFinite()) throw NumericalError("matrix_exp overflow during squaring");
    return sum;
}

// A matrix Lie group together with a basis of its algebra. The basis must
// close under commutators onto the stored structure constants; this is
// asserted at construction.
struct MatrixGroupContext {
    std::string name;
    int d = 0;
    std::vector<Eigen::MatrixXd> basis;
    LieAlgebra algebra;

    int rank() const noexcept { return algebra.dim; }

    Eigen::MatrixXd algebra_element(const Eigen::VectorXd& coeffs) const {
        if (coeffs.size() != rank()) throw DimensionError("coefficient vector length must equal the algebra dimension");
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(d, d);
        for (int a = 0; a < rank(); ++a) X += coeffs[a] * basis[static_cast<std::size_t>(a)];
        return X;
    }

    Eigen::VectorXd sample_coefficients(std::mt19937& rng, double spread) const {
        std::uniform_real_distribution<double> dist(-spread, spread);
        Eigen::VectorXd c(rank());
        for (int a = 0; a < rank(); ++a) c[a] = dist(rng);
        return c;
    }

    // exp of a random algebra element with coefficients in [-spread, spread]
    Eigen::MatrixXd sample_group(std::mt19937& rng, double spread) const {
        return matrix_exp(algebra_element(sample_coefficients(rng, spread)));
    }

    void check_closure() const {
        for (int a = 0; a < rank(); ++a)
            for (int b = 0; b < rank(); ++b) {
                Eigen::MatrixXd lhs = basis[static_cast<std::size_t>(a)] * basis[static_cast<std::size_t>(b)] -
                                      basis[static_cast<std::size_t>(b)] * basis[static_cast<std::size_t>(a)];
                for (int g = 0; g < rank(); ++g)
                    lhs -= algebra.constants(g, a, b) * basis[static_cast<std::size_t>(g)];
                const double res = lhs.size() == 0 ? 0.0 : lhs.cwiseAbs().maxCoeff();
                if (res > 1e-12)
                    throw Error("algebra basis of '" + name + "' does not close onto its structure constants (residual " +
                                fmt_double(res) + " at [" + std::to_string(a + 1) + "," + std::to_string(b + 1) + "])");
            }
    }
};

inline MatrixGroupContext make_group_context(std::string_view name, int rank_hint = 3) {
    MatrixGroupContext ctx;
    if (name == "so3") {
        ctx = {"so3", 3, {}, lie_algebra_so3()};
        Eigen::Matrix3d L1, L2, L3;
        L1 << 0, 0, 0, 0, 0, -1, 0, 1, 0;
        L2 << 0, 0, 1, 0, 0, 0, -1, 0, 0;
        L3 << 0, -1, 0, 1, 0, 0, 0, 0, 0;
        ctx.basis = {L1, L2, L3};
    } else if (name == "heisenberg3") {
        ctx = {"heisenberg3", 3, {}, lie_algebra_heisenberg3()};
        Eigen::Matrix3d E1 = Eigen::Matrix3d::Zero(), E2 = Eigen::Matrix3d::Zero(), E3 = Eigen::Matrix3d::Zero();
        E1(0, 1) = 1.0;
        E2(1, 2) = 1.0;
        E3(0, 2) = 1.0;
        ctx.basis = {E1, E2, E3};
    } else if (name == "se2") {
        ctx = {"se2", 3, {}, lie_algebra_se2()};
        Eigen::Matrix3d E1 = Eigen::Matrix3d::Zero(), E2 = Eigen::Matrix3d::Zero(), E3 = Eigen::Matrix3d::Zero();
        E1(0, 1) = -1.0;
        E1(1, 0) = 1.0;
        E2(0, 2) = 1.0;
        E3(1, 2) = 1.0;
        ctx.basis = {E1, E2, E3};
    } else if (name == "abelian") {
        ctx = {"abelian", rank_hint, {}, lie_algebra_abelian(rank_hint)};
        for (int a = 0; a < rank_hint; ++a) {
            Eigen::MatrixXd E = Eigen::MatrixXd::Zero(rank_hint, rank_hint);
            E(a, a) = 1.0;
            ctx.basis.push_back(E);
        }
    } else {
        throw Error("no matrix group realization for '" + std::string(name) + "'");
    }
    ctx.check_closure();
    return ctx;
}

// Coefficients of X in the algebra basis, by least squares over the
// flattened matrices. A residual above the gate means X does not lie in
// the span, which indicates a bad basis or a broken construction.
inline Eigen::VectorXd algebra_coefficients(const MatrixGroupContext& ctx, const Eigen::MatrixXd& X) {
    if (X.rows() != ctx.d || X.cols() != ctx.d)
        throw DimensionError("matrix size does not match the group dimension");
    Eigen::MatrixXd B(ctx.d * ctx.d, ctx.rank());
    for (int a = 0; a < ctx.rank(); ++a)
        B.col(a) = Eigen::Map<const Eigen::VectorXd>(ctx.basis[static_cast<std::size_t>(a)].data(),
                                                     ctx.d * ctx.d);
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(X.data(), ctx.d * ctx.d);
    const Eigen::VectorXd coeffs = B.colPivHouseholderQr().solve(v);
    const double residual = (B * coeffs - v).lpNorm<Eigen::Infinity>();
    const double gate = 1e-10 * std::max(1.0, v.lpNorm<Eigen::Infinity>());
    if (residual > gate)
        throw NumericalError("basis-extraction residual " + fmt_double(residual) + " exceeds " + fmt_double(gate) +
                             "; matrix is not in the span of the algebra basis");
    return coeffs;
}

// Ad*_g xi in basis coordinates: lambda_beta = <xi, coefficients of g^-1 E_beta g>.
inline Eigen::VectorXd coadjoint_point(const MatrixGroupContext& ctx, const Eigen::MatrixXd& g,
                                       const Eigen::VectorXd& xi) {
    if (xi.size() != ctx.rank())
        throw DimensionError("xi has length " + std::to_string(xi.size()) + " but the algebra dimension is " +
                             std::to_string(ctx.rank()));
    const Eigen::MatrixXd ginv = g.inverse();
    if (!ginv.allFinite()) throw NumericalError("group element is not invertible");
    Eigen::VectorXd lambda(ctx.rank());
    for (int b = 0; b < ctx.rank(); ++b) {
        const Eigen::MatrixXd ad = ginv * ctx.basis[static_cast<std::size_t>(b)] * g;
        lambda[b] = xi.dot(algebra_coefficients(ctx, ad));
    }
    return lambda;
}

struct CoadjointOrbitSample {
    Eigen::VectorXd xi;
    std::vector<Eigen::VectorXd> points;
    std::vector<Eigen::MatrixXd> elements;
};

inline CoadjointOrbitSample sample_orbit(const MatrixGroupContext& ctx, const Eigen::VectorXd& xi, int count,
                                         unsigned seed, double spread) {
    if (count < 1) throw DimensionError("orbit sampling needs count >= 1");
    std::mt19937 rng(seed);
    CoadjointOrbitSample sample;
    sample.xi = xi;
    for (int k = 0; k < count; ++k) {
        Eigen::MatrixXd g = ctx.sample_group(rng, spread);
        sample.points.push_back(coadjoint_point(ctx, g, xi));
        sample.elements.push_back(std::move(g));
    }
    return sample;
}

using ControlField = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& h, const Eigen::VectorXd& u)>;

// Max over sampled (g, h, u) of ||F(h,u) g - F(hg, u)||, the defect of
// dR_g F(h,u) = F(R_g(h), u) on the group.
inline double right_invariance_residual(const MatrixGroupContext& ctx, const ControlField& field,
                                        int control_dim, int samples, unsigned seed, double spread = 1.0) {
    if (samples < 1) throw DimensionError("right-invariance check needs samples >= 1");
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u_dist(-1.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Eigen::MatrixXd g = ctx.sample_group(rng, spread);
        const Eigen::MatrixXd h = ctx.sample_group(rng, spread);
        Eigen::VectorXd u(control_dim);
        for (int c = 0; c < control_dim; ++c) u[c] = u_dist(rng);
        const Eigen::MatrixXd lhs = field(h, u) * g;
        const Eigen::MatrixXd rhs = field(h * g, u);
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    return worst;
}

// The canonical right-invariant control field F(h,u) = V(u) h with
// V(u) = sum_a (W u)_a E_a.
inline double verify_right_invariance(const MatrixGroupContext& ctx, const Eigen::MatrixXd& V_map, int samples,
                                      unsigned seed, double spread = 1.0) {
    if (V_map.rows() != ctx.rank()) throw DimensionError("V_map must have one row per algebra basis element");
    const ControlField field = [&ctx, &V_map](const Eigen::MatrixXd& h, const Eigen::VectorXd& u) -> Eigen::MatrixXd {
        return ctx.algebra_element(V_map * u) * h;
    };
    return right_invariance_residual(ctx, field, static_cast<int>(V_map.cols()), samples, seed, spread);
}

// A right-invariant system reduced to the trivial algebroid: the base part
// vanishes and the fiber part carries the basis coefficients of V(u).
struct ReducedControlSystem {
    Eigen::MatrixXd fiber; // rank x m, fiber(u) = fiber * u

    // Expression form f^alpha(x, u) on the trivial algebroid with the given
    // base dimension (zero on the base block).
    std::vector<Expression> to_expressions(int base_dim) const {
        std::vector<Expression> out;
        for (int i = 0; i < base_dim; ++i) out.push_back(Expression::constant(0.0));
        for (int a = 0; a < fiber.rows(); ++a) {
            Expression row = Expression::constant(0.0);
            bool any = false;
            for (int j = 0; j < fiber.cols(); ++j) {
                if (fiber(a, j) == 0.0) continue;
                Expression term =
                    Expression::constant(fiber(a, j)) * Expression::variable("u" + std::to_string(j + 1));
                row = any ? row + term : std::move(term);
                any = true;
            }
            out.push_back(std::move(row));
        }
        return out;
    }
};

inline ReducedControlSystem reduce_system(const MatrixGroupContext& ctx, const Eigen::MatrixXd& V_map) {
    if (V_map.rows() != ctx.rank()) throw DimensionError("V_map must have one row per algebra basis element");
    const int m = static_cast<int>(V_map.cols());
    ReducedControlSystem out;
    out.fiber.resize(ctx.rank(), m);
    for (int j = 0; j < m; ++j) {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
        u[j] = 1.0;
        out.fiber.col(j) = algebra_coefficients(ctx, ctx.algebra_element(V_map * u));
    }
    return out;
}

// ---------------------------------------------------------------------------
// full-system vs reduced-system equivalence

struct FullVsReducedResult {
    TrajectoryRecord full;
    TrajectoryRecord reduced;
    double max_discrepancy = 0.0;   // over steps and algebra components of eta
    double max_xdot_residual = 0.0; // defect of (x_{k+1}-x_k)/h against rho dH/deta
};

namespace detail {

inline ControlProblem embed_on_trivial(const ControlProblem& reduced, const LieAlgebra& algebra, int base_dim) {
    if (reduced.model().base_dim() != 0)
        throw DimensionError("the reduced problem must live over a point (base_dim 0)");
    if (reduced.model().rank() != algebra.dim)
        throw DimensionError("reduced problem rank does not match the algebra dimension");

    AlgebroidModel full_model = make_trivial(base_dim, algebra);
    ControlProblem full = [&]() {
        if (reduced.has_controls()) {
            std::vector<Expression> f;
            for (int i = 0; i < base_dim; ++i) f.push_back(Expression::constant(0.0));
            for (const Expression& e : reduced.control_system()) f.push_back(e);
            return ControlProblem::with_controls(std::move(full_model), std::move(f), *reduced.cost(),
                                                 reduced.control_dim());
        }
        std::map<std::string, std::string> shift;
        for (int a = 0; a < algebra.dim; ++a)
            shift["eta" + std::to_string(a + 1)] = "eta" + std::to_string(base_dim + a + 1);
        return ControlProblem::with_hamiltonian(std::move(full_model), reduced.hamiltonian().renamed(shift));
    }();

    full.t0 = reduced.t0;
    full.t1 = reduced.t1;
    full.x0 = Eigen::VectorXd::Zero(base_dim);
    Eigen::VectorXd eta0(base_dim + algebra.dim);
    eta0 << Eigen::VectorXd::Zero(base_dim), *reduced.eta0;
    full.eta0 = eta0;
    full.u0 = reduced.u0;
    return full;
}

} // namespace detail

// Integrates the same x-independent problem once on the trivial algebroid
// over an n-dimensional base and once on the reduced model over a point,
// with the identical scheme and step count, and reports the worst per-step
// disagreement of the algebra components of eta. The base columns of the
// anchor are also checked against the recorded x increments.
inline FullVsReducedResult full_vs_reduced(const ControlProblem& reduced_problem, const LieAlgebra& algebra,
                                           int base_dim, int steps, IntegrationMethod method) {
    if (base_dim < 1) throw DimensionError("full_vs_reduced needs base_dim >= 1");
    if (!reduced_problem.eta0) throw DimensionError("full_vs_reduced requires eta0");
    for (const std::string& v : reduced_problem.hamiltonian().free_variables())
        if (v.rfind('x', 0) == 0)
            throw DimensionError("full_vs_reduced requires an x-independent Hamiltonian; found '" + v + "'");

    const ControlProblem full_problem = detail::embed_on_trivial(reduced_problem, algebra, base_dim);

    FullVsReducedResult result;
    result.reduced = critical_trajectory(reduced_problem, steps, method);
    result.full = critical_trajectory(full_problem, steps, method);

    for (std::size_t k = 0; k < result.full.size(); ++k)
        for (int a = 0; a < algebra.dim; ++a)
            result.max_discrepancy = std::max(
                result.max_discrepancy,
                std::abs(result.full.eta[k][base_dim + a] - result.reduced.eta[k][a]));

    const double h = (full_problem.t1 - full_problem.t0) / steps;
    for (std::size_t k = 0; k + 1 < result.full.size(); ++k) {
        PhasePoint p{result.full.x[k], result.full.eta[k]};
        Binding extra;
        for (int c = 0; c < full_problem.control_dim(); ++c)
            extra.set(full_problem.control_labels()[static_cast<std::size_t>(c)], result.full.u[k][c]);
        extra.set("t", result.full.times[k]);
        const HamiltonianField field =
            hamiltonian_vector_field(full_problem.model(), full_problem.hamiltonian(), p, extra);
        const Eigen::VectorXd slope = (result.full.x[k + 1] - result.full.x[k]) / h;
        result.max_xdot_residual =
            std::max(result.max_xdot_residual, (slope - field.xdot).lpNorm<Eigen::Infinity>());
    }
    return result;
}

} // namespace algctl
