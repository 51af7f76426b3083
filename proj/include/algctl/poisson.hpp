#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "algctl/algebroid.hpp"
#include "algctl/expr.hpp"

namespace algctl {

// A point of the dual bundle in local coordinates (x^i, eta_alpha).
struct PhasePoint {
    Eigen::VectorXd x;
    Eigen::VectorXd eta;
};

// An element of the prolongation at a phase point, written in the basis
// {X_alpha, V_alpha}: z are the X coefficients, v the vertical ones. The
// induced base velocity is rho^i_alpha z^alpha by construction, so anchor
// compatibility never needs a separate check.
struct ProlongationVector {
    PhasePoint base;
    Eigen::VectorXd z;
    Eigen::VectorXd v;
};

namespace detail {

inline void check_phase_point(const AlgebroidModel& model, const PhasePoint& p) {
    if (p.x.size() != model.base_dim())
        throw DimensionError("phase point x has length " + std::to_string(p.x.size()) + " but base_dim is " +
                             std::to_string(model.base_dim()));
    if (p.eta.size() != model.rank())
        throw DimensionError("phase point eta has length " + std::to_string(p.eta.size()) + " but rank is " +
                             std::to_string(model.rank()));
}

inline Binding phase_binding(const AlgebroidModel& model, const PhasePoint& p, const Binding& extra = {}) {
    check_phase_point(model, p);
    Binding env;
    for (const auto& [name, value] : extra.items()) env.set(name, value);
    for (int i = 0; i < model.base_dim(); ++i) env.set(model.base_labels()[static_cast<std::size_t>(i)], p.x[i]);
    for (int a = 0; a < model.rank(); ++a) env.set(model.fiber_labels()[static_cast<std::size_t>(a)], p.eta[a]);
    return env;
}

inline void check_field_variables(const AlgebroidModel& model, const Expression& f, const Binding& extra,
                                  const char* what) {
    for (const std::string& v : f.free_variables()) {
        const bool known = std::find(model.base_labels().begin(), model.base_labels().end(), v) !=
                               model.base_labels().end() ||
                           std::find(model.fiber_labels().begin(), model.fiber_labels().end(), v) !=
                               model.fiber_labels().end() ||
                           extra.contains(v);
        if (!known)
            throw DimensionError(std::string(what) + " depends on '" + v +
                                 "', which is not a coordinate of this model");
    }
}

inline Eigen::VectorXd gradient_over(const Expression& f, std::span<const std::string> labels,
                                     const Binding& env) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) g[static_cast<Eigen::Index>(i)] = f.derivative(labels[i], env);
    return g;
}

} // namespace detail

// Linear Poisson bracket on the dual bundle:
//   {F,G} = rho^i_alpha (dF/dx^i dG/deta_alpha - dG/dx^i dF/deta_alpha)
//           - C^gamma_{alpha beta} eta_gamma dF/deta_alpha dG/deta_beta.
// The C sum runs over alpha < beta pairs so that {F,F} = 0 and antisymmetry
// hold exactly in floating point, not just to rounding.
inline double poisson_bracket(const AlgebroidModel& model, const Expression& F, const Expression& G,
                              const PhasePoint& p) {
    detail::check_field_variables(model, F, {}, "bracket argument F");
    detail::check_field_variables(model, G, {}, "bracket argument G");
    const Binding env = detail::phase_binding(model, p);

    const Eigen::VectorXd Fx = detail::gradient_over(F, model.base_labels(), env);
    const Eigen::VectorXd Gx = detail::gradient_over(G, model.base_labels(), env);
    const Eigen::VectorXd Fe = detail::gradient_over(F, model.fiber_labels(), env);
    const Eigen::VectorXd Ge = detail::gradient_over(G, model.fiber_labels(), env);

    const Eigen::MatrixXd rho = model.eval_anchor(p.x);
    const StructureTensor c = model.eval_structure(p.x);

    double rho_part = 0.0;
    for (int i = 0; i < model.base_dim(); ++i)
        for (int a = 0; a < model.rank(); ++a)
            rho_part += rho(i, a) * (Fx[i] * Ge[a] - Gx[i] * Fe[a]);

    double c_part = 0.0;
    for (int g = 0; g < model.rank(); ++g)
        for (int a = 0; a < model.rank(); ++a)
            for (int b = a + 1; b < model.rank(); ++b)
                c_part += c(g, a, b) * p.eta[g] * (Fe[a] * Ge[b] - Fe[b] * Ge[a]);

    return rho_part - c_part;
}

// Kirillov-Kostant bracket on the dual of a constant-structure algebra,
// computed as the pairing of lambda with the algebra bracket of the two
// eta-gradients. This is deliberately a separate evaluation route from
// poisson_bracket; the two are cross-checked against each other in tests.
inline double kirillov_kostant(const StructureTensor& constants, const Expression& f, const Expression& h,
                               const Eigen::VectorXd& lambda) {
    const int r = constants.rank;
    if (lambda.size() != r)
        throw DimensionError("lambda has length " + std::to_string(lambda.size()) + " but the algebra dimension is " +
                             std::to_string(r));
    std::vector<std::string> labels;
    for (int a = 0; a < r; ++a) labels.push_back("eta" + std::to_string(a + 1));
    for (const Expression* e : {&f, &h})
        for (const std::string& v : e->free_variables())
            if (std::find(labels.begin(), labels.end(), v) == labels.end())
                throw DimensionError("Kirillov-Kostant argument depends on '" + v + "', expected eta variables only");

    Binding env;
    for (int a = 0; a < r; ++a) env.set(labels[static_cast<std::size_t>(a)], lambda[a]);
    const Eigen::VectorXd gf = detail::gradient_over(f, labels, env);
    const Eigen::VectorXd gh = detail::gradient_over(h, labels, env);

    Eigen::VectorXd bracket = Eigen::VectorXd::Zero(r);
    for (int g = 0; g < r; ++g)
        for (int a = 0; a < r; ++a)
            for (int b = 0; b < r; ++b)
                bracket[g] += constants(g, a, b) * gf[a] * gh[b];

    double out = 0.0;
    for (int g = 0; g < r; ++g) out += lambda[g] * bracket[g];
    return -out;
}

struct HamiltonianField {
    Eigen::VectorXd xdot;
    Eigen::VectorXd etadot;
};

// Hamiltonian vector field of H on the dual bundle:
//   xdot^i    = rho^i_alpha dH/deta_alpha
//   etadot_a  = -(rho^i_a dH/dx^i + C^gamma_{a beta} eta_gamma dH/deta_beta)
// Extra bindings supply non-coordinate variables of H (controls, time).
inline HamiltonianField hamiltonian_vector_field(const AlgebroidModel& model, const Expression& H,
                                                 const PhasePoint& p, const Binding& extra = {}) {
    detail::check_field_variables(model, H, extra, "Hamiltonian");
    const Binding env = detail::phase_binding(model, p, extra);

    const Eigen::VectorXd Hx = detail::gradient_over(H, model.base_labels(), env);
    const Eigen::VectorXd He = detail::gradient_over(H, model.fiber_labels(), env);
    const Eigen::MatrixXd rho = model.eval_anchor(p.x);
    const StructureTensor c = model.eval_structure(p.x);

    HamiltonianField field;
    field.xdot = Eigen::VectorXd::Zero(model.base_dim());
    for (int i = 0; i < model.base_dim(); ++i)
        for (int a = 0; a < model.rank(); ++a) field.xdot[i] += rho(i, a) * He[a];

    field.etadot = Eigen::VectorXd::Zero(model.rank());
    for (int a = 0; a < model.rank(); ++a) {
        double rho_term = 0.0;
        for (int i = 0; i < model.base_dim(); ++i) rho_term += rho(i, a) * Hx[i];
        double c_term = 0.0;
        for (int g = 0; g < model.rank(); ++g)
            for (int b = 0; b < model.rank(); ++b) c_term += c(g, a, b) * p.eta[g] * He[b];
        field.etadot[a] = -(rho_term + c_term);
    }
    return field;
}

// <theta, Z> = eta_alpha z^alpha at Z's base point.
inline double canonical_one_form(const AlgebroidModel& model, const ProlongationVector& Z) {
    detail::check_phase_point(model, Z.base);
    if (Z.z.size() != model.rank() || Z.v.size() != model.rank())
        throw DimensionError("prolongation coefficients must have length rank");
    double out = 0.0;
    for (int a = 0; a < model.rank(); ++a) out += Z.base.eta[a] * Z.z[a];
    return out;
}

// omega(Z1, Z2) for omega = X^a ^ V^a + (1/2) C^g_{ab} eta_g X^a ^ X^b,
// written over alpha < beta pairs so omega(Z, Z) = 0 exactly.
inline double symplectic_pairing(const AlgebroidModel& model, const ProlongationVector& Z1,
                                 const ProlongationVector& Z2) {
    detail::check_phase_point(model, Z1.base);
    detail::check_phase_point(model, Z2.base);
    const bool same_base = (Z1.base.x.array() == Z2.base.x.array()).all() &&
                           (Z1.base.eta.array() == Z2.base.eta.array()).all();
    if (!same_base) throw DimensionError("symplectic pairing requires a shared base point");
    if (Z1.z.size() != model.rank() || Z1.v.size() != model.rank() || Z2.z.size() != model.rank() ||
        Z2.v.size() != model.rank())
        throw DimensionError("prolongation coefficients must have length rank");

    double canonical = 0.0;
    for (int a = 0; a < model.rank(); ++a) canonical += Z1.z[a] * Z2.v[a] - Z2.z[a] * Z1.v[a];

    const StructureTensor c = model.eval_structure(Z1.base.x);
    double twist = 0.0;
    for (int g = 0; g < model.rank(); ++g)
        for (int a = 0; a < model.rank(); ++a)
            for (int b = a + 1; b < model.rank(); ++b)
                twist += c(g, a, b) * Z1.base.eta[g] * (Z1.z[a] * Z2.z[b] - Z1.z[b] * Z2.z[a]);

    return canonical + twist;
}

// Residual of the defining equation i_{f_H} omega = dH of the Hamiltonian
// section, probed against the supplied prolongation vectors. f_H is taken
// with coefficients z = dH/deta and v = etadot, and
//   dH(Z) = rho^i_a dH/dx^i z^a + dH/deta_a v^a.
inline double verify_hamiltonian_section(const AlgebroidModel& model, const Expression& H, const PhasePoint& p,
                                         std::span<const ProlongationVector> probes, const Binding& extra = {}) {
    const Binding env = detail::phase_binding(model, p, extra);
    const Eigen::VectorXd Hx = detail::gradient_over(H, model.base_labels(), env);
    const Eigen::VectorXd He = detail::gradient_over(H, model.fiber_labels(), env);
    const Eigen::MatrixXd rho = model.eval_anchor(p.x);

    const HamiltonianField field = hamiltonian_vector_field(model, H, p, extra);
    const ProlongationVector f_H{p, He, field.etadot};

    double residual = 0.0;
    for (const ProlongationVector& Z : probes) {
        const double lhs = symplectic_pairing(model, f_H, Z);
        double rhs = 0.0;
        for (int a = 0; a < model.rank(); ++a) {
            double rho_a = 0.0;
            for (int i = 0; i < model.base_dim(); ++i) rho_a += rho(i, a) * Hx[i];
            rhs += rho_a * Z.z[a] + He[a] * Z.v[a];
        }
        residual = std::max(residual, std::abs(lhs - rhs));
    }
    return residual;
}

} // namespace algctl
