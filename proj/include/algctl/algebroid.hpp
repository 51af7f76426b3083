#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "algctl/expr.hpp"

namespace algctl {

// Evaluated structure tensor C^gamma_{alpha beta} at one base point.
// Entries are written in (gamma, alpha, beta) / (gamma, beta, alpha) pairs,
// so antisymmetry in the lower indices is exact by construction.
struct StructureTensor {
    int rank = 0;
    std::vector<double> c;

    explicit StructureTensor(int r = 0) : rank(r), c(static_cast<std::size_t>(r) * r * r, 0.0) {}

    double operator()(int gamma, int alpha, int beta) const {
        return c[index(gamma, alpha, beta)];
    }

    void set_pair(int gamma, int alpha, int beta, double value) {
        if (alpha == beta) {
            if (value != 0.0) throw DimensionError("structure entry with alpha == beta must vanish");
            return;
        }
        c[index(gamma, alpha, beta)] = value;
        c[index(gamma, beta, alpha)] = -value;
    }

    bool all_zero() const {
        for (double v : c)
            if (v != 0.0) return false;
        return true;
    }

private:
    std::size_t index(int gamma, int alpha, int beta) const {
        return (static_cast<std::size_t>(gamma) * rank + alpha) * rank + beta;
    }
};

// Applies ad*_X xi for a constant-structure algebra:
//   <ad*_X xi, e_beta> = <xi, [e_beta, X]> = sum_{gamma,alpha} xi_gamma C^gamma_{beta alpha} X_alpha
inline Eigen::VectorXd ad_star(const StructureTensor& constants, const Eigen::VectorXd& coeffs,
                               const Eigen::VectorXd& xi) {
    const int r = constants.rank;
    if (coeffs.size() != r || xi.size() != r)
        throw DimensionError("ad_star: coefficient/xi length does not match algebra dimension");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(r);
    for (int beta = 0; beta < r; ++beta)
        for (int gamma = 0; gamma < r; ++gamma)
            for (int alpha = 0; alpha < r; ++alpha)
                out[beta] += xi[gamma] * constants(gamma, beta, alpha) * coeffs[alpha];
    return out;
}

inline Eigen::VectorXd ad_star_basis(const StructureTensor& constants, int alpha, const Eigen::VectorXd& xi) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(constants.rank);
    e[alpha] = 1.0;
    return ad_star(constants, e, xi);
}

// A finite-dimensional real Lie algebra given by structure constants,
// together with the polynomial Casimirs we track along flows.
struct LieAlgebra {
    std::string name;
    int dim = 0;
    StructureTensor constants;
    // (label, expression in eta1..etadim)
    std::vector<std::pair<std::string, std::string>> casimirs;
};

inline LieAlgebra lie_algebra_so3() {
    LieAlgebra a{"so3", 3, StructureTensor(3), {{"|eta|^2", "eta1^2+eta2^2+eta3^2"}}};
    a.constants.set_pair(2, 0, 1, 1.0); // [e1,e2] = e3
    a.constants.set_pair(0, 1, 2, 1.0); // [e2,e3] = e1
    a.constants.set_pair(1, 2, 0, 1.0); // [e3,e1] = e2
    return a;
}

inline LieAlgebra lie_algebra_heisenberg3() {
    LieAlgebra a{"heisenberg3", 3, StructureTensor(3), {{"eta3", "eta3"}}};
    a.constants.set_pair(2, 0, 1, 1.0); // [e1,e2] = e3, e3 central
    return a;
}

inline LieAlgebra lie_algebra_se2() {
    LieAlgebra a{"se2", 3, StructureTensor(3), {{"eta2^2+eta3^2", "eta2^2+eta3^2"}}};
    a.constants.set_pair(2, 0, 1, 1.0);  // [e1,e2] = e3
    a.constants.set_pair(1, 0, 2, -1.0); // [e1,e3] = -e2
    return a;
}

inline LieAlgebra lie_algebra_abelian(int r) {
    if (r < 1) throw DimensionError("abelian algebra needs rank >= 1");
    LieAlgebra a{"abelian", r, StructureTensor(r), {}};
    for (int i = 0; i < r; ++i)
        a.casimirs.emplace_back("eta" + std::to_string(i + 1), "eta" + std::to_string(i + 1));
    return a;
}

inline LieAlgebra lie_algebra_by_name(std::string_view name, int rank_hint = 3) {
    if (name == "so3") return lie_algebra_so3();
    if (name == "heisenberg3") return lie_algebra_heisenberg3();
    if (name == "se2") return lie_algebra_se2();
    if (name == "abelian") return lie_algebra_abelian(rank_hint);
    throw Error("unknown Lie algebra '" + std::string(name) +
                "' (expected so3, heisenberg3, se2, or abelian)");
}

// A Lie algebroid in local coordinates: anchor field rho^i_alpha(x) and
// structure field C^gamma_{alpha beta}(x). Only alpha < beta structure
// entries are stored; the evaluated tensor is antisymmetrized on read.
class AlgebroidModel {
public:
    struct StructureEntry {
        int gamma, alpha, beta; // alpha < beta
        Expression expr;
    };

    struct Casimir {
        std::string label;
        Expression expr; // in eta variables
    };

    struct CoadjointInfo {
        Eigen::VectorXd xi;
        Eigen::MatrixXd spanning; // columns ad*_{e_alpha} xi (zero on base columns)
        int numerical_rank = 0;
    };

    AlgebroidModel(std::string kind, int base_dim, int rank)
        : kind_(std::move(kind)), base_dim_(base_dim), rank_(rank) {
        if (base_dim < 0) throw DimensionError("base dimension must be nonnegative");
        if (rank < 1) throw DimensionError("rank must be positive");
        anchor_.assign(static_cast<std::size_t>(base_dim),
                       std::vector<Expression>(static_cast<std::size_t>(rank), Expression::constant(0.0)));
        for (int i = 0; i < base_dim; ++i) base_labels_.push_back("x" + std::to_string(i + 1));
        for (int a = 0; a < rank; ++a) fiber_labels_.push_back("eta" + std::to_string(a + 1));
    }

    const std::string& kind() const noexcept { return kind_; }
    int base_dim() const noexcept { return base_dim_; }
    int rank() const noexcept { return rank_; }
    const std::vector<std::string>& base_labels() const noexcept { return base_labels_; }
    const std::vector<std::string>& fiber_labels() const noexcept { return fiber_labels_; }
    const std::vector<Casimir>& casimirs() const noexcept { return casimirs_; }
    const std::vector<StructureEntry>& structure_entries() const noexcept { return structure_; }
    const std::optional<CoadjointInfo>& coadjoint_info() const noexcept { return coadjoint_; }

    void set_anchor_entry(int i, int alpha, Expression e) {
        check_anchor_index(i, alpha);
        anchor_[static_cast<std::size_t>(i)][static_cast<std::size_t>(alpha)] = std::move(e);
    }

    // Accepts any index order; entries are normalized to alpha < beta.
    void set_structure_entry(int gamma, int alpha, int beta, Expression e) {
        check_fiber_index(gamma);
        check_fiber_index(alpha);
        check_fiber_index(beta);
        if (alpha == beta)
            throw DimensionError("structure entry C^g_{aa} is identically zero; refusing alpha == beta");
        if (alpha > beta) {
            std::swap(alpha, beta);
            e = -std::move(e);
        }
        for (const StructureEntry& s : structure_)
            if (s.gamma == gamma && s.alpha == alpha && s.beta == beta)
                throw DimensionError("duplicate structure entry C^" + std::to_string(gamma + 1) + "_{" +
                                     std::to_string(alpha + 1) + "," + std::to_string(beta + 1) + "}");
        structure_.push_back(StructureEntry{gamma, alpha, beta, std::move(e)});
    }

    void add_casimir(std::string label, Expression e) {
        casimirs_.push_back(Casimir{std::move(label), std::move(e)});
    }

    void set_coadjoint_info(CoadjointInfo info) { coadjoint_ = std::move(info); }

    void set_kind(std::string kind) { kind_ = std::move(kind); }

    Binding base_binding(const Eigen::VectorXd& x) const {
        if (x.size() != base_dim_)
            throw DimensionError("base point has length " + std::to_string(x.size()) + " but base_dim is " +
                                 std::to_string(base_dim_));
        Binding env;
        for (int i = 0; i < base_dim_; ++i) env.set(base_labels_[static_cast<std::size_t>(i)], x[i]);
        return env;
    }

    Eigen::MatrixXd eval_anchor(const Eigen::VectorXd& x) const {
        const Binding env = base_binding(x);
        Eigen::MatrixXd rho(base_dim_, rank_);
        for (int i = 0; i < base_dim_; ++i)
            for (int a = 0; a < rank_; ++a)
                rho(i, a) = anchor_[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)].evaluate(env);
        return rho;
    }

    StructureTensor eval_structure(const Eigen::VectorXd& x) const {
        const Binding env = base_binding(x);
        StructureTensor t(rank_);
        for (const StructureEntry& s : structure_)
            t.set_pair(s.gamma, s.alpha, s.beta, s.expr.evaluate(env));
        return t;
    }

    bool structure_is_constant() const {
        for (const StructureEntry& s : structure_)
            if (!s.expr.free_variables().empty()) return false;
        return true;
    }

private:
    void check_anchor_index(int i, int alpha) const {
        if (i < 0 || i >= base_dim_ || alpha < 0 || alpha >= rank_)
            throw DimensionError("anchor index out of range");
    }
    void check_fiber_index(int a) const {
        if (a < 0 || a >= rank_) throw DimensionError("fiber index out of range");
    }

    std::string kind_;
    int base_dim_;
    int rank_;
    std::vector<std::vector<Expression>> anchor_;
    std::vector<StructureEntry> structure_;
    std::vector<std::string> base_labels_;
    std::vector<std::string> fiber_labels_;
    std::vector<Casimir> casimirs_;
    std::optional<CoadjointInfo> coadjoint_;
};

// ---------------------------------------------------------------------------
// catalog

inline AlgebroidModel make_tangent(int n) {
    AlgebroidModel m("tangent", n, n);
    for (int i = 0; i < n; ++i) m.set_anchor_entry(i, i, Expression::constant(1.0));
    return m;
}

// Trivial algebroid of the product groupoid: anchor [I_n | 0], bracket equal
// to the algebra bracket on the last dim(g) fiber indices. n = 0 degenerates
// to the Lie algebra over a point.
inline AlgebroidModel make_trivial(int n, const LieAlgebra& algebra) {
    AlgebroidModel m(n == 0 ? "lie_algebra:" + algebra.name : "trivial:" + algebra.name, n,
                     n + algebra.dim);
    for (int i = 0; i < n; ++i) m.set_anchor_entry(i, i, Expression::constant(1.0));
    for (int g = 0; g < algebra.dim; ++g)
        for (int a = 0; a < algebra.dim; ++a)
            for (int b = a + 1; b < algebra.dim; ++b) {
                const double v = algebra.constants(g, a, b);
                if (v != 0.0) m.set_structure_entry(n + g, n + a, n + b, Expression::constant(v));
            }
    std::map<std::string, std::string> shift;
    for (int a = 0; a < algebra.dim; ++a)
        shift["eta" + std::to_string(a + 1)] = "eta" + std::to_string(n + a + 1);
    for (const auto& [label, source] : algebra.casimirs) {
        Expression e = Expression::parse(source);
        m.add_casimir(label, n == 0 ? e : e.renamed(shift));
    }
    return m;
}

inline AlgebroidModel make_lie_algebra(const LieAlgebra& algebra) { return make_trivial(0, algebra); }

// Jacobi residual of a constant structure tensor (no anchor term).
inline double algebra_jacobi_residual(const StructureTensor& c) {
    const int r = c.rank;
    double worst = 0.0;
    auto term = [&](int a, int b, int g, int nu) {
        double t = 0.0;
        for (int mu = 0; mu < r; ++mu) t += c(nu, a, mu) * c(mu, b, g);
        return t;
    };
    for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
            for (int g = 0; g < r; ++g)
                for (int nu = 0; nu < r; ++nu)
                    worst = std::max(worst, std::abs(term(a, b, g, nu) + term(b, g, a, nu) + term(g, a, b, nu)));
    return worst;
}

// Numerical rank with threshold 1e-10 * largest singular value.
inline int numerical_rank(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] == 0.0) return 0;
    const double threshold = 1e-10 * sv[0];
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > threshold) ++rank;
    return rank;
}

// Coadjoint algebroid of the trivial groupoid over xi: same structure
// functions and anchor as the source trivial algebroid, plus the spanning
// set {ad*_{e_alpha} xi} of the orbit tangent and its numerical rank. The
// spanning set may be rank-deficient; nothing downstream assumes otherwise.
inline AlgebroidModel make_coadjoint(const LieAlgebra& algebra, const Eigen::VectorXd& xi, int n) {
    if (xi.size() != algebra.dim)
        throw DimensionError("xi has length " + std::to_string(xi.size()) + " but the algebra dimension is " +
                             std::to_string(algebra.dim));
    if (xi.isZero(0.0)) throw Error("coadjoint model requires xi != 0");
    if (const double jac = algebra_jacobi_residual(algebra.constants); jac > 1e-10)
        throw Error("algebra '" + algebra.name + "' fails the Jacobi identity (residual " + fmt_double(jac) +
                    "); refusing to build a coadjoint model on it");

    AlgebroidModel m = make_trivial(n, algebra);
    m.set_kind("coadjoint:" + algebra.name);

    Eigen::MatrixXd spanning = Eigen::MatrixXd::Zero(algebra.dim, m.rank());
    for (int a = 0; a < algebra.dim; ++a)
        spanning.col(n + a) = ad_star_basis(algebra.constants, a, xi);

    AlgebroidModel::CoadjointInfo info;
    info.xi = xi;
    info.spanning = spanning;
    info.numerical_rank = numerical_rank(spanning);
    m.set_coadjoint_info(std::move(info));
    return m;
}

inline AlgebroidModel make_custom(int n, int r, std::vector<std::vector<Expression>> anchor_rows,
                                  std::vector<std::tuple<int, int, int, Expression>> structure) {
    AlgebroidModel m("custom", n, r);
    if (static_cast<int>(anchor_rows.size()) != n)
        throw DimensionError("anchor has " + std::to_string(anchor_rows.size()) + " rows but base_dim is " +
                             std::to_string(n));
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(anchor_rows[static_cast<std::size_t>(i)].size()) != r)
            throw DimensionError("anchor row " + std::to_string(i + 1) + " has " +
                                 std::to_string(anchor_rows[static_cast<std::size_t>(i)].size()) +
                                 " entries but rank is " + std::to_string(r));
        for (int a = 0; a < r; ++a)
            m.set_anchor_entry(i, a, std::move(anchor_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]));
    }
    for (auto& [g, a, b, e] : structure) m.set_structure_entry(g, a, b, std::move(e));
    return m;
}

// ---------------------------------------------------------------------------
// axiom certification

struct AxiomReport {
    double antisymmetry_residual = 0.0;
    double anchor_residual = 0.0;
    double jacobi_residual = 0.0;
    // worst Jacobi combination, 1-based (alpha, beta, gamma, nu)
    std::array<int, 4> worst_jacobi{0, 0, 0, 0};
    std::array<int, 3> worst_anchor{0, 0, 0}; // (i, alpha, beta), 1-based
    std::vector<Eigen::VectorXd> samples_used;
    double tolerance = 0.0;
    bool pass = false;
    std::vector<std::string> notes;

    double max_residual() const {
        return std::max({antisymmetry_residual, anchor_residual, jacobi_residual});
    }

    std::string summary() const {
        std::ostringstream os;
        os << "antisymmetry residual: " << fmt_double(antisymmetry_residual) << "\n"
           << "anchor compatibility residual: " << fmt_double(anchor_residual);
        if (worst_anchor[0] > 0)
            os << " (worst at i=" << worst_anchor[0] << ", alpha=" << worst_anchor[1]
               << ", beta=" << worst_anchor[2] << ")";
        os << "\n"
           << "jacobi residual: " << fmt_double(jacobi_residual);
        if (worst_jacobi[0] > 0)
            os << " (worst at alpha=" << worst_jacobi[0] << ", beta=" << worst_jacobi[1]
               << ", gamma=" << worst_jacobi[2] << ", nu=" << worst_jacobi[3] << ")";
        os << "\n"
           << "samples: " << samples_used.size() << ", tolerance: " << fmt_double(tolerance) << "\n"
           << "result: " << (pass ? "PASS" : "FAIL") << "\n";
        for (const std::string& note : notes) os << "note: " << note << "\n";
        return os.str();
    }
};

namespace detail {

inline constexpr double kCertifyFdStep = 1e-5;

inline std::string point_to_string(const Eigen::VectorXd& x) {
    std::string s = "(";
    for (int i = 0; i < x.size(); ++i) {
        if (i) s += ", ";
        s += fmt_double(x[i]);
    }
    return s + ")";
}

} // namespace detail

// Checks, at every sample point: antisymmetry of C, the anchor compatibility
//   rho^j_alpha d_j rho^i_beta - rho^j_beta d_j rho^i_alpha = rho^i_gamma C^gamma_{alpha beta},
// and the Jacobi identity
//   cyclic sum over (alpha,beta,gamma) of [rho^i_alpha d_i C^nu_{beta gamma} + C^nu_{alpha mu} C^mu_{beta gamma}] = 0.
// Derivatives use central differences with step 1e-5. A domain error at one
// sample is recorded as a note and certification continues on the others.
inline AxiomReport certify(const AlgebroidModel& model, std::span<const Eigen::VectorXd> samples,
                           double tolerance) {
    if (samples.empty()) throw DimensionError("certify needs at least one sample point");

    const int n = model.base_dim();
    const int r = model.rank();
    const double h = detail::kCertifyFdStep;

    AxiomReport report;
    report.tolerance = tolerance;
    int evaluated = 0;

    for (std::size_t k = 0; k < samples.size(); ++k) {
        const Eigen::VectorXd& x = samples[k];
        try {
            const Eigen::MatrixXd rho = model.eval_anchor(x);
            const StructureTensor c = model.eval_structure(x);

            for (int g = 0; g < r; ++g)
                for (int a = 0; a < r; ++a)
                    for (int b = 0; b < r; ++b)
                        report.antisymmetry_residual =
                            std::max(report.antisymmetry_residual, std::abs(c(g, a, b) + c(g, b, a)));

            // central-difference derivatives along each base direction
            std::vector<Eigen::MatrixXd> drho;
            std::vector<StructureTensor> dc;
            for (int j = 0; j < n; ++j) {
                Eigen::VectorXd xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                drho.push_back((model.eval_anchor(xp) - model.eval_anchor(xm)) / (2.0 * h));
                const StructureTensor cp = model.eval_structure(xp);
                const StructureTensor cm = model.eval_structure(xm);
                StructureTensor d(r);
                for (std::size_t idx = 0; idx < d.c.size(); ++idx) d.c[idx] = (cp.c[idx] - cm.c[idx]) / (2.0 * h);
                dc.push_back(std::move(d));
            }

            for (int i = 0; i < n; ++i)
                for (int a = 0; a < r; ++a)
                    for (int b = 0; b < r; ++b) {
                        double lhs = 0.0;
                        for (int j = 0; j < n; ++j)
                            lhs += rho(j, a) * drho[static_cast<std::size_t>(j)](i, b) -
                                   rho(j, b) * drho[static_cast<std::size_t>(j)](i, a);
                        double rhs = 0.0;
                        for (int g = 0; g < r; ++g) rhs += rho(i, g) * c(g, a, b);
                        const double res = std::abs(lhs - rhs);
                        if (res > report.anchor_residual) {
                            report.anchor_residual = res;
                            report.worst_anchor = {i + 1, a + 1, b + 1};
                        }
                    }

            auto jacobi_term = [&](int a, int b, int g, int nu) {
                double t = 0.0;
                for (int i = 0; i < n; ++i) t += rho(i, a) * dc[static_cast<std::size_t>(i)](nu, b, g);
                for (int mu = 0; mu < r; ++mu) t += c(nu, a, mu) * c(mu, b, g);
                return t;
            };
            for (int a = 0; a < r; ++a)
                for (int b = 0; b < r; ++b)
                    for (int g = 0; g < r; ++g)
                        for (int nu = 0; nu < r; ++nu) {
                            const double sum =
                                jacobi_term(a, b, g, nu) + jacobi_term(b, g, a, nu) + jacobi_term(g, a, b, nu);
                            const double res = std::abs(sum);
                            if (res > report.jacobi_residual) {
                                report.jacobi_residual = res;
                                report.worst_jacobi = {a + 1, b + 1, g + 1, nu + 1};
                            }
                        }

            report.samples_used.push_back(x);
            ++evaluated;
        } catch (const EvalError& err) {
            report.notes.push_back("sample " + std::to_string(k + 1) + " at " + detail::point_to_string(x) +
                                   " skipped: " + err.what());
        }
    }

    report.pass = evaluated > 0 && report.max_residual() < tolerance;
    if (evaluated == 0) report.notes.push_back("no sample point could be evaluated");
    if (model.coadjoint_info()) {
        const auto& info = *model.coadjoint_info();
        report.notes.push_back("coadjoint spanning set {ad*_e_alpha xi} has numerical rank " +
                               std::to_string(info.numerical_rank) + " of " + std::to_string(model.rank()) +
                               " sections; rank deficiency is expected and recorded, not an error");
    }
    return report;
}

} // namespace algctl
