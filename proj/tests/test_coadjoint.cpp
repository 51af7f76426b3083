#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace algctl;
namespace ts = testsupport;

namespace {

using ts::frobenius_coefficients;

const std::vector<std::string> kGroupNames{"so3", "heisenberg3", "se2", "abelian"};

} // namespace

TEST_CASE("matrix_exp") {
    SECTION("exp(0) = I") {
        CHECK(matrix_exp(Eigen::Matrix3d::Zero()) == Eigen::Matrix3d::Identity());
    }
    SECTION("so3 generators exponentiate to Rodrigues rotations") {
        auto so3 = make_group_context("so3");
        // quarter turn about z sends e1 to e2
        const Eigen::MatrixXd R = matrix_exp(so3.algebra_element(Eigen::Vector3d(0, 0, M_PI / 2)));
        CHECK((R * Eigen::Vector3d(1, 0, 0) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-14);

        std::mt19937 rng(2);
        std::uniform_real_distribution<double> dist(-2.5, 2.5);
        for (int k = 0; k < 25; ++k) {
            const Eigen::Vector3d w(dist(rng), dist(rng), dist(rng));
            const Eigen::MatrixXd E = matrix_exp(so3.algebra_element(w));
            CHECK((E - ts::rodrigues(w)).cwiseAbs().maxCoeff() < 1e-13);
        }
    }
    SECTION("nilpotent heisenberg elements are exact polynomials") {
        auto heis = make_group_context("heisenberg3");
        const Eigen::MatrixXd A = heis.algebra_element(Eigen::Vector3d(0.7, -1.3, 0.4));
        const Eigen::MatrixXd expected = Eigen::Matrix3d::Identity() + A + 0.5 * A * A; // A^3 = 0
        CHECK((matrix_exp(A) - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
    SECTION("exp(A) exp(-A) = I to 1e-10 for ||A|| <= 5") {
        std::mt19937 rng(5);
        for (const std::string& name : kGroupNames) {
            auto ctx = make_group_context(name);
            for (int k = 0; k < 20; ++k) {
                const Eigen::VectorXd c = ctx.sample_coefficients(rng, 5.0 / std::sqrt(3.0));
                const Eigen::MatrixXd A = ctx.algebra_element(c);
                const Eigen::MatrixXd E = matrix_exp(A) * matrix_exp(-A);
                CHECK((E - Eigen::MatrixXd::Identity(ctx.d, ctx.d)).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
    }
    SECTION("enormous norms are reported, not overflowed") {
        CHECK_THROWS_AS(matrix_exp(Eigen::Matrix2d::Identity() * 1e4), NumericalError);
        Eigen::Matrix2d nan = Eigen::Matrix2d::Zero();
        nan(0, 0) = std::nan("");
        CHECK_THROWS_AS(matrix_exp(nan), NumericalError);
    }
}

TEST_CASE("coadjoint_point") {
    auto so3 = make_group_context("so3");
    const Eigen::Vector3d xi(0.3, -0.8, 0.52);

    SECTION("identity element fixes xi") {
        CHECK((coadjoint_point(so3, Eigen::Matrix3d::Identity(), xi) - xi).cwiseAbs().maxCoeff() < 1e-14);
    }
    SECTION("so3 coadjoint action is rotation; norms are preserved") {
        std::mt19937 rng(8);
        for (int k = 0; k < 30; ++k) {
            const Eigen::MatrixXd g = so3.sample_group(rng, 1.5);
            const Eigen::VectorXd lam = coadjoint_point(so3, g, xi);
            CHECK((lam - g * xi).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(std::abs(lam.norm() - xi.norm()) < 1e-12);
        }
    }
    SECTION("abelian groups act trivially") {
        auto ab = make_group_context("abelian", 3);
        std::mt19937 rng(4);
        for (int k = 0; k < 10; ++k) {
            const Eigen::MatrixXd g = ab.sample_group(rng, 2.0);
            CHECK((coadjoint_point(ab, g, xi) - xi).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("orbit samples satisfy the pairing, composition, and ad* identities") {
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> dist(-1.5, 1.5);
    for (const std::string& name : kGroupNames) {
        INFO(name);
        auto ctx = make_group_context(name);
        Eigen::VectorXd xi(ctx.rank());
        for (int i = 0; i < ctx.rank(); ++i) xi[i] = dist(rng);

        const CoadjointOrbitSample sample = sample_orbit(ctx, xi, 40, 101, 1.0);
        REQUIRE(sample.points.size() == 40);

        SECTION("pairing identity on " + name) {
            for (std::size_t k = 0; k < sample.points.size(); ++k) {
                const Eigen::MatrixXd ginv = sample.elements[k].inverse();
                for (int b = 0; b < ctx.rank(); ++b) {
                    const Eigen::MatrixXd adX = ginv * ctx.basis[static_cast<std::size_t>(b)] * sample.elements[k];
                    const double rhs = xi.dot(frobenius_coefficients(ctx, adX));
                    CHECK(std::abs(sample.points[k][b] - rhs) < 1e-10);
                }
            }
        }
        SECTION("composition law on " + name) {
            for (int k = 0; k < 25; ++k) {
                const Eigen::MatrixXd g = ctx.sample_group(rng, 1.0);
                const Eigen::MatrixXd h = ctx.sample_group(rng, 1.0);
                const Eigen::VectorXd lhs = coadjoint_point(ctx, g * h, xi);
                const Eigen::VectorXd rhs = coadjoint_point(ctx, g, coadjoint_point(ctx, h, xi));
                CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
        SECTION("finite-difference ad* matches the algebraic ad* on " + name) {
            const double h = 1e-5;
            const LieAlgebra algebra = lie_algebra_by_name(name, ctx.rank());
            for (int a = 0; a < ctx.rank(); ++a) {
                const Eigen::MatrixXd Ea = ctx.basis[static_cast<std::size_t>(a)];
                const Eigen::VectorXd fd =
                    (coadjoint_point(ctx, matrix_exp(h * Ea), xi) - coadjoint_point(ctx, matrix_exp(-h * Ea), xi)) /
                    (2.0 * h);
                const Eigen::VectorXd algebraic = ad_star_basis(algebra.constants, a, xi);
                CHECK((fd - algebraic).cwiseAbs().maxCoeff() < 1e-6);
            }
        }
    }
}

TEST_CASE("right invariance") {
    SECTION("the canonical construction is invariant on every catalog group") {
        for (const std::string& name : kGroupNames) {
            INFO(name);
            auto ctx = make_group_context(name);
            const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(ctx.rank(), ctx.rank());
            CHECK(verify_right_invariance(ctx, W, 100, 7) < 1e-12);
        }
    }
    SECTION("the broken field is detected") {
        auto so3 = make_group_context("so3");
        const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(3, 3);
        const ControlField broken = [&so3, W](const Eigen::MatrixXd& h, const Eigen::VectorXd& u) -> Eigen::MatrixXd {
            const Eigen::MatrixXd V = so3.algebra_element(W * u);
            return V * h + h * V;
        };
        CHECK(right_invariance_residual(so3, broken, 3, 100, 7) > 0.1);
    }
    SECTION("the zero control gives a zero field and zero residual") {
        auto so3 = make_group_context("so3");
        const ControlField zero_field = [&so3](const Eigen::MatrixXd& h, const Eigen::VectorXd&) -> Eigen::MatrixXd {
            return so3.algebra_element(Eigen::Vector3d::Zero()) * h;
        };
        CHECK(right_invariance_residual(so3, zero_field, 3, 20, 3) == 0.0);
    }
}

TEST_CASE("reduce_system") {
    auto so3 = make_group_context("so3");
    SECTION("basis vector and identity maps") {
        Eigen::MatrixXd W1 = Eigen::MatrixXd::Zero(3, 1);
        W1(0, 0) = 1.0; // V(u) = u1 E1
        CHECK((reduce_system(so3, W1).fiber - W1).cwiseAbs().maxCoeff() < 1e-14);

        const Eigen::MatrixXd I3 = Eigen::MatrixXd::Identity(3, 3);
        CHECK((reduce_system(so3, I3).fiber - I3).cwiseAbs().maxCoeff() < 1e-14);
    }
    SECTION("round trip: lift to the group field and re-reduce") {
        std::mt19937 rng(55);
        std::uniform_real_distribution<double> dist(-2.0, 2.0);
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::MatrixXd W(3, 2);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 2; ++j) W(i, j) = dist(rng);
            const ReducedControlSystem red = reduce_system(so3, W);
            // lift f back to F(g,u) = V(u) g and reduce at the unit
            const ReducedControlSystem again = reduce_system(so3, red.fiber);
            CHECK((again.fiber - W).cwiseAbs().maxCoeff() < 1e-14);
        }
    }
    SECTION("expression form zeroes the base block") {
        Eigen::MatrixXd W = Eigen::MatrixXd::Identity(3, 3);
        const auto exprs = reduce_system(so3, W).to_expressions(2);
        REQUIRE(exprs.size() == 5);
        CHECK(exprs[0].evaluate({}) == 0.0);
        CHECK(exprs[1].evaluate({}) == 0.0);
        Binding env{{"u1", 3.5}, {"u2", 0.0}, {"u3", 0.0}};
        CHECK(std::abs(exprs[2].evaluate(env) - 3.5) < 1e-13);
    }
}

TEST_CASE("full system and reduced system integrate identically") {
    SECTION("so3 rigid body, direct Hamiltonian") {
        ControlProblem reduced = ControlProblem::with_hamiltonian(make_lie_algebra(lie_algebra_so3()),
                                                                  parse("0.5*(eta1^2/1 + eta2^2/2 + eta3^2/3)"));
        reduced.x0 = Eigen::VectorXd(0);
        reduced.eta0 = Eigen::Vector3d(1.0, 0.1, 0.0);
        const FullVsReducedResult r = full_vs_reduced(reduced, lie_algebra_so3(), 2, 1000, IntegrationMethod::Rk4);
        CHECK(r.max_discrepancy < 1e-12);
        CHECK(r.max_xdot_residual < 1e-12);
        // regression goldens from a 200000-step rk4 reference run, cross-checked
        // against 400000 midpoint steps (agreement 7e-14)
        CHECK(std::abs(r.reduced.eta.back()[0] - 1.0003723961374764) < 1e-9);
        CHECK(std::abs(r.reduced.eta.back()[1] - 0.083787088413857971) < 1e-9);
        CHECK(std::abs(r.reduced.eta.back()[2] - (-0.047273595815700932)) < 1e-9);
    }
    SECTION("heisenberg with controls matches the analytic rotation") {
        ControlProblem reduced = ControlProblem::with_controls(make_lie_algebra(lie_algebra_heisenberg3()),
                                                               {parse("u1"), parse("u2"), parse("0")},
                                                               parse("0.5*(u1^2+u2^2)"), 2);
        reduced.x0 = Eigen::VectorXd(0);
        reduced.eta0 = Eigen::Vector3d(1, 0, 2);
        const FullVsReducedResult r =
            full_vs_reduced(reduced, lie_algebra_heisenberg3(), 1, 1000, IntegrationMethod::Rk4);
        CHECK(r.max_discrepancy < 1e-12);
        const double err = std::max({std::abs(r.full.eta.back()[1] - std::cos(2.0)),
                                     std::abs(r.full.eta.back()[2] - std::sin(2.0)),
                                     std::abs(r.full.eta.back()[3] - 2.0)});
        CHECK(err < 1e-9);
    }
    SECTION("abelian: both sides are constant") {
        ControlProblem reduced = ControlProblem::with_hamiltonian(make_lie_algebra(lie_algebra_abelian(3)),
                                                                  parse("0.5*(eta1^2+eta2^2+eta3^2)"));
        reduced.x0 = Eigen::VectorXd(0);
        reduced.eta0 = Eigen::Vector3d(0.3, -1.0, 2.0);
        const FullVsReducedResult r =
            full_vs_reduced(reduced, lie_algebra_abelian(3), 2, 500, IntegrationMethod::Rk4);
        CHECK(r.max_discrepancy == 0.0);
        CHECK((r.reduced.eta.back() - *reduced.eta0).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("an x-dependent Hamiltonian is rejected") {
        ControlProblem reduced =
            ControlProblem::with_hamiltonian(make_tangent(1), parse("x1*eta1"));
        reduced.x0 = Eigen::VectorXd::Zero(1);
        reduced.eta0 = Eigen::VectorXd::Ones(1);
        CHECK_THROWS_AS(full_vs_reduced(reduced, lie_algebra_so3(), 1, 10, IntegrationMethod::Rk4),
                        DimensionError);
    }
}
