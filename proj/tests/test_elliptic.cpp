#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sumhess/elliptic.hpp"
#include "sumhess/errors.hpp"
#include "sumhess/sym_matrix.hpp"
#include "sumhess/spectrum.hpp"

namespace {

using namespace sumhess;

DomainDescriptor unit_square() {
    return DomainDescriptor::rectangle(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 1.0));
}

/// Quadratic model: u* = (x^2 + y^2)/2, D2u* = Id, S_2 = 3 for k = 2, alpha = 1.
ProblemSpec quadratic_problem(int dim) {
    return make_problem(SumHessianParams{2, 1.0}, unit_square(), {dim, dim}, "3",
                        "nx*x + ny*y - (u - (x^2 + y^2)/2)", Mode::general, -1.0);
}

Field sample(const Grid& g, double (*fn)(double, double)) {
    Field out(g);
    for (int node = 0; node < g.node_count(); ++node) {
        const Eigen::VectorXd x = g.coord(node);
        out[node] = fn(x(0), x(1));
    }
    return out;
}

double quad_exact(double x, double y) { return 0.5 * (x * x + y * y); }
double exp_exact(double x, double y) { return std::exp(x) + std::exp(y) + x * x + y * y; }

Eigen::VectorXd flat_residual(const ProblemSpec& ps, const Field& u, double s = 0.0) {
    const ResidualPair rp = residual(ps, u, s);
    return rp.interior.values() + rp.boundary.values();
}

}  // namespace

TEST_SUITE("elliptic") {

TEST_CASE("make_problem reports parse errors with offsets") {
    try {
        (void)make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "3 +", "0",
                           Mode::general, -1.0);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
        CHECK(std::string(e.what()).find("f:") != std::string::npos);
    }
}

TEST_CASE("validate accepts the quadratic model problem") {
    const ProblemSpec ps = quadratic_problem(9);
    CHECK_NOTHROW(validate(ps));
}

TEST_CASE("validate accepts a u-monotone right side with c_f") {
    ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "3*exp(u)",
                                  "nx*x + ny*y - u", Mode::general, -1.0);
    ps.c_f = 1.0;
    CHECK_NOTHROW(validate(ps));
}

TEST_CASE("validate rejects ill-posed data") {
    auto reject = [](const ProblemSpec& ps) {
        CHECK_THROWS_AS(validate(ps), std::invalid_argument);
    };
    // sampled f dips below f_min
    reject(make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "x - 10",
                        "nx*x + ny*y - u", Mode::general, -1.0));
    // phi_u == 0 cannot satisfy a negative c_phi
    reject(make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "3", "nx*x",
                        Mode::general, -1.0));
    // general mode needs c_phi < 0
    reject(make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "3", "-u", Mode::general,
                        0.0));
    // constant-flux modes need u-independent data
    reject(make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "3", "-u",
                        Mode::classical));
    reject(make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "exp(u)", "nx*x",
                        Mode::translating));
    // variables outside the allowed set for the dimension
    reject(make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "z + 3",
                        "nx*x + ny*y - u", Mode::general, -1.0));
    reject(make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "3", "t - u",
                        Mode::general, -1.0));
    reject(make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "nx + 3",
                        "nx*x + ny*y - u", Mode::general, -1.0));
    // k out of range for n = 2
    reject(make_problem(SumHessianParams{5, 1.0}, unit_square(), {9, 9}, "3", "nx*x + ny*y - u",
                        Mode::general, -1.0));

    ProblemSpec bad_fmin = quadratic_problem(9);
    bad_fmin.f_min = 0.0;
    reject(bad_fmin);

    ProblemSpec bad_cf = quadratic_problem(9);
    bad_cf.c_f = 0.5;  // f = 3 is u-free, so inf f_u/f = 0 < 1/2
    reject(bad_cf);

    const ProblemSpec good = quadratic_problem(9);
    const ProblemSpec unbuilt{good.p,       Grid{},       good.f, good.phi,
                              Mode::general, -1.0,         {},     1e-8};
    reject(unbuilt);
}

TEST_CASE("seed amplitude solves S_k(A Id) = 2 sup f") {
    // n = 2, k = 2, alpha = 1, sup f = 3: A^2 + 2A = 6, A = sqrt(7) - 1
    const ProblemSpec ps = quadratic_problem(9);
    CHECK(seed_amplitude(ps) == doctest::Approx(std::sqrt(7.0) - 1.0).epsilon(1e-12));

    // k = 1 hook: 2A + 1 = 6, A = 5/2
    const ProblemSpec lin = make_problem(SumHessianParams{1, 1.0}, unit_square(), {9, 9}, "3", "0",
                                         Mode::general, -1.0);
    CHECK(seed_amplitude(lin) == doctest::Approx(2.5).epsilon(1e-12));

    // tiny right side falls back to the amplitude floor
    const ProblemSpec tiny = make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9},
                                          "0.0000001", "0", Mode::general, -1.0);
    CHECK(seed_amplitude(tiny) == doctest::Approx(1e-3).epsilon(1e-12));
}

TEST_CASE("admissible seed is uniformly convex under its own flux") {
    const ProblemSpec ps = quadratic_problem(17);
    const Grid& g = ps.grid;
    const Field seed = admissible_seed(ps);
    const double a = seed_amplitude(ps);
    const Eigen::Vector2d xc(0.5, 0.5);
    const GhostField ext = fill_ghosts(
        g, seed, [&](const Eigen::VectorXd& x, double, const Eigen::VectorXd& nu) {
            return a * (x - xc).dot(nu);
        });
    for (int node = 0; node < g.node_count(); ++node) {
        const SymMatrix h = hessian_at(g, ext, node);
        CHECK((h.mat() - a * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(cone_check(eigen_sym(h).lambda, ps.p).margin > 0.0);
    }
}

TEST_CASE("residual vanishes on the exact quadratic solution") {
    // u-free flux matching u*: both rows are exact on quadratics
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {17, 17}, "3",
                                        "nx*x + ny*y", Mode::general, -1.0);
    const Field u = sample(ps.grid, quad_exact);
    const ResidualPair rp = residual(ps, u);
    CHECK(rp.interior.values().lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(rp.boundary.values().lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("residual splits rows by node class") {
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "1", "0",
                                        Mode::general, -1.0);
    const Field zero(ps.grid);
    const ResidualPair rp = residual(ps, zero);
    for (int node = 0; node < ps.grid.node_count(); ++node) {
        if (ps.grid.boundary_axis_count(node) == 0) {
            CHECK(rp.interior[node] == -1.0);  // S_k(0) - 1
            CHECK(rp.boundary[node] == 0.0);
        } else {
            CHECK(rp.interior[node] == 0.0);
            CHECK(rp.boundary[node] == 0.0);
        }
    }
}

TEST_CASE("jacobian reduces to the Laplacian stencil for k = 1") {
    const ProblemSpec ps = make_problem(SumHessianParams{1, 1.0}, unit_square(), {9, 9}, "1", "0",
                                        Mode::general, -1.0);
    const Grid& g = ps.grid;
    Field u(g);
    for (int node = 0; node < g.node_count(); ++node) {
        const Eigen::VectorXd x = g.coord(node);
        u[node] = 0.3 * x(0) * x(0) + 0.1 * x(0) * x(1);  // jacobian is iterate-independent
    }
    const Eigen::MatrixXd jac = Eigen::MatrixXd(jacobian(ps, u));

    const int q = g.index({4, 4});  // interior: h = 1/8
    CHECK(jac(q, q) == doctest::Approx(-256.0));
    CHECK(jac(q, g.index({5, 4})) == doctest::Approx(64.0));
    CHECK(jac(q, g.index({4, 3})) == doctest::Approx(64.0));
    CHECK(jac(q, g.index({5, 5})) == doctest::Approx(0.0));

    const int face = g.index({0, 4});  // one face: 3/(2h), -2/h, 1/(2h)
    CHECK(jac(face, face) == doctest::Approx(12.0));
    CHECK(jac(face, g.index({1, 4})) == doctest::Approx(-16.0));
    CHECK(jac(face, g.index({2, 4})) == doctest::Approx(4.0));

    const int corner = g.index({0, 0});  // two faces averaged
    CHECK(jac(corner, corner) == doctest::Approx(12.0));
    CHECK(jac(corner, g.index({1, 0})) == doctest::Approx(-8.0));
    CHECK(jac(corner, g.index({2, 0})) == doctest::Approx(2.0));
    CHECK(jac(corner, g.index({0, 1})) == doctest::Approx(-8.0));
    CHECK(jac(corner, g.index({0, 2})) == doctest::Approx(2.0));

    // linear problem: central differences of the residual are exact
    Eigen::MatrixXd fd(g.node_count(), g.node_count());
    for (int col = 0; col < g.node_count(); ++col) {
        const double h_fd = 1e-6 * (1.0 + std::abs(u[col]));
        Field up = u, dn = u;
        up[col] += h_fd;
        dn[col] -= h_fd;
        fd.col(col) = (flat_residual(ps, up) - flat_residual(ps, dn)) / (2.0 * h_fd);
    }
    const double scale = std::max(1.0, jac.cwiseAbs().maxCoeff());
    CHECK((fd - jac).cwiseAbs().maxCoeff() / scale <= 1e-10);
}

TEST_CASE("jacobian matches central differences for k = 2") {
    const ProblemSpec ps = quadratic_problem(9);
    const Grid& g = ps.grid;
    Field u = admissible_seed(ps);
    for (int node = 0; node < g.node_count(); ++node) {
        const Eigen::VectorXd x = g.coord(node);
        u[node] += 0.01 * std::sin(3.0 * x(0) + 5.0 * x(1));
    }
    const Eigen::MatrixXd jac = Eigen::MatrixXd(jacobian(ps, u));
    Eigen::MatrixXd fd(g.node_count(), g.node_count());
    for (int col = 0; col < g.node_count(); ++col) {
        const double h_fd = 1e-6 * (1.0 + std::abs(u[col]));
        Field up = u, dn = u;
        up[col] += h_fd;
        dn[col] -= h_fd;
        fd.col(col) = (flat_residual(ps, up) - flat_residual(ps, dn)) / (2.0 * h_fd);
    }
    const double scale = std::max(1.0, jac.cwiseAbs().maxCoeff());
    CHECK((fd - jac).cwiseAbs().maxCoeff() / scale <= 1e-5);

    // interior rows only touch the 3x3 neighbourhood
    const int q = g.index({4, 4});
    for (int col = 0; col < g.node_count(); ++col) {
        const MultiIndex mc = g.multi(col);
        if (std::abs(mc[0] - 4) <= 1 && std::abs(mc[1] - 4) <= 1) continue;
        CHECK(jac(q, col) == 0.0);
    }
}

TEST_CASE("newton converges to the quadratic solution from the seed") {
    const ProblemSpec ps = quadratic_problem(17);
    const Field exact = sample(ps.grid, quad_exact);
    const auto [u, rep] = newton_solve(ps, admissible_seed(ps));

    REQUIRE(rep.converged);
    CHECK((u.values() - exact.values()).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(rep.iterations >= 1);
    CHECK(rep.iterations == static_cast<int>(rep.damping_history.size()));
    REQUIRE(rep.residual_history.size() == rep.damping_history.size() + 1);
    for (std::size_t i = 1; i < rep.residual_history.size(); ++i)
        CHECK(rep.residual_history[i] < rep.residual_history[i - 1]);
    // the seed itself violates the cone under the actual flux; every accepted
    // step must restore it
    REQUIRE(rep.cone_margin_history.size() == rep.residual_history.size());
    for (std::size_t i = 1; i < rep.cone_margin_history.size(); ++i)
        CHECK(rep.cone_margin_history[i] > 0.0);
    for (const double d : rep.damping_history) {
        CHECK(d > 0.0);
        CHECK(d <= 1.0);
    }
    CHECK(rep.contraction_identity_rel_max <= 1e-9);
    CHECK(rep.contraction_bounds_ok);
    CHECK(rep.c0_checked);
    CHECK(rep.c0_pass);
    CHECK(rep.sup_u == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.sup_du == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    CHECK(rep.sup_d2u == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("newton accepts an exact initial iterate without stepping") {
    const ProblemSpec ps = quadratic_problem(17);
    const auto [u, rep] = newton_solve(ps, sample(ps.grid, quad_exact));
    CHECK(rep.converged);
    CHECK(rep.iterations == 0);
    CHECK(rep.damping_history.empty());
    CHECK(rep.residual_history.size() == 1);
}

TEST_CASE("newton rejects a loose-tolerance stop at an inadmissible iterate") {
    // the seed meets a sloppy residual target but violates the cone under the
    // actual flux, so the solver must refuse to declare convergence there
    const ProblemSpec ps = quadratic_problem(17);
    SolverConfig cfg;
    cfg.tol = 5.0;
    const auto [u, rep] = newton_solve(ps, admissible_seed(ps), cfg);
    CHECK(!rep.converged);
    CHECK(rep.iterations == 0);
    CHECK(rep.failure == "initial iterate is not admissible");
}

TEST_CASE("relative tolerance scales the stopping test by 1 + sup f") {
    const ProblemSpec ps = quadratic_problem(17);
    SolverConfig cfg;
    cfg.tol = 0.4;
    cfg.relative_tol = true;  // effective tolerance 0.4 * (1 + 3)
    const auto [u, rep] = newton_solve(ps, admissible_seed(ps), cfg);
    REQUIRE(rep.converged);
    CHECK(rep.iterations >= 1);
    CHECK(rep.residual_history.back() <= 1.6);
}

TEST_CASE("newton reports iteration exhaustion") {
    const ProblemSpec ps = make_problem(
        SumHessianParams{2, 1.0}, unit_square(), {17, 17},
        "(exp(x) + 2)*(exp(y) + 2) + exp(x) + exp(y) + 4",
        "nx*(exp(x) + 2*x) + ny*(exp(y) + 2*y) - (u - (exp(x) + exp(y) + x^2 + y^2))",
        Mode::general, -1.0);
    SolverConfig cfg;
    cfg.max_iter = 1;
    const auto [u, rep] = newton_solve(ps, admissible_seed(ps), cfg);
    CHECK(!rep.converged);
    CHECK(rep.iterations == 1);
    CHECK(rep.failure == "maximum iterations reached");
}

TEST_CASE("newton and continuation require the general mode") {
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "3",
                                        "nx*x + ny*y - 0.7", Mode::classical);
    const Field seed(ps.grid);
    CHECK_THROWS_AS((void)newton_solve(ps, seed), std::invalid_argument);
    CHECK_THROWS_AS((void)continuation_solve(ps), std::invalid_argument);
}

TEST_CASE("continuation starts from an exactly solved seed stage") {
    const ProblemSpec ps = quadratic_problem(17);
    const auto [u, rep] = continuation_solve(ps);
    REQUIRE(rep.converged);
    CHECK(rep.t_reached == 1.0);
    REQUIRE(!rep.stage_ts.empty());
    CHECK(rep.stage_ts.front() == 0.0);
    CHECK(rep.stage_ts.back() == 1.0);
    CHECK(rep.stage_iterations.front() == 0);  // the seed solves its own data
    for (std::size_t i = 1; i < rep.stage_ts.size(); ++i)
        CHECK(rep.stage_ts[i] > rep.stage_ts[i - 1]);
    const Field exact = sample(ps.grid, quad_exact);
    CHECK((u.values() - exact.values()).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(rep.c0_checked);
    CHECK(rep.c0_pass);
}

TEST_CASE("continuation converges at second order on a non-polynomial solution") {
    std::vector<double> errs;
    std::vector<int> dims{9, 17, 33};
    for (const int dim : dims) {
        const ProblemSpec ps = make_problem(
            SumHessianParams{2, 1.0}, unit_square(), {dim, dim},
            "(exp(x) + 2)*(exp(y) + 2) + exp(x) + exp(y) + 4",
            "nx*(exp(x) + 2*x) + ny*(exp(y) + 2*y) - (u - (exp(x) + exp(y) + x^2 + y^2))",
            Mode::general, -1.0);
        const auto [u, rep] = continuation_solve(ps);
        REQUIRE(rep.converged);
        CHECK(rep.contraction_bounds_ok);
        const Field exact = sample(ps.grid, exp_exact);
        errs.push_back((u.values() - exact.values()).lpNorm<Eigen::Infinity>());
    }
    MESSAGE("errors: " << errs[0] << " " << errs[1] << " " << errs[2]);
    const double slope = std::log2(errs[0] / errs[2]) / 2.0;
    MESSAGE("observed order: " << slope);
    CHECK(slope >= 1.7);
    CHECK(slope <= 2.3);
}

TEST_CASE("continuation validates its problem") {
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9}, "x - 10",
                                        "nx*x + ny*y - u", Mode::general, -1.0);
    CHECK_THROWS_AS((void)continuation_solve(ps), std::invalid_argument);
}

TEST_CASE("classical scheme recovers the compatible flux constant") {
    // u* = |x|^2/2 + const solves S_2 = 3 with u_nu = nu.x, so phi = nu.x - s*
    // forces s* = 0.7
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {17, 17}, "3",
                                        "nx*x + ny*y - 0.7", Mode::classical);
    const ClassicalResult res = classical_neumann(ps);
    REQUIRE(res.converged);
    REQUIRE(res.s_seq.size() == 4);
    MESSAGE("s sequence: " << res.s_seq[0] << " " << res.s_seq[1] << " " << res.s_seq[2] << " "
                           << res.s_seq[3]);
    CHECK(std::abs(res.s - 0.7) <= 1e-2);
    for (const SolveReport& rep : res.reports) CHECK(rep.converged);

    // the returned potential is weighted-mean-free and matches u* up to its own
    // normalization
    const Grid& g = ps.grid;
    double num = 0.0, den = 0.0;
    for (int node = 0; node < g.node_count(); ++node) {
        const double w = std::ldexp(1.0, -g.boundary_axis_count(node));
        num += w * res.u[node];
        den += w;
    }
    CHECK(std::abs(num / den) <= 1e-9);
    Field shifted = sample(g, quad_exact);
    double enum_ = 0.0;
    for (int node = 0; node < g.node_count(); ++node)
        enum_ += std::ldexp(1.0, -g.boundary_axis_count(node)) * shifted[node];
    shifted.values().array() -= enum_ / den;
    CHECK((res.u.values() - shifted.values()).lpNorm<Eigen::Infinity>() <= 1e-2);
}

TEST_CASE("classical scheme detects a zero constant") {
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {17, 17}, "3",
                                        "nx*x + ny*y", Mode::classical);
    const ClassicalResult res = classical_neumann(ps);
    REQUIRE(res.converged);
    CHECK(std::abs(res.s) <= 1e-2);
}

TEST_CASE("classical scheme requires the classical mode") {
    const ProblemSpec ps = quadratic_problem(9);
    CHECK_THROWS_AS((void)classical_neumann(ps), std::invalid_argument);
}

TEST_CASE("translating scheme recovers the speed and pins the potential") {
    // S_2(D2 u*) = 3 with u*_nu = nu.x, so f = 3 e^{-0.3} forces s* = 0.3
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {17, 17},
                                        "3*exp(-0.3)", "nx*x + ny*y", Mode::translating);
    const Field u0 = sample(ps.grid, quad_exact);
    const int y0 = node_nearest_center(ps.grid);
    const TranslatingResult res = translating_constant(ps, u0, y0);
    REQUIRE(res.converged);
    REQUIRE(res.s_seq.size() == 4);
    MESSAGE("s sequence: " << res.s_seq[0] << " " << res.s_seq[1] << " " << res.s_seq[2] << " "
                           << res.s_seq[3]);
    CHECK(std::abs(res.s - 0.3) <= 1e-2);
    CHECK(std::abs(res.u_ell[y0] - u0[y0]) <= 1e-9);
    for (const SolveReport& rep : res.reports) CHECK(rep.converged);
}

TEST_CASE("translating scheme detects a stationary problem") {
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {17, 17}, "3",
                                        "nx*x + ny*y", Mode::translating);
    const Field u0 = sample(ps.grid, quad_exact);
    const TranslatingResult res = translating_constant(ps, u0, node_nearest_center(ps.grid));
    REQUIRE(res.converged);
    CHECK(std::abs(res.s) <= 1e-2);
}

TEST_CASE("translating scheme is exact under a constant shift of log f") {
    // replacing f by f e^delta shifts s by -delta and leaves u_ell unchanged
    const double delta = 0.25;
    SolverConfig cfg;
    cfg.eps_seq = {1e-2};
    const ProblemSpec ps1 = make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9},
                                         "3*exp(-0.3)", "nx*x + ny*y", Mode::translating);
    const ProblemSpec ps2 = make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9},
                                         "3*exp(-0.05)", "nx*x + ny*y", Mode::translating);
    const Field u01 = sample(ps1.grid, quad_exact);
    const Field u02 = sample(ps2.grid, quad_exact);
    const int y01 = node_nearest_center(ps1.grid);
    const TranslatingResult r1 = translating_constant(ps1, u01, y01, cfg);
    const TranslatingResult r2 = translating_constant(ps2, u02, node_nearest_center(ps2.grid), cfg);
    REQUIRE(r1.converged);
    REQUIRE(r2.converged);
    CHECK(std::abs(r2.s - (r1.s - delta)) <= 1e-5);
    CHECK((r1.u_ell.values() - r2.u_ell.values()).lpNorm<Eigen::Infinity>() <= 1e-5);
}

TEST_CASE("translating scheme requires the translating mode") {
    const ProblemSpec ps = quadratic_problem(9);
    const Field u0(ps.grid);
    CHECK_THROWS_AS((void)translating_constant(ps, u0, 0), std::invalid_argument);
}

TEST_CASE("a priori interval covers the computed solution") {
    // phi(x, 0) = nu.x on the unit square: upper bound 1, lower bound
    // -2 sqrt(2) A - A diam^2 / 2 with A = sqrt(7) - 1 and diam = sqrt(2)
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {17, 17}, "3",
                                        "nx*x + ny*y - u", Mode::general, -1.0);
    const C0Bounds b = c0_bounds(ps);
    const double amp = std::sqrt(7.0) - 1.0;
    CHECK(b.upper == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.lower == doctest::Approx(-2.0 * std::sqrt(2.0) * amp - amp).epsilon(1e-12));

    const ProblemSpec classical = make_problem(SumHessianParams{2, 1.0}, unit_square(), {9, 9},
                                               "3", "nx*x + ny*y", Mode::classical);
    CHECK_THROWS_AS((void)c0_bounds(classical), std::invalid_argument);
}

TEST_CASE("dense and sparse linear paths agree") {
    const ProblemSpec ps = quadratic_problem(9);
    SolverConfig dense_cfg, sparse_cfg;
    dense_cfg.linear_solver = LinearSolverKind::dense;
    sparse_cfg.linear_solver = LinearSolverKind::sparse;
    const auto [ud, rd] = newton_solve(ps, admissible_seed(ps), dense_cfg);
    const auto [us, rs] = newton_solve(ps, admissible_seed(ps), sparse_cfg);
    REQUIRE(rd.converged);
    REQUIRE(rs.converged);
    CHECK((ud.values() - us.values()).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("fields must be bound to the problem grid") {
    const ProblemSpec ps = quadratic_problem(9);
    const ProblemSpec other = quadratic_problem(9);
    const Field stray(other.grid);
    CHECK_THROWS_AS((void)residual(ps, stray), std::invalid_argument);
    CHECK_THROWS_AS((void)newton_solve(ps, stray), std::invalid_argument);
}

TEST_CASE("node_nearest_center picks the middle of an odd grid") {
    const ProblemSpec ps = quadratic_problem(17);
    const int y0 = node_nearest_center(ps.grid);
    CHECK((ps.grid.coord(y0) - Eigen::Vector2d(0.5, 0.5)).norm() <= 1e-14);
}

}  // TEST_SUITE
