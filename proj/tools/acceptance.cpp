/// Acceptance runner: the contract-level checks of the toolkit, each at its
/// stated tolerance, printed one line per check.  Covers the operator
/// identity corpus, the cone/concavity/superadditivity/barrier properties,
/// manufactured elliptic and parabolic solves, the constant-recovery
/// schemes, the Jacobian cross-check, and byte-determinism of the CLI
/// artifacts.  Exits nonzero when any check fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sumhess/cli.hpp"
#include "sumhess/elliptic.hpp"
#include "sumhess/parabolic.hpp"
#include "sumhess/spectrum.hpp"
#include "sumhess/sym_matrix.hpp"
#include "sumhess/verify.hpp"

namespace {

using namespace sumhess;
namespace fs = std::filesystem;

int g_failed = 0;

void line(int idx, bool pass, const char* name, const std::string& detail) {
    std::printf("[%2d/12] %s  %-36s %s\n", idx, pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failed;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

DomainDescriptor unit_square() {
    return DomainDescriptor::rectangle(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 1.0));
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

/// u* = |x|^2/2 with the contracting flux nu.x - (u - u*); S_2(D2u*) = 3.
ProblemSpec quadratic_problem(int dim) {
    return make_problem(SumHessianParams{2, 1.0}, unit_square(), {dim, dim}, "3",
                        "nx*x + ny*y - (u - (x^2 + y^2)/2)", Mode::general, -1.0);
}

/// Same target with f = 3 e^{u - u*}, so inf f_u / f = 1.
ProblemSpec relaxation_problem(int dim) {
    ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {dim, dim},
                                  "3*exp(u - (x^2 + y^2)/2)",
                                  "nx*x + ny*y - (u - (x^2 + y^2)/2)", Mode::general, -1.0);
    ps.c_f = 1.0;
    return ps;
}

/// Per-axis quadratic bump w(s) = 1 + s(1-s) has w'(0) = w(0), w'(1) = -w(1),
/// so u* + 0.1 w(x)w(y) satisfies the discrete flux condition to roundoff.
double bumped_exact(double x, double y) {
    return quad_exact(x, y) + 0.1 * (1.0 + x * (1.0 - x)) * (1.0 + y * (1.0 - y));
}

Eigen::MatrixXd random_rotation(std::mt19937_64& eng, int n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = gauss(eng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i)
        if (r(i, i) < 0.0) q.col(i) *= -1.0;
    return q;
}

void check_identities() {
    const LemmaSuiteReport rep = run_identity_suite(1);
    double worst = 0.0;
    long samples = 0;
    for (const LemmaRow& row : rep.rows) {
        worst = std::max(worst, row.worst_slack);
        samples += row.samples;
    }
    const bool pass = rep.all_passed() && worst <= 1e-12;
    line(1, pass, "symmetric function identities",
         "max rel defect " + num(worst) + " on " + std::to_string(samples) + " samples");
}

void check_cone() {
    const LemmaSuiteReport rep = run_cone_suite(1);
    double c0 = 0.0;
    double theta0 = 0.0;
    double theta1 = 0.0;
    for (const LemmaRow& row : rep.rows) {
        if (row.constant_name == "c0_hat") c0 = row.constant;
        if (row.constant_name == "theta0_hat") theta0 = row.constant;
        if (row.constant_name == "theta1_hat") theta1 = row.constant;
    }
    const bool pass = rep.all_passed() && c0 > 0.0 && theta0 > 0.0 && theta1 > 0.0;
    line(2, pass, "cone inequalities and constants",
         "c0 " + num(c0) + ", theta0 " + num(theta0) + ", theta1 " + num(theta1));
}

void check_concavity() {
    constexpr std::array<std::pair<int, int>, 5> kCases = {
        {{2, 2}, {3, 2}, {3, 3}, {4, 3}, {5, 4}}};
    std::mt19937_64 eng(2026);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst = -1.0;
    long pairs = 0;
    for (long q = 0; q < 1000; ++q) {
        const auto [n, k] = kCases[static_cast<std::size_t>(q) % kCases.size()];
        const SumHessianParams p{k, 1.0 + 0.5 * static_cast<double>(q % 3)};
        const SampleRegion region =
            q % 2 == 0 ? SampleRegion::gamma_k : SampleRegion::tilde_only;
        const Spectrum lam =
            sample_tilde_cone(4096 + static_cast<std::uint64_t>(q), n, p, region);
        const Eigen::MatrixXd rot = random_rotation(eng, n);
        Eigen::VectorXd d(n);
        for (int i = 0; i < n; ++i) d(i) = lam[i];
        const SymMatrix a(rot * d.asDiagonal() * rot.transpose());
        Eigen::MatrixXd bm(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) bm(i, j) = bm(j, i) = gauss(eng);
        const SymMatrix b(bm);
        worst = std::max({worst, second_directional(a, b, p, SecondTransform::kth_root),
                          second_directional(a, b, p, SecondTransform::log)});
        ++pairs;
    }
    line(3, worst <= 1e-8, "kth-root and log concavity",
         "max second derivative " + num(worst) + " over " + std::to_string(pairs) + " pairs");
}

void check_garding() {
    const LemmaSuiteReport rep = run_garding_suite(1);
    double worst = 1.0;
    long samples = 0;
    for (const LemmaRow& row : rep.rows) {
        worst = std::min(worst, row.worst_slack);
        samples += row.samples;
    }
    line(4, rep.all_passed(), "superadditivity and its displays",
         "min normalized margin " + num(worst) + " on " + std::to_string(samples) + " samples");
}

void check_barrier() {
    const LemmaSuiteReport rep = run_barrier_suite(1);
    double c1 = 0.0;
    for (const LemmaRow& row : rep.rows)
        if (row.constant_name == "c1_hat") c1 = row.constant;
    line(5, rep.all_passed() && c1 > 0.0, "boundary barrier ratio", "c1 " + num(c1));
}

void check_quadratic_solve() {
    const ProblemSpec ps = quadratic_problem(17);
    const auto [u, rep] = newton_solve(ps, admissible_seed(ps));
    const Field ustar = sample(ps.grid, quad_exact);
    const double err = (u.values() - ustar.values()).lpNorm<Eigen::Infinity>();
    const C0Bounds b = c0_bounds(ps);
    const bool inside = u.values().minCoeff() >= b.lower - 1e-2 &&
                        u.values().maxCoeff() <= b.upper + 1e-2;
    const bool pass = rep.converged && err <= 1e-8 && inside && rep.c0_checked && rep.c0_pass;
    line(6, pass, "quadratic model: Newton and bounds",
         "error " + num(err) + ", u in [" + num(u.values().minCoeff()) + ", " +
             num(u.values().maxCoeff()) + "], bounds [" + num(b.lower) + ", " + num(b.upper) +
             "]");
}

void check_exponential_refinement() {
    const std::array<int, 3> dims = {17, 33, 65};
    std::array<double, 3> errs{};
    bool converged = true;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const ProblemSpec ps = make_problem(
            SumHessianParams{2, 1.0}, unit_square(), {dims[i], dims[i]},
            "(exp(x)+2)*(exp(y)+2) + exp(x) + exp(y) + 4",
            "nx*(exp(x)+2*x) + ny*(exp(y)+2*y) - (u - (exp(x)+exp(y)+x^2+y^2))", Mode::general,
            -1.0);
        const auto [u, rep] = continuation_solve(ps);
        converged = converged && rep.converged;
        errs[i] = (u.values() - sample(ps.grid, exp_exact).values()).lpNorm<Eigen::Infinity>();
    }
    // least-squares slope of log error against log h over the three levels
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const double x = std::log(1.0 / (dims[i] - 1));
        const double y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(dims.size());
    const double slope = (sxy - sx * sy / m) / (sxx - sx * sx / m);
    const bool pass = converged && slope >= 1.7 && slope <= 2.3;
    line(7, pass, "exponential model: refinement slope",
         "errors " + num(errs[0]) + " " + num(errs[1]) + " " + num(errs[2]) + ", slope " +
             num(slope));
}

void check_classical_constant() {
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {33, 33}, "3",
                                        "nx*x + ny*y - 0.7", Mode::classical);
    const ClassicalResult res = classical_neumann(ps);
    const bool pass = res.converged && std::abs(res.s - 0.7) <= 1e-2;
    line(8, pass, "classical flux constant",
         "s " + num(res.s) + " after " + std::to_string(res.s_seq.size()) + " stages, target 7.000e-01");
}

void check_translating_routes() {
    const ProblemSpec ps = make_problem(SumHessianParams{2, 1.0}, unit_square(), {17, 17},
                                        "3*exp(-0.3)", "nx*x + ny*y", Mode::translating);
    const Field u0 = sample(ps.grid, quad_exact);
    const TranslatingResult scheme = translating_constant(ps, u0, node_nearest_center(ps.grid));
    const TranslatingFlowResult flow = translating_flow_run(ps, u0);
    const bool pass = scheme.converged && flow.trace.outcome == FlowOutcome::translating &&
                      std::abs(scheme.s - 0.3) <= 1e-2 && std::abs(flow.s_est - 0.3) <= 1e-2 &&
                      std::abs(scheme.s - flow.s_est) <= 2e-2;
    line(9, pass, "translating speed, two routes",
         "scheme " + num(scheme.s) + ", flow " + num(flow.s_est) + ", target 3.000e-01");
}

void check_flow_convergence() {
    const ProblemSpec ps = relaxation_problem(17);
    const Field u0 = sample(ps.grid, bumped_exact);
    const auto [u, trace] = flow_run(ps, u0);
    const Field ustar = sample(ps.grid, quad_exact);
    const double err_flow = (u.values() - ustar.values()).lpNorm<Eigen::Infinity>();
    // independent measurement of the O(h^2) discretization error
    const auto [uell, erep] = continuation_solve(ps);
    const double err_disc = (uell.values() - ustar.values()).lpNorm<Eigen::Infinity>();
    double margin_min = 1.0;
    for (const TraceSample& s : trace.samples) margin_min = std::min(margin_min, s.cone_margin);
    const double rate = decay_rate(trace);
    const bool pass = trace.outcome == FlowOutcome::steady && erep.converged &&
                      err_flow <= 1e-6 + err_disc && rate >= 0.8 &&
                      ut_monitor(trace, ps).empty() && margin_min > 0.0;
    line(10, pass, "flow convergence and monitors",
         "error " + num(err_flow) + " (discrete " + num(err_disc) + "), decay rate " +
             num(rate) + ", min margin " + num(margin_min));
}

void check_jacobian() {
    const ProblemSpec ps = quadratic_problem(9);
    double worst = 0.0;
    for (const std::uint64_t seed : {1ull, 2ull, 3ull})
        worst = std::max(worst, jacobian_check(ps, random_admissible_field(ps, seed)));
    line(11, worst <= 1e-4, "Jacobian finite-difference agreement",
         "max rel deviation " + num(worst) + " over 3 seeded fields");
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void check_determinism() {
    const fs::path dir = fs::temp_directory_path() / "sumhess_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "config.json";
    {
        std::ofstream cfg(cfg_path, std::ios::binary);
        cfg << "{\n"
               "  \"problem\": {\n"
               "    \"n\": 2, \"k\": 2, \"alpha\": 1.0,\n"
               "    \"domain\": {\"lo\": [0.0, 0.0], \"hi\": [1.0, 1.0]},\n"
               "    \"dims\": [9, 9],\n"
               "    \"f\": \"3*exp(u - (x^2 + y^2)/2)\",\n"
               "    \"phi\": \"nx*x + ny*y - (u - (x^2 + y^2)/2)\",\n"
               "    \"u0\": \"(x^2 + y^2)/2 + 0.1*(1 + x*(1 - x))*(1 + y*(1 - y))\",\n"
               "    \"u_exact\": \"(x^2 + y^2)/2\",\n"
               "    \"mode\": \"general\",\n"
               "    \"c_phi\": -1.0,\n"
               "    \"c_f\": 1.0\n"
               "  },\n"
               "  \"seed\": 11\n"
               "}\n";
    }
    auto run_once = [&](bool overwrite) {
        std::vector<const char*> argv = {"sumhess", "flow", nullptr, "--overwrite"};
        const std::string path = cfg_path.string();
        argv[2] = path.c_str();
        std::ostringstream out;
        std::ostringstream err;
        const int code = sumhess::cli::run(overwrite ? 4 : 3, argv.data(), out, err);
        return code;
    };
    const int first = run_once(false);
    const std::string report = read_file(dir / "out" / "report.json");
    const std::string solution = read_file(dir / "out" / "solution.dat");
    const std::string trace = read_file(dir / "out" / "trace.csv");
    const int second = run_once(true);
    const bool identical = read_file(dir / "out" / "report.json") == report &&
                           read_file(dir / "out" / "solution.dat") == solution &&
                           read_file(dir / "out" / "trace.csv") == trace;
    const bool pass = first == 0 && second == 0 && identical && !report.empty() &&
                      !solution.empty() && !trace.empty();
    line(12, pass, "byte-identical repeated runs",
         std::string(identical ? "report.json, solution.dat, trace.csv stable" : "outputs differ") +
             ", exit codes " + std::to_string(first) + "/" + std::to_string(second));
    fs::remove_all(dir);
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    check_identities();
    check_cone();
    check_concavity();
    check_garding();
    check_barrier();
    check_quadratic_solve();
    check_exponential_refinement();
    check_classical_constant();
    check_translating_routes();
    check_flow_convergence();
    check_jacobian();
    check_determinism();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (g_failed == 0) {
        std::printf("all 12 checks passed in %.1f s\n", secs);
        return 0;
    }
    std::printf("%d of 12 checks FAILED (%.1f s)\n", g_failed, secs);
    return 1;
}
