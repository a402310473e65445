#include "sumhess/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "elliptic_internals.hpp"
#include "sumhess/errors.hpp"
#include "sumhess/sym_matrix.hpp"

namespace sumhess {

namespace detail {

expr::Env make_env(const Eigen::VectorXd& x, double u) {
    expr::Env env;
    env.x = x(0);
    if (x.size() > 1) env.y = x(1);
    if (x.size() > 2) env.z = x(2);
    env.u = u;
    return env;
}

expr::Env make_env(const Eigen::VectorXd& x, double u, const Eigen::VectorXd& nu) {
    expr::Env env = make_env(x, u);
    env.nx = nu(0);
    if (nu.size() > 1) env.ny = nu(1);
    if (nu.size() > 2) env.nz = nu(2);
    return env;
}

double eval_ast(const expr::Ast& ast, const expr::Env& env, const char* what) {
    const expr::EvalResult r = expr::eval(ast, env);
    if (r.error)
        throw numerical_error(std::string(what) + " failed to evaluate: " + r.error->message);
    return r.value;
}

Effective base_effective(const ProblemSpec& ps, double s) {
    Effective e;
    e.g = &ps.grid;
    e.p = ps.p;
    const expr::AstPtr fa = ps.f;
    const expr::AstPtr dfa = expr::deriv(*ps.f, expr::Var::u);
    const expr::AstPtr pa = ps.phi;
    const expr::AstPtr dpa = expr::deriv(*ps.phi, expr::Var::u);
    const double f_scale = ps.mode == Mode::translating ? std::exp(s) : 1.0;
    const double phi_shift = ps.mode == Mode::classical ? s : 0.0;
    e.f = [fa, f_scale](const Eigen::VectorXd& x, double u, int) {
        return f_scale * eval_ast(*fa, make_env(x, u), "f");
    };
    e.fu = [dfa, f_scale](const Eigen::VectorXd& x, double u, int) {
        return f_scale * eval_ast(*dfa, make_env(x, u), "f_u");
    };
    e.phi = [pa, phi_shift](const Eigen::VectorXd& x, double u, const Eigen::VectorXd& nu) {
        return phi_shift + eval_ast(*pa, make_env(x, u, nu), "phi");
    };
    e.phiu = [dpa](const Eigen::VectorXd& x, double u, const Eigen::VectorXd& nu) {
        return eval_ast(*dpa, make_env(x, u, nu), "phi_u");
    };
    return e;
}

double sum_hessian_value(const SymMatrix& h, const SumHessianParams& p) {
    if (p.k == 1) return h.mat().trace() + p.alpha;
    const std::vector<double> sig = char_coeffs(h);
    return sig[static_cast<std::size_t>(p.k)] + p.alpha * sig[static_cast<std::size_t>(p.k - 1)];
}

SkGradMatrix sum_hessian_vg(const SymMatrix& h, const SumHessianParams& p) {
    if (p.k == 1) return {h.mat().trace() + p.alpha, SymMatrix::identity(h.n())};
    return sk_and_grad_matrix(h, p);
}

double cone_margin_of(const SymMatrix& h, const SumHessianParams& p) {
    if (!h.mat().allFinite()) return -std::numeric_limits<double>::infinity();
    if (p.k == 1) return h.mat().trace() + p.alpha;
    return cone_check(eigen_sym(h).lambda, p).margin;
}

GhostField interior_extension(const Grid& g, const Eigen::VectorXd& u) {
    GhostField ext(g);
    for (int node = 0; node < g.node_count(); ++node) ext.slot(g.multi(node)) = u(node);
    return ext;
}

double one_sided_normal(const Grid& g, const Eigen::VectorXd& u, int node, int axis, int side) {
    MultiIndex m1 = g.multi(node);
    MultiIndex m2 = m1;
    m1[static_cast<std::size_t>(axis)] -= side;
    m2[static_cast<std::size_t>(axis)] -= 2 * side;
    return (3.0 * u(node) - 4.0 * u(g.index(m1)) + u(g.index(m2))) / (2.0 * g.spacing(axis));
}

Eigen::VectorXd assemble_residual(const Effective& e, const Eigen::VectorXd& u) {
    const Grid& g = *e.g;
    const GhostField ext = interior_extension(g, u);
    Eigen::VectorXd r(g.node_count());
    for (int node = 0; node < g.node_count(); ++node) {
        const Eigen::VectorXd x = g.coord(node);
        if (g.boundary_axis_count(node) == 0) {
            const SymMatrix h = hessian_at(g, ext, node);
            const double fv = e.f(x, u(node), node);
            if (!std::isfinite(fv)) throw numerical_error("right side f is not finite");
            r(node) = sum_hessian_value(h, e.p) - fv;
            continue;
        }
        double sum = 0.0;
        int faces = 0;
        for (int a = 0; a < g.n(); ++a) {
            const int side = g.side(node, a);
            if (side == 0) continue;
            const double pv = e.phi(x, u(node), g.axis_normal(a, side));
            if (!std::isfinite(pv)) throw numerical_error("boundary data phi is not finite");
            sum += one_sided_normal(g, u, node, a, side) - pv;
            ++faces;
        }
        r(node) = sum / faces;
    }
    return r;
}

Eigen::SparseMatrix<double> assemble_jacobian(const Effective& e, const Eigen::VectorXd& u) {
    const Grid& g = *e.g;
    const int n = g.n();
    const GhostField ext = interior_extension(g, u);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(g.node_count()) * (n == 2 ? 10 : 28));
    for (int node = 0; node < g.node_count(); ++node) {
        const Eigen::VectorXd x = g.coord(node);
        const MultiIndex mi = g.multi(node);
        if (g.boundary_axis_count(node) == 0) {
            const SymMatrix h = hessian_at(g, ext, node);
            const SkGradMatrix vg = sum_hessian_vg(h, e.p);
            const Eigen::MatrixXd& grad = vg.grad.mat();
            const double fu = e.fu(x, u(node), node);
            if (!std::isfinite(fu)) throw numerical_error("right side f_u is not finite");
            double center = -fu;
            for (int a = 0; a < n; ++a) {
                const double ha = g.spacing(a);
                MultiIndex up = mi, dn = mi;
                up[static_cast<std::size_t>(a)] += 1;
                dn[static_cast<std::size_t>(a)] -= 1;
                trip.emplace_back(node, g.index(up), grad(a, a) / (ha * ha));
                trip.emplace_back(node, g.index(dn), grad(a, a) / (ha * ha));
                center -= 2.0 * grad(a, a) / (ha * ha);
                for (int b = a + 1; b < n; ++b) {
                    const double w = grad(a, b) / (2.0 * ha * g.spacing(b));
                    for (const int sa : {-1, 1}) {
                        for (const int sb : {-1, 1}) {
                            MultiIndex mm = mi;
                            mm[static_cast<std::size_t>(a)] += sa;
                            mm[static_cast<std::size_t>(b)] += sb;
                            trip.emplace_back(node, g.index(mm), sa * sb * w);
                        }
                    }
                }
            }
            trip.emplace_back(node, node, center);
            continue;
        }
        int faces = 0;
        for (int a = 0; a < n; ++a)
            if (g.side(node, a) != 0) ++faces;
        const double wf = 1.0 / faces;
        for (int a = 0; a < n; ++a) {
            const int side = g.side(node, a);
            if (side == 0) continue;
            const double ha = g.spacing(a);
            MultiIndex m1 = mi, m2 = mi;
            m1[static_cast<std::size_t>(a)] -= side;
            m2[static_cast<std::size_t>(a)] -= 2 * side;
            const double pu = e.phiu(x, u(node), g.axis_normal(a, side));
            if (!std::isfinite(pu)) throw numerical_error("boundary data phi_u is not finite");
            trip.emplace_back(node, node, wf * (3.0 / (2.0 * ha) - pu));
            trip.emplace_back(node, g.index(m1), -wf * 2.0 / ha);
            trip.emplace_back(node, g.index(m2), wf / (2.0 * ha));
        }
    }
    Eigen::SparseMatrix<double> jac(g.node_count(), g.node_count());
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
}

Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double>& jac, const Eigen::VectorXd& rhs,
                             LinearSolverKind kind) {
    constexpr int dense_limit = 1681;  // 41^2
    const bool dense = kind == LinearSolverKind::dense ||
                       (kind == LinearSolverKind::automatic && jac.rows() <= dense_limit);
    Eigen::VectorXd step;
    if (dense) {
        const Eigen::MatrixXd full(jac);
        step = Eigen::PartialPivLU<Eigen::MatrixXd>(full).solve(rhs);
    } else {
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) throw numerical_error("sparse LU factorization failed");
        step = lu.solve(rhs);
        if (lu.info() != Eigen::Success) throw numerical_error("sparse LU solve failed");
    }
    if (!step.allFinite()) throw numerical_error("linear solve produced a non-finite step");
    const double defect = (jac * step - rhs).lpNorm<Eigen::Infinity>();
    if (defect > 1e-6 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()))
        throw numerical_error("linear solve is inaccurate; the Newton matrix is singular");
    return step;
}

IterateScan scan_iterate(const Effective& e, const Eigen::VectorXd& u) {
    const Grid& g = *e.g;
    Field uf(g);
    uf.values() = u;
    const BoundaryClosure closure = [&e](const Eigen::VectorXd& x, double uv,
                                         const Eigen::VectorXd& nu) { return e.phi(x, uv, nu); };
    const GhostField ext = fill_ghosts(g, uf, closure);
    const int n = g.n();
    const int k = e.p.k;
    const double alpha = e.p.alpha;
    const double denom = n - k + 1;
    IterateScan scan;
    for (int node = 0; node < g.node_count(); ++node) {
        const SymMatrix h = hessian_at(g, ext, node);
        const double margin = cone_margin_of(h, e.p);
        scan.min_margin = std::min(scan.min_margin, margin);
        if (!(margin > 0.0)) continue;  // the contraction bounds need the cone
        const SkGradMatrix vg = sum_hessian_vg(h, e.p);
        const double contraction = vg.grad.mat().cwiseProduct(h.mat()).sum();
        const double trace_grad = vg.grad.mat().trace();
        const double lower = -alpha / denom * trace_grad;
        const double upper = k * vg.value;
        const double slack =
            1e-10 * std::max({1.0, std::abs(contraction), std::abs(lower), std::abs(upper)});
        if (contraction < lower - slack || contraction > upper + slack) scan.bounds_ok = false;
        const double sig_km2 = k >= 2 ? char_coeffs(h)[static_cast<std::size_t>(k - 2)] : 0.0;
        const double lhs = contraction + alpha / denom * trace_grad;
        const double rhs = k * vg.value + (n - k + 2) / denom * alpha * alpha * sig_km2;
        scan.identity_rel = std::max(
            scan.identity_rel, std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)}));
    }
    return scan;
}

CoreConfig core_config(const SolverConfig& cfg, double f_hi) {
    CoreConfig cc;
    cc.tol = cfg.relative_tol ? cfg.tol * (1.0 + f_hi) : cfg.tol;
    cc.max_iter = cfg.max_iter;
    cc.min_damp = cfg.min_damp;
    cc.lin = cfg.linear_solver;
    return cc;
}

FieldMonitors field_monitors(const Effective& e, const Eigen::VectorXd& u) {
    const Grid& g = *e.g;
    Field uf(g);
    uf.values() = u;
    const BoundaryClosure closure = [&e](const Eigen::VectorXd& x, double uv,
                                         const Eigen::VectorXd& nu) { return e.phi(x, uv, nu); };
    const GhostField ext = fill_ghosts(g, uf, closure);
    FieldMonitors m;
    m.sup_u = u.lpNorm<Eigen::Infinity>();
    for (int node = 0; node < g.node_count(); ++node) {
        m.sup_du = std::max(m.sup_du, gradient_at(g, ext, node).norm());
        m.sup_d2u = std::max(m.sup_d2u, hessian_at(g, ext, node).mat().cwiseAbs().maxCoeff());
    }
    return m;
}

void finalize_monitors(const Effective& e, const Eigen::VectorXd& u, SolveReport& rep) {
    const FieldMonitors m = field_monitors(e, u);
    rep.sup_u = m.sup_u;
    rep.sup_du = m.sup_du;
    rep.sup_d2u = m.sup_d2u;
}

void merge_scan(SolveReport& rep, const IterateScan& scan) {
    rep.contraction_identity_rel_max =
        std::max(rep.contraction_identity_rel_max, scan.identity_rel);
    rep.contraction_bounds_ok = rep.contraction_bounds_ok && scan.bounds_ok;
}

std::pair<Eigen::VectorXd, SolveReport> newton_core(const Effective& e, Eigen::VectorXd u,
                                                    const CoreConfig& cc) {
    SolveReport rep;
    Eigen::VectorXd r = assemble_residual(e, u);
    double rn = r.lpNorm<Eigen::Infinity>();
    IterateScan scan = scan_iterate(e, u);
    rep.residual_history.push_back(rn);
    rep.cone_margin_history.push_back(scan.min_margin);
    merge_scan(rep, scan);
    if (rn <= cc.tol) {
        rep.converged = scan.min_margin > 0.0;
        if (!rep.converged) rep.failure = "initial iterate is not admissible";
        finalize_monitors(e, u, rep);
        return {std::move(u), rep};
    }
    for (int it = 1; it <= cc.max_iter; ++it) {
        const Eigen::SparseMatrix<double> jac = assemble_jacobian(e, u);
        const Eigen::VectorXd step = solve_linear(jac, -r, cc.lin);
        bool accepted = false;
        for (double damp = 1.0; damp >= cc.min_damp; damp *= 0.5) {
            const Eigen::VectorXd u_try = u + damp * step;
            Eigen::VectorXd r_try;
            double rn_try = std::numeric_limits<double>::infinity();
            IterateScan scan_try;
            try {
                r_try = assemble_residual(e, u_try);
                rn_try = r_try.lpNorm<Eigen::Infinity>();
                scan_try = scan_iterate(e, u_try);
            } catch (const numerical_error&) {
                continue;  // data not evaluable at the trial: shorten the step
            }
            if (rn_try < rn && scan_try.min_margin > 0.0) {
                u = u_try;
                r = std::move(r_try);
                rn = rn_try;
                rep.damping_history.push_back(damp);
                rep.residual_history.push_back(rn);
                rep.cone_margin_history.push_back(scan_try.min_margin);
                merge_scan(rep, scan_try);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            rep.failure = "damping underflow";
            break;
        }
        if (rn <= cc.tol) {
            rep.converged = true;
            break;
        }
    }
    rep.iterations = static_cast<int>(rep.damping_history.size());
    if (!rep.converged && rep.failure.empty()) rep.failure = "maximum iterations reached";
    finalize_monitors(e, u, rep);
    return {std::move(u), rep};
}

}  // namespace detail

namespace {

using detail::BoundaryData;
using detail::CoreConfig;
using detail::Effective;
using detail::RightSide;

constexpr double kSeedFloor = 1e-3;
constexpr double kContinuationDtMax = 0.25;
constexpr double kContinuationDtMin = 0.0009765625;  // 2^-10

[[nodiscard]] double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double v = 1.0;
    for (int i = 0; i < k; ++i) v = v * (n - i) / (i + 1);
    return v;
}

/// S_k(A Id) in dimension n: C(n,k) A^k + alpha C(n,k-1) A^{k-1}; k = 1 gives
/// n A + alpha.  Strictly increasing in A > 0.
[[nodiscard]] double sum_hessian_scalar(double a, int n, const SumHessianParams& p) {
    if (p.k == 1) return n * a + p.alpha;
    return binomial(n, p.k) * std::pow(a, p.k) +
           p.alpha * binomial(n, p.k - 1) * std::pow(a, p.k - 1);
}

struct SampleStats {
    double f_hi = -std::numeric_limits<double>::infinity();
    double f_lo = std::numeric_limits<double>::infinity();
    double phiu_hi = -std::numeric_limits<double>::infinity();
    double ratio_lo = std::numeric_limits<double>::infinity();  // inf f_u / f
};

[[nodiscard]] double eval_sample(const expr::Ast& ast, const expr::Env& env, const char* what) {
    const expr::EvalResult r = expr::eval(ast, env);
    if (r.error)
        throw std::invalid_argument(std::string(what) +
                                    " is not evaluable on the validation sample: " +
                                    r.error->message);
    if (!std::isfinite(r.value))
        throw std::invalid_argument(std::string(what) + " is not finite on the validation sample");
    return r.value;
}

[[nodiscard]] std::vector<double> u_sample(const expr::Ast& ast) {
    if (!expr::uses_var(ast, expr::Var::u)) return {0.0};
    std::vector<double> us;
    us.reserve(41);
    for (int i = 0; i < 41; ++i) us.push_back(-10.0 + 0.5 * i);
    return us;
}

[[nodiscard]] SampleStats compute_stats(const ProblemSpec& ps) {
    const Grid& g = ps.grid;
    SampleStats st;
    const expr::AstPtr df = expr::deriv(*ps.f, expr::Var::u);
    const expr::AstPtr dphi = expr::deriv(*ps.phi, expr::Var::u);
    const std::vector<double> us_f = u_sample(*ps.f);
    const std::vector<double> us_phi = u_sample(*ps.phi);
    for (int node = 0; node < g.node_count(); ++node) {
        const Eigen::VectorXd x = g.coord(node);
        for (const double uv : us_f) {
            const expr::Env env = detail::make_env(x, uv);
            const double fv = eval_sample(*ps.f, env, "f");
            st.f_hi = std::max(st.f_hi, fv);
            st.f_lo = std::min(st.f_lo, fv);
            if (fv > 0.0) st.ratio_lo = std::min(st.ratio_lo, eval_sample(*df, env, "f_u") / fv);
        }
        if (g.boundary_axis_count(node) == 0) continue;
        for (int a = 0; a < g.n(); ++a) {
            const int side = g.side(node, a);
            if (side == 0) continue;
            const Eigen::VectorXd nu = g.axis_normal(a, side);
            for (const double uv : us_phi) {
                const expr::Env env = detail::make_env(x, uv, nu);
                (void)eval_sample(*ps.phi, env, "phi");
                st.phiu_hi = std::max(st.phiu_hi, eval_sample(*dphi, env, "phi_u"));
            }
        }
    }
    if (!std::isfinite(st.ratio_lo)) st.ratio_lo = 0.0;
    return st;
}

void check_variables(const expr::Ast& ast, int n, bool allow_normal, const char* what) {
    using expr::Var;
    auto reject = [&](Var v, const char* name) {
        if (expr::uses_var(ast, v))
            throw std::invalid_argument(std::string(what) + " must not use variable " + name);
    };
    reject(Var::t, "t");
    if (n < 3) {
        reject(Var::z, "z");
        reject(Var::nz, "nz");
    }
    if (!allow_normal) {
        reject(Var::nx, "nx");
        reject(Var::ny, "ny");
        reject(Var::nz, "nz");
    }
}

struct SeedData {
    Eigen::VectorXd u0;
    double amplitude = 0.0;
    double level = 0.0;  // S_k(A Id), the blended right side at t = 0
    Eigen::VectorXd center;
};

[[nodiscard]] SeedData make_seed_data(const ProblemSpec& ps) {
    SeedData sd;
    const Grid& g = ps.grid;
    sd.center = 0.5 * (g.domain().lo() + g.domain().hi());
    const auto sup_f = [&](double amp) {
        double hi = -std::numeric_limits<double>::infinity();
        for (int node = 0; node < g.node_count(); ++node) {
            const Eigen::VectorXd x = g.coord(node);
            const double uv = 0.5 * amp * (x - sd.center).squaredNorm();
            hi = std::max(hi, eval_sample(*ps.f, detail::make_env(x, uv), "f"));
        }
        return hi;
    };
    const auto amp_for = [&](double target) {
        double a = kSeedFloor;
        if (sum_hessian_scalar(a, g.n(), ps.p) < target) {
            double lo = a;
            double hi = std::max(1.0, a);
            while (sum_hessian_scalar(hi, g.n(), ps.p) < target) hi *= 2.0;
            for (int i = 0; i < 200 && (hi - lo) > 1e-16 * hi; ++i) {
                const double mid = 0.5 * (lo + hi);
                (sum_hessian_scalar(mid, g.n(), ps.p) < target ? lo : hi) = mid;
            }
            a = 0.5 * (lo + hi);
        }
        return a;
    };
    // for u-dependent f the amplitude solves S_k(A Id) = 2 sup_x f(x, u0_A(x))
    // so the headroom is measured on the seed itself, not a worst-case u range
    double a = amp_for(2.0 * sup_f(0.0));
    if (expr::uses_var(*ps.f, expr::Var::u)) {
        for (int i = 0; i < 8; ++i) {
            const double a_next = amp_for(2.0 * sup_f(a));
            const bool settled = std::abs(a_next - a) <= 1e-9 * std::max(1.0, a);
            a = a_next;
            if (settled) break;
        }
    }
    sd.amplitude = a;
    sd.level = sum_hessian_scalar(a, g.n(), ps.p);
    sd.u0.resize(g.node_count());
    for (int node = 0; node < g.node_count(); ++node)
        sd.u0(node) = 0.5 * a * (g.coord(node) - sd.center).squaredNorm();
    return sd;
}

[[nodiscard]] Effective blend_effective(const Effective& target, const SeedData& sd, double t) {
    Effective h = target;
    const RightSide tf = target.f;
    const RightSide tfu = target.fu;
    const BoundaryData tphi = target.phi;
    const BoundaryData tphiu = target.phiu;
    const double level = sd.level;
    const double a = sd.amplitude;
    const Eigen::VectorXd xc = sd.center;
    h.f = [tf, level, t](const Eigen::VectorXd& x, double u, int node) {
        return (1.0 - t) * level + t * tf(x, u, node);
    };
    h.fu = [tfu, t](const Eigen::VectorXd& x, double u, int node) { return t * tfu(x, u, node); };
    h.phi = [tphi, a, xc, t](const Eigen::VectorXd& x, double u, const Eigen::VectorXd& nu) {
        return (1.0 - t) * a * (x - xc).dot(nu) + t * tphi(x, u, nu);
    };
    h.phiu = [tphiu, t](const Eigen::VectorXd& x, double u, const Eigen::VectorXd& nu) {
        return t * tphiu(x, u, nu);
    };
    return h;
}

/// Homotopy from the seed's own data to the target; each stage warm-starts
/// from the previous stage and the step adapts within [2^-10, 1/4].
[[nodiscard]] std::pair<Eigen::VectorXd, SolveReport> continuation_core(const Effective& target,
                                                                        const SeedData& sd,
                                                                        const CoreConfig& cc) {
    double identity_rel = 0.0;
    bool bounds_ok = true;
    std::vector<double> stage_ts;
    std::vector<int> stage_iters;
    auto run_stage = [&](double t, const Eigen::VectorXd& from) {
        auto res = detail::newton_core(blend_effective(target, sd, t), from, cc);
        if (res.second.converged) {
            stage_ts.push_back(t);
            stage_iters.push_back(res.second.iterations);
            identity_rel = std::max(identity_rel, res.second.contraction_identity_rel_max);
            bounds_ok = bounds_ok && res.second.contraction_bounds_ok;
        }
        return res;
    };

    auto [u, rep] = run_stage(0.0, sd.u0);
    double t = 0.0;
    double dt = kContinuationDtMax;
    while (rep.converged && t < 1.0) {
        const double t_try = std::min(t + dt, 1.0);
        bool ok = false;
        std::pair<Eigen::VectorXd, SolveReport> res;
        try {
            res = run_stage(t_try, u);
            ok = res.second.converged;
        } catch (const numerical_error&) {
            ok = false;
        }
        if (ok) {
            u = std::move(res.first);
            rep = std::move(res.second);
            t = t_try;
            dt = std::min(dt * 1.5, kContinuationDtMax);
            continue;
        }
        dt *= 0.5;
        if (dt < kContinuationDtMin) {
            rep.converged = false;
            rep.failure = "continuation step underflow";
            break;
        }
    }
    rep.t_reached = t;
    rep.stage_ts = std::move(stage_ts);
    rep.stage_iterations = std::move(stage_iters);
    rep.contraction_identity_rel_max = identity_rel;
    rep.contraction_bounds_ok = bounds_ok;
    if (t < 1.0) rep.converged = false;
    return {std::move(u), rep};
}

/// Stage problem of the classical scheme in the renormalized unknown
/// v = u + guess/eps: flux v_nu = (phi(x) + guess) - eps v.
[[nodiscard]] Effective classical_stage(const Effective& base, double eps, double guess) {
    Effective e = base;
    const BoundaryData bp = base.phi;
    const BoundaryData bpu = base.phiu;
    e.phi = [bp, eps, guess](const Eigen::VectorXd& x, double uv, const Eigen::VectorXd& nu) {
        return bp(x, uv, nu) + guess - eps * uv;
    };
    e.phiu = [bpu, eps](const Eigen::VectorXd& x, double uv, const Eigen::VectorXd& nu) {
        return bpu(x, uv, nu) - eps;
    };
    return e;
}

/// Stage problem of the translating scheme in the renormalized unknown
/// v = u - guess/eps: S_k(D2 v) = (f(x) e^{guess}) e^{eps v}.
[[nodiscard]] Effective translating_stage(const Effective& base, double eps, double guess) {
    Effective e = base;
    const RightSide bf = base.f;
    const RightSide bfu = base.fu;
    const double scale = std::exp(guess);
    e.f = [bf, eps, scale](const Eigen::VectorXd& x, double uv, int node) {
        return scale * bf(x, uv, node) * std::exp(eps * uv);
    };
    e.fu = [bf, bfu, eps, scale](const Eigen::VectorXd& x, double uv, int node) {
        return scale * (bfu(x, uv, node) + eps * bf(x, uv, node)) * std::exp(eps * uv);
    };
    return e;
}

void check_grid_field(const ProblemSpec& ps, const Field& u) {
    if (&u.grid() != &ps.grid) throw std::invalid_argument("field is bound to a different grid");
}

void apply_c0(const ProblemSpec& ps, const Eigen::VectorXd& u, SolveReport& rep) {
    if (ps.mode != Mode::general || !rep.converged) return;
    const C0Bounds bounds = c0_bounds(ps);
    double h_max = 0.0;
    for (int a = 0; a < ps.grid.n(); ++a) h_max = std::max(h_max, ps.grid.spacing(a));
    const double tol_c0 = 1e-2 + h_max * h_max;
    rep.c0_lower = bounds.lower;
    rep.c0_upper = bounds.upper;
    rep.c0_checked = true;
    rep.c0_pass = u.minCoeff() >= bounds.lower - tol_c0 && u.maxCoeff() <= bounds.upper + tol_c0;
}

/// Trapezoid-weighted mean: boundary nodes carry weight (1/2)^(boundary axes).
[[nodiscard]] double weighted_mean(const Grid& g, const Eigen::VectorXd& u) {
    double num = 0.0;
    double den = 0.0;
    for (int node = 0; node < g.node_count(); ++node) {
        const double w = std::ldexp(1.0, -g.boundary_axis_count(node));
        num += w * u(node);
        den += w;
    }
    return num / den;
}

[[nodiscard]] double boundary_mean(const Grid& g, const Eigen::VectorXd& u) {
    double num = 0.0;
    int count = 0;
    for (int node = 0; node < g.node_count(); ++node) {
        if (g.boundary_axis_count(node) == 0) continue;
        num += u(node);
        ++count;
    }
    return num / count;
}

}  // namespace

ProblemSpec make_problem(const SumHessianParams& p, const DomainDescriptor& dom,
                         const std::vector<int>& dims, std::string_view f_src,
                         std::string_view phi_src, Mode mode, double c_phi) {
    auto parse_named = [](std::string_view src, const char* what) {
        const expr::ParseResult r = expr::parse(src);
        if (r.error)
            throw std::invalid_argument(std::string(what) + ": parse error at offset " +
                                        std::to_string(r.error->offset) + ": " + r.error->message);
        return r.ast;
    };
    return ProblemSpec{p,
                       build_grid(dom, dims),
                       parse_named(f_src, "f"),
                       parse_named(phi_src, "phi"),
                       mode,
                       c_phi,
                       std::nullopt,
                       1e-8};
}

void validate(const ProblemSpec& ps) {
    const Grid& g = ps.grid;
    if (g.node_count() == 0) throw std::invalid_argument("problem grid is not built");
    const int n = g.n();
    if (ps.p.k == 1) {
        if (!(ps.p.alpha > 0)) throw std::invalid_argument("alpha must be positive");
    } else {
        ps.p.validate(n);
    }
    if (!ps.f || !ps.phi) throw std::invalid_argument("f and phi expressions are required");
    if (!(ps.f_min > 0)) throw std::invalid_argument("f_min must be positive");
    check_variables(*ps.f, n, false, "f");
    check_variables(*ps.phi, n, true, "phi");
    if (ps.mode != Mode::general &&
        (expr::uses_var(*ps.f, expr::Var::u) || expr::uses_var(*ps.phi, expr::Var::u)))
        throw std::invalid_argument("classical and translating modes need u-independent f and phi");
    const SampleStats st = compute_stats(ps);
    if (ps.mode == Mode::general) {
        if (!(ps.c_phi < 0)) throw std::invalid_argument("general mode requires c_phi < 0");
        if (!(st.phiu_hi <= ps.c_phi))
            throw std::invalid_argument("sampled sup phi_u exceeds c_phi");
    }
    if (!(st.f_lo >= ps.f_min)) throw std::invalid_argument("sampled f falls below f_min");
    if (ps.c_f && !(st.ratio_lo >= *ps.c_f - 1e-9))
        throw std::invalid_argument("sampled inf f_u/f falls below c_f");
}

ResidualPair residual(const ProblemSpec& ps, const Field& u, double s) {
    check_grid_field(ps, u);
    const Eigen::VectorXd r = detail::assemble_residual(detail::base_effective(ps, s), u.values());
    ResidualPair out{Field(ps.grid), Field(ps.grid)};
    for (int node = 0; node < ps.grid.node_count(); ++node) {
        if (ps.grid.boundary_axis_count(node) == 0)
            out.interior[node] = r(node);
        else
            out.boundary[node] = r(node);
    }
    return out;
}

Eigen::SparseMatrix<double> jacobian(const ProblemSpec& ps, const Field& u, double s) {
    check_grid_field(ps, u);
    return detail::assemble_jacobian(detail::base_effective(ps, s), u.values());
}

double seed_amplitude(const ProblemSpec& ps) {
    return make_seed_data(ps).amplitude;
}

Field admissible_seed(const ProblemSpec& ps) {
    const SeedData sd = make_seed_data(ps);
    Field out(ps.grid);
    out.values() = sd.u0;
    return out;
}

std::pair<Field, SolveReport> newton_solve(const ProblemSpec& ps, const Field& u_init,
                                           const SolverConfig& cfg) {
    validate(ps);
    if (ps.mode != Mode::general)
        throw std::invalid_argument(
            "newton_solve requires the general mode; use the dedicated constant schemes");
    check_grid_field(ps, u_init);
    const CoreConfig cc =
        detail::core_config(cfg, cfg.relative_tol ? compute_stats(ps).f_hi : 0.0);
    auto [u, rep] = detail::newton_core(detail::base_effective(ps, 0.0), u_init.values(), cc);
    apply_c0(ps, u, rep);
    Field out(ps.grid);
    out.values() = std::move(u);
    return {std::move(out), rep};
}

std::pair<Field, SolveReport> continuation_solve(const ProblemSpec& ps, const SolverConfig& cfg) {
    validate(ps);
    if (ps.mode != Mode::general)
        throw std::invalid_argument(
            "continuation_solve requires the general mode; use the dedicated constant schemes");
    const SampleStats st = compute_stats(ps);
    const SeedData sd = make_seed_data(ps);
    const CoreConfig cc = detail::core_config(cfg, st.f_hi);
    auto [u, rep] = continuation_core(detail::base_effective(ps, 0.0), sd, cc);
    apply_c0(ps, u, rep);
    Field out(ps.grid);
    out.values() = std::move(u);
    return {std::move(out), rep};
}

ClassicalResult classical_neumann(const ProblemSpec& ps, const SolverConfig& cfg) {
    validate(ps);
    if (ps.mode != Mode::classical)
        throw std::invalid_argument("classical_neumann requires the classical mode");
    const Grid& g = ps.grid;
    const SampleStats st = compute_stats(ps);
    const SeedData sd = make_seed_data(ps);
    const CoreConfig cc = detail::core_config(cfg, st.f_hi);
    const Effective base = detail::base_effective(ps, 0.0);

    // each stage solves for v = u + guess/eps with phi shifted by the running
    // constant estimate; v stays O(1) while u itself grows like s/eps
    std::vector<double> s_seq;
    std::vector<SolveReport> reports;
    Eigen::VectorXd v = sd.u0;
    bool have = false;
    bool all_converged = true;
    double eps_prev = 0.0;
    double s_prev = 0.0;
    double guess = 0.0;
    for (const double eps : cfg.eps_seq) {
        std::pair<Eigen::VectorXd, SolveReport> res;
        if (have) {
            const Eigen::VectorXd warm = v.array() + (s_prev - guess) / eps_prev;
            guess = s_prev;
            const Effective e = classical_stage(base, eps, guess);
            res = detail::newton_core(e, warm, cc);
            if (!res.second.converged) res = continuation_core(e, sd, cc);
        } else {
            res = continuation_core(classical_stage(base, eps, guess), sd, cc);
        }
        reports.push_back(res.second);
        if (!res.second.converged) {
            all_converged = false;
            break;
        }
        v = std::move(res.first);
        have = true;
        const double s_eps = -eps * boundary_mean(g, v) + guess;
        s_seq.push_back(s_eps);
        eps_prev = eps;
        s_prev = s_eps;
    }

    Field w(g);
    w.values() = have ? (v.array() - weighted_mean(g, v)).matrix() : sd.u0;
    return ClassicalResult{s_seq.empty() ? 0.0 : s_seq.back(), std::move(w), std::move(s_seq),
                           std::move(reports), all_converged && have};
}

TranslatingResult translating_constant(const ProblemSpec& ps, const Field& u0, int y0,
                                       const SolverConfig& cfg) {
    validate(ps);
    if (ps.mode != Mode::translating)
        throw std::invalid_argument("translating_constant requires the translating mode");
    check_grid_field(ps, u0);
    const Grid& g = ps.grid;
    if (y0 < 0 || y0 >= g.node_count())
        throw std::invalid_argument("pinning node is out of range");
    const SampleStats st = compute_stats(ps);
    const SeedData sd = make_seed_data(ps);
    const CoreConfig cc = detail::core_config(cfg, st.f_hi);
    const Effective base = detail::base_effective(ps, 0.0);

    // each stage solves for v = u - guess/eps with f scaled by e^{guess};
    // v stays O(1) while u itself grows like s/eps
    std::vector<double> s_seq;
    std::vector<SolveReport> reports;
    Eigen::VectorXd v = sd.u0;
    bool have = false;
    bool all_converged = true;
    double eps_prev = 0.0;
    double s_prev = 0.0;
    double guess = 0.0;
    double eps_last = 1.0;
    for (const double eps : cfg.eps_seq) {
        std::pair<Eigen::VectorXd, SolveReport> res;
        if (have) {
            const Eigen::VectorXd warm = v.array() - (s_prev - guess) / eps_prev;
            guess = s_prev;
            const Effective e = translating_stage(base, eps, guess);
            res = detail::newton_core(e, warm, cc);
            if (!res.second.converged) res = continuation_core(e, sd, cc);
        } else {
            res = continuation_core(translating_stage(base, eps, guess), sd, cc);
        }
        reports.push_back(res.second);
        if (!res.second.converged) {
            all_converged = false;
            break;
        }
        v = std::move(res.first);
        have = true;
        const double s_eps = eps * (v(y0) - u0[y0]) + guess;
        s_seq.push_back(s_eps);
        eps_prev = eps;
        s_prev = s_eps;
        eps_last = eps;
    }

    Field u_ell(g);
    u_ell.values() = have ? (v.array() - (s_seq.back() - guess) / eps_last).matrix() : sd.u0;
    return TranslatingResult{s_seq.empty() ? 0.0 : s_seq.back(), std::move(u_ell),
                             std::move(s_seq), std::move(reports), all_converged && have};
}

int node_nearest_center(const Grid& g) {
    const Eigen::VectorXd center = 0.5 * (g.domain().lo() + g.domain().hi());
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int node = 0; node < g.node_count(); ++node) {
        const double d = (g.coord(node) - center).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = node;
        }
    }
    return best;
}

C0Bounds c0_bounds(const ProblemSpec& ps) {
    if (ps.mode != Mode::general)
        throw std::invalid_argument("the a priori interval applies to the general mode");
    if (!(ps.c_phi < 0)) throw std::invalid_argument("c0 bounds require c_phi < 0");
    const Grid& g = ps.grid;
    const double a = seed_amplitude(ps);
    const double diam = g.domain().diameter();
    const Effective e = detail::base_effective(ps, 0.0);
    double phi_hi = -std::numeric_limits<double>::infinity();
    double lower = std::numeric_limits<double>::infinity();
    for (int node = 0; node < g.node_count(); ++node) {
        if (g.boundary_axis_count(node) == 0) continue;
        const Eigen::VectorXd x = g.coord(node);
        for (int axis = 0; axis < g.n(); ++axis) {
            const int side = g.side(node, axis);
            if (side == 0) continue;
            const double pv = e.phi(x, 0.0, g.axis_normal(axis, side));
            phi_hi = std::max(phi_hi, pv);
            lower = std::min(lower, (2.0 * a * diam - pv) / ps.c_phi);
        }
    }
    // Transporting the boundary minimum of u - A|x - x_c|^2/2 into the
    // interior costs at most A diam^2 / 2.
    lower -= 0.5 * a * diam * diam;
    return C0Bounds{lower, std::max(0.0, phi_hi / -ps.c_phi)};
}

}  // namespace sumhess
