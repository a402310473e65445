#include "sumhess/parabolic.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elliptic_internals.hpp"
#include "sumhess/errors.hpp"
#include "sumhess/format.hpp"
#include "sumhess/sym_matrix.hpp"

namespace sumhess {

namespace {

void check_grid_field(const ProblemSpec& ps, const Field& u) {
    if (&u.grid() != &ps.grid) throw std::invalid_argument("field is bound to a different grid");
}

void check_flow_config(const FlowConfig& cfg) {
    if (!(cfg.dt0 >= 0.0) || !std::isfinite(cfg.dt0))
        throw std::invalid_argument("dt0 must be nonnegative");
    if (!(cfg.dt_growth >= 1.0)) throw std::invalid_argument("dt_growth must be at least 1");
    if (!(cfg.dt_max > 0.0)) throw std::invalid_argument("dt_max must be positive");
    if (!(cfg.steady_tol > 0.0) || !(cfg.translating_tol > 0.0) || !(cfg.compat_tol > 0.0))
        throw std::invalid_argument("tolerances must be positive");
    if (!(cfg.t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
    if (cfg.max_steps < 1) throw std::invalid_argument("max_steps must be positive");
}

[[nodiscard]] double max_spacing(const Grid& g) {
    double h = 0.0;
    for (int a = 0; a < g.n(); ++a) h = std::max(h, g.spacing(a));
    return h;
}

/// u_t at t = 0 evaluated from the equation on interior nodes only; boundary
/// nodes are slaved to the Neumann rows and carry no equation of their own.
[[nodiscard]] Eigen::VectorXd initial_ut(const detail::Effective& e, const Eigen::VectorXd& u) {
    const Grid& g = *e.g;
    const GhostField ext = detail::interior_extension(g, u);
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(g.node_count()));
    for (int node = 0; node < g.node_count(); ++node) {
        if (g.boundary_axis_count(node) != 0) continue;
        const double sk = detail::sum_hessian_value(hessian_at(g, ext, node), e.p);
        const double fv = e.f(g.coord(node), u(node), node);
        if (!(sk > 0.0) || !(fv > 0.0))
            throw numerical_error("the flow logarithm is undefined at the initial data");
        vals.push_back(std::log(sk) - std::log(fv));
    }
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

[[nodiscard]] TraceSample make_sample(const detail::Effective& e, double t,
                                      const Eigen::VectorXd& u, const Eigen::VectorXd& ut) {
    TraceSample s;
    s.t = t;
    s.ut_max = ut.lpNorm<Eigen::Infinity>();
    s.ut_mean = ut.mean();
    s.ut_lo = ut.minCoeff();
    s.ut_hi = ut.maxCoeff();
    s.cone_margin = detail::scan_iterate(e, u).min_margin;
    const detail::FieldMonitors m = detail::field_monitors(e, u);
    s.sup_du = m.sup_du;
    s.sup_d2u = m.sup_d2u;
    return s;
}

[[nodiscard]] Eigen::VectorXd explicit_step_impl(const detail::Effective& e,
                                                 const Eigen::VectorXd& u, double dt) {
    const Grid& g = *e.g;
    Eigen::VectorXd unew = u;
    {
        const GhostField ext = detail::interior_extension(g, u);
        for (int node = 0; node < g.node_count(); ++node) {
            if (g.boundary_axis_count(node) != 0) continue;
            const double sk = detail::sum_hessian_value(hessian_at(g, ext, node), e.p);
            const double fv = e.f(g.coord(node), u(node), node);
            if (!(sk > 0.0) || !(fv > 0.0))
                throw numerical_error("the flow logarithm is undefined along the step");
            unew(node) = u(node) + dt * (std::log(sk) - std::log(fv));
        }
    }
    // one local Newton pass per boundary node enforcing its Neumann row;
    // faces before edges before corners, so every one-sided stencil reads
    // values that are already final
    for (int level = 1; level <= g.n(); ++level) {
        for (int node = 0; node < g.node_count(); ++node) {
            if (g.boundary_axis_count(node) != level) continue;
            const Eigen::VectorXd x = g.coord(node);
            double row = 0.0;
            double slope = 0.0;
            for (int a = 0; a < g.n(); ++a) {
                const int side = g.side(node, a);
                if (side == 0) continue;
                const Eigen::VectorXd nu = g.axis_normal(a, side);
                row += detail::one_sided_normal(g, unew, node, a, side) -
                       e.phi(x, unew(node), nu);
                slope += 3.0 / (2.0 * g.spacing(a)) - e.phiu(x, unew(node), nu);
            }
            if (!(slope > 0.0)) throw numerical_error("boundary row update is singular");
            unew(node) -= row / slope;
            if (!std::isfinite(unew(node)))
                throw numerical_error("boundary row update is not finite");
        }
    }
    if (!(detail::scan_iterate(e, unew).min_margin > 0.0))
        throw numerical_error("flow step leaves the admissible cone");
    return unew;
}

/// Backward Euler as the elliptic companion S_k(D2 w) = f(x, w) e^{(w-u)/dt};
/// the shift pins the constant mode, so the step inherits the damped Newton's
/// cone gating and uniqueness.
[[nodiscard]] Eigen::VectorXd implicit_step_impl(const detail::Effective& e,
                                                 const Eigen::VectorXd& u, double dt,
                                                 const detail::CoreConfig& cc) {
    detail::Effective ei = e;
    const Eigen::VectorXd uprev = u;
    const detail::RightSide bf = e.f;
    const detail::RightSide bfu = e.fu;
    ei.f = [bf, uprev, dt](const Eigen::VectorXd& x, double v, int node) {
        return bf(x, v, node) * std::exp((v - uprev(node)) / dt);
    };
    ei.fu = [bf, bfu, uprev, dt](const Eigen::VectorXd& x, double v, int node) {
        const double shift = std::exp((v - uprev(node)) / dt);
        return (bfu(x, v, node) + bf(x, v, node) / dt) * shift;
    };
    auto [unew, rep] = detail::newton_core(ei, u, cc);
    if (!rep.converged)
        throw numerical_error("implicit flow step did not converge: " + rep.failure);
    return std::move(unew);
}

[[nodiscard]] Eigen::VectorXd any_step(const detail::Effective& e, const Eigen::VectorXd& u,
                                       double dt, Stepping stepping,
                                       const detail::CoreConfig& cc) {
    return stepping == Stepping::explicit_euler ? explicit_step_impl(e, u, dt)
                                                : implicit_step_impl(e, u, dt, cc);
}

}  // namespace

double compatibility_check(const ProblemSpec& ps, const Field& u0) {
    check_grid_field(ps, u0);
    const Grid& g = ps.grid;
    const detail::Effective e = detail::base_effective(ps, 0.0);
    const Eigen::VectorXd& u = u0.values();
    double worst = 0.0;
    for (int node = 0; node < g.node_count(); ++node) {
        if (g.boundary_axis_count(node) == 0) continue;
        const Eigen::VectorXd x = g.coord(node);
        double sum = 0.0;
        int faces = 0;
        for (int a = 0; a < g.n(); ++a) {
            const int side = g.side(node, a);
            if (side == 0) continue;
            sum += detail::one_sided_normal(g, u, node, a, side) -
                   e.phi(x, u(node), g.axis_normal(a, side));
            ++faces;
        }
        worst = std::max(worst, std::abs(sum / faces));
    }
    return worst;
}

Field flow_step(const ProblemSpec& ps, const Field& u, double dt, Stepping stepping) {
    check_grid_field(ps, u);
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    const detail::Effective e = detail::base_effective(ps, 0.0);
    Field out(ps.grid);
    out.values() = any_step(e, u.values(), dt, stepping, detail::CoreConfig{});
    return out;
}

std::pair<Field, FlowTrace> flow_run(const ProblemSpec& ps, const Field& u0,
                                     const FlowConfig& cfg) {
    validate(ps);
    if (ps.mode != Mode::general)
        throw std::invalid_argument(
            "flow_run requires the general mode; use translating_flow_run instead");
    check_grid_field(ps, u0);
    check_flow_config(cfg);
    const Grid& g = ps.grid;
    const detail::Effective e = detail::base_effective(ps, 0.0);

    FlowTrace trace;
    trace.steady_tol = cfg.steady_tol;
    trace.compatibility = compatibility_check(ps, u0);
    if (trace.compatibility > cfg.compat_tol && !cfg.force)
        throw std::invalid_argument("compatibility gate: initial data violates the boundary condition (defect " +
                                    format_double(trace.compatibility) +
                                    "); set force to flow anyway");

    Eigen::VectorXd u = u0.values();
    trace.samples.push_back(make_sample(e, 0.0, u, initial_ut(e, u)));
    if (!(trace.samples.back().cone_margin > 0.0))
        throw std::invalid_argument("initial data is not admissible");

    const detail::CoreConfig cc = detail::core_config(cfg.newton, 0.0);
    const double h = max_spacing(g);
    double dt = std::min(cfg.dt0 > 0.0 ? cfg.dt0 : h * h, cfg.dt_max);
    double t = 0.0;
    long accepted = 0;
    int rejects_in_row = 0;
    trace.outcome = FlowOutcome::t_max_reached;
    while (true) {
        if (trace.samples.back().ut_max < cfg.steady_tol) {
            const double res = detail::assemble_residual(e, u).lpNorm<Eigen::Infinity>();
            if (res <= 10.0 * cfg.steady_tol) {
                trace.outcome = FlowOutcome::steady;
                break;
            }
            if (trace.note.empty())
                trace.note = "u_t is below tolerance while the elliptic residual is not";
        }
        if (t >= cfg.t_max) break;
        if (accepted >= cfg.max_steps) {
            trace.note = "step budget exhausted";
            break;
        }
        const bool final_step = cfg.t_max - t <= dt;
        const double dt_try = final_step ? cfg.t_max - t : dt;
        Eigen::VectorXd unew;
        try {
            unew = any_step(e, u, dt_try, cfg.stepping, cc);
        } catch (const numerical_error&) {
            ++trace.steps_rejected;
            if (++rejects_in_row >= 40) {
                trace.outcome = FlowOutcome::blow_up;
                break;
            }
            dt *= 0.5;
            continue;
        }
        rejects_in_row = 0;
        const Eigen::VectorXd ut = (unew - u) / dt_try;
        u = std::move(unew);
        t = final_step ? cfg.t_max : t + dt_try;
        ++accepted;
        trace.samples.push_back(make_sample(e, t, u, ut));
        if (cfg.stepping == Stepping::implicit_euler)
            dt = std::min(dt * cfg.dt_growth, cfg.dt_max);
    }
    trace.terminal_residual = detail::assemble_residual(e, u).lpNorm<Eigen::Infinity>();
    Field out(g);
    out.values() = std::move(u);
    return {std::move(out), std::move(trace)};
}

TranslatingFlowResult translating_flow_run(const ProblemSpec& ps, const Field& u0,
                                           const FlowConfig& cfg) {
    validate(ps);
    if (ps.mode != Mode::translating)
        throw std::invalid_argument("translating_flow_run requires the translating mode");
    check_grid_field(ps, u0);
    check_flow_config(cfg);
    const Grid& g = ps.grid;
    const detail::Effective e = detail::base_effective(ps, 0.0);

    FlowTrace trace;
    trace.steady_tol = cfg.steady_tol;
    trace.compatibility = compatibility_check(ps, u0);
    if (trace.compatibility > cfg.compat_tol && !cfg.force)
        throw std::invalid_argument("compatibility gate: initial data violates the boundary condition (defect " +
                                    format_double(trace.compatibility) +
                                    "); set force to flow anyway");

    Eigen::VectorXd u = u0.values();
    trace.samples.push_back(make_sample(e, 0.0, u, initial_ut(e, u)));
    if (!(trace.samples.back().cone_margin > 0.0))
        throw std::invalid_argument("initial data is not admissible");

    // snapshots feed the two-point speed cross-check; thinning keeps at most
    // 1024 of them at a granularity that only coarsens the T/2 lookup
    std::vector<std::pair<double, Eigen::VectorXd>> snaps;
    snaps.emplace_back(0.0, u);

    const detail::CoreConfig cc = detail::core_config(cfg.newton, 0.0);
    const double h = max_spacing(g);
    double dt = std::min(cfg.dt0 > 0.0 ? cfg.dt0 : h * h, cfg.dt_max);
    double t = 0.0;
    long accepted = 0;
    int rejects_in_row = 0;
    int calm_in_row = 0;
    trace.outcome = FlowOutcome::t_max_reached;
    while (true) {
        if (calm_in_row >= 2) {
            trace.outcome = FlowOutcome::translating;
            break;
        }
        if (t >= cfg.t_max) break;
        if (accepted >= cfg.max_steps) {
            trace.note = "step budget exhausted";
            break;
        }
        const bool final_step = cfg.t_max - t <= dt;
        const double dt_try = final_step ? cfg.t_max - t : dt;
        Eigen::VectorXd unew;
        try {
            unew = any_step(e, u, dt_try, cfg.stepping, cc);
        } catch (const numerical_error&) {
            ++trace.steps_rejected;
            if (++rejects_in_row >= 40) {
                trace.outcome = FlowOutcome::blow_up;
                break;
            }
            dt *= 0.5;
            continue;
        }
        rejects_in_row = 0;
        const Eigen::VectorXd ut = (unew - u) / dt_try;
        u = std::move(unew);
        t = final_step ? cfg.t_max : t + dt_try;
        ++accepted;
        const TraceSample s = make_sample(e, t, u, ut);
        trace.samples.push_back(s);
        const double osc = std::max(s.ut_hi - s.ut_mean, s.ut_mean - s.ut_lo);
        calm_in_row = osc < cfg.translating_tol ? calm_in_row + 1 : 0;
        snaps.emplace_back(t, u);
        if (snaps.size() > 1024) {
            std::vector<std::pair<double, Eigen::VectorXd>> kept;
            kept.reserve(snaps.size() / 2 + 1);
            for (std::size_t i = 0; i < snaps.size(); i += 2) kept.push_back(std::move(snaps[i]));
            snaps = std::move(kept);
        }
    }

    double s_est = 0.0;
    if (accepted > 0) {
        s_est = trace.samples.back().ut_mean;
        const std::pair<double, Eigen::VectorXd>* half = &snaps.front();
        for (const auto& snap : snaps) {
            if (snap.first >= t) continue;
            if (std::abs(snap.first - 0.5 * t) < std::abs(half->first - 0.5 * t)) half = &snap;
        }
        const Eigen::VectorXd svec = (u - half->second) / (t - half->first);
        trace.cross_check_spread = svec.maxCoeff() - svec.minCoeff();
        if (trace.cross_check_spread > 10.0 * cfg.translating_tol)
            trace.note += std::string(trace.note.empty() ? "" : "; ") +
                          "two-point speed spread exceeds tolerance";
    }
    trace.s_est = s_est;
    trace.terminal_residual =
        detail::assemble_residual(detail::base_effective(ps, s_est), u).lpNorm<Eigen::Infinity>();

    Field profile(g);
    profile.values() = u.array() - s_est * t;
    profile.values().array() -= profile.values().mean();
    return {s_est, std::move(profile), std::move(trace)};
}

std::vector<UtViolation> ut_monitor(const FlowTrace& trace, const ProblemSpec& ps) {
    if (trace.samples.empty()) throw std::invalid_argument("trace has no samples");
    const double h = max_spacing(ps.grid);
    const double slack = 10.0 * trace.steady_tol + h * h;
    const double lo0 = std::min(trace.samples.front().ut_lo, 0.0);
    const double hi0 = std::max(trace.samples.front().ut_hi, 0.0);
    const bool dichotomy = trace.samples.front().ut_lo >= 0.0;
    std::vector<UtViolation> out;
    for (const TraceSample& s : trace.samples) {
        if (s.ut_lo < lo0 - slack) out.push_back({s.t, "two-sided bound", lo0 - slack - s.ut_lo});
        if (s.ut_hi > hi0 + slack) out.push_back({s.t, "two-sided bound", s.ut_hi - hi0 - slack});
        if (ps.c_f) {
            const double weighted = s.ut_hi * std::exp(0.8 * *ps.c_f * s.t);
            if (weighted > hi0 + slack)
                out.push_back({s.t, "exponential decay bound", weighted - hi0 - slack});
        }
        if (dichotomy && s.ut_lo < -slack)
            out.push_back({s.t, "sign dichotomy", -slack - s.ut_lo});
    }
    return out;
}

double decay_rate(const FlowTrace& trace) {
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    long m = 0;
    for (const TraceSample& s : trace.samples) {
        if (!(s.ut_max > 0.0)) continue;
        const double y = std::log(s.ut_max);
        st += s.t;
        sy += y;
        stt += s.t * s.t;
        sty += s.t * y;
        ++m;
    }
    if (m < 3)
        throw std::invalid_argument("decay fit needs at least three samples with positive u_t");
    const double var = stt - st * st / m;
    if (!(var > 0.0)) throw std::invalid_argument("decay fit needs distinct sample times");
    return -(sty - st * sy / m) / var;
}

std::string trace_csv(const FlowTrace& trace) {
    std::string out = "t,ut_max,ut_mean,cone_margin,sup_du,sup_d2u\n";
    for (const TraceSample& s : trace.samples) {
        out += format_double(s.t);
        out += ',';
        out += format_double(s.ut_max);
        out += ',';
        out += format_double(s.ut_mean);
        out += ',';
        out += format_double(s.cone_margin);
        out += ',';
        out += format_double(s.sup_du);
        out += ',';
        out += format_double(s.sup_d2u);
        out += '\n';
    }
    return out;
}

}  // namespace sumhess
