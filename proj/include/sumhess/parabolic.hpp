#pragma once

/// Time integrator for the Neumann flow
///
///     u_t = log S_k(D^2 u) - log f(x, u)   in Omega x (0, T)
///     u_nu = phi(x, u)                     on the boundary
///
/// with explicit and backward Euler steps, steady-state and translating-mode
/// convergence detection, u_t monitors, and CSV trace export.  The backward
/// Euler step reuses the damped cone-preserving Newton solver: it is the
/// elliptic companion problem S_k(D^2 w) = f(x, w) e^{(w - u)/dt}.

#include <string>
#include <utility>
#include <vector>

#include "sumhess/elliptic.hpp"
#include "sumhess/grid.hpp"

namespace sumhess {

/// Time discretization of the flow.
enum class Stepping {
    explicit_euler,  ///< forward Euler interior update + local boundary enforcement
    implicit_euler,  ///< backward Euler via the elliptic Newton machinery
};

/// Knobs of a flow run.
struct FlowConfig {
    Stepping stepping = Stepping::implicit_euler;
    double dt0 = 0.0;               ///< initial step; 0 picks h_max^2
    double dt_growth = 1.2;         ///< growth per accepted implicit step
    double dt_max = 0.1;            ///< step size cap
    double steady_tol = 1e-8;       ///< steady once ||u_t||_inf drops below
    double translating_tol = 1e-8;  ///< translating once ||u_t - mean u_t||_inf drops below
    double t_max = 50.0;            ///< time horizon
    double compat_tol = 1e-6;       ///< gate on the initial compatibility defect
    bool force = false;             ///< start the flow even if the gate fails
    long max_steps = 1000000;       ///< cap on accepted steps
    SolverConfig newton;            ///< inner solver of implicit steps
};

/// One accepted instant of the flow.  ut_* are statistics of the discrete
/// u_t: at t = 0 evaluated from the equation on interior nodes, afterwards
/// the difference quotient (u+ - u)/dt over all nodes.
struct TraceSample {
    double t = 0.0;
    double ut_max = 0.0;       ///< ||u_t||_inf
    double ut_mean = 0.0;      ///< mean u_t
    double cone_margin = 0.0;  ///< min cone margin over nodes
    double sup_du = 0.0;       ///< sup |Du|
    double sup_d2u = 0.0;      ///< sup |D2u| (max abs Hessian entry)
    double ut_lo = 0.0;        ///< signed min u_t, for the monitors
    double ut_hi = 0.0;        ///< signed max u_t, for the monitors
};

/// How a flow run ended.
enum class FlowOutcome { steady, translating, t_max_reached, blow_up };

/// Append-only record of a flow run; samples are strictly increasing in t
/// and every accepted step has positive cone margin.
struct FlowTrace {
    std::vector<TraceSample> samples;
    FlowOutcome outcome = FlowOutcome::t_max_reached;
    double s_est = 0.0;               ///< translating speed estimate (translating runs)
    double compatibility = 0.0;       ///< boundary defect of the initial data
    double terminal_residual = 0.0;   ///< elliptic residual of the final field
    double steady_tol = 1e-8;         ///< copied from the config, read by the monitors
    long steps_rejected = 0;          ///< halved (explicit: retried) steps
    double cross_check_spread = 0.0;  ///< translating runs: spread of the two-point speed
    std::string note;                 ///< non-fatal observations
};

/// Translating-mode flow result: speed estimate and the mean-free profile
/// u(T) - s_est T - mean.
struct TranslatingFlowResult {
    double s_est;
    Field profile;
    FlowTrace trace;
};

/// Max over boundary nodes of the discrete Neumann row defect
/// |u_nu - phi(x, u0)| (the order-zero compatibility condition; at edges and
/// corners the row averages the one-sided derivatives over the touching
/// faces).  Higher-order conditions are not evaluated.
[[nodiscard]] double compatibility_check(const ProblemSpec& ps, const Field& u0);

/// One flow step of size dt.  Explicit: forward Euler on the interior, then
/// one local Newton pass enforcing each discrete Neumann row (faces before
/// edges before corners, so every one-sided stencil reads final values).
/// Implicit: backward Euler solved by the damped Newton core warm-started at
/// u.  Throws numerical_error when the step leaves the admissible cone, hits
/// a nonpositive S_k or f, or the inner solve fails; callers halve dt.
[[nodiscard]] Field flow_step(const ProblemSpec& ps, const Field& u, double dt,
                              Stepping stepping);

/// Integrates the flow from u0 until ||u_t||_inf < steady_tol (and the
/// terminal elliptic residual is at most 10 steady_tol), t_max, max_steps,
/// or blow_up (40 consecutive rejected halvings).  General mode only.
/// Throws invalid_argument when the compatibility defect of u0 exceeds
/// cfg.compat_tol and cfg.force is not set.
[[nodiscard]] std::pair<Field, FlowTrace> flow_run(const ProblemSpec& ps, const Field& u0,
                                                   const FlowConfig& cfg = {});

/// Integrates the translating-mode flow from u0 until the oscillation
/// ||u_t - mean u_t||_inf stays below translating_tol on two consecutive
/// accepted steps.  s_est is the final mean u_t, cross-checked against the
/// two-point quotient (u(T) - u(T')) / (T - T') with T' the recorded instant
/// nearest T/2; a spread beyond 10 translating_tol is noted, not fatal.
[[nodiscard]] TranslatingFlowResult translating_flow_run(const ProblemSpec& ps, const Field& u0,
                                                         const FlowConfig& cfg = {});

/// One monitor violation: which rule broke at which instant, and by how much.
struct UtViolation {
    double t;
    std::string rule;
    double amount;
};

/// Checks the u_t laws along a trace with additive slack
/// 10 steady_tol + h_max^2: the two-sided bound
/// min{min u_t(0), 0} <= u_t <= max{max u_t(0), 0} always; the decay bound
/// u_t(t) e^{0.8 c_f t} <= max{max u_t(0), 0} when ps.c_f is given; the sign
/// dichotomy u_t >= 0 when it holds at t = 0.  Empty result means clean.
[[nodiscard]] std::vector<UtViolation> ut_monitor(const FlowTrace& trace, const ProblemSpec& ps);

/// Least-squares decay rate of ||u_t||_inf ~ e^{-r t}: minus the slope of
/// log ut_max against t over samples with ut_max > 0.  Needs at least three
/// such samples.
[[nodiscard]] double decay_rate(const FlowTrace& trace);

/// Renders the samples as CSV `t,ut_max,ut_mean,cone_margin,sup_du,sup_d2u`
/// with shortest round-trip number formatting and LF line ends.
[[nodiscard]] std::string trace_csv(const FlowTrace& trace);

}  // namespace sumhess
