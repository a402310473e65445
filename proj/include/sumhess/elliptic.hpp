#pragma once

/// Discrete solver for the sum Hessian Neumann problem
///   S_k(D^2 u) = f(x, u) in Omega,  u_nu = phi(x, u) on the boundary,
/// on a rectangle grid: residual and Jacobian assembly, damped cone-preserving
/// Newton, homotopy continuation from a quadratic seed, the eps-perturbation
/// scheme recovering the classical Neumann constant s, and the pinned
/// translating-constant scheme for S_k(D^2 u) = f(x) e^s.
///
/// Discretization: interior rows use centered second differences of net values
/// only; boundary rows impose the one-sided second-order normal derivative
/// (3 u_b - 4 u_1 + u_2)/(2h) = phi, averaged over the meeting faces at
/// corners.  Ghost values enter only diagnostics: cone margins, gradient and
/// Hessian suprema.  Both operator families are exact on quadratics.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "sumhess/expr.hpp"
#include "sumhess/grid.hpp"
#include "sumhess/spectrum.hpp"

namespace sumhess {

/// general:     u_nu = phi(x, u) with sup phi_u <= c_phi < 0.
/// classical:   u_nu = s + phi(x); the constant s is recovered by the
///              eps-perturbation scheme, never as a Newton unknown.
/// translating: S_k(D^2 u) = f(x) e^s with u_nu = phi(x); s is recovered by
///              the pinned shift scheme.
enum class Mode { general, classical, translating };

/// automatic selects dense LU up to 41^2 unknowns and sparse LU beyond.
enum class LinearSolverKind { automatic, dense, sparse };

struct ProblemSpec {
    SumHessianParams p;
    Grid grid;                  // rectangle grid; result fields bind to it
    expr::AstPtr f;             // of x[, y, z] and u
    expr::AstPtr phi;           // of x[, y, z], u and nx[, ny, nz]
    Mode mode = Mode::general;
    double c_phi = 0.0;         // general mode: required sup phi_u <= c_phi < 0
    std::optional<double> c_f;  // optional decay constant inf f_u / f
    double f_min = 1e-8;        // required positive floor of f on the sample
};

/// Builds the grid and parses both expressions; parse failures throw
/// std::invalid_argument naming the source offset.  k = 1 is accepted as a
/// linear diagnostic configuration (S_1 = trace + alpha reduces every solver
/// path to the discrete Laplacian).
[[nodiscard]] ProblemSpec make_problem(const SumHessianParams& p, const DomainDescriptor& dom,
                                       const std::vector<int>& dims, std::string_view f_src,
                                       std::string_view phi_src, Mode mode, double c_phi = 0.0);

/// Structural validation: parameter ranges, per-mode variable usage, sampled
/// sup phi_u <= c_phi < 0 (general mode), sampled f >= f_min > 0, and the
/// optional sampled inf f_u / f >= c_f.  The sample is every grid node crossed
/// with 41 values of u in [-10, 10] when the expression mentions u.  Throws
/// std::invalid_argument with the failed condition.
void validate(const ProblemSpec& ps);

struct SolverConfig {
    double tol = 1e-9;                      // residual max-norm target
    int max_iter = 30;
    double min_damp = 9.5367431640625e-7;   // 2^-20
    bool relative_tol = false;              // divide the residual by (1 + sup f)
    std::vector<double> eps_seq{1e-1, 1e-2, 1e-3, 1e-4};
    LinearSolverKind linear_solver = LinearSolverKind::automatic;
};

/// One Newton or continuation run.  History vectors hold the initial state
/// plus one entry per accepted step.  converged implies the final residual is
/// at or below the (possibly scaled) tolerance and the final cone margin is
/// strictly positive.  The contraction monitor evaluates, at every admissible
/// node of every accepted iterate,
///   -alpha/(n-k+1) tr(dS_k) <= tr(dS_k D^2u) <= k S_k
/// and the exact identity
///   tr(dS_k D^2u) + alpha/(n-k+1) tr(dS_k)
///     = k S_k + (n-k+2)/(n-k+1) alpha^2 sigma_{k-2}.
struct SolveReport {
    bool converged = false;
    int iterations = 0;                       // accepted steps (final stage)
    std::vector<double> residual_history;     // max-norms, initial entry first
    std::vector<double> damping_history;      // accepted factor per step
    std::vector<double> cone_margin_history;  // min margin over nodes per iterate
    double sup_u = 0.0;
    double sup_du = 0.0;   // max Euclidean norm of the ghost-filled gradient
    double sup_d2u = 0.0;  // max absolute entry of the ghost-filled Hessian
    double c0_lower = 0.0;
    double c0_upper = 0.0;
    bool c0_checked = false;  // set on converged general-mode solves
    bool c0_pass = true;      // c0_lower - tol_c0 <= u <= c0_upper + tol_c0
    double contraction_identity_rel_max = 0.0;
    bool contraction_bounds_ok = true;
    double t_reached = 1.0;             // continuation: last parameter held
    std::vector<double> stage_ts;       // continuation stage parameters
    std::vector<int> stage_iterations;  // Newton steps per stage
    std::string failure;                // empty when converged
};

struct ResidualPair {
    Field interior;  // S_k(D^2_h u) - f(x, u) at interior nodes, 0 elsewhere
    Field boundary;  // one-sided u_nu minus the mode's data, 0 elsewhere
};

/// Mode-resolved residual; s enters the classical data s + phi(x) and the
/// translating right side f(x) e^s.  Structural validation is not applied;
/// the fields only need to evaluate at the given iterate.
[[nodiscard]] ResidualPair residual(const ProblemSpec& ps, const Field& u, double s = 0.0);

/// Sparse Newton matrix of the stacked residual in node order; entry (q, p)
/// differentiates row q by the value at node p.  Assembles at any iterate;
/// admissibility is not required.
[[nodiscard]] Eigen::SparseMatrix<double> jacobian(const ProblemSpec& ps, const Field& u,
                                                   double s = 0.0);

/// Smallest A >= 1e-3 with S_k(A Id) >= 2 sup f over the sampled data; when
/// f depends on u the supremum is evaluated on the seed itself,
/// u = A|x - x_c|^2/2, by a short fixed-point iteration, so the amplitude
/// tracks the solution scale instead of a worst-case u range.
[[nodiscard]] double seed_amplitude(const ProblemSpec& ps);

/// Quadratic seed u0 = A |x - x_c|^2 / 2 about the domain center.  Its
/// interior discrete Hessian is exactly A Id, and its boundary Hessians lie
/// in the cone under the seed's own flux data A (x - x_c) . nu.
[[nodiscard]] Field admissible_seed(const ProblemSpec& ps);

/// Damped Newton on the general-mode square system.  A step is accepted only
/// when the residual max-norm strictly decreases and every node of the trial
/// iterate keeps a positive cone margin (boundary Hessians through ghosts).
/// Admissibility of u_init itself is the caller's concern: the initial margin
/// is recorded but not gated, so a seed whose boundary ring starts outside
/// the cone is repaired by the first accepted step.  Damping exhaustion below
/// min_damp yields a not-converged report; a failed linear solve throws
/// numerical_error.
[[nodiscard]] std::pair<Field, SolveReport> newton_solve(const ProblemSpec& ps,
                                                         const Field& u_init,
                                                         const SolverConfig& cfg = {});

/// Method of continuity from the quadratic seed: the data are blended as
///   f_t = (1-t) S_k(A Id) + t f,   phi_t = (1-t) A (x - x_c) . nu + t phi,
/// so t = 0 is solved exactly by the seed.  The step starts at 0.25, halves
/// on stage failure, grows by 1.5 on success, and stays in [2^-10, 1/4];
/// underflow returns not-converged with the last parameter reached.
[[nodiscard]] std::pair<Field, SolveReport> continuation_solve(const ProblemSpec& ps,
                                                               const SolverConfig& cfg = {});

struct ClassicalResult {
    double s = 0.0;             // boundary mean of -eps u_eps at the last eps
    Field u;                    // mean-normalized solution at the last eps
    std::vector<double> s_seq;  // one entry per completed eps stage
    std::vector<SolveReport> reports;
    bool converged = false;     // all stages converged
};

/// Classical constant recovery: for each eps of eps_seq solve the general
/// problem with data phi_eps(x, u) = phi(x) - eps u (continuation first, then
/// shift-predicted warm starts), put s_eps = mean of -eps u_eps over boundary
/// nodes, and normalize u by its trapezoid-weighted mean.  A failed stage
/// stops the sweep and returns the partial result unflagged as converged.
/// Internally each stage is renormalized by the previous constant estimate
/// (u = v - s_prev/eps with phi shifted by s_prev), keeping the iterate O(1)
/// instead of O(1/eps) so the residual stays above roundoff.
[[nodiscard]] ClassicalResult classical_neumann(const ProblemSpec& ps,
                                                const SolverConfig& cfg = {});

struct TranslatingResult {
    double s = 0.0;
    Field u_ell;  // u_{eps,0} - s/eps at the last eps; pinned at y0
    std::vector<double> s_seq;
    std::vector<SolveReport> reports;
    bool converged = false;
};

/// Translating constant recovery: for each eps solve S_k = f(x) e^{eps u}
/// with u_nu = phi(x) and read s_eps = eps (u_{eps,0}(y0) - u0(y0)) off the
/// exact shift identity u_{eps,s} = u_{eps,0} - s/eps.  Requires f and phi
/// independent of u.  Internally each stage is renormalized by the previous
/// constant estimate (u = v + s_prev/eps with f scaled by e^{s_prev}), keeping
/// the iterate O(1) instead of O(1/eps) so the residual stays above roundoff.
[[nodiscard]] TranslatingResult translating_constant(const ProblemSpec& ps, const Field& u0,
                                                     int y0, const SolverConfig& cfg = {});

/// Grid node closest to the domain center (lowest index on ties).
[[nodiscard]] int node_nearest_center(const Grid& g);

struct C0Bounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// A priori solution interval of the general mode from the boundary data:
///   upper = max(0, max phi(x, 0) / (-c_phi)),
///   lower = min (2 A diam(Omega) - phi(x, 0)) / c_phi - A diam(Omega)^2 / 2,
/// extremized over boundary nodes and their face normals, A the seed
/// amplitude.  The quadratic term carries the boundary minimum of the
/// comparison function u - A|x - x_c|^2/2 into the interior.  Throws
/// std::invalid_argument unless mode is general and c_phi < 0.
[[nodiscard]] C0Bounds c0_bounds(const ProblemSpec& ps);

}  // namespace sumhess
