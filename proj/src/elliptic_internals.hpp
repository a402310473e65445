#pragma once

/// Shared internals of the elliptic and parabolic solvers: effective problem
/// closures, residual and Jacobian assembly, per-iterate cone scans, and the
/// damped cone-preserving Newton core.  Internal to the library; include from
/// src/ only.

#include <functional>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sumhess/elliptic.hpp"
#include "sumhess/expr.hpp"
#include "sumhess/grid.hpp"
#include "sumhess/spectrum.hpp"
#include "sumhess/sym_matrix.hpp"

namespace sumhess::detail {

[[nodiscard]] expr::Env make_env(const Eigen::VectorXd& x, double u);
[[nodiscard]] expr::Env make_env(const Eigen::VectorXd& x, double u, const Eigen::VectorXd& nu);

/// Evaluate or throw numerical_error naming the offending expression.
[[nodiscard]] double eval_ast(const expr::Ast& ast, const expr::Env& env, const char* what);

/// Right side f(x, u) at a grid node; the node index lets wrappers mix in
/// per-node data (the backward Euler shift).
using RightSide = std::function<double(const Eigen::VectorXd& x, double u, int node)>;
using BoundaryData =
    std::function<double(const Eigen::VectorXd& x, double u, const Eigen::VectorXd& nu)>;

/// Mode-resolved callable form of the problem data; k may be 1 (linear hook).
struct Effective {
    const Grid* g = nullptr;
    SumHessianParams p;
    RightSide f, fu;
    BoundaryData phi, phiu;
};

/// Closures for the spec as posed: classical mode adds s to phi, translating
/// mode scales f by e^s.
[[nodiscard]] Effective base_effective(const ProblemSpec& ps, double s);

/// S_k(A) = sigma_k + alpha sigma_{k-1}; k = 1 reads trace + alpha.
[[nodiscard]] double sum_hessian_value(const SymMatrix& h, const SumHessianParams& p);
[[nodiscard]] SkGradMatrix sum_hessian_vg(const SymMatrix& h, const SumHessianParams& p);

/// min(sigma_1, ..., sigma_{k-1}, S_k) of the spectrum; -inf on non-finite
/// input; k = 1 reads S_1 itself.
[[nodiscard]] double cone_margin_of(const SymMatrix& h, const SumHessianParams& p);

/// Ghost field with only the real slots filled (ghost slots stay NaN); enough
/// for interior Hessians.
[[nodiscard]] GhostField interior_extension(const Grid& g, const Eigen::VectorXd& u);

/// Outward one-sided normal derivative (3 u_b - 4 u_1 + u_2)/(2h) on the
/// (axis, side) face; exact on quadratics.
[[nodiscard]] double one_sided_normal(const Grid& g, const Eigen::VectorXd& u, int node, int axis,
                                      int side);

/// Stacked residual by node: interior S_k(D2_h u) - f, boundary the one-sided
/// flux defect averaged over the node's faces.
[[nodiscard]] Eigen::VectorXd assemble_residual(const Effective& e, const Eigen::VectorXd& u);
[[nodiscard]] Eigen::SparseMatrix<double> assemble_jacobian(const Effective& e,
                                                            const Eigen::VectorXd& u);

/// Dense partial-pivot LU up to 1681 nodes (or as forced), sparse LU beyond;
/// throws numerical_error on factorization failure, non-finite steps, or a
/// linear defect above 1e-6 relative.
[[nodiscard]] Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double>& jac,
                                           const Eigen::VectorXd& rhs, LinearSolverKind kind);

/// Per-iterate cone and contraction scan; Hessians at boundary nodes read the
/// ghost layer filled from the effective boundary data at this iterate.
struct IterateScan {
    double min_margin = std::numeric_limits<double>::infinity();
    double identity_rel = 0.0;
    bool bounds_ok = true;
};

[[nodiscard]] IterateScan scan_iterate(const Effective& e, const Eigen::VectorXd& u);

struct CoreConfig {
    double tol = 1e-9;
    int max_iter = 30;
    double min_damp = 9.5367431640625e-7;
    LinearSolverKind lin = LinearSolverKind::automatic;
};

/// Resolve a SolverConfig; relative_tol rescales tol by (1 + f_hi).
[[nodiscard]] CoreConfig core_config(const SolverConfig& cfg, double f_hi);

struct FieldMonitors {
    double sup_u = 0.0;
    double sup_du = 0.0;   // max Euclidean gradient norm over nodes
    double sup_d2u = 0.0;  // max |Hessian entry| over nodes
};

/// Ghost-based derivative monitors of u under the effective boundary data.
[[nodiscard]] FieldMonitors field_monitors(const Effective& e, const Eigen::VectorXd& u);

void merge_scan(SolveReport& rep, const IterateScan& scan);
void finalize_monitors(const Effective& e, const Eigen::VectorXd& u, SolveReport& rep);

/// Damped Newton; the initial margin is recorded but only accepted steps are
/// gated on margin > 0 and strict residual decrease.
[[nodiscard]] std::pair<Eigen::VectorXd, SolveReport> newton_core(const Effective& e,
                                                                  Eigen::VectorXd u,
                                                                  const CoreConfig& cc);

}  // namespace sumhess::detail
