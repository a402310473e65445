#pragma once

/// Property-test engine: the algebraic identity corpus for S_k, cone and
/// Garding inequality suites over sampled spectra and matrices, the disk
/// barrier inequality, and a finite-difference cross-check of the analytic
/// Newton matrix.  Every suite is deterministic per seed and reports one row
/// per checked statement.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sumhess/elliptic.hpp"

namespace sumhess {

/// One checked statement aggregated over its sample stream.
///
/// Slack convention: rows that check an equality store the largest relative
/// defect seen, |lhs - rhs| / max(1, |lhs|, |rhs|), and pass while it stays
/// below the row's tolerance.  Rows that check an inequality lhs >= rhs store
/// the smallest normalized margin (lhs - rhs) / max(1, |lhs|, |rhs|) and pass
/// while it stays above -1e-10.  Rows that track an existential constant
/// (c0, theta0, theta1, c1 analogues) expose its empirical minimum under
/// constant_name / constant; unnamed rows leave constant_name empty.
struct LemmaRow {
    std::string lemma;
    std::uint64_t seed = 0;
    long samples = 0;
    long passes = 0;
    double worst_slack = 0.0;
    std::string constant_name;
    double constant = 0.0;
};

/// Outcome of one suite run.  Invariant for a healthy suite: every row has
/// passes == samples and every named empirical constant is strictly positive;
/// all_passed() checks exactly that.
struct LemmaSuiteReport {
    std::string suite;
    std::uint64_t seed = 0;
    std::vector<LemmaRow> rows;

    [[nodiscard]] bool all_passed() const;
    [[nodiscard]] long total_samples() const;
};

/// Six algebraic identities of the sum operator checked on a common Gaussian
/// eigenvalue corpus with randomized alpha, one case per (n, k) with
/// n in sizes and 2 <= k <= n:
///   recursion          S_k = lam_i S_{k-1}(lam|i) + S_k(lam|i)
///   gradient           dS_k/dlam_i = sigma_{k-1}(lam|i) + alpha sigma_{k-2}(lam|i)
///   second truncation  S_k^{ii,jj} = S_{k-2}(lam|ij), i != j
///   gradient trace     sum_i S_k^{ii} = (n-k+1) sigma_{k-1} + alpha (n-k+2) sigma_{k-2}
///   truncation trace   sum_i S_k(lam|i) = (n-k) S_k + alpha sigma_{k-1}
///   weighted trace     sum_i lam_i S_k^{ii} = k S_k - alpha sigma_{k-1}
/// The sigma references on the right sides come from brute-force subset
/// enumeration, independent of the library evaluation path.  Each identity
/// must hold to relative 1e-12 on every sample.
[[nodiscard]] LemmaSuiteReport run_identity_suite(std::uint64_t seed,
                                                  const std::vector<int>& sizes = {2, 3, 4, 5, 6},
                                                  long samples_per_case = 10000);

/// Cone geometry and gradient inequalities on sampled spectra, for every
/// (n, k) in {2..6} x {2..n}:
///   midpoint convexity   t lam + (1-t) mu stays in tilde-Gamma_k
///   sigma lower bound    S_k >= 1 forces sigma_{k-1} > 0 and sum S_k^{ii} > 0
///                        (empirical c0_hat)
///   negative-entry dominance  lam_i < 0 at the minimum entry forces
///                        S_k^{ii} >= sum_j S_k^{jj} / (n-k+2)
///   ordered products     sorted descending, lam_i S_k^{ii} > 0 for i <= k-1
///                        (empirical theta0_hat = min lam_i S_k^{ii} / S_k)
///   pinch ratio          under lam_n < 0, -lam_n >= 0.1 lam_1,
///                        lam_1 >= 0.1 lam_2 (and lam_1 >= 1, lam_2 > 0 when
///                        k = 2 < n; skipped for k = n = 2): S_k^{11} > 0
///                        (empirical theta1_hat = min S_k^{11} / S_k^{nn})
/// Filtered rows keep sampling until at least 200 accepted samples per case.
[[nodiscard]] LemmaSuiteReport run_cone_suite(std::uint64_t seed);

/// Matrix-level Garding-type inequalities on random pairs A in tilde-Gamma_k,
/// B in Gamma_k (rotated cone spectra), about 1000 pairs per row across the
/// (n, k) sweep, alpha randomized:
///   superadditivity   S_k(A + B) >= S_k(A) + sigma_k(B), including the
///                     near-degenerate pair B = 1e-8 I
///   kth-root display  (1/k) S_k^(1/k - 1) <dS_k(A), B>
///                        >= (S_k(A) + sigma_k(B))^(1/k) - S_k(A)^(1/k) > 0
///   log display       S_k(A)^{-1} <dS_k(A), B>
///                        >= log(S_k(A) + sigma_k(B)) - log S_k(A) > 0
///   trace two-sided   -alpha/(n-k+1) sum S_k^{ii} <= <dS_k(A), A> <= k S_k(A)
[[nodiscard]] LemmaSuiteReport run_garding_suite(std::uint64_t seed);

/// Barrier inequality on the unit disk (n in {2, 3}, k <= n) with collar
/// width mu = R/10 and K = 1/(8 mu): for h = -d + K d^2 and random admissible
/// Hessians A, the contraction <dS_k(A), D2h> is strictly positive on the
/// collar; the empirical c1_hat = min <dS_k(A), D2h> / trace(dS_k(A)) is
/// reported.  A finite-difference cross-check of the closed-form D2h runs as
/// its own row.
[[nodiscard]] LemmaSuiteReport run_barrier_suite(std::uint64_t seed);

/// Largest relative discrepancy between the analytic Newton matrix and a
/// dense central finite-difference Jacobian of the stacked residual, with
/// per-column step 1e-6 (1 + |u|).  Entries compare as
/// |fd - an| / max(1, |fd|, |an|).  Grids beyond 11 nodes per axis are
/// rejected with std::invalid_argument to keep the dense sweep cheap.
[[nodiscard]] double jacobian_check(const ProblemSpec& ps, const Field& u, double s = 0.0);

/// Deterministic admissible iterate for Jacobian sweeps: the quadratic seed
/// plus a Gaussian node perturbation whose amplitude is halved until every
/// interior Hessian lies in the cone.
[[nodiscard]] Field random_admissible_field(const ProblemSpec& ps, std::uint64_t seed);

/// Machine-readable suite report as a compact JSON object with a stable key
/// order: suite, seed, all_passed, rows.
[[nodiscard]] std::string suite_json(const LemmaSuiteReport& rep);

/// Aligned text table, one line per row across the given reports.
void print_suite_table(std::ostream& os, const std::vector<LemmaSuiteReport>& reports);

}  // namespace sumhess
