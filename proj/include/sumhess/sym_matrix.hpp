#pragma once

#include <Eigen/Dense>

#include "sumhess/spectrum.hpp"

namespace sumhess {

/// Symmetric real matrix. Construction symmetrizes (A + A^T)/2 and rejects
/// inputs whose asymmetry exceeds 1e-8 relative to max(1, ||A||_max).
class SymMatrix {
public:
    explicit SymMatrix(Eigen::MatrixXd a);

    [[nodiscard]] static SymMatrix identity(int n);
    [[nodiscard]] static SymMatrix zero(int n);

    [[nodiscard]] int n() const { return static_cast<int>(a_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& mat() const { return a_; }
    [[nodiscard]] double operator()(int i, int j) const { return a_(i, j); }

private:
    Eigen::MatrixXd a_;
};

/// Spectral factorization A = Q diag(lambda) Q^T with lambda sorted descending.
struct EigenPair {
    Spectrum lambda;
    Eigen::MatrixXd q;
};

/// sigma_0..sigma_n of the eigenvalues of A, computed without eigenvalues by
/// the Faddeev-LeVerrier / Newton-transformation recursion
///   T_0 = I,  sigma_m = trace(A T_{m-1}) / m,  T_m = sigma_m I - A T_{m-1}.
[[nodiscard]] std::vector<double> char_coeffs(const SymMatrix& a);

/// Newton transformation T_m(A) = sum_{j=0..m} (-1)^j sigma_{m-j}(A) A^j.
/// Satisfies d sigma_{m+1} / dA = T_m(A) and trace(T_m) = (n-m) sigma_m.
/// Requires 0 <= m <= n-1.
[[nodiscard]] SymMatrix newton_tensor(const SymMatrix& a, int m);

struct SkGradMatrix {
    double value;    // S_k(A) = sigma_k(A) + alpha sigma_{k-1}(A)
    SymMatrix grad;  // dS_k/dA = T_{k-1}(A) + alpha T_{k-2}(A)
};

/// Matrix-level value and gradient of the sum Hessian operator, eigen-free.
[[nodiscard]] SkGradMatrix sk_and_grad_matrix(const SymMatrix& a, const SumHessianParams& p);

/// Row-cyclic Jacobi eigensolver. Converged when the off-diagonal Frobenius
/// norm drops below 1e-12 ||A||_F; throws numerical_error after 100 sweeps.
/// Bit-reproducible: fixed sweep order, deterministic tie handling in the sort.
[[nodiscard]] EigenPair eigen_sym(const SymMatrix& a);

enum class SecondTransform { raw, kth_root, log };

/// d^2/dt^2 G(A + tB) at t=0 for G = S_k, S_k^{1/k}, or log S_k, evaluated in
/// the eigenbasis of A. The eigenvalue-pair divided differences use the closed
/// form (S_k^{ii} - S_k^{jj})/(lambda_i - lambda_j) = -S_{k-2}(lambda|ij),
/// exact also for repeated eigenvalues. For the transformed variants lambda(A)
/// must lie in tilde-Gamma_k (std::domain_error otherwise).
[[nodiscard]] double second_directional(const SymMatrix& a, const SymMatrix& b,
                                        const SumHessianParams& p, SecondTransform transform);

/// d^2/dt^2 of the quotient power (S_k / S_l)^{1/(k-l)} along A + tB, 0 <= l < k.
/// S_l is read as sigma_l + alpha sigma_{l-1} with the same alpha as S_k; the
/// source theory does not restate the weight for the denominator, so this
/// reading is a documented choice. l = 0 gives S_k^{1/k} exactly.
[[nodiscard]] double quotient_second_directional(const SymMatrix& a, const SymMatrix& b,
                                                 const SumHessianParams& p, int l);

}  // namespace sumhess
