#pragma once

#include <cstdint>
#include <vector>

namespace sumhess {

/// Eigenvalue vector of a symmetric matrix. At least two entries, all finite.
/// Construction from fewer than two or non-finite entries throws std::invalid_argument.
class Spectrum {
public:
    explicit Spectrum(std::vector<double> values);
    Spectrum(std::initializer_list<double> values);

    [[nodiscard]] int n() const { return static_cast<int>(v_.size()); }
    [[nodiscard]] double operator[](int i) const { return v_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const std::vector<double>& values() const { return v_; }

private:
    std::vector<double> v_;
};

/// Parameters of the sum Hessian operator S_k = sigma_k + alpha * sigma_{k-1}.
/// Valid when 2 <= k <= n and alpha > 0; validate() throws std::invalid_argument otherwise.
struct SumHessianParams {
    int k = 2;
    double alpha = 1.0;

    void validate(int n) const;
};

/// Cone membership report for the Garding cone Gamma_k = {sigma_m > 0, m = 1..k}
/// and the admissibility cone tilde-Gamma_k = Gamma_{k-1} intersect {S_k > 0}.
/// margin is the tilde-Gamma_k slack min(sigma_1, ..., sigma_{k-1}, S_k).
struct ConeReport {
    std::vector<bool> sigma_positive;  // sigma_m > tol, for m = 1..k
    bool in_gamma_k = false;
    bool in_gamma_tilde_k = false;
    double margin = 0.0;
};

/// All elementary symmetric functions sigma_0..sigma_n of lam, by the Vieta
/// expansion of prod_i (x + lam_i). sigma_0 = 1. O(n^2), exact on small n.
[[nodiscard]] std::vector<double> sigma_all(const Spectrum& lam);

/// S_k(lam) = sigma_k(lam) + alpha * sigma_{k-1}(lam).
[[nodiscard]] double sk(const Spectrum& lam, const SumHessianParams& p);

/// S_m(lam | drop): the order-m sum operator with the dropped coordinates removed.
/// drop holds one or two distinct 0-based indices; duplicates or out-of-range
/// indices throw std::invalid_argument. m may be 0 (S_0 = 1); negative orders are 0.
[[nodiscard]] double sk_truncate(const Spectrum& lam, const SumHessianParams& p,
                                 const std::vector<int>& drop, int m);

/// Gradient of S_k in the eigenvalues: component i equals S_{k-1}(lam | i).
[[nodiscard]] std::vector<double> sk_grad(const Spectrum& lam, const SumHessianParams& p);

/// Strict cone membership with tolerance slack: every defining inequality is
/// required to exceed tol (default 1e-10, absolute). tol must be >= 0.
[[nodiscard]] ConeReport cone_check(const Spectrum& lam, const SumHessianParams& p,
                                    double tol = 1e-10);

enum class SampleRegion {
    gamma_k,        // interior of Gamma_k
    tilde_only,     // tilde-Gamma_k with sigma_k < 0 (admissible but not k-convex)
    boundary_near,  // inside tilde-Gamma_k with margin in (1e-6, 1e-2]
};

/// Deterministic sampler of spectra in the requested region: Gaussian draw
/// shifted along the ray lam + t*(1,...,1) with the entry point located by
/// bisection. The returned spectrum has cone margin > 1e-6 for its region.
/// Throws internal_error if 10^4 attempts fail to produce a point.
[[nodiscard]] Spectrum sample_tilde_cone(std::uint64_t seed, int n, const SumHessianParams& p,
                                         SampleRegion region);

}  // namespace sumhess
