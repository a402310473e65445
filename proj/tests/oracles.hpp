#pragma once

// Test-only reference implementations, deliberately naive and independent of
// the production code paths they check.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// sigma_m by literal subset enumeration over all index subsets; O(2^n).
inline double sigma_brute(const std::vector<double>& v, int m) {
    const int n = static_cast<int>(v.size());
    if (m < 0 || m > n) return 0.0;
    if (m == 0) return 1.0;
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != m) continue;
        double prod = 1.0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) prod *= v[static_cast<std::size_t>(i)];
        }
        total += prod;
    }
    return total;
}

inline double s_brute(const std::vector<double>& v, int m, double alpha) {
    return sigma_brute(v, m) + alpha * sigma_brute(v, m - 1);
}

/// Deterministic Gaussian vector.
inline std::vector<double> gauss_vec(std::mt19937_64& eng, int n, double stddev = 2.0) {
    std::normal_distribution<double> g(0.0, stddev);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = g(eng);
    return v;
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
inline Eigen::MatrixXd random_orthogonal(std::mt19937_64& eng, int n) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = g(eng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    // Fix the sign convention so the factorization is unique given a.
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    return q;
}

/// Symmetric matrix with prescribed eigenvalues and a random eigenbasis.
inline Eigen::MatrixXd with_spectrum(std::mt19937_64& eng, const std::vector<double>& lam) {
    const int n = static_cast<int>(lam.size());
    const Eigen::MatrixXd q = random_orthogonal(eng, n);
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = lam[static_cast<std::size_t>(i)];
    Eigen::MatrixXd a = q * d.asDiagonal() * q.transpose();
    return 0.5 * (a + a.transpose());
}

/// Relative agreement with the spec's scale convention max(1, |a|, |b|).
inline double rel_gap(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace oracle
