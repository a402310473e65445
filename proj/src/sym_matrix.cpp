#include "sumhess/sym_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sumhess/errors.hpp"

namespace sumhess {

SymMatrix::SymMatrix(Eigen::MatrixXd a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols() || a_.rows() < 1) {
        throw std::invalid_argument("SymMatrix needs a square matrix");
    }
    if (!a_.allFinite()) {
        throw std::invalid_argument("SymMatrix entries must be finite");
    }
    const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
    const double asym = (a_ - a_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * scale) {
        throw std::invalid_argument("SymMatrix input asymmetry exceeds 1e-8 relative");
    }
    a_ = 0.5 * (a_ + a_.transpose().eval());
}

SymMatrix SymMatrix::identity(int n) {
    return SymMatrix(Eigen::MatrixXd::Identity(n, n));
}

SymMatrix SymMatrix::zero(int n) {
    return SymMatrix(Eigen::MatrixXd::Zero(n, n));
}

namespace {

// Shared Faddeev-LeVerrier sweep: fills sigma_0..sigma_n and optionally keeps
// the Newton transformations T_0..T_{n-1} along the way.
void faddeev_leverrier(const Eigen::MatrixXd& a, std::vector<double>& sigma,
                       std::vector<Eigen::MatrixXd>* tensors) {
    const int n = static_cast<int>(a.rows());
    sigma.assign(static_cast<std::size_t>(n) + 1, 0.0);
    sigma[0] = 1.0;
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(n, n);
    if (tensors) {
        tensors->clear();
        tensors->push_back(t);
    }
    for (int m = 1; m <= n; ++m) {
        const Eigen::MatrixXd at = a * t;
        sigma[static_cast<std::size_t>(m)] = at.trace() / m;
        t = sigma[static_cast<std::size_t>(m)] * Eigen::MatrixXd::Identity(n, n) - at;
        if (tensors && m <= n - 1) tensors->push_back(t);
    }
}

}  // namespace

std::vector<double> char_coeffs(const SymMatrix& a) {
    std::vector<double> sigma;
    faddeev_leverrier(a.mat(), sigma, nullptr);
    return sigma;
}

SymMatrix newton_tensor(const SymMatrix& a, int m) {
    if (m < 0 || m > a.n() - 1) {
        throw std::invalid_argument("newton_tensor order must satisfy 0 <= m <= n-1");
    }
    std::vector<double> sigma;
    std::vector<Eigen::MatrixXd> tensors;
    faddeev_leverrier(a.mat(), sigma, &tensors);
    return SymMatrix(tensors[static_cast<std::size_t>(m)]);
}

SkGradMatrix sk_and_grad_matrix(const SymMatrix& a, const SumHessianParams& p) {
    p.validate(a.n());
    std::vector<double> sigma;
    std::vector<Eigen::MatrixXd> tensors;
    faddeev_leverrier(a.mat(), sigma, &tensors);
    const std::size_t k = static_cast<std::size_t>(p.k);
    const double value = sigma[k] + p.alpha * sigma[k - 1];
    Eigen::MatrixXd grad = tensors[k - 1] + p.alpha * tensors[k - 2];
    return SkGradMatrix{value, SymMatrix(std::move(grad))};
}

EigenPair eigen_sym(const SymMatrix& sym) {
    const int n = sym.n();
    Eigen::MatrixXd a = sym.mat();
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
    const double anorm = a.norm();

    bool converged = false;
    int sweeps = 0;
    for (; sweeps < 100; ++sweeps) {
        double off2 = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) off2 += 2.0 * a(i, j) * a(i, j);
        }
        if (std::sqrt(off2) <= 1e-12 * anorm || anorm == 0.0) {
            converged = true;
            break;
        }
        for (int p = 0; p < n - 1; ++p) {
            for (int r = p + 1; r < n; ++r) {
                const double apq = a(p, r);
                if (apq == 0.0) continue;
                const double theta = (a(r, r) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double air = a(i, r);
                    a(i, p) = c * aip - s * air;
                    a(i, r) = s * aip + c * air;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i);
                    const double ari = a(r, i);
                    a(p, i) = c * api - s * ari;
                    a(r, i) = s * api + c * ari;
                }
                for (int i = 0; i < n; ++i) {
                    const double qip = q(i, p);
                    const double qir = q(i, r);
                    q(i, p) = c * qip - s * qir;
                    q(i, r) = s * qip + c * qir;
                }
            }
        }
    }
    if (!converged) {
        throw numerical_error("Jacobi eigensolver did not converge in " +
                              std::to_string(sweeps) + " sweeps");
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a(i, i) > a(j, j); });
    std::vector<double> lam(static_cast<std::size_t>(n));
    Eigen::MatrixXd qs(n, n);
    for (int i = 0; i < n; ++i) {
        lam[static_cast<std::size_t>(i)] = a(order[static_cast<std::size_t>(i)],
                                             order[static_cast<std::size_t>(i)]);
        qs.col(i) = q.col(order[static_cast<std::size_t>(i)]);
    }
    return EigenPair{Spectrum(std::move(lam)), std::move(qs)};
}

namespace {

// S_m(lam | i) and S_m(lam | ij) tables reused by both directional forms.
struct TruncTables {
    double s;                        // S_k
    std::vector<double> si;          // S_{k-1}(lam|i)
    Eigen::MatrixXd sij;             // S_{k-2}(lam|ij), zero diagonal
};

TruncTables trunc_tables(const Spectrum& lam, const SumHessianParams& p, int order) {
    const int n = lam.n();
    TruncTables t{0.0, std::vector<double>(static_cast<std::size_t>(n)),
                  Eigen::MatrixXd::Zero(n, n)};
    // Order-specific S built from sigma of the reduced vectors; order = the "k"
    // of the numerator or denominator being differentiated.
    const auto s_of = [&](const std::vector<int>& drop, int m) {
        return sk_truncate(lam, p, drop, m);
    };
    {
        const auto sigma = sigma_all(lam);
        auto at = [&](int j) {
            return (j >= 0 && j <= n) ? sigma[static_cast<std::size_t>(j)] : 0.0;
        };
        t.s = at(order) + p.alpha * at(order - 1);
    }
    for (int i = 0; i < n; ++i) {
        t.si[static_cast<std::size_t>(i)] = s_of({i}, order - 1);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double v = s_of({i, j}, order - 2);
            t.sij(i, j) = v;
            t.sij(j, i) = v;
        }
    }
    return t;
}

void require_admissible(const Spectrum& lam, const SumHessianParams& p) {
    const ConeReport cone = cone_check(lam, p, 0.0);
    if (!cone.in_gamma_tilde_k) {
        throw std::domain_error("second_directional transform needs lambda(A) in tilde-Gamma_k");
    }
}

}  // namespace

double second_directional(const SymMatrix& a, const SymMatrix& b, const SumHessianParams& p,
                          SecondTransform transform) {
    p.validate(a.n());
    if (b.n() != a.n()) {
        throw std::invalid_argument("second_directional matrices must share the order");
    }
    const EigenPair ep = eigen_sym(a);
    if (transform != SecondTransform::raw) require_admissible(ep.lambda, p);

    const int n = a.n();
    const Eigen::MatrixXd bt = ep.q.transpose() * b.mat() * ep.q;
    const TruncTables t = trunc_tables(ep.lambda, p, p.k);

    double f1 = 1.0;  // F'(S)
    double f2 = 0.0;  // F''(S)
    if (transform == SecondTransform::kth_root) {
        const double ik = 1.0 / p.k;
        f1 = ik * std::pow(t.s, ik - 1.0);
        f2 = ik * (ik - 1.0) * std::pow(t.s, ik - 2.0);
    } else if (transform == SecondTransform::log) {
        f1 = 1.0 / t.s;
        f2 = -1.0 / (t.s * t.s);
    }

    double diag_weighted = 0.0;  // sum_i S_k^{ii} Btilde_ii
    for (int i = 0; i < n; ++i) diag_weighted += t.si[static_cast<std::size_t>(i)] * bt(i, i);

    double cross = 0.0;  // sum_{i != j} S_{k-2}(lam|ij) Btilde_ii Btilde_jj
    double pairs = 0.0;  // sum_{i < j} S_{k-2}(lam|ij) Btilde_ij^2
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            cross += 2.0 * t.sij(i, j) * bt(i, i) * bt(j, j);
            pairs += t.sij(i, j) * bt(i, j) * bt(i, j);
        }
    }
    return f2 * diag_weighted * diag_weighted + f1 * (cross - 2.0 * pairs);
}

double quotient_second_directional(const SymMatrix& a, const SymMatrix& b,
                                   const SumHessianParams& p, int l) {
    p.validate(a.n());
    if (b.n() != a.n()) {
        throw std::invalid_argument("quotient_second_directional matrices must share the order");
    }
    if (l < 0 || l >= p.k) {
        throw std::invalid_argument("quotient power needs 0 <= l < k");
    }
    const EigenPair ep = eigen_sym(a);
    require_admissible(ep.lambda, p);

    const int n = a.n();
    const Eigen::MatrixXd bt = ep.q.transpose() * b.mat() * ep.q;
    const TruncTables tu = trunc_tables(ep.lambda, p, p.k);
    const TruncTables tv = trunc_tables(ep.lambda, p, l);

    const double u = tu.s;
    const double v = tv.s;
    if (!(v > 0.0)) {
        throw std::domain_error("quotient denominator S_l must be positive in tilde-Gamma_k");
    }
    const double w = u / v;
    const double pow1 = 1.0 / (p.k - l);
    const double g1 = pow1 * std::pow(w, pow1 - 1.0);
    const double g2 = pow1 * (pow1 - 1.0) * std::pow(w, pow1 - 2.0);

    // First derivatives of w in the eigenvalues.
    std::vector<double> wi(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double ui = tu.si[static_cast<std::size_t>(i)];
        const double vi = tv.si[static_cast<std::size_t>(i)];
        wi[static_cast<std::size_t>(i)] = (ui * v - u * vi) / (v * v);
    }

    double total = 0.0;
    // Diagonal block: sum_{i,j} (g2 wi wj + g1 w_ij) Btilde_ii Btilde_jj.
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double ui = tu.si[static_cast<std::size_t>(i)];
            const double uj = tu.si[static_cast<std::size_t>(j)];
            const double vi = tv.si[static_cast<std::size_t>(i)];
            const double vj = tv.si[static_cast<std::size_t>(j)];
            const double uij = i == j ? 0.0 : tu.sij(i, j);
            const double vij = i == j ? 0.0 : tv.sij(i, j);
            const double w_ij = uij / v - (ui * vj + uj * vi) / (v * v) - u * vij / (v * v) +
                                2.0 * u * vi * vj / (v * v * v);
            const double gij =
                g2 * wi[static_cast<std::size_t>(i)] * wi[static_cast<std::size_t>(j)] +
                g1 * w_ij;
            total += gij * bt(i, i) * bt(j, j);
        }
    }
    // Pair block with the closed-form divided difference of w:
    // (w_i - w_j)/(lam_i - lam_j) = (-S_{k-2}(lam|ij) v + u S_{l-2}(lam|ij)) / v^2.
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dd = (-tu.sij(i, j) * v + u * tv.sij(i, j)) / (v * v);
            total += 2.0 * g1 * dd * bt(i, j) * bt(i, j);
        }
    }
    return total;
}

}  // namespace sumhess
