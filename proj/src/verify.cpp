#include "sumhess/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>
#include <json.hpp>

#include "elliptic_internals.hpp"
#include "sumhess/domain.hpp"
#include "sumhess/errors.hpp"
#include "sumhess/spectrum.hpp"
#include "sumhess/sym_matrix.hpp"

namespace sumhess {

namespace {

constexpr double kIdentityTol = 1e-12;
constexpr double kInequalityTol = 1e-10;
constexpr double kHessianFdTol = 1e-5;

/// Stream salt per row so each statement owns an independent sample stream.
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t mixed = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    mixed ^= mixed >> 30;
    mixed *= 0xbf58476d1ce4e5b9ull;
    mixed ^= mixed >> 27;
    return mixed;
}

[[nodiscard]] double scale_of(double lhs, double rhs) {
    return std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

/// Accumulates one report row; equality rows track the largest relative
/// defect, inequality rows the smallest normalized margin.
struct RowAccum {
    LemmaRow row;
    bool equality = false;
    double tol = kInequalityTol;

    RowAccum(std::string lemma, std::uint64_t seed, bool eq, double t) : equality(eq), tol(t) {
        row.lemma = std::move(lemma);
        row.seed = seed;
        row.worst_slack = eq ? 0.0 : std::numeric_limits<double>::infinity();
    }

    /// One sample whose pooled defect (equality) or margin (inequality) is v.
    void add(double v) {
        ++row.samples;
        if (equality) {
            row.worst_slack = std::max(row.worst_slack, v);
            if (v <= tol) ++row.passes;
        } else {
            row.worst_slack = std::min(row.worst_slack, v);
            if (v >= -tol) ++row.passes;
        }
    }

    void track(const char* name, double value) {
        if (row.constant_name.empty()) {
            row.constant_name = name;
            row.constant = value;
        } else {
            row.constant = std::min(row.constant, value);
        }
    }
};

/// sigma_0..sigma_n by explicit subset enumeration: the independent oracle
/// route for the identity suite. Exponential, so capped at 16 entries.
[[nodiscard]] std::vector<double> sigma_subsets(const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    if (n > 16) throw std::invalid_argument("subset enumeration is capped at 16 entries");
    std::vector<double> s(static_cast<std::size_t>(n) + 1, 0.0);
    s[0] = 1.0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double prod = 1.0;
        int bits = 0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                prod *= v[static_cast<std::size_t>(i)];
                ++bits;
            }
        }
        s[static_cast<std::size_t>(bits)] += prod;
    }
    return s;
}

/// sigma_m with the out-of-range convention sigma_m = 0 for m < 0 or m > n.
[[nodiscard]] double sigma_at(const std::vector<double>& s, int m) {
    if (m < 0 || m >= static_cast<int>(s.size())) return 0.0;
    return s[static_cast<std::size_t>(m)];
}

[[nodiscard]] std::vector<double> drop_entries(const std::vector<double>& v, int i, int j = -1) {
    std::vector<double> out;
    out.reserve(v.size());
    for (int q = 0; q < static_cast<int>(v.size()); ++q)
        if (q != i && q != j) out.push_back(v[static_cast<std::size_t>(q)]);
    return out;
}

/// Haar-like random rotation: QR of a Gaussian matrix with the R diagonal
/// signs folded into Q so the factorization is unambiguous.
[[nodiscard]] Eigen::MatrixXd random_rotation(std::mt19937_64& eng, int n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = gauss(eng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::VectorXd diag = qr.matrixQR().diagonal();
    for (int j = 0; j < n; ++j)
        if (diag(j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

[[nodiscard]] SymMatrix rotate_spectrum(const Spectrum& lam, const Eigen::MatrixXd& q) {
    Eigen::VectorXd d(lam.n());
    for (int i = 0; i < lam.n(); ++i) d(i) = lam[i];
    return SymMatrix(q * d.asDiagonal() * q.transpose());
}

/// alpha > 0 spread over about (0.1, 10) so the weight is exercised away
/// from 1.
[[nodiscard]] double random_alpha(std::mt19937_64& eng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    return std::exp(0.7 * gauss(eng));
}

constexpr SampleRegion kRegions[] = {SampleRegion::gamma_k, SampleRegion::tilde_only,
                                     SampleRegion::boundary_near};

/// The (n, k) sweep shared by the spectral suites.
[[nodiscard]] std::vector<std::pair<int, int>> nk_cases() {
    std::vector<std::pair<int, int>> cases;
    for (int n = 2; n <= 6; ++n)
        for (int k = 2; k <= n; ++k) cases.emplace_back(n, k);
    return cases;
}

[[nodiscard]] double trace_of(const SymMatrix& a) { return a.mat().trace(); }

[[nodiscard]] double contract(const SymMatrix& a, const SymMatrix& b) {
    return a.mat().cwiseProduct(b.mat()).sum();
}

}  // namespace

bool LemmaSuiteReport::all_passed() const {
    if (rows.empty()) return false;
    for (const LemmaRow& r : rows) {
        if (r.samples == 0 || r.passes != r.samples) return false;
        if (!r.constant_name.empty() && !(r.constant > 0.0)) return false;
    }
    return true;
}

long LemmaSuiteReport::total_samples() const {
    long total = 0;
    for (const LemmaRow& r : rows) total += r.samples;
    return total;
}

LemmaSuiteReport run_identity_suite(std::uint64_t seed, const std::vector<int>& sizes,
                                    long samples_per_case) {
    if (samples_per_case < 1) throw std::invalid_argument("samples_per_case must be positive");
    for (int n : sizes)
        if (n < 2 || n > 16) throw std::invalid_argument("identity suite sizes must be in [2, 16]");

    LemmaSuiteReport rep;
    rep.suite = "identity";
    rep.seed = seed;

    RowAccum recursion("recursion identity", seed, true, kIdentityTol);
    RowAccum gradient("gradient identity", seed, true, kIdentityTol);
    RowAccum second("second truncation identity", seed, true, kIdentityTol);
    RowAccum grad_trace("gradient trace identity", seed, true, kIdentityTol);
    RowAccum trunc_trace("truncation trace identity", seed, true, kIdentityTol);
    RowAccum weighted("weighted trace identity", seed, true, kIdentityTol);

    for (int n : sizes) {
        for (int k = 2; k <= n; ++k) {
            std::mt19937_64 eng(mix_seed(seed, 97ull * static_cast<std::uint64_t>(n) +
                                                   static_cast<std::uint64_t>(k)));
            std::normal_distribution<double> gauss(0.0, 1.5);
            for (long it = 0; it < samples_per_case; ++it) {
                std::vector<double> v(static_cast<std::size_t>(n));
                for (double& x : v) x = gauss(eng);
                const SumHessianParams p{k, random_alpha(eng)};
                const Spectrum lam(v);
                const std::vector<double> sig = sigma_subsets(v);
                const double sk_full = sk(lam, p);
                const std::vector<double> g = sk_grad(lam, p);

                double d_rec = 0.0, d_grad = 0.0, d_second = 0.0;
                double sum_trunc = 0.0, sum_grad = 0.0, sum_weighted = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double tk = sk_truncate(lam, p, {i}, k);
                    const double tk1 = sk_truncate(lam, p, {i}, k - 1);
                    d_rec = std::max(d_rec, std::abs(sk_full - (v[static_cast<std::size_t>(i)] * tk1 + tk)) /
                                                scale_of(sk_full, tk));
                    const std::vector<double> sig_i = sigma_subsets(drop_entries(v, i));
                    const double grad_oracle =
                        sigma_at(sig_i, k - 1) + p.alpha * sigma_at(sig_i, k - 2);
                    d_grad = std::max(d_grad, std::abs(g[static_cast<std::size_t>(i)] - grad_oracle) /
                                                  scale_of(g[static_cast<std::size_t>(i)], grad_oracle));
                    sum_trunc += tk;
                    sum_grad += g[static_cast<std::size_t>(i)];
                    sum_weighted += v[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
                    for (int j = i + 1; j < n; ++j) {
                        const double lhs = sk_truncate(lam, p, {i, j}, k - 2);
                        const std::vector<double> sig_ij = sigma_subsets(drop_entries(v, i, j));
                        const double rhs =
                            sigma_at(sig_ij, k - 2) + p.alpha * sigma_at(sig_ij, k - 3);
                        d_second = std::max(d_second, std::abs(lhs - rhs) / scale_of(lhs, rhs));
                    }
                }
                recursion.add(d_rec);
                gradient.add(d_grad);
                second.add(d_second);

                const double gt_rhs = (n - k + 1) * sigma_at(sig, k - 1) +
                                      p.alpha * (n - k + 2) * sigma_at(sig, k - 2);
                grad_trace.add(std::abs(sum_grad - gt_rhs) / scale_of(sum_grad, gt_rhs));
                const double tt_rhs = (n - k) * sk_full + p.alpha * sigma_at(sig, k - 1);
                trunc_trace.add(std::abs(sum_trunc - tt_rhs) / scale_of(sum_trunc, tt_rhs));
                const double wt_rhs = k * sk_full - p.alpha * sigma_at(sig, k - 1);
                weighted.add(std::abs(sum_weighted - wt_rhs) / scale_of(sum_weighted, wt_rhs));
            }
        }
    }

    rep.rows = {recursion.row,  gradient.row,    second.row,
                grad_trace.row, trunc_trace.row, weighted.row};
    return rep;
}

namespace {

/// Draws from the region cycle until accept() holds, up to max_attempts
/// total draws across the whole quota loop.
class FilteredSampler {
public:
    FilteredSampler(std::uint64_t seed, int n, SumHessianParams p)
        : seed_(seed), n_(n), p_(p) {}

    template <typename Accept>
    [[nodiscard]] Spectrum next(const Accept& accept, const char* what) {
        while (attempt_ < 200000) {
            const SampleRegion region = kRegions[attempt_ % 3];
            const Spectrum lam = sample_tilde_cone(seed_ + static_cast<std::uint64_t>(attempt_),
                                                   n_, p_, region);
            ++attempt_;
            if (accept(lam)) return lam;
        }
        throw internal_error(std::string("filtered sampling exhausted its attempt budget for ") +
                             what);
    }

private:
    std::uint64_t seed_;
    int n_;
    SumHessianParams p_;
    long attempt_ = 0;
};

}  // namespace

LemmaSuiteReport run_cone_suite(std::uint64_t seed) {
    LemmaSuiteReport rep;
    rep.suite = "cone";
    rep.seed = seed;

    RowAccum convexity("midpoint convexity", mix_seed(seed, 11), false, kInequalityTol);
    RowAccum sigma_bound("sigma lower bound", mix_seed(seed, 12), false, kInequalityTol);
    RowAccum dominance("negative-entry dominance", mix_seed(seed, 13), false, kInequalityTol);
    RowAccum products("ordered positive products", mix_seed(seed, 14), false, kInequalityTol);
    RowAccum pinch("pinch ratio", mix_seed(seed, 15), false, kInequalityTol);

    constexpr long kQuota = 200;
    for (const auto& [n, k] : nk_cases()) {
        const SumHessianParams p{k, 1.0};
        const std::uint64_t case_salt = 1000ull * static_cast<std::uint64_t>(n) +
                                        static_cast<std::uint64_t>(k);

        // Lemma: tilde-Gamma_k is convex. Pairs across all region
        // combinations, swept through the open segment.
        for (long q = 0; q < 60; ++q) {
            const std::uint64_t s0 = convexity.row.seed + 2 * static_cast<std::uint64_t>(q) +
                                     977ull * case_salt;
            const Spectrum lam = sample_tilde_cone(s0, n, p, kRegions[q % 3]);
            const Spectrum mu = sample_tilde_cone(s0 + 1, n, p, kRegions[(q / 3) % 3]);
            for (int ti = 1; ti <= 9; ++ti) {
                const double t = 0.1 * ti;
                std::vector<double> blend(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i) blend[static_cast<std::size_t>(i)] = t * lam[i] + (1.0 - t) * mu[i];
                const ConeReport cr = cone_check(Spectrum(blend), p, 0.0);
                convexity.add(cr.in_gamma_tilde_k ? cr.margin : cr.margin - 1.0);
            }
        }

        // Lemma: S_k >= tau_0 = 1 bounds sigma_{k-1} and the gradient trace
        // away from zero; the bound itself is existential, so the row asserts
        // positivity and records the empirical minimum.
        {
            FilteredSampler fs(sigma_bound.row.seed + 7919ull * case_salt, n, p);
            for (long q = 0; q < kQuota; ++q) {
                const Spectrum lam = fs.next([&](const Spectrum& c) { return sk(c, p) >= 1.0; },
                                             "the tau_0 filter");
                const std::vector<double> sig = sigma_all(lam);
                const std::vector<double> g = sk_grad(lam, p);
                double grad_sum = 0.0;
                for (double gi : g) grad_sum += gi;
                const double weakest = std::min(sig[static_cast<std::size_t>(k - 1)], grad_sum);
                sigma_bound.add(weakest / scale_of(weakest, 0.0));
                sigma_bound.track("c0_hat", weakest);
            }
        }

        // Lemma: a negative entry's gradient component dominates the average
        // gradient trace with the explicit factor 1/(n-k+2).
        {
            FilteredSampler fs(dominance.row.seed + 7919ull * case_salt, n, p);
            for (long q = 0; q < kQuota; ++q) {
                const Spectrum lam = fs.next(
                    [&](const Spectrum& c) {
                        return *std::min_element(c.values().begin(), c.values().end()) < 0.0;
                    },
                    "the negative-entry filter");
                const auto it = std::min_element(lam.values().begin(), lam.values().end());
                const int arg = static_cast<int>(it - lam.values().begin());
                const std::vector<double> g = sk_grad(lam, p);
                double grad_sum = 0.0;
                for (double gi : g) grad_sum += gi;
                const double lhs = g[static_cast<std::size_t>(arg)];
                const double rhs = grad_sum / (n - k + 2);
                dominance.add((lhs - rhs) / scale_of(lhs, rhs));
            }
        }

        // Lemma: sorted descending, the first k-1 products lam_i S_k^{ii}
        // stay positive; theta0_hat is the worst ratio against S_k.
        {
            FilteredSampler fs(products.row.seed + 7919ull * case_salt, n, p);
            for (long q = 0; q < kQuota; ++q) {
                const Spectrum lam = fs.next([](const Spectrum&) { return true; }, "plain draws");
                std::vector<double> sorted = lam.values();
                std::sort(sorted.begin(), sorted.end(), std::greater<>());
                const Spectrum lam_sorted(sorted);
                const std::vector<double> g = sk_grad(lam_sorted, p);
                const double sk_val = sk(lam_sorted, p);
                double weakest = std::numeric_limits<double>::infinity();
                for (int i = 0; i <= k - 2; ++i)
                    weakest = std::min(weakest, sorted[static_cast<std::size_t>(i)] *
                                                    g[static_cast<std::size_t>(i)]);
                products.add(weakest / scale_of(weakest, 0.0));
                products.track("theta0_hat", weakest / sk_val);
            }
        }

        // Lemma: pinched spectra keep S_k^{11} a fixed fraction of S_k^{nn}.
        // The k = n = 2 case is outside the statement's hypotheses.
        if (k >= 3 || n > 2) {
            FilteredSampler fs(pinch.row.seed + 7919ull * case_salt, n, p);
            for (long q = 0; q < kQuota; ++q) {
                const Spectrum lam = fs.next(
                    [&](const Spectrum& c) {
                        std::vector<double> sv = c.values();
                        std::sort(sv.begin(), sv.end(), std::greater<>());
                        const double top = sv.front(), bot = sv.back();
                        if (!(bot < 0.0) || !(-bot >= 0.1 * top) || !(top >= 0.1 * sv[1]))
                            return false;
                        if (k == 2) return top >= 1.0 && sv[1] > 0.0;
                        return top > 0.0;
                    },
                    "the pinch filter");
                std::vector<double> sorted = lam.values();
                std::sort(sorted.begin(), sorted.end(), std::greater<>());
                const std::vector<double> g = sk_grad(Spectrum(sorted), p);
                const double top = g.front(), bot = g.back();
                pinch.add(top / scale_of(top, 0.0));
                pinch.track("theta1_hat", top / bot);
            }
        }
    }

    rep.rows = {convexity.row, sigma_bound.row, dominance.row, products.row, pinch.row};
    return rep;
}

LemmaSuiteReport run_garding_suite(std::uint64_t seed) {
    LemmaSuiteReport rep;
    rep.suite = "garding";
    rep.seed = seed;

    RowAccum superadd("superadditivity", mix_seed(seed, 21), false, kInequalityTol);
    RowAccum kth_root("kth-root display", mix_seed(seed, 22), false, kInequalityTol);
    RowAccum log_disp("log display", mix_seed(seed, 23), false, kInequalityTol);
    RowAccum two_sided("trace two-sided", mix_seed(seed, 24), false, kInequalityTol);

    constexpr long kPairs = 67;
    for (const auto& [n, k] : nk_cases()) {
        const std::uint64_t case_salt = 1000ull * static_cast<std::uint64_t>(n) +
                                        static_cast<std::uint64_t>(k);
        std::mt19937_64 eng(mix_seed(seed, 31 + case_salt));

        for (long q = 0; q < kPairs + 1; ++q) {
            const SumHessianParams p{k, random_alpha(eng)};
            const std::uint64_t sq = mix_seed(seed, 53 + 4096ull * case_salt) +
                                     2 * static_cast<std::uint64_t>(q);
            const SymMatrix a =
                rotate_spectrum(sample_tilde_cone(sq, n, p, kRegions[q % 3]), random_rotation(eng, n));
            // B = 1e-8 I probes the degenerate cone-boundary limit B -> 0.
            const SymMatrix b =
                q == kPairs
                    ? SymMatrix(1e-8 * Eigen::MatrixXd::Identity(n, n))
                    : rotate_spectrum(sample_tilde_cone(sq + 1, n, p, SampleRegion::gamma_k),
                                      random_rotation(eng, n));
            const SkGradMatrix va = sk_and_grad_matrix(a, p);
            const double sigma_b = char_coeffs(b)[static_cast<std::size_t>(k)];
            const double sum_val = sk_and_grad_matrix(SymMatrix(a.mat() + b.mat()), p).value;

            superadd.add((sum_val - (va.value + sigma_b)) / scale_of(sum_val, va.value + sigma_b));

            if (q < kPairs) {
                const double inner = contract(va.grad, b);
                const double root_lhs =
                    std::pow(va.value, 1.0 / k - 1.0) * inner / static_cast<double>(k);
                const double root_rhs =
                    std::pow(va.value + sigma_b, 1.0 / k) - std::pow(va.value, 1.0 / k);
                kth_root.add(std::min((root_lhs - root_rhs) / scale_of(root_lhs, root_rhs),
                                      root_rhs / scale_of(root_rhs, 0.0)));

                const double log_lhs = inner / va.value;
                const double log_rhs = std::log1p(sigma_b / va.value);
                log_disp.add(std::min((log_lhs - log_rhs) / scale_of(log_lhs, log_rhs),
                                      log_rhs / scale_of(log_rhs, 0.0)));

                const double mid = contract(va.grad, a);
                const double upper = k * va.value;
                const double lower = -p.alpha / (n - k + 1) * trace_of(va.grad);
                two_sided.add(std::min((upper - mid) / scale_of(upper, mid),
                                       (mid - lower) / scale_of(mid, lower)));
            }
        }
    }

    rep.rows = {superadd.row, kth_root.row, log_disp.row, two_sided.row};
    return rep;
}

LemmaSuiteReport run_barrier_suite(std::uint64_t seed) {
    LemmaSuiteReport rep;
    rep.suite = "barrier";
    rep.seed = seed;

    RowAccum ratio("collar ratio", mix_seed(seed, 41), false, kInequalityTol);
    RowAccum agreement("hessian agreement", mix_seed(seed, 42), true, kHessianFdTol);

    constexpr double kRadius = 1.0;
    const double mu = kRadius / 10.0;
    const double big_k = 1.0 / (8.0 * mu);

    const std::pair<int, int> combos[] = {{2, 2}, {3, 2}, {3, 3}};
    for (const auto& [n, k] : combos) {
        const DomainDescriptor dom = DomainDescriptor::disk(kRadius, Eigen::VectorXd::Zero(n));
        const std::uint64_t case_salt = 1000ull * static_cast<std::uint64_t>(n) +
                                        static_cast<std::uint64_t>(k);
        std::mt19937_64 eng(mix_seed(seed, 61 + case_salt));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        const auto collar_point = [&](double d) {
            Eigen::VectorXd dir(n);
            do {
                for (int i = 0; i < n; ++i) dir(i) = gauss(eng);
            } while (dir.norm() < 1e-3);
            dir.normalize();
            Eigen::VectorXd x = (kRadius - d) * dir;
            // Normalization roundoff can land 1 ulp outside the closed disk.
            if (x.norm() > kRadius) x *= kRadius / x.norm();
            return x;
        };

        // Lemma: the admissible contraction of D2h stays positive on the
        // collar; the constant c1 is existential, so the row records the
        // empirical worst ratio against the gradient trace.
        for (long q = 0; q < 334; ++q) {
            const double d = q == 0 ? 0.0 : mu * unif(eng) * (1.0 - 1e-12);
            const Eigen::VectorXd x = collar_point(d);
            const SumHessianParams p{k, random_alpha(eng)};
            const std::uint64_t sq = ratio.row.seed + 4096ull * case_salt +
                                     static_cast<std::uint64_t>(q);
            const SymMatrix hess =
                rotate_spectrum(sample_tilde_cone(sq, n, p, kRegions[q % 3]), random_rotation(eng, n));
            const SkGradMatrix v = sk_and_grad_matrix(hess, p);
            const BarrierEval be = barrier_eval(dom, big_k, x);
            const double lhs = contract(v.grad, be.d2h);
            ratio.add(lhs / scale_of(lhs, 0.0));
            ratio.track("c1_hat", lhs / trace_of(v.grad));
        }

        // Finite-difference cross-check of the closed-form D2h away from the
        // collar edges.
        const double delta = 3e-5;
        for (long q = 0; q < 30; ++q) {
            const double d = mu * (0.125 + 0.75 * unif(eng));
            const Eigen::VectorXd x = collar_point(d);
            const SymMatrix an = barrier_eval(dom, big_k, x).d2h;
            const auto h_at = [&](const Eigen::VectorXd& y) { return barrier_eval(dom, big_k, y).h; };
            double defect = 0.0;
            for (int i = 0; i < n; ++i) {
                for (int j = i; j < n; ++j) {
                    Eigen::VectorXd e_i = Eigen::VectorXd::Zero(n), e_j = Eigen::VectorXd::Zero(n);
                    e_i(i) = delta;
                    e_j(j) = delta;
                    const double fd =
                        i == j ? (h_at(x + e_i) - 2.0 * h_at(x) + h_at(x - e_i)) / (delta * delta)
                               : (h_at(x + e_i + e_j) - h_at(x + e_i - e_j) - h_at(x - e_i + e_j) +
                                  h_at(x - e_i - e_j)) /
                                     (4.0 * delta * delta);
                    defect = std::max(defect, std::abs(fd - an(i, j)) / scale_of(fd, an(i, j)));
                }
            }
            agreement.add(defect);
        }
    }

    rep.rows = {ratio.row, agreement.row};
    return rep;
}

double jacobian_check(const ProblemSpec& ps, const Field& u, double s) {
    const Grid& g = ps.grid;
    for (int a = 0; a < g.n(); ++a)
        if (g.dim(a) > 11)
            throw std::invalid_argument("the dense difference sweep needs at most 11 nodes per axis");

    const auto stacked = [&](const Field& w) {
        const ResidualPair rp = residual(ps, w, s);
        Eigen::VectorXd r(g.node_count());
        for (int node = 0; node < g.node_count(); ++node)
            r(node) = g.boundary_axis_count(node) > 0 ? rp.boundary[node] : rp.interior[node];
        return r;
    };

    const Eigen::MatrixXd an = Eigen::MatrixXd(jacobian(ps, u, s));
    double worst = 0.0;
    Field probe = u;
    for (int col = 0; col < g.node_count(); ++col) {
        const double base = u[col];
        const double delta = 1e-6 * (1.0 + std::abs(base));
        probe[col] = base + delta;
        const Eigen::VectorXd r_plus = stacked(probe);
        probe[col] = base - delta;
        const Eigen::VectorXd r_minus = stacked(probe);
        probe[col] = base;
        for (int row = 0; row < g.node_count(); ++row) {
            const double fd = (r_plus(row) - r_minus(row)) / (2.0 * delta);
            worst = std::max(worst, std::abs(fd - an(row, col)) / scale_of(fd, an(row, col)));
        }
    }
    return worst;
}

Field random_admissible_field(const ProblemSpec& ps, std::uint64_t seed) {
    const Grid& g = ps.grid;
    const Field base = admissible_seed(ps);

    std::mt19937_64 eng(mix_seed(seed, 71));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd noise(g.node_count());
    for (int node = 0; node < g.node_count(); ++node) noise(node) = gauss(eng);

    // Admissibility here means interior Hessians in the cone; the boundary
    // flux of a random iterate has no reason to match the problem data.
    const auto interior_margin = [&](const Eigen::VectorXd& u) {
        const GhostField ext = detail::interior_extension(g, u);
        double margin = std::numeric_limits<double>::infinity();
        for (int node = 0; node < g.node_count(); ++node) {
            if (g.boundary_axis_count(node) > 0) continue;
            margin = std::min(margin, detail::cone_margin_of(hessian_at(g, ext, node), ps.p));
        }
        return margin;
    };

    double h_min = std::numeric_limits<double>::infinity();
    for (int a = 0; a < g.n(); ++a) h_min = std::min(h_min, g.spacing(a));
    double amp = 0.05 * seed_amplitude(ps) * h_min * h_min;

    Field out(g);
    for (int halvings = 0; halvings < 60; ++halvings) {
        out.values() = base.values() + amp * noise;
        if (interior_margin(out.values()) > 0.0) return out;
        amp *= 0.5;
    }
    throw internal_error("perturbation back-off failed to restore admissibility");
}

std::string suite_json(const LemmaSuiteReport& rep) {
    nlohmann::ordered_json j;
    j["suite"] = rep.suite;
    j["seed"] = rep.seed;
    j["all_passed"] = rep.all_passed();
    j["rows"] = nlohmann::ordered_json::array();
    for (const LemmaRow& r : rep.rows) {
        nlohmann::ordered_json row;
        row["lemma"] = r.lemma;
        row["seed"] = r.seed;
        row["samples"] = r.samples;
        row["passes"] = r.passes;
        row["worst_slack"] = r.worst_slack;
        row["constant_name"] = r.constant_name;
        row["constant"] = r.constant;
        j["rows"].push_back(row);
    }
    return j.dump();
}

void print_suite_table(std::ostream& os, const std::vector<LemmaSuiteReport>& reports) {
    const auto sci = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", v);
        return std::string(buf);
    };

    std::vector<std::vector<std::string>> lines;
    lines.push_back({"suite", "lemma", "samples", "passes", "worst slack", "constant"});
    for (const LemmaSuiteReport& rep : reports) {
        for (const LemmaRow& r : rep.rows) {
            const std::string constant =
                r.constant_name.empty() ? "-" : r.constant_name + " = " + sci(r.constant);
            lines.push_back({rep.suite, r.lemma, std::to_string(r.samples),
                             std::to_string(r.passes), sci(r.worst_slack), constant});
        }
    }

    std::vector<std::size_t> width(lines.front().size(), 0);
    for (const auto& line : lines)
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
    for (const auto& line : lines) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            os << line[c];
            if (c + 1 < line.size()) os << std::string(width[c] - line[c].size() + 2, ' ');
        }
        os << '\n';
    }
}

}  // namespace sumhess
