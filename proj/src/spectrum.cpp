#include "sumhess/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "sumhess/errors.hpp"

namespace sumhess {

Spectrum::Spectrum(std::vector<double> values) : v_(std::move(values)) {
    if (v_.size() < 2) {
        throw std::invalid_argument("Spectrum needs at least two eigenvalues");
    }
    for (double x : v_) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("Spectrum entries must be finite");
        }
    }
}

Spectrum::Spectrum(std::initializer_list<double> values)
    : Spectrum(std::vector<double>(values)) {}

void SumHessianParams::validate(int n) const {
    if (k < 2 || k > n) {
        throw std::invalid_argument("sum Hessian order k must satisfy 2 <= k <= n");
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("sum Hessian weight alpha must be positive and finite");
    }
}

namespace {

// Vieta recurrence on a raw coordinate list; e[j] accumulates sigma_j.
std::vector<double> sigma_of(const std::vector<double>& v) {
    std::vector<double> e(v.size() + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = std::min(i + 1, v.size()); j >= 1; --j) {
            e[j] += v[i] * e[j - 1];
        }
    }
    return e;
}

// S_m out of a sigma table, with sigma_{-1} = 0 so that S_0 = 1.
double s_of(const std::vector<double>& sigma, int m, double alpha) {
    const int top = static_cast<int>(sigma.size()) - 1;
    auto at = [&](int j) { return (j >= 0 && j <= top) ? sigma[static_cast<std::size_t>(j)] : 0.0; };
    return at(m) + alpha * at(m - 1);
}

}  // namespace

std::vector<double> sigma_all(const Spectrum& lam) {
    return sigma_of(lam.values());
}

double sk(const Spectrum& lam, const SumHessianParams& p) {
    p.validate(lam.n());
    return s_of(sigma_of(lam.values()), p.k, p.alpha);
}

double sk_truncate(const Spectrum& lam, const SumHessianParams& p,
                   const std::vector<int>& drop, int m) {
    p.validate(lam.n());
    if (drop.empty() || drop.size() > 2) {
        throw std::invalid_argument("sk_truncate drops one or two coordinates");
    }
    for (int i : drop) {
        if (i < 0 || i >= lam.n()) {
            throw std::invalid_argument("sk_truncate drop index out of range");
        }
    }
    if (drop.size() == 2 && drop[0] == drop[1]) {
        throw std::invalid_argument("sk_truncate drop indices must be distinct");
    }
    std::vector<double> rest;
    rest.reserve(lam.values().size() - drop.size());
    for (int i = 0; i < lam.n(); ++i) {
        if (std::find(drop.begin(), drop.end(), i) == drop.end()) {
            rest.push_back(lam[i]);
        }
    }
    return s_of(sigma_of(rest), m, p.alpha);
}

std::vector<double> sk_grad(const Spectrum& lam, const SumHessianParams& p) {
    p.validate(lam.n());
    std::vector<double> g(static_cast<std::size_t>(lam.n()));
    std::vector<double> rest(lam.values().size() - 1);
    for (int i = 0; i < lam.n(); ++i) {
        std::size_t w = 0;
        for (int j = 0; j < lam.n(); ++j) {
            if (j != i) rest[w++] = lam[j];
        }
        g[static_cast<std::size_t>(i)] = s_of(sigma_of(rest), p.k - 1, p.alpha);
    }
    return g;
}

ConeReport cone_check(const Spectrum& lam, const SumHessianParams& p, double tol) {
    p.validate(lam.n());
    if (!(tol >= 0.0)) {
        throw std::invalid_argument("cone_check tolerance must be >= 0");
    }
    const std::vector<double> sigma = sigma_of(lam.values());
    ConeReport r;
    r.sigma_positive.resize(static_cast<std::size_t>(p.k));
    bool gamma_km1 = true;
    for (int m = 1; m <= p.k; ++m) {
        const bool pos = sigma[static_cast<std::size_t>(m)] > tol;
        r.sigma_positive[static_cast<std::size_t>(m - 1)] = pos;
        if (m < p.k) gamma_km1 = gamma_km1 && pos;
    }
    r.in_gamma_k = gamma_km1 && r.sigma_positive.back();
    const double skv = s_of(sigma, p.k, p.alpha);
    r.in_gamma_tilde_k = gamma_km1 && skv > tol;
    double margin = skv;
    for (int m = 1; m < p.k; ++m) {
        margin = std::min(margin, sigma[static_cast<std::size_t>(m)]);
    }
    r.margin = margin;
    return r;
}

namespace {

double tilde_margin(const std::vector<double>& v, const SumHessianParams& p) {
    const std::vector<double> sigma = sigma_of(v);
    double m = s_of(sigma, p.k, p.alpha);
    for (int j = 1; j < p.k; ++j) {
        m = std::min(m, sigma[static_cast<std::size_t>(j)]);
    }
    return m;
}

double gamma_margin(const std::vector<double>& v, const SumHessianParams& p) {
    const std::vector<double> sigma = sigma_of(v);
    double m = sigma[1];
    for (int j = 2; j <= p.k; ++j) {
        m = std::min(m, sigma[static_cast<std::size_t>(j)]);
    }
    return m;
}

std::vector<double> shifted(const std::vector<double>& v, double t) {
    std::vector<double> w(v);
    for (double& x : w) x += t;
    return w;
}

double sigma_k_of(const std::vector<double>& v, int k) {
    return sigma_of(v)[static_cast<std::size_t>(k)];
}

}  // namespace

Spectrum sample_tilde_cone(std::uint64_t seed, int n, const SumHessianParams& p,
                           SampleRegion region) {
    if (n < 2) throw std::invalid_argument("sample_tilde_cone needs n >= 2");
    p.validate(n);

    // Mix the configuration into the stream so (seed, n, k, region) pairs differ.
    std::uint64_t mixed = seed;
    mixed ^= 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(n);
    mixed ^= 0xc2b2ae3d27d4eb4full * static_cast<std::uint64_t>(p.k);
    mixed ^= 0x165667b19e3779f9ull * (static_cast<std::uint64_t>(region) + 1);
    std::mt19937_64 eng(mixed);
    std::normal_distribution<double> gauss(0.0, 1.5);

    const auto margin_fn = [&](const std::vector<double>& v) {
        return region == SampleRegion::gamma_k ? gamma_margin(v, p) : tilde_margin(v, p);
    };

    for (int attempt = 0; attempt < 10000; ++attempt) {
        std::vector<double> base(static_cast<std::size_t>(n));
        for (double& x : base) x = gauss(eng);

        // Bracket the cone entry along base + t*(1,...,1).
        double t_yes = 0.0;
        bool found_yes = false;
        for (double t = 0.0; t <= 64.0; t = (t == 0.0 ? 1.0 : 2.0 * t)) {
            if (margin_fn(shifted(base, t)) > 1e-3) {
                t_yes = t;
                found_yes = true;
                break;
            }
        }
        if (!found_yes) continue;

        double t_no = t_yes;
        bool found_no = false;
        for (double step = 1.0; step <= 256.0; step *= 2.0) {
            if (margin_fn(shifted(base, t_yes - step)) <= 0.0) {
                t_no = t_yes - step;
                found_no = true;
                break;
            }
        }
        if (!found_no) continue;

        for (int it = 0; it < 200 && t_yes - t_no > 1e-15 * (1.0 + std::abs(t_yes)); ++it) {
            const double mid = 0.5 * (t_no + t_yes);
            if (margin_fn(shifted(base, mid)) > 0.0) {
                t_yes = mid;
            } else {
                t_no = mid;
            }
        }
        const double t_entry = t_yes;

        if (region == SampleRegion::gamma_k) {
            // Push past the entry until the interior slack is comfortable.
            for (double off = 1e-3; off <= 64.0; off *= 2.0) {
                const std::vector<double> v = shifted(base, t_entry + off);
                if (gamma_margin(v, p) > 1e-6) return Spectrum(v);
            }
            continue;
        }

        if (region == SampleRegion::tilde_only) {
            bool rejected = false;
            for (double off = 1e-9; off <= 64.0 && !rejected; off *= 2.0) {
                const std::vector<double> v = shifted(base, t_entry + off);
                if (sigma_k_of(v, p.k) >= 0.0) {
                    rejected = true;  // crossed into Gamma_k before gaining slack
                } else if (tilde_margin(v, p) > 1e-6) {
                    return Spectrum(v);
                }
            }
            continue;
        }

        // boundary_near: smallest offset that clears the 1e-6 floor, capped at 1e-2.
        for (double off = 1e-9; off <= 1.0; off *= 2.0) {
            const std::vector<double> v = shifted(base, t_entry + off);
            const double m = tilde_margin(v, p);
            if (m > 1e-6) {
                if (m <= 1e-2) return Spectrum(v);
                break;
            }
        }
    }
    throw internal_error("sample_tilde_cone exhausted its attempt budget");
}

}  // namespace sumhess
