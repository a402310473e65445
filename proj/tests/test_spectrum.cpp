#include "sumhess/spectrum.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <doctest.h>

#include "oracles.hpp"
#include "sumhess/errors.hpp"

using namespace sumhess;

TEST_SUITE("spectrum") {

TEST_CASE("sigma_all matches hand values and brute force on small vectors") {
    SUBCASE("all ones gives binomial coefficients") {
        const auto s = sigma_all(Spectrum{1, 1, 1});
        REQUIRE(s.size() == 4);
        CHECK(s[0] == 1.0);
        CHECK(s[1] == 3.0);
        CHECK(s[2] == 3.0);
        CHECK(s[3] == 1.0);
    }
    SUBCASE("(2,1,1) enumerated") {
        const auto s = sigma_all(Spectrum{2, 1, 1});
        CHECK(s[0] == 1.0);
        CHECK(s[1] == 4.0);
        CHECK(s[2] == 5.0);
        CHECK(s[3] == 2.0);
    }
    SUBCASE("zero vector") {
        const auto s = sigma_all(Spectrum{0, 0, 0, 0});
        CHECK(s[0] == 1.0);
        for (std::size_t m = 1; m < s.size(); ++m) CHECK(s[m] == 0.0);
    }
}

TEST_CASE("spectrum construction rejects bad input") {
    CHECK_THROWS_AS(Spectrum{1.0}, std::invalid_argument);
    CHECK_THROWS_AS(Spectrum(std::vector<double>{1.0, std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(Spectrum(std::vector<double>{1.0, INFINITY}), std::invalid_argument);
}

TEST_CASE("sigma_all agrees with subset enumeration on random vectors") {
    std::mt19937_64 eng(7);
    for (int n = 2; n <= 6; ++n) {
        for (int rep = 0; rep < 1000; ++rep) {
            const auto v = oracle::gauss_vec(eng, n);
            const auto s = sigma_all(Spectrum(v));
            for (int m = 0; m <= n; ++m) {
                CHECK(oracle::rel_gap(s[static_cast<std::size_t>(m)],
                                      oracle::sigma_brute(v, m)) < 1e-12);
            }
        }
    }
}

TEST_CASE("sk frozen examples") {
    CHECK(sk(Spectrum{2, 1, 1}, {2, 1.0}) == 9.0);
    CHECK(sk(Spectrum{0, 0, 0}, {2, 1.0}) == 0.0);
    for (int n = 2; n <= 6; ++n) {
        std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
        const double expected = n * (n - 1) / 2.0 + n;  // C(n,2) + n
        CHECK(sk(Spectrum(ones), {2, 1.0}) == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("sk_truncate frozen examples and validation") {
    const Spectrum lam{2, 1, 1};
    const SumHessianParams p{2, 1.0};
    CHECK(sk_truncate(lam, p, {0}, 1) == 3.0);  // sigma_1(1,1) + alpha
    CHECK_THROWS_AS((void)sk_truncate(lam, p, {0, 0}, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)sk_truncate(lam, p, {3}, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)sk_truncate(lam, p, {-1}, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)sk_truncate(lam, p, {}, 1), std::invalid_argument);

    // Def 2.1(2) on the worked triple: lam_1 S_1(lam|1) + S_2(lam|1) = S_2(lam).
    CHECK(lam[0] * sk_truncate(lam, p, {0}, 1) + sk_truncate(lam, p, {0}, 2) == 9.0);
}

TEST_CASE("sk_grad frozen examples") {
    const Spectrum lam{2, 1, 1};
    const SumHessianParams p{2, 1.0};
    const auto g = sk_grad(lam, p);
    REQUIRE(g.size() == 3);
    CHECK(g[0] == 3.0);
    CHECK(g[1] == 4.0);
    CHECK(g[2] == 4.0);
    CHECK(g[0] + g[1] + g[2] == 11.0);  // (n-k+1) sigma_{k-1} + alpha (n-k+2) sigma_{k-2}

    double weighted = 0.0;
    for (int i = 0; i < 3; ++i) weighted += lam[i] * g[static_cast<std::size_t>(i)];
    CHECK(weighted == 14.0);  // k S_k - alpha sigma_{k-1} = 2*9 - 4

    // Zero spectrum: gradient is alpha for k=2, zero for k>=3.
    const auto g2 = sk_grad(Spectrum{0, 0, 0, 0}, {2, 1.5});
    for (double gi : g2) CHECK(gi == 1.5);
    const auto g3 = sk_grad(Spectrum{0, 0, 0, 0}, {3, 1.5});
    for (double gi : g3) CHECK(gi == 0.0);
}

TEST_CASE("trace identities hold on random samples") {
    std::mt19937_64 eng(11);
    for (int n = 2; n <= 6; ++n) {
        for (int k = 2; k <= n; ++k) {
            const SumHessianParams p{k, 0.5 + (k % 3)};
            for (int rep = 0; rep < 500; ++rep) {
                const auto v = oracle::gauss_vec(eng, n);
                const Spectrum lam(v);
                const double skv = sk(lam, p);
                const auto sigma = sigma_all(lam);
                const auto grad = sk_grad(lam, p);

                // Def 2.1(2) for every i.
                for (int i = 0; i < n; ++i) {
                    const double lhs = lam[i] * sk_truncate(lam, p, {i}, k - 1) +
                                       sk_truncate(lam, p, {i}, k);
                    CHECK(oracle::rel_gap(lhs, skv) < 1e-12);
                }

                // Def 2.1(5): sum of S_k^{ii}.
                double gsum = 0.0;
                for (double gi : grad) gsum += gi;
                const double sig_km2 = k >= 2 ? sigma[static_cast<std::size_t>(k - 2)] : 0.0;
                const double rhs5 = (n - k + 1) * sigma[static_cast<std::size_t>(k - 1)] +
                                    p.alpha * (n - k + 2) * sig_km2;
                CHECK(oracle::rel_gap(gsum, rhs5) < 1e-12);

                // Def 2.1(6): sum_i S_k(lam|i).
                double tsum = 0.0;
                for (int i = 0; i < n; ++i) tsum += sk_truncate(lam, p, {i}, k);
                const double rhs6 =
                    (n - k) * skv + p.alpha * sigma[static_cast<std::size_t>(k - 1)];
                CHECK(oracle::rel_gap(tsum, rhs6) < 1e-12);

                // Def 2.1(7): sum_i lam_i S_{k-1}(lam|i).
                double wsum = 0.0;
                for (int i = 0; i < n; ++i) wsum += lam[i] * grad[static_cast<std::size_t>(i)];
                const double rhs7 = k * skv - p.alpha * sigma[static_cast<std::size_t>(k - 1)];
                CHECK(oracle::rel_gap(wsum, rhs7) < 1e-12);
            }
        }
    }
}

TEST_CASE("cone_check frozen examples") {
    const SumHessianParams p{2, 1.0};
    SUBCASE("interior point") {
        const auto r = cone_check(Spectrum{1, 1, 1}, p);
        CHECK(r.in_gamma_k);
        CHECK(r.in_gamma_tilde_k);
        CHECK(r.margin == doctest::Approx(3.0));
    }
    SUBCASE("gamma despite a negative eigenvalue") {
        // sigma_1 = 3.5, sigma_2 = (-0.5)(2) + (-0.5)(2) + 4 = 2.
        const auto r = cone_check(Spectrum{-0.5, 2, 2}, p);
        CHECK(r.in_gamma_k);
        CHECK(r.in_gamma_tilde_k);
    }
    SUBCASE("admissible but not 2-convex") {
        // sigma_1 = 1.7, sigma_2 = -0.7, S_2 = 1.0: in tilde-Gamma_2, outside Gamma_2.
        const auto r = cone_check(Spectrum{-0.5, 2, 0.2}, p);
        CHECK(!r.in_gamma_k);
        CHECK(r.in_gamma_tilde_k);
        CHECK(r.margin == doctest::Approx(1.0));
    }
    SUBCASE("zero is on the boundary") {
        const auto r0 = cone_check(Spectrum{0, 0, 0}, p, 0.0);
        CHECK(!r0.in_gamma_k);
        CHECK(!r0.in_gamma_tilde_k);
        CHECK(r0.margin == 0.0);
    }
    SUBCASE("tolerance is validated") {
        CHECK_THROWS_AS((void)cone_check(Spectrum{1, 1}, {2, 1.0}, -1.0), std::invalid_argument);
    }
}

TEST_CASE("cone inclusions Gamma_k subset tilde subset Gamma_{k-1}") {
    std::mt19937_64 eng(13);
    for (int n = 3; n <= 5; ++n) {
        for (int k = 2; k <= n; ++k) {
            const SumHessianParams p{k, 1.0};
            for (int rep = 0; rep < 2000; ++rep) {
                const Spectrum lam(oracle::gauss_vec(eng, n));
                const auto r = cone_check(lam, p);
                if (r.in_gamma_k) CHECK(r.in_gamma_tilde_k);
                if (r.in_gamma_tilde_k && k >= 3) {
                    const auto rm1 = cone_check(lam, {k - 1, p.alpha});
                    CHECK(rm1.in_gamma_k);  // tilde-Gamma_k lies inside Gamma_{k-1}
                }
            }
        }
    }
}

TEST_CASE("sampler produces the requested regions deterministically") {
    for (int n = 2; n <= 5; ++n) {
        for (int k = 2; k <= n; ++k) {
            const SumHessianParams p{k, 1.0};
            for (std::uint64_t seed = 1; seed <= 20; ++seed) {
                const auto a = sample_tilde_cone(seed, n, p, SampleRegion::gamma_k);
                const auto b = sample_tilde_cone(seed, n, p, SampleRegion::gamma_k);
                CHECK(a.values() == b.values());
                const auto ra = cone_check(a, p);
                CHECK(ra.in_gamma_k);
                CHECK(ra.margin > 1e-6);

                const auto t = sample_tilde_cone(seed, n, p, SampleRegion::tilde_only);
                const auto rt = cone_check(t, p);
                CHECK(rt.in_gamma_tilde_k);
                CHECK(!rt.in_gamma_k);
                CHECK(rt.margin > 1e-6);
                CHECK(sigma_all(t)[static_cast<std::size_t>(k)] < 0.0);

                const auto bn = sample_tilde_cone(seed, n, p, SampleRegion::boundary_near);
                const auto rb = cone_check(bn, p);
                CHECK(rb.in_gamma_tilde_k);
                CHECK(rb.margin > 1e-6);
                CHECK(rb.margin <= 1e-2);
            }
        }
    }
}

TEST_CASE("admissibility facts hold on sampled spectra") {
    // Lemma-grade checks on a small corpus; the verify module runs the full suites.
    std::mt19937_64 eng(17);
    for (int n = 3; n <= 5; ++n) {
        const SumHessianParams p{3, 1.0};
        if (p.k > n) continue;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            const auto lam = sample_tilde_cone(seed, n, p, SampleRegion::tilde_only);
            const double skv = sk(lam, p);

            // Lemma 2.3 shape: S_k >= tau > 0 forces sigma_{k-1} > 0 (already in tilde cone).
            CHECK(sigma_all(lam)[static_cast<std::size_t>(p.k - 1)] > 0.0);

            // Lemma 2.4: S_k^{ii} at the most negative eigenvalue dominates the average.
            int argmin = 0;
            for (int i = 1; i < n; ++i) {
                if (lam[i] < lam[argmin]) argmin = i;
            }
            if (lam[argmin] < 0.0) {
                const auto grad = sk_grad(lam, p);
                double gsum = 0.0;
                for (double gi : grad) gsum += gi;
                CHECK(grad[static_cast<std::size_t>(argmin)] >=
                      gsum / (n - p.k + 2) - 1e-10 * std::max(1.0, std::abs(gsum)));
            }
            CHECK(skv > 0.0);
        }
    }
    (void)eng;
}

}  // TEST_SUITE
