#include <doctest.h>

#include <cmath>
#include <random>

#include "qkdnoise/core.hpp"

using namespace qkdnoise;

// Frozen values below come from tests/oracles/reference_values.py (mpmath, 50 digits).

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(binary_entropy(0.11) == doctest::Approx(0.499915958164528).epsilon(1e-13));
    CHECK_THROWS_AS(binary_entropy(-0.1), DomainError);
    CHECK_THROWS_AS(binary_entropy(1.5), DomainError);
}

TEST_CASE("binary entropy is symmetric about one half") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double q = u(rng);
        CHECK(std::abs(binary_entropy(q) - binary_entropy(1.0 - q)) < 1e-13);
    }
}

TEST_CASE("six-state entropy") {
    CHECK(six_state_entropy(0.0) == 0.0);
    CHECK(six_state_entropy(0.2) == doctest::Approx(1.3567796494470395).epsilon(1e-13));
    CHECK_THROWS_AS(six_state_entropy(0.7), DomainError);
    CHECK_NOTHROW(six_state_entropy(2.0 / 3.0));
}

TEST_CASE("QBER thresholds") {
    CHECK(std::abs(qber_threshold_six_state() - 0.12619308327682118) < 1e-8);
    CHECK(std::abs(qber_threshold_bb84() - 0.11002786443835955) < 1e-8);
    CHECK(std::abs(1.0 - 2.0 * binary_entropy(qber_threshold_bb84())) < 1e-7);
}

TEST_CASE("bosonic entropy") {
    CHECK(bosonic_entropy(0.0) == 0.0);
    CHECK(bosonic_entropy(1.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(bosonic_entropy(0.5) == doctest::Approx(1.3774437510817343).epsilon(1e-13));
    CHECK_THROWS_AS(bosonic_entropy(-1e-3), DomainError);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (int i = 0; i < 200; ++i) {
        double a = u(rng), b = u(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        CHECK(bosonic_entropy(a) < bosonic_entropy(b));
    }
}

TEST_CASE("thermal pmf") {
    CHECK(thermal_pmf(0, 0.0) == 1.0);
    CHECK(thermal_pmf(3, 0.0) == 0.0);
    CHECK(thermal_pmf(1, 1.0) == doctest::Approx(0.25));
    for (double mu : {0.01, 0.3, 2.0, 9.0}) {
        double s = 0.0;
        for (int n = 0; n < 2000; ++n) s += thermal_pmf(n, mu);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        for (int n = 0; n < 20; ++n)
            CHECK(thermal_pmf(n, mu) / thermal_pmf(n + 1, mu) == doctest::Approx((1.0 + mu) / mu).epsilon(1e-12));
        CHECK(thermal_tail(5, mu) == doctest::Approx(std::pow(mu / (1.0 + mu), 5)).epsilon(1e-14));
    }
}

TEST_CASE("noise collection probability") {
    CHECK(noise_collection_prob(0, 0.0, 0.3, 0.7) == 1.0);
    CHECK(noise_collection_prob(0, 1.0, 0.5, 1.0) == doctest::Approx(1.0 / 1.5).epsilon(1e-12));
    CHECK(noise_collection_prob(1, 1.0, 0.5, 1.0) == doctest::Approx(0.5 / 2.25).epsilon(1e-12));
}

TEST_CASE("noise collection sum matches the thinned closed form and normalizes") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 40; ++k) {
        const double mu = 10.0 * u(rng), T = u(rng), eta = u(rng);
        double total = 0.0;
        for (int i = 0; i < 400; ++i) total += thinned_thermal_pmf(i, mu, T, eta);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
        for (int i = 0; i < 4; ++i)
            CHECK(std::abs(noise_collection_prob(i, mu, T, eta) - thinned_thermal_pmf(i, mu, T, eta)) < 1e-10);
    }
}

TEST_CASE("truncation policy") {
    TruncationPolicy p;
    const int K = p.terms_for(0.1, 1e-12);
    CHECK(thermal_tail(K, 0.1) <= 1e-12);
    CHECK(thermal_tail(K - 1, 0.1) > 1e-12);
    CHECK(p.terms_for(0.0, 1e-12) == 1);
    TruncationPolicy tight;
    tight.max_terms = 5;
    CHECK_THROWS_AS(tight.terms_for(5.0, 1e-12), TruncationError);
    TruncationPolicy bad;
    bad.tail_epsilon = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("channel parameters") {
    const ChannelParams c(0.8, 0.25);
    CHECK(c.quadrature_noise_variance() == 1.5);
    CHECK(c.excess_noise() == doctest::Approx(0.2 * 0.5 / 0.8));
    CHECK(ChannelParams(0.0, 0.0).excess_noise() == 0.0);
    CHECK(std::isinf(ChannelParams(0.0, 0.1).excess_noise()));
    CHECK_THROWS_AS(ChannelParams(1.2, 0.0), DomainError);
    CHECK_THROWS_AS(ChannelParams(0.5, -0.1), DomainError);
    CHECK_THROWS_AS(TmsvSourceModel::finite(0.5), DomainError);
    CHECK(TmsvSourceModel::infinite().infinite_variance);
}

TEST_CASE("probability clamp") {
    CHECK(clamp_probability(-5e-13, "t", "p") == 0.0);
    CHECK(clamp_probability(1.0 + 5e-13, "t", "p") == 1.0);
    CHECK(clamp_probability(0.3, "t", "p") == 0.3);
    CHECK_THROWS_AS(clamp_probability(-1e-9, "t", "p"), NonPhysicalStateError);
}

TEST_CASE("combinatorics switch to the log domain consistently") {
    Combinatorics c(10);
    for (int n = 0; n <= 60; ++n)
        for (int k = 0; k <= n; k += 7) {
            const double exact = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
            CHECK(c.binomial(n, k) == doctest::Approx(exact).epsilon(1e-12));
        }
    CHECK(c.factorial(10) == 3628800.0);
    CHECK(c.binomial(5, 7) == 0.0);
}

TEST_CASE("bisection helpers") {
    const double r = bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0, 1e-13);
    CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(bisect([](double x) { return x + 1.0; }, 0.0, 1.0, 1e-9), DomainError);
    const double b = bisect_predicate([](double x) { return x < 0.3; }, 0.0, 1.0, 0.0, 1e-10);
    CHECK(b == doctest::Approx(0.3).epsilon(1e-9));
}
