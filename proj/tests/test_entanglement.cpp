#include <doctest.h>

#include <cmath>
#include <random>

#include "qkdnoise/entanglement.hpp"

using namespace qkdnoise;
using namespace qkdnoise::ent;

namespace {
ChannelParams chN(double T, double N) { return ChannelParams(T, (N - 1.0) / 2.0); }
}  // namespace

TEST_CASE("source-scheme LN") {
    CHECK(ln_source_scheme(TmsvSourceModel::finite(1.0), 0.7, 1.3).log_negativity == 0.0);
    // reference from tests/oracles/reference_values.py
    CHECK(std::abs(ln_source_scheme(TmsvSourceModel::finite(2.0), 1.0, 1.0).log_negativity - 1.8999686269529917) < 1e-12);
    for (double T : {0.2, 0.5, 0.9})
        CHECK(ln_source_scheme(TmsvSourceModel::infinite(), T, 1.0).log_negativity ==
              doctest::Approx(-std::log2(1.0 - T)));
}

TEST_CASE("MDI-scheme LN") {
    for (double V : {1.0, 3.0, 80.0}) CHECK(ln_mdi_scheme(TmsvSourceModel::finite(V), 0.5, 1.0).log_negativity == 0.0);
    CHECK(ln_mdi_scheme(TmsvSourceModel::finite(1.0), 0.9, 1.2).log_negativity == 0.0);
    for (double T : {0.6, 0.9})
        for (double N : {1.0, 1.4}) {
            const double want = std::max(0.0, std::log2(T) - std::log2(N * (1.0 - T)));
            CHECK(ln_mdi_scheme(TmsvSourceModel::infinite(), T, N).log_negativity == doctest::Approx(want));
        }
}

TEST_CASE("closed-form LN equals the partial-transpose route") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double V = 1.0 + 100.0 * u(rng), T = 0.05 + 0.94 * u(rng), N = 1.0 + 4.0 * u(rng);
        const auto src = TmsvSourceModel::finite(V);
        const auto s = cv::apply_thermal_channels(cv::tmsv_state(V), chN(T, N), chN(T, N));
        worst = std::max(worst, std::abs(ln_source_scheme(src, T, N).log_negativity - ln_direct(s).log_negativity));
        const auto m = cv::mdi_conditional_state(V, chN(T, N), chN(T, N));
        worst = std::max(worst, std::abs(ln_mdi_scheme(src, T, N).log_negativity - ln_direct(m).log_negativity));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("entanglement-breaking noise") {
    CHECK(ln_breaking_noise(cv::CvScheme::kMdi, TmsvSourceModel::finite(4.0), 0.5) == doctest::Approx(1.0));
    CHECK(ln_breaking_noise(cv::CvScheme::kSourceMid, TmsvSourceModel::infinite(), 0.5) == doctest::Approx(2.0));
    CHECK(ln_breaking_noise(cv::CvScheme::kSourceMid, TmsvSourceModel::finite(1.0), 0.3) == doctest::Approx(1.0));
    CHECK(std::isinf(ln_breaking_noise(cv::CvScheme::kMdi, TmsvSourceModel::finite(4.0), 1.0)));
    for (double T : {0.3, 0.6, 0.85})
        for (double V : {1.5, 7.0}) {
            // LN reaches zero exactly at the reported noise
            const double n = ln_breaking_noise(cv::CvScheme::kSourceMid, TmsvSourceModel::finite(V), T);
            CHECK(ln_source_scheme(TmsvSourceModel::finite(V), T, n * (1.0 - 1e-9) + 1e-12).nu_minus < 1.0);
            CHECK(ln_source_scheme(TmsvSourceModel::finite(V), T, n * (1.0 + 1e-9)).nu_minus > 1.0);
        }
}

TEST_CASE("MDI breaking noise does not depend on the source variance") {
    for (double T : {0.55, 0.7, 0.9}) {
        double ref = -1.0;
        for (double V : {2.0, 10.0, 100.0}) {
            const auto src = TmsvSourceModel::finite(V);
            const double n = bisect([&](double N) { return ln_mdi_scheme(src, T, N).nu_minus - 1.0; }, 1.0, 50.0, 1e-14);
            CHECK(std::abs(n - T / (1.0 - T)) < 1e-12 * (1.0 + n));
            CHECK(ln_breaking_noise(cv::CvScheme::kMdi, src, T) == T / (1.0 - T));
            if (ref >= 0.0) CHECK(std::abs(n - ref) < 1e-12 * (1.0 + n));
            ref = n;
        }
    }
}

TEST_CASE("a secure CV key implies positive LN") {
    for (auto scheme : {cv::CvScheme::kSourceMid, cv::CvScheme::kMdi})
        for (double V : {2.0, 20.0, 500.0})
            for (double T = 0.3; T < 1.0; T += 0.05)
                for (double N = 1.0; N < 4.0; N += 0.25) {
                    const auto src = TmsvSourceModel::finite(V);
                    const double K = cv::key_rate_cv_general(src, chN(T, N), chN(T, N), scheme).key_rate;
                    const double ln = scheme == cv::CvScheme::kMdi ? ln_mdi_scheme(src, T, N).log_negativity
                                                                   : ln_source_scheme(src, T, N).log_negativity;
                    if (K > 1e-12) CHECK(ln > 0.0);
                }
}
