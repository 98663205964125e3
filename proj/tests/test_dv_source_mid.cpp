#include <doctest.h>

#include <cmath>
#include <random>

#include "qkdnoise/dv_source_mid.hpp"
#include "qkdnoise/oracle_fock.hpp"

using namespace qkdnoise;
using namespace qkdnoise::dv;

// Reference numbers: tests/oracles/reference_values.py (photon-configuration enumeration).

TEST_CASE("ideal source-mid link") {
    for (auto kind : {DetectorKind::kPnr, DetectorKind::kOnOff}) {
        const auto a = acceptance_and_qber(DvSourceMidConfig::symmetric(1.0, 1.0, 1.0, 0.0, 1.0, kind));
        CHECK(a.p_exp == doctest::Approx(1.0).epsilon(1e-14));
        REQUIRE(a.qber);
        CHECK(*a.qber == doctest::Approx(0.0));
    }
}

TEST_CASE("PNR reference point") {
    const auto a = acceptance_and_qber_pnr(DvSourceMidConfig::symmetric(1.0, 1.0, 0.5, 0.1, 1.0, DetectorKind::kPnr));
    CHECK(std::abs(a.p_exp - 0.24671746551298502) < 1e-12);
    CHECK(std::abs(*a.qber - 0.083175803402646507) < 1e-12);
}

TEST_CASE("on/off reference point") {
    const auto a =
        acceptance_and_qber_onoff(DvSourceMidConfig::symmetric(1.0, 1.0, 0.5, 0.1, 1.0, DetectorKind::kOnOff));
    CHECK(std::abs(a.p_exp - 0.29864614023992061) < 1e-12);
    CHECK(std::abs(*a.qber - 0.12035777620908731) < 1e-12);
    const auto p = acceptance_and_qber_pnr(DvSourceMidConfig::symmetric(1.0, 1.0, 0.5, 0.1, 1.0, DetectorKind::kPnr));
    CHECK(a.p_exp >= p.p_exp);
    CHECK(*a.qber >= *p.qber);
}

TEST_CASE("imperfect source and detectors") {
    const auto p = acceptance_and_qber(DvSourceMidConfig::symmetric(0.7, 0.8, 0.6, 0.05, 0.9, DetectorKind::kPnr));
    CHECK(std::abs(p.p_exp - 0.13356334171597233) < 1e-12);
    CHECK(std::abs(*p.qber - 0.044637618699100212) < 1e-12);
    const auto o = acceptance_and_qber(DvSourceMidConfig::symmetric(0.7, 0.8, 0.6, 0.05, 0.9, DetectorKind::kOnOff));
    CHECK(std::abs(o.p_exp - 0.14332370186446777) < 1e-12);
    CHECK(std::abs(*o.qber - 0.060233680289771225) < 1e-12);
}

TEST_CASE("noise-only acceptance has QBER one half") {
    for (auto kind : {DetectorKind::kPnr, DetectorKind::kOnOff}) {
        auto cfg = DvSourceMidConfig::symmetric(0.0, 1.0, 0.4, 0.2, 0.9, kind);
        const auto a = acceptance_and_qber(cfg);
        CHECK(a.p_exp > 0.0);
        CHECK(*a.qber == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("no events at all leaves the QBER undefined") {
    const auto a = evaluate(DvSourceMidConfig::symmetric(0.0, 1.0, 0.4, 0.0, 0.9, DetectorKind::kPnr),
                            DvProtocol::kSixState);
    CHECK(a.p_exp == 0.0);
    CHECK_FALSE(a.qber.has_value());
    CHECK(a.key_rate == 0.0);
}

TEST_CASE("mu = 0 gives zero QBER") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int i = 0; i < 50; ++i)
        for (auto kind : {DetectorKind::kPnr, DetectorKind::kOnOff}) {
            const auto a = acceptance_and_qber(DvSourceMidConfig::symmetric(u(rng), u(rng), u(rng), 0.0, u(rng), kind));
            CHECK(*a.qber == doctest::Approx(0.0));
        }
}

TEST_CASE("key rate formulas") {
    CHECK(key_rate_bb84(1.0, 0.0) == doctest::Approx(1.0));
    CHECK(key_rate_bb84(0.7, 0.5) == 0.0);
    CHECK(key_rate_bb84(0.5, 0.05) == doctest::Approx(0.21360304288404387).epsilon(1e-12));
    CHECK(key_rate_six_state(1.0, 0.0) == doctest::Approx(1.0));
    CHECK(key_rate_six_state(0.5, 0.05) == doctest::Approx(0.2484081341597081).epsilon(1e-12));
    CHECK(key_rate_six_state(0.9, qber_threshold_six_state()) < 1e-8);
    CHECK(key_rate_six_state(0.9, std::nullopt) == 0.0);
}

TEST_CASE("key rate never exceeds acceptance") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const auto kind = i % 2 ? DetectorKind::kPnr : DetectorKind::kOnOff;
        const auto cfg = DvSourceMidConfig::symmetric(u(rng), u(rng), u(rng), 0.3 * u(rng), u(rng), kind);
        for (auto p : {DvProtocol::kBb84, DvProtocol::kSixState}) {
            const auto r = evaluate(cfg, p);
            CHECK(r.key_rate >= 0.0);
            CHECK(r.key_rate <= r.p_exp + 1e-15);
        }
    }
}

TEST_CASE("QBER is monotone in noise and transmittance") {
    for (auto kind : {DetectorKind::kPnr, DetectorKind::kOnOff}) {
        double prev = -1.0;
        for (double mu = 0.0; mu <= 0.5; mu += 0.025) {
            const double q = *acceptance_and_qber(DvSourceMidConfig::symmetric(1.0, 0.9, 0.5, mu, 0.9, kind)).qber;
            CHECK(q >= prev - 1e-15);
            prev = q;
        }
        prev = 1.0;
        for (double T = 0.05; T <= 1.0; T += 0.05) {
            const double q = *acceptance_and_qber(DvSourceMidConfig::symmetric(1.0, 0.9, T, 0.05, 0.9, kind)).qber;
            CHECK(q <= prev + 1e-15);
            prev = q;
        }
    }
}

TEST_CASE("on/off acceptance contains PNR acceptance") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        DvSourceMidConfig c;
        c.source = {u(rng), u(rng)};
        c.channel_a = ChannelParams(u(rng), 2.0 * u(rng));
        c.channel_b = ChannelParams(u(rng), 2.0 * u(rng));
        c.detector_a = {DetectorKind::kPnr, u(rng)};
        c.detector_b = {DetectorKind::kPnr, u(rng)};
        const double pnr = acceptance_and_qber(c).p_exp;
        c.detector_a.kind = c.detector_b.kind = DetectorKind::kOnOff;
        CHECK(acceptance_and_qber(c).p_exp >= pnr - 1e-15);
    }
}

TEST_CASE("mixed detector kinds are rejected") {
    auto c = DvSourceMidConfig::symmetric(1.0, 1.0, 0.5, 0.1, 1.0, DetectorKind::kPnr);
    c.detector_b.kind = DetectorKind::kOnOff;
    CHECK_THROWS_AS(c.validate(), DomainError);
    CHECK_THROWS_AS(acceptance_and_qber(c), DomainError);
}

TEST_CASE("Monte Carlo agrees with the analytic source-mid formulas") {
    const DvSourceMidConfig cfgs[] = {
        DvSourceMidConfig::symmetric(1.0, 1.0, 0.5, 0.1, 1.0, DetectorKind::kPnr),
        DvSourceMidConfig::symmetric(1.0, 1.0, 0.5, 0.1, 1.0, DetectorKind::kOnOff),
        DvSourceMidConfig::symmetric(0.6, 0.8, 0.3, 0.9, 0.7, DetectorKind::kOnOff),
    };
    for (const auto& c : cfgs) {
        const auto m = oracle::mc_dv_source_mid(c, 400000, 1234);
        const auto a = acceptance_and_qber(c);
        CHECK(std::abs(m.p_exp.value - a.p_exp) < 4.0 * m.p_exp.std_error);
        CHECK(std::abs(m.qber->value - *a.qber) < 4.0 * m.qber->std_error);
    }
}

TEST_CASE("asymptote operations") {
    const double qth = qber_threshold_six_state();
    CHECK(mu_max_asymptote_source(0.01, qth) == doctest::Approx(0.01 * 0.066967207903164481).epsilon(1e-7));
    CHECK(mu_max_asymptote_source(0.01, 0.0) == 0.0);
    CHECK(mu_max_asymptote_source(0.01, 0.11) ==
          doctest::Approx(0.01 * (0.22 + std::sqrt(0.78) - 1.0) / 1.78).epsilon(1e-14));
    CHECK_THROWS_AS(mu_max_asymptote_source(0.01, 0.6), DomainError);
}
