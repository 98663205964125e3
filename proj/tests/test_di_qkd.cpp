#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qkdnoise/di_qkd.hpp"
#include "qkdnoise/oracle_fock.hpp"
#include "qkdnoise/scan.hpp"

using namespace qkdnoise;
using namespace qkdnoise::di;

namespace {
constexpr double kPi = std::numbers::pi;
const double kTsirelson = 2.0 * std::sqrt(2.0);
}  // namespace

TEST_CASE("noiseless singlet statistics") {
    const auto c = DiConfig::symmetric(1.0, 0.0);
    for (double th : {0.0, 0.4, -1.1}) {
        CHECK(di_event_prob(1, 0, 1, 0, th, th, c) == doctest::Approx(0.0));
        CHECK(di_event_prob(1, 0, 0, 1, th, th, c) == doctest::Approx(0.5));
        CHECK(di_correlator(th, th, c) == doctest::Approx(-1.0).epsilon(1e-13));
    }
    CHECK(di_correlator(0.0, kPi / 4.0, c) == doctest::Approx(0.0));
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int i = 0; i < 10; ++i) {
        const double a = u(rng), b = u(rng);
        CHECK(di_correlator(a, b, c) == doctest::Approx(-std::cos(2.0 * (a - b))).epsilon(1e-12));
    }
}

TEST_CASE("correlator follows the Fock oracle under loss and noise") {
    DiConfig cfgs[3];
    cfgs[0] = DiConfig::symmetric(0.9, 0.004);
    cfgs[1].channel_a = ChannelParams(0.8, 0.003);
    cfgs[1].channel_b = ChannelParams(0.95, 0.0);
    cfgs[2] = DiConfig::symmetric(0.6, 0.05);
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 2; ++i) {
            const double a = u(rng), b = u(rng);
            const double f = oracle::fock_di_correlator(cfgs[k], a, b);
            // the nested sums are only affordable at small noise
            if (k < 2) CHECK(std::abs(di_correlator(a, b, cfgs[k], DiEngine::kAppendixSums) - f) < 1e-6);
            CHECK(std::abs(di_correlator(a, b, cfgs[k], DiEngine::kChannelModel) - f) < 1e-6);
        }
}

TEST_CASE("event probabilities normalize") {
    const auto c = DiConfig::symmetric(0.9, 0.01);
    double total = 0.0;
    const int n = 6;
    for (int a = 0; a <= n; ++a)
        for (int b = 0; b <= n; ++b)
            for (int x = 0; x <= n; ++x)
                for (int y = 0; y <= n; ++y) total += di_event_prob_channel(a, b, x, y, 0.3, -0.8, c);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    for (int e = 0; e < 4; ++e) {
        const int k[4][4] = {{1, 0, 1, 0}, {0, 1, 1, 0}, {0, 0, 0, 0}, {2, 0, 1, 1}};
        CHECK(std::abs(di_event_prob(k[e][0], k[e][1], k[e][2], k[e][3], 0.3, -0.8, c) -
                       di_event_prob_channel(k[e][0], k[e][1], k[e][2], k[e][3], 0.3, -0.8, c)) < 1e-10);
    }
}

TEST_CASE("noise shrinks the correlations") {
    double prev = 2.0;
    for (double mu : {0.0, 0.01, 0.05, 0.2, 1.0}) {
        const double e = std::abs(di_correlator(0.0, 0.0, DiConfig::symmetric(0.9, mu)));
        CHECK(e < prev);
        prev = e;
    }
}

TEST_CASE("ideal CHSH value and key") {
    const auto r = di_chsh_and_key(DiConfig::symmetric(1.0, 0.0));
    CHECK(r.S == doctest::Approx(kTsirelson).epsilon(1e-12));
    CHECK(r.p_exp == doctest::Approx(1.0).epsilon(1e-13));
    REQUIRE(r.qber);
    CHECK(*r.qber == doctest::Approx(0.0));
    CHECK(r.key_rate == doctest::Approx(r.p_exp).epsilon(1e-6));
}

TEST_CASE("no violation means no key, and S respects the Tsirelson bound") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int insecure = 0;
    for (int i = 0; i < 30; ++i) {
        DiConfig c;
        c.channel_a = ChannelParams(0.5 + 0.5 * u(rng), 0.1 * u(rng));
        c.channel_b = ChannelParams(0.5 + 0.5 * u(rng), 0.1 * u(rng));
        const auto r = di_chsh_and_key(c, DiEngine::kChannelModel);
        CHECK(r.S <= kTsirelson + 1e-12);
        CHECK(r.key_rate >= 0.0);
        CHECK(r.key_rate <= r.p_exp);
        if (r.S <= 2.0) {
            CHECK(r.key_rate == 0.0);
            ++insecure;
        }
    }
    CHECK(insecure > 0);
}

TEST_CASE("joint rotation of the analyzers leaves correlators unchanged") {
    const auto c = DiConfig::symmetric(0.85, 0.02);
    for (double phi : {0.2, 1.3}) {
        CHECK(std::abs(di_correlator(0.1 + phi, -0.5 + phi, c) - di_correlator(0.1, -0.5, c)) < 1e-10);
    }
}

TEST_CASE("serial and parallel click sums are identical") {
    const auto c = DiConfig::symmetric(0.9, 0.003);
    for (auto e : {DiEngine::kAppendixSums, DiEngine::kChannelModel}) {
        const auto s = di_click_sums(0.2, 1.0, c, e, Exec::kSerial);
        const auto p = di_click_sums(0.2, 1.0, c, e, Exec::kParallel);
        CHECK(s.same == p.same);
        CHECK(s.opposite == p.opposite);
    }
}

TEST_CASE("engines agree on the full CHSH evaluation") {
    const auto c = DiConfig::symmetric(0.95, 0.002);
    const auto a = di_chsh_and_key(c, DiEngine::kAppendixSums);
    const auto b = di_chsh_and_key(c, DiEngine::kChannelModel);
    CHECK(std::abs(a.S - b.S) < 1e-10);
    CHECK(std::abs(a.key_rate - b.key_rate) < 1e-10);
}

TEST_CASE("angle optimization does not lose key") {
    const auto c = DiConfig::symmetric(0.95, 0.002);
    auto opt = c;
    opt.angles = optimize_angles(c);
    CHECK(di_chsh_and_key(opt, DiEngine::kChannelModel).key_rate >=
          di_chsh_and_key(c, DiEngine::kChannelModel).key_rate - 1e-12);
}

TEST_CASE("minimal transmittance without noise") {
    scan::CurveSpec s;
    s.protocol = scan::Protocol::kDi;
    const auto p = scan::t_min_at(s, 0.0);
    REQUIRE(p.status == scan::Status::kConverged);
    CHECK(std::abs(p.y - 0.84) < 0.01);
}

TEST_CASE("invalid configurations") {
    DiConfig c = DiConfig::symmetric(0.9, 0.0);
    c.angles.theta1_a = std::nan("");
    CHECK_THROWS_AS(c.validate(), DomainError);
}
