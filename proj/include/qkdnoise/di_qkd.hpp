// Device-independent DV QKD on the source-in-the-middle setup.
#pragma once

#include <numbers>

#include "qkdnoise/core.hpp"

namespace qkdnoise::di {

// theta0_b is the key-generation setting and is tied to theta1_a.
// Defaults reach 2 sqrt 2 for the combination E11 + E12 + E21 - E22 with
// the singlet correlator -cos 2(theta_A - theta_B).
struct DiAngles {
    double theta1_a = 0.0;
    double theta2_a = -std::numbers::pi / 4.0;
    double theta1_b = 3.0 * std::numbers::pi / 8.0;
    double theta2_b = -3.0 * std::numbers::pi / 8.0;
    double theta0_b = 0.0;

    void validate() const;
};

struct DiConfig {
    ChannelParams channel_a;  // mu_A enters as mu_1
    ChannelParams channel_b;  // mu_B enters as mu_2
    DiAngles angles;
    TruncationPolicy truncation;

    static DiConfig symmetric(double T, double mu);
    void validate() const;
};

struct ChshResult {
    double S = 0.0;
    double p_exp = 0.0;
    std::optional<double> qber;
    double key_rate = 0.0;
};

enum class DiEngine {
    kAppendixSums,  // nested alternating sums over the four noise reservoirs; slow beyond mu ~ 0.01
    kChannelModel,  // per-side single-photon channel distributions
};

// Nested-sum event probability; throws CancellationError when the absolute
// term mass exceeds 1e6 times the result and the result is not negligible.
double di_event_prob(int n1, int n2, int n3, int n4, double theta_a, double theta_b, const DiConfig& cfg);
double di_event_prob_channel(int n1, int n2, int n3, int n4, double theta_a, double theta_b,
                             const DiConfig& cfg);

// Largest photon number per side kept in the x, y >= 1 click sums.
int click_sum_cap(const DiConfig& cfg);

struct ClickSums {
    double same = 0.0;      // P(x,0,y,0) + P(0,x,0,y)
    double opposite = 0.0;  // P(x,0,0,y) + P(0,x,y,0)
};
ClickSums di_click_sums(double theta_a, double theta_b, const DiConfig& cfg, DiEngine engine,
                        Exec exec = Exec::kParallel);

double di_correlator(double theta_a, double theta_b, const DiConfig& cfg,
                     DiEngine engine = DiEngine::kChannelModel, Exec exec = Exec::kParallel);
ChshResult di_chsh_and_key(const DiConfig& cfg, DiEngine engine = DiEngine::kChannelModel);

// Coordinate descent over (theta1_a, theta2_a, theta1_b, theta2_b) maximizing
// K, or S while K is zero. theta0_b follows theta1_a.
DiAngles optimize_angles(const DiConfig& cfg, DiEngine engine = DiEngine::kChannelModel,
                         double tol = 1e-4);

}  // namespace qkdnoise::di
