// DV entanglement distribution with the pair source in the central station.
#pragma once

#include <optional>

#include "qkdnoise/core.hpp"

namespace qkdnoise::dv {

enum class DvProtocol { kBb84, kSixState };

struct DvSourceMidConfig {
    PairSourceModel source;
    ChannelParams channel_a;
    ChannelParams channel_b;
    DetectorModel detector_a;
    DetectorModel detector_b;
    TruncationPolicy truncation;

    // T_A = T_B, mu_A = mu_B, one detector model for both sides
    static DvSourceMidConfig symmetric(double q, double xi, double T, double mu, double eta,
                                       DetectorKind kind);
    void validate() const;
};

// Accepted-event probability and QBER. qber is empty when p_exp == 0.
struct Acceptance {
    double p_exp = 0.0;
    std::optional<double> qber;
};

struct DvResult {
    double p_exp = 0.0;
    std::optional<double> qber;
    double key_rate = 0.0;
};

Acceptance acceptance_and_qber_pnr(const DvSourceMidConfig& cfg);
Acceptance acceptance_and_qber_onoff(const DvSourceMidConfig& cfg);
Acceptance acceptance_and_qber(const DvSourceMidConfig& cfg);

double key_rate_bb84(double p_exp, std::optional<double> Q);
double key_rate_six_state(double p_exp, std::optional<double> Q);
double key_rate(DvProtocol protocol, double p_exp, std::optional<double> Q);

DvResult evaluate(const DvSourceMidConfig& cfg, DvProtocol protocol);

// Small-T approximation of the tolerable noise.
double mu_max_asymptote_source(double T, double q_th);

}  // namespace qkdnoise::dv
