#include "qkdnoise/dv_source_mid.hpp"

#include <cmath>

namespace qkdnoise::dv {

namespace {

struct SideStats {
    double pi0;
    double pi1;
    double signal;  // xi T eta: probability the pair photon registers on this side
};

SideStats side_stats(const DvSourceMidConfig& cfg, const ChannelParams& ch, const DetectorModel& det) {
    const double T = ch.transmittance;
    const double mu = ch.mean_noise_photons;
    return {thinned_thermal_pmf(0, mu, T, det.efficiency), thinned_thermal_pmf(1, mu, T, det.efficiency),
            cfg.source.collection_eff * T * det.efficiency};
}

std::optional<double> qber_from(double p, double correct) {
    if (p <= 0.0) return std::nullopt;
    // every accepted event other than a clean signal detection errs with probability 1/2
    const double Q = (p - correct) / (2.0 * p);
    return std::min(0.5, std::max(0.0, Q));
}

}  // namespace

DvSourceMidConfig DvSourceMidConfig::symmetric(double q, double xi, double T, double mu, double eta,
                                               DetectorKind kind) {
    DvSourceMidConfig c;
    c.source = {q, xi};
    c.channel_a = ChannelParams(T, mu);
    c.channel_b = c.channel_a;
    c.detector_a = {kind, eta};
    c.detector_b = c.detector_a;
    c.validate();
    return c;
}

void DvSourceMidConfig::validate() const {
    source.validate();
    channel_a.validate();
    channel_b.validate();
    detector_a.validate();
    detector_b.validate();
    truncation.validate();
    if (detector_a.kind != detector_b.kind)
        throw DomainError("dv_source_mid", "mixed PNR/on-off detector configurations are not supported");
}

Acceptance acceptance_and_qber_pnr(const DvSourceMidConfig& cfg) {
    cfg.validate();
    if (cfg.detector_a.kind != DetectorKind::kPnr)
        throw DomainError("dv_source_mid", "acceptance_and_qber_pnr called with on/off detectors");
    const double q = cfg.source.pair_prob;
    const SideStats a = side_stats(cfg, cfg.channel_a, cfg.detector_a);
    const SideStats b = side_stats(cfg, cfg.channel_b, cfg.detector_b);
    // exactly one photon over the two detectors of a side
    const double r_a = a.signal * a.pi0 * a.pi0 + 2.0 * (1.0 - a.signal) * a.pi0 * a.pi1;
    const double r_b = b.signal * b.pi0 * b.pi0 + 2.0 * (1.0 - b.signal) * b.pi0 * b.pi1;
    const double p_noise = 4.0 * a.pi0 * a.pi1 * b.pi0 * b.pi1;
    const double p = clamp_probability(q * r_a * r_b + (1.0 - q) * p_noise, "dv_source_mid", "p_exp");
    const double correct = q * a.signal * a.pi0 * a.pi0 * b.signal * b.pi0 * b.pi0;
    return {p, qber_from(p, correct)};
}

Acceptance acceptance_and_qber_onoff(const DvSourceMidConfig& cfg) {
    cfg.validate();
    if (cfg.detector_a.kind != DetectorKind::kOnOff)
        throw DomainError("dv_source_mid", "acceptance_and_qber_onoff called with PNR detectors");
    const double q = cfg.source.pair_prob;
    const SideStats a = side_stats(cfg, cfg.channel_a, cfg.detector_a);
    const SideStats b = side_stats(cfg, cfg.channel_b, cfg.detector_b);
    // at least one click on each side
    const double s_a = 1.0 - (1.0 - a.signal) * a.pi0 * a.pi0;
    const double s_b = 1.0 - (1.0 - b.signal) * b.pi0 * b.pi0;
    const double p_noise = (1.0 - a.pi0 * a.pi0) * (1.0 - b.pi0 * b.pi0);
    const double p = clamp_probability(q * s_a * s_b + (1.0 - q) * p_noise, "dv_source_mid", "p_exp");
    // correct bit: signal registered and the opposite detector stayed dark
    const double correct = q * a.signal * a.pi0 * b.signal * b.pi0;
    return {p, qber_from(p, correct)};
}

Acceptance acceptance_and_qber(const DvSourceMidConfig& cfg) {
    return cfg.detector_a.kind == DetectorKind::kPnr ? acceptance_and_qber_pnr(cfg)
                                                     : acceptance_and_qber_onoff(cfg);
}

double key_rate_bb84(double p_exp, std::optional<double> Q) {
    if (!Q || p_exp <= 0.0) return 0.0;
    return p_exp * std::max(0.0, 1.0 - 2.0 * binary_entropy(*Q));
}

double key_rate_six_state(double p_exp, std::optional<double> Q) {
    if (!Q || p_exp <= 0.0) return 0.0;
    return p_exp * std::max(0.0, 1.0 - six_state_entropy(*Q));
}

double key_rate(DvProtocol protocol, double p_exp, std::optional<double> Q) {
    return protocol == DvProtocol::kBb84 ? key_rate_bb84(p_exp, Q) : key_rate_six_state(p_exp, Q);
}

DvResult evaluate(const DvSourceMidConfig& cfg, DvProtocol protocol) {
    const Acceptance acc = acceptance_and_qber(cfg);
    return {acc.p_exp, acc.qber, key_rate(protocol, acc.p_exp, acc.qber)};
}

double mu_max_asymptote_source(double T, double q_th) {
    const double disc = 1.0 - 2.0 * q_th;
    if (disc < 0.0) throw DomainError("dv_source_mid", "asymptote needs Q_th <= 1/2");
    return T * (2.0 * q_th + std::sqrt(disc) - 1.0) / (2.0 * (1.0 - q_th));
}

}  // namespace qkdnoise::dv
