// Station-model evaluation of the central coincidences.
//
// The common central efficiency eta_C commutes with the passive station
// optics, so it is moved in front of the beam splitter. Each of the four
// station input modes (party x polarization, in the parties' signal basis)
// then carries an independent diagonal photon distribution
//     P(x) = th(x, m) + w * d/dm th(x, m),   m = (1-T) mu eta_C,
// where w = xi eta_C T if the party's signal photon occupies the mode and
// 0 otherwise. The same expansion holds at the operator level, which is
// what the on/off branch uses through Gaussian vacuum probabilities.
#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "qkdnoise/dv_mdi.hpp"

namespace qkdnoise::mdi {

namespace {

constexpr const char* kModule = "dv_mdi";

double th(int x, double m) {
    if (m == 0.0) return x == 0 ? 1.0 : 0.0;
    return std::pow(m, x) / std::pow(1.0 + m, x + 1);
}

double dth(int x, double m) {
    if (x == 0) return -1.0 / ((1.0 + m) * (1.0 + m));
    if (m == 0.0) return x == 1 ? 1.0 : 0.0;
    return std::pow(m, x - 1) * (x - m) / std::pow(1.0 + m, x + 2);
}

// rows D1H, D1V, D2H, D2V; columns A e0, A e1, B e0, B e1
using Station = Eigen::Matrix4d;

Station station_matrix(Basis basis) {
    const double r = 1.0 / std::sqrt(2.0);
    // <p|e_k> for p in {H, V}
    Eigen::Matrix2d pol;
    if (basis == Basis::kRectilinear)
        pol << 1.0, 0.0, 0.0, 1.0;
    else
        pol << r, r, r, -r;
    const double bs[2][2] = {{r, r}, {r, -r}};  // [output][party]
    Station M = Station::Zero();
    for (int o = 0; o < 2; ++o)
        for (int p = 0; p < 2; ++p)
            for (int party = 0; party < 2; ++party)
                for (int k = 0; k < 2; ++k) M(2 * o + p, 2 * party + k) = bs[o][party] * pol(p, k);
    return M;
}

struct ModeInputs {
    std::array<double, 4> m{};  // thermal mean at the station input
    std::array<double, 4> w{};  // signal weight
};

ModeInputs mode_inputs(const DvMdiConfig& cfg, int sent_a, int sent_b) {
    const double etaC = cfg.central.efficiency;
    const double ma = (1.0 - cfg.channel_a.transmittance) * cfg.channel_a.mean_noise_photons * etaC;
    const double mb = (1.0 - cfg.channel_b.transmittance) * cfg.channel_b.mean_noise_photons * etaC;
    ModeInputs in;
    in.m = {ma, ma, mb, mb};
    in.w[sent_a] = cfg.source_a.collection_eff * etaC * cfg.channel_a.transmittance;
    in.w[2 + sent_b] = cfg.source_b.collection_eff * etaC * cfg.channel_b.transmittance;
    return in;
}

// Exactly one photon in detectors d1 and d2, none in the other two.
double pnr_event(const Station& M, const ModeInputs& in, int d1, int d2) {
    double total = 0.0;
    for (int a = 0; a < 4; ++a) {
        for (int b = a; b < 4; ++b) {
            std::array<int, 4> x{};
            ++x[a];
            ++x[b];
            double weight = 1.0;
            for (int k = 0; k < 4; ++k) weight *= th(x[k], in.m[k]) + in.w[k] * dth(x[k], in.m[k]);
            if (weight == 0.0) continue;
            // permanent of the 2x2 transfer block, input photons {a, b}
            const double perm = M(d1, a) * M(d2, b) + M(d1, b) * M(d2, a);
            const double norm = (a == b) ? 2.0 : 1.0;  // x_a! for a doubly occupied input
            total += weight * perm * perm / norm;
        }
    }
    return total;
}

// Vacuum probability on a detector subset for the derivative-expanded input state.
double vacuum_prob(const Station& M, const ModeInputs& in, const std::vector<int>& dets) {
    const int n = static_cast<int>(dets.size());
    int sa = -1, sb = -1;
    for (int k = 0; k < 4; ++k) {
        if (in.w[k] == 0.0) continue;
        (k < 2 ? sa : sb) = k;
    }
    auto det_at = [&](double da, double db) {
        Eigen::MatrixXd N = Eigen::MatrixXd::Identity(n, n);
        for (int k = 0; k < 4; ++k) {
            double mk = in.m[k];
            if (k == sa) mk += da;
            if (k == sb) mk += db;
            if (mk == 0.0) continue;
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) N(r, c) += mk * M(dets[r], k) * M(dets[c], k);
        }
        return N.determinant();
    };
    // the determinant is affine in each single-mode mean
    const double D = det_at(0.0, 0.0);
    const double Da = sa >= 0 ? det_at(1.0, 0.0) - D : 0.0;
    const double Db = sb >= 0 ? det_at(0.0, 1.0) - D : 0.0;
    const double Dab = (sa >= 0 && sb >= 0) ? det_at(1.0, 1.0) - D - Da - Db : 0.0;
    const double wa = sa >= 0 ? in.w[sa] : 0.0;
    const double wb = sb >= 0 ? in.w[sb] : 0.0;
    const double f = 1.0 / D;
    const double fa = -Da / (D * D);
    const double fb = -Db / (D * D);
    const double fab = 2.0 * Da * Db / (D * D * D) - Dab / (D * D);
    return f + wa * fa + wb * fb + wa * wb * fab;
}

double onoff_event(const Station& M, const ModeInputs& in, int d1, int d2) {
    std::vector<int> dark;
    for (int d = 0; d < 4; ++d)
        if (d != d1 && d != d2) dark.push_back(d);
    double total = 0.0;
    for (int mask = 0; mask < 4; ++mask) {
        std::vector<int> set = dark;
        if (mask & 1) set.push_back(d1);
        if (mask & 2) set.push_back(d2);
        const double sign = (__builtin_popcount(mask) & 1) ? -1.0 : 1.0;
        total += sign * vacuum_prob(M, in, set);
    }
    return total;
}

}  // namespace

CoincidenceTable station_coincidence_table(const DvMdiConfig& cfg, Basis basis) {
    cfg.validate();
    const Station M = station_matrix(basis);
    const bool onoff = cfg.central.kind == DetectorKind::kOnOff;
    CoincidenceTable t{};
    for (int Y = 0; Y < 2; ++Y) {
        for (int Z = 0; Z < 2; ++Z) {
            // the photon sent to the station is orthogonal to the local outcome
            const ModeInputs in = mode_inputs(cfg, 1 - Y, 1 - Z);
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    const int dh = 2 * i, dv = 2 * j + 1;
                    const double p = onoff ? onoff_event(M, in, dh, dv) : pnr_event(M, in, dh, dv);
                    t[Y][Z][i][j] = clamp_probability(0.25 * p, kModule, "station coincidence");
                }
            }
        }
    }
    return t;
}

CoincidenceProbs coincidence_probs_station(const DvMdiConfig& cfg) {
    const CoincidenceTable t = station_coincidence_table(cfg, Basis::kRectilinear);
    return {t[0][1][0][0], t[0][0][0][0]};
}

dv::Acceptance mdi_acceptance_and_qber_general(const DvMdiConfig& cfg) {
    const CoincidenceTable t = station_coincidence_table(cfg, Basis::kRectilinear);
    double all = 0.0, err = 0.0;
    for (int Y = 0; Y < 2; ++Y)
        for (int Z = 0; Z < 2; ++Z)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    all += t[Y][Z][i][j];
                    if (Y == Z) err += t[Y][Z][i][j];
                }
    const double pref = cfg.local_prefactor();
    const double p = clamp_probability(pref * all, kModule, "p_exp");
    if (p <= 0.0) return {p, std::nullopt};
    return {p, std::min(0.5, pref * err / p)};
}

std::optional<double> qber_other_bases(const DvMdiConfig& cfg) {
    const dv::Acceptance acc = mdi_acceptance_and_qber_general(cfg);
    if (acc.p_exp <= 0.0) return std::nullopt;
    const CoincidenceTable t = station_coincidence_table(cfg, Basis::kDiagonal);
    double err = 0.0;
    for (int i = 0; i < 2; ++i) {
        // same output port: photons entered with equal polarization
        err += t[0][1][i][i] + t[1][0][i][i];
        for (int j = 0; j < 2; ++j)
            if (i != j) err += t[0][0][i][j] + t[1][1][i][j];
    }
    return std::min(0.5, cfg.local_prefactor() * err / acc.p_exp);
}

}  // namespace qkdnoise::mdi
