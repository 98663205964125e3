#include <cmath>
#include <numbers>
#include <unordered_map>

#include "qkdnoise/oracle_fock.hpp"

namespace qkdnoise::oracle {

namespace {

constexpr const char* kModule = "oracle_fock";
constexpr int kBits = 5;  // photons per output mode in a packed key
constexpr std::uint64_t kMask = (1u << kBits) - 1;

int get(std::uint64_t key, int d) { return static_cast<int>((key >> (kBits * d)) & kMask); }

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

using Packed = std::unordered_map<std::uint64_t, cplx>;

// Coherently adds U-propagated |occ> (times coeff) into `acc`.
void propagate_term(const Occupation& occ, cplx coeff, const Eigen::MatrixXcd& U, int cap, Packed& acc) {
    const int out_modes = static_cast<int>(U.rows());
    double norm = 1.0;
    for (int n : occ) norm *= factorial(n);
    Packed cur;
    cur.emplace(0, coeff / std::sqrt(norm));
    for (std::size_t k = 0; k < occ.size(); ++k) {
        for (int rep = 0; rep < occ[k]; ++rep) {
            Packed next;
            next.reserve(cur.size() * 3);
            for (const auto& [key, a] : cur) {
                for (int d = 0; d < out_modes; ++d) {
                    const cplx u = U(d, static_cast<Eigen::Index>(k));
                    if (u == cplx(0.0)) continue;
                    const int n = get(key, d);
                    if (n + 1 > cap) continue;  // outside the truncated space
                    const std::uint64_t nk = key + (std::uint64_t{1} << (kBits * d));
                    next[nk] += a * u * std::sqrt(static_cast<double>(n + 1));
                }
            }
            cur.swap(next);
        }
    }
    for (const auto& [key, a] : cur) acc[key] += a;
}

// Adds weight * detector distribution of the pure state `in` into `out`;
// returns the probability kept inside the truncated space.
double accumulate(const FockStateVector& in, const BellSpec& spec, double weight, std::map<Occupation, double>& out) {
    if (spec.transfer.cols() != in.modes())
        throw DomainError(kModule, "transfer matrix column count must equal the input mode count");
    if (spec.transfer.rows() * kBits > 64 || spec.cap > static_cast<int>(kMask))
        throw DomainError(kModule, "too many output modes or cap too large for the packed representation");
    Packed acc;
    for (const auto& [occ, a] : in.amplitudes()) propagate_term(occ, a, spec.transfer, spec.cap, acc);
    double kept = 0.0;
    Occupation pattern(spec.detectors.size());
    for (const auto& [key, a] : acc) {
        const double p = std::norm(a);
        if (p == 0.0) continue;
        kept += p;
        for (std::size_t i = 0; i < spec.detectors.size(); ++i) {
            const int n = get(key, spec.detectors[i]);
            pattern[i] = spec.kind == DetectorKind::kOnOff ? (n > 0 ? 1 : 0) : n;
        }
        out[pattern] += weight * p;
    }
    return kept;
}

// Bath occupation configurations over `means.size()` thermal modes, with
// their product weights. Per-mode caps come from the tail bound; configs
// lighter than `floor` are skipped. Returns the total kept weight.
double enumerate_bath(const std::vector<double>& means, double tail,
                      std::vector<std::pair<Occupation, double>>& configs) {
    TruncationPolicy pol;
    pol.max_terms = 200;
    const int nm = static_cast<int>(means.size());
    std::vector<int> caps(nm);
    for (int k = 0; k < nm; ++k) caps[k] = pol.terms_for(means[k], tail / (2.0 * nm));
    const double floor = tail * 1e-3;
    double kept = 0.0;
    Occupation occ(nm, 0);
    while (true) {
        double w = 1.0;
        for (int k = 0; k < nm; ++k) w *= thermal_pmf(occ[k], means[k]);
        if (w >= floor) {
            configs.emplace_back(occ, w);
            kept += w;
        }
        int k = 0;
        while (k < nm && ++occ[k] >= caps[k]) occ[k++] = 0;
        if (k == nm) break;
    }
    return kept;
}

bool event_matches(DetectorKind kind, const Occupation& counts, int dh, int dv) {
    for (int d = 0; d < 4; ++d) {
        const int want = (d == dh || d == dv) ? 1 : 0;
        if (kind == DetectorKind::kPnr ? counts[d] != want : (counts[d] > 0 ? 1 : 0) != want) return false;
    }
    return true;
}

// ---------------------------------------------------------------- MDI model

struct ArmModel {
    double T, mu, xi;
};

// One polarization subsystem of the rectilinear-basis station.
// inputs: 0 signal A, 1 bath A, 2 signal B, 3 bath B
// outputs: 0 D1, 1 D2, 2 loss A, 3 loss B, 4 detector loss 1, 5 detector loss 2
Eigen::MatrixXcd subsystem_transfer(const ArmModel& a, const ArmModel& b, double etaC) {
    const double r = 1.0 / std::sqrt(2.0);
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(6, 4);
    const ArmModel arms[2] = {a, b};
    const double bs[2][2] = {{r, r}, {r, -r}};
    for (int X = 0; X < 2; ++X) {
        const double t = std::sqrt(arms[X].T), u = std::sqrt(1.0 - arms[X].T);
        const int s = 2 * X, n = 2 * X + 1;
        for (int o = 0; o < 2; ++o) {
            U(o, s) = std::sqrt(etaC) * bs[o][X] * t;
            U(o, n) = std::sqrt(etaC) * bs[o][X] * u;
            U(4 + o, s) = std::sqrt(1.0 - etaC) * bs[o][X] * t;
            U(4 + o, n) = std::sqrt(1.0 - etaC) * bs[o][X] * u;
        }
        U(2 + X, s) = u;
        U(2 + X, n) = -t;
    }
    return U;
}

// Full 8-input / 12-output model.
// inputs: 0,1 signal A (H,V), 2,3 bath A, 4,5 signal B, 6,7 bath B
// outputs: 0..3 D1H D1V D2H D2V, 4..7 channel loss (A H, A V, B H, B V), 8..11 detector loss
Eigen::MatrixXcd full_transfer(const ArmModel& a, const ArmModel& b, double etaC) {
    const double r = 1.0 / std::sqrt(2.0);
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(12, 8);
    const ArmModel arms[2] = {a, b};
    const double bs[2][2] = {{r, r}, {r, -r}};
    for (int X = 0; X < 2; ++X) {
        const double t = std::sqrt(arms[X].T), u = std::sqrt(1.0 - arms[X].T);
        for (int p = 0; p < 2; ++p) {
            const int s = 4 * X + p, n = 4 * X + 2 + p;
            for (int o = 0; o < 2; ++o) {
                const int d = 2 * o + p;
                U(d, s) = std::sqrt(etaC) * bs[o][X] * t;
                U(d, n) = std::sqrt(etaC) * bs[o][X] * u;
                U(8 + d, s) = std::sqrt(1.0 - etaC) * bs[o][X] * t;
                U(8 + d, n) = std::sqrt(1.0 - etaC) * bs[o][X] * u;
            }
            U(4 + 2 * X + p, s) = u;
            U(4 + 2 * X + p, n) = -t;
        }
    }
    return U;
}

// lab (H, V) components of basis vector e_k
std::array<double, 2> basis_vector(mdi::Basis basis, int k) {
    const double r = 1.0 / std::sqrt(2.0);
    if (basis == mdi::Basis::kRectilinear) return k == 0 ? std::array<double, 2>{1.0, 0.0} : std::array<double, 2>{0.0, 1.0};
    return k == 0 ? std::array<double, 2>{r, r} : std::array<double, 2>{r, -r};
}

}  // namespace

FockStateVector::FockStateVector(int modes, int cap) : modes_(modes), cap_(cap) {
    if (modes < 1 || cap < 0) throw DomainError(kModule, "FockStateVector needs modes >= 1 and cap >= 0");
}

FockStateVector FockStateVector::vacuum(int modes, int cap) {
    FockStateVector s(modes, cap);
    s.add(Occupation(modes, 0), 1.0);
    return s;
}

FockStateVector FockStateVector::basis(const Occupation& occ, int cap) {
    FockStateVector s(static_cast<int>(occ.size()), cap);
    s.add(occ, 1.0);
    return s;
}

void FockStateVector::add(const Occupation& occ, cplx a) {
    if (static_cast<int>(occ.size()) != modes_) throw DomainError(kModule, "occupation length mismatch");
    for (int n : occ)
        if (n < 0) throw DomainError(kModule, "negative occupation");
    for (int n : occ)
        if (n > cap_) {
            truncation_loss_ += std::norm(a);
            return;
        }
    amp_[occ] += a;
}

double FockStateVector::norm() const {
    double s = 0.0;
    for (const auto& [occ, a] : amp_) s += std::norm(a);
    return s;
}

OutcomeMap fock_bell_measurement(const FockStateVector& input, const BellSpec& spec) {
    OutcomeMap out;
    const double kept = accumulate(input, spec, 1.0, out.probability);
    out.truncation_loss = std::max(0.0, input.norm() - kept) + input.truncation_loss();
    out.cap_warning = out.truncation_loss > 1e-8;
    return out;
}

BellSpec station_spec(DetectorKind kind) {
    const double r = 1.0 / std::sqrt(2.0);
    BellSpec s;
    s.transfer = Eigen::MatrixXcd::Zero(4, 4);
    for (int p = 0; p < 2; ++p) {
        s.transfer(p, p) = r;          // D1p <- A_p
        s.transfer(p, 2 + p) = r;      // D1p <- B_p
        s.transfer(2 + p, p) = r;      // D2p <- A_p
        s.transfer(2 + p, 2 + p) = -r; // D2p <- B_p
    }
    s.detectors = {0, 1, 2, 3};
    s.kind = kind;
    s.cap = 8;
    return s;
}

mdi::CoincidenceTable fock_mdi_table(const mdi::DvMdiConfig& cfg, mdi::Basis basis, double bath_tail,
                                     double* truncation_loss) {
    cfg.validate();
    const ArmModel A{cfg.channel_a.transmittance, cfg.channel_a.mean_noise_photons, cfg.source_a.collection_eff};
    const ArmModel B{cfg.channel_b.transmittance, cfg.channel_b.mean_noise_photons, cfg.source_b.collection_eff};
    const double etaC = cfg.central.efficiency;
    const DetectorKind kind = cfg.central.kind;
    mdi::CoincidenceTable table{};
    double worst_loss = 0.0;

    if (basis == mdi::Basis::kRectilinear) {
        // H and V never mix, so each polarization is simulated on its own
        BellSpec spec;
        spec.transfer = subsystem_transfer(A, B, etaC);
        spec.detectors = {0, 1};
        spec.kind = DetectorKind::kPnr;
        spec.cap = 31;
        std::vector<std::pair<Occupation, double>> bath;
        const double kept_bath = enumerate_bath({A.mu, B.mu}, bath_tail, bath);
        // dist[sa][sb]: (D1, D2) counts with signal photons sa, sb in this polarization
        std::map<Occupation, double> dist[2][2];
        for (int sa = 0; sa < 2; ++sa)
            for (int sb = 0; sb < 2; ++sb)
                for (const auto& [occ, w] : bath) {
                    const FockStateVector in = FockStateVector::basis({sa, occ[0], sb, occ[1]}, spec.cap);
                    accumulate(in, spec, w, dist[sa][sb]);
                }
        // each polarization carries its own independent pair of reservoirs
        worst_loss = 1.0 - kept_bath * kept_bath;
        for (int Y = 0; Y < 2; ++Y)
            for (int Z = 0; Z < 2; ++Z) {
                const int pa = 1 - Y, pb = 1 - Z;  // sent polarization index (0 = H)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        double p = 0.0;
                        for (int al = 0; al < 2; ++al)
                            for (int be = 0; be < 2; ++be) {
                                const double wp = (al ? A.xi : 1.0 - A.xi) * (be ? B.xi : 1.0 - B.xi);
                                if (wp == 0.0) continue;
                                const auto& dh = dist[al && pa == 0][be && pb == 0];
                                const auto& dv = dist[al && pa == 1][be && pb == 1];
                                for (const auto& [ch, ph] : dh)
                                    for (const auto& [cv, pv] : dv) {
                                        const Occupation counts{ch[0], cv[0], ch[1], cv[1]};
                                        if (event_matches(kind, counts, 2 * i, 2 * j + 1)) p += wp * ph * pv;
                                    }
                            }
                        table[Y][Z][i][j] = 0.25 * p;
                    }
            }
    } else {
        BellSpec spec;
        spec.transfer = full_transfer(A, B, etaC);
        spec.detectors = {0, 1, 2, 3};
        spec.kind = DetectorKind::kPnr;
        spec.cap = 31;
        std::vector<std::pair<Occupation, double>> bath;
        const double kept_bath = enumerate_bath({A.mu, A.mu, B.mu, B.mu}, bath_tail, bath);
        worst_loss = 1.0 - kept_bath;
        for (int Y = 0; Y < 2; ++Y)
            for (int Z = 0; Z < 2; ++Z) {
                const auto ea = basis_vector(basis, 1 - Y), eb = basis_vector(basis, 1 - Z);
                std::map<Occupation, double> dist;
                for (int al = 0; al < 2; ++al)
                    for (int be = 0; be < 2; ++be) {
                        const double wp = (al ? A.xi : 1.0 - A.xi) * (be ? B.xi : 1.0 - B.xi);
                        if (wp == 0.0) continue;
                        for (const auto& [occ, w] : bath) {
                            FockStateVector in(8, spec.cap);
                            // single photons in polarization superpositions
                            for (int pa = 0; pa < (al ? 2 : 1); ++pa)
                                for (int pb = 0; pb < (be ? 2 : 1); ++pb) {
                                    const double amp = (al ? ea[pa] : 1.0) * (be ? eb[pb] : 1.0);
                                    if (amp == 0.0) continue;
                                    Occupation o{0, 0, occ[0], occ[1], 0, 0, occ[2], occ[3]};
                                    if (al) o[pa] = 1;
                                    if (be) o[4 + pb] = 1;
                                    in.add(o, amp);
                                }
                            accumulate(in, spec, wp * w, dist);
                        }
                    }
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        double p = 0.0;
                        for (const auto& [counts, pr] : dist)
                            if (event_matches(kind, counts, 2 * i, 2 * j + 1)) p += pr;
                        table[Y][Z][i][j] = 0.25 * p;
                    }
            }
    }
    if (truncation_loss) *truncation_loss = worst_loss;
    return table;
}

std::map<Occupation, double> fock_di_event_probs(const di::DiConfig& cfg, double theta_a, double theta_b,
                                                 double bath_tail, double* truncation_loss) {
    cfg.validate();
    // inputs: 0,1 pair photon to Alice (H,V), 2,3 pair photon to Bob, 4,5 bath A, 6,7 bath B
    // outputs: 0 A_H (n1), 1 A_V (n2), 2 B_H (n3), 3 B_V (n4), 4..7 channel loss
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(8, 8);
    const ChannelParams* ch[2] = {&cfg.channel_a, &cfg.channel_b};
    const double th[2] = {theta_a, theta_b};
    for (int X = 0; X < 2; ++X) {
        const double t = std::sqrt(ch[X]->transmittance), u = std::sqrt(1.0 - ch[X]->transmittance);
        const double c = std::cos(th[X]), s = std::sin(th[X]);
        // analyzer: cH -> c dH + s dV, cV -> -s dH + c dV
        const double rot[2][2] = {{c, -s}, {s, c}};  // [detector pol][arriving pol]
        for (int p = 0; p < 2; ++p) {
            const int sig = 2 * X + p, bath = 4 + 2 * X + p;
            for (int d = 0; d < 2; ++d) {
                U(2 * X + d, sig) = rot[d][p] * t;
                U(2 * X + d, bath) = rot[d][p] * u;
            }
            U(4 + 2 * X + p, sig) = u;
            U(4 + 2 * X + p, bath) = -t;
        }
    }
    BellSpec spec;
    spec.transfer = U;
    spec.detectors = {0, 1, 2, 3};
    spec.kind = DetectorKind::kPnr;
    spec.cap = 31;
    const double muA = cfg.channel_a.mean_noise_photons, muB = cfg.channel_b.mean_noise_photons;
    std::vector<std::pair<Occupation, double>> bath;
    const double kept = enumerate_bath({muA, muA, muB, muB}, bath_tail, bath);
    std::map<Occupation, double> dist;
    const double r = 1.0 / std::sqrt(2.0);
    for (const auto& [occ, w] : bath) {
        FockStateVector in(8, spec.cap);
        // (|H>_A |V>_B - |V>_A |H>_B) / sqrt 2
        in.add({1, 0, 0, 1, occ[0], occ[1], occ[2], occ[3]}, r);
        in.add({0, 1, 1, 0, occ[0], occ[1], occ[2], occ[3]}, -r);
        accumulate(in, spec, w, dist);
    }
    if (truncation_loss) *truncation_loss = 1.0 - kept;
    return dist;
}

double fock_di_correlator(const di::DiConfig& cfg, double theta_a, double theta_b, double bath_tail) {
    const auto dist = fock_di_event_probs(cfg, theta_a, theta_b, bath_tail);
    double E = 0.0;
    for (const auto& [n, p] : dist) {
        const bool a_h = n[0] > 0 && n[1] == 0, a_v = n[0] == 0 && n[1] > 0;
        const bool b_h = n[2] > 0 && n[3] == 0, b_v = n[2] == 0 && n[3] > 0;
        if ((a_h && b_h) || (a_v && b_v)) E += p;
        if ((a_h && b_v) || (a_v && b_h)) E -= p;
    }
    return E;
}

}  // namespace qkdnoise::oracle
