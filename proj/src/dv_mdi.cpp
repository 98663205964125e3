// Nested-sum evaluation of the central-station coincidence probabilities.
//
// Noise indices i, j (Alice's H and V reservoir photons) and k, l (Bob's)
// run over thermal weights of mean mu*eta_C; alpha/beta flag whether the
// signal photon of Alice/Bob survives (probability xi*eta_C). The inner
// finite sums are evaluated exactly.
#include "qkdnoise/dv_mdi.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace qkdnoise::mdi {

namespace {

constexpr const char* kModule = "dv_mdi";

template <bool Log>
struct Arith {
    static constexpr double one() { return Log ? 0.0 : 1.0; }
    static double mul(double x, double y) { return Log ? x + y : x * y; }
    static double val(double x) { return Log ? std::exp(x) : x; }
};

// x^e for e = 0..n (or e*log x in log mode, with 0^0 = 1)
std::vector<double> power_table(double x, int n, bool log_mode) {
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    for (int e = 0; e <= n; ++e) {
        if (log_mode) {
            t[e] = e == 0 ? 0.0 : (x > 0.0 ? e * std::log(x) : -std::numeric_limits<double>::infinity());
        } else {
            t[e] = std::pow(x, e);
        }
    }
    return t;
}

struct Tables {
    bool log_mode = false;
    int max_n = 0;
    std::vector<double> fact;                // n! or log n!
    std::vector<std::vector<double>> binom;  // C(n,k) or its log
    std::vector<double> t1, u1, t2, u2, half;
    std::vector<double> pa, pa1, pb, pb1;  // a^n, (a+1)^-n, b^n, (b+1)^-n

    double f(int n) const { return fact[static_cast<std::size_t>(n)]; }
    double c(int n, int k) const { return binom[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)]; }
};

bool binom_nonzero(int n, int k) { return n >= 0 && k >= 0 && k <= n; }

struct Setup {
    int Ka, Kb;
    double a, b, sA, sB, t1, t2;
    bool onoff;
};

Setup make_setup(const DvMdiConfig& cfg) {
    const double etaC = cfg.central.efficiency;
    Setup s{};
    s.a = cfg.channel_a.mean_noise_photons * etaC;
    s.b = cfg.channel_b.mean_noise_photons * etaC;
    const double eps = cfg.truncation.tail_epsilon / 4.0;
    s.Ka = cfg.truncation.terms_for(s.a, eps);
    s.Kb = cfg.truncation.terms_for(s.b, eps);
    s.sA = cfg.source_a.collection_eff * etaC;
    s.sB = cfg.source_b.collection_eff * etaC;
    s.t1 = cfg.channel_a.transmittance;
    s.t2 = cfg.channel_b.transmittance;
    s.onoff = cfg.central.kind == DetectorKind::kOnOff;
    return s;
}

int max_factorial_arg(const Setup& s) {
    const int K = std::max(s.Ka, s.Kb);
    return s.onoff ? 2 * K + 2 : K + 2;
}

Tables make_tables(const Setup& s, bool log_mode) {
    Tables tb;
    tb.log_mode = log_mode;
    const int K = std::max(s.Ka, s.Kb);
    tb.max_n = 2 * K + 4;
    const Combinatorics comb(std::max(tb.max_n, 1));
    tb.fact.resize(static_cast<std::size_t>(tb.max_n) + 1);
    tb.binom.assign(static_cast<std::size_t>(tb.max_n) + 1, {});
    for (int n = 0; n <= tb.max_n; ++n) {
        tb.fact[n] = log_mode ? comb.log_factorial(n) : std::exp(comb.log_factorial(n));
        if (!log_mode && n <= 170) tb.fact[n] = comb.factorial(n);
        tb.binom[n].resize(static_cast<std::size_t>(n) + 1);
        for (int k = 0; k <= n; ++k)
            tb.binom[n][k] = log_mode ? comb.log_binomial(n, k) : comb.binomial(n, k);
    }
    const int E = 4 * K + 8;
    tb.t1 = power_table(s.t1, E, log_mode);
    tb.u1 = power_table(1.0 - s.t1, E, log_mode);
    tb.t2 = power_table(s.t2, E, log_mode);
    tb.u2 = power_table(1.0 - s.t2, E, log_mode);
    tb.half = power_table(0.5, E, log_mode);
    tb.pa = power_table(s.a, E, log_mode);
    tb.pa1 = power_table(1.0 / (1.0 + s.a), E, log_mode);
    tb.pb = power_table(s.b, E, log_mode);
    tb.pb1 = power_table(1.0 / (1.0 + s.b), E, log_mode);
    return tb;
}

struct Idx {
    int i, j, k, l, al, be, ga, de, si, ta;
};

template <bool Log>
double c_factor(const Tables& tb, const Idx& x, int ip, int jp, bool& zero) {
    using A = Arith<Log>;
    zero = true;
    const int jq = jp + x.ga - x.si;
    if (!binom_nonzero(x.i, ip) || !binom_nonzero(x.j, jp) || !binom_nonzero(x.j, jq)) return 0.0;
    const int f1 = x.i - ip;
    const int f2 = x.j - jp + x.al - x.ga;
    if (f1 < 0 || f2 < 0) return 0.0;
    const int e1 = x.i + x.j - ip - jp + x.si;
    const int e2 = x.al + ip + jp - x.si;
    if (e1 < 0 || e2 < 0) return 0.0;
    zero = false;
    double v = A::mul(tb.c(x.i, ip), tb.c(x.i, ip));
    v = A::mul(v, tb.c(x.j, jp));
    v = A::mul(v, tb.c(x.j, jq));
    v = A::mul(v, tb.f(f1));
    v = A::mul(v, tb.f(f2));
    v = A::mul(v, tb.t1[e1]);
    v = A::mul(v, tb.u1[e2]);
    return v;
}

// PNR coincidence kernel; `base` carries the noise weight and signal factor.
template <bool Log>
double f_pnr(const Tables& tb, const Idx& x, bool hh, double base) {
    using A = Arith<Log>;
    double tot = 0.0;
    int ip_lo, ip_hi;
    if (hh) {
        ip_lo = std::max(0, 1 - x.k);
        ip_hi = std::min(x.i, 1);
    } else {
        ip_lo = std::max({0, 1 - x.k - x.de, 1 - x.k - x.ta});
        ip_hi = std::min({x.i, 1 - x.de, 1 - x.ta});
    }
    for (int ip = ip_lo; ip <= ip_hi; ++ip) {
        int jp_lo, jp_hi;
        if (hh) {
            jp_lo = std::max({0, x.si - x.ga, 1 - x.l - x.ga - x.de, 1 - x.l - x.ga - x.ta});
            jp_hi = std::min({x.j, x.j + x.si - x.ga, 1 - x.ga - x.de, 1 - x.ga - x.ta});
        } else {
            jp_lo = std::max({0, x.si - x.ga, 1 - x.l - x.ga});
            jp_hi = std::min({x.j, x.j + x.si - x.ga, 1 - x.ga});
        }
        for (int jp = jp_lo; jp <= jp_hi; ++jp) {
            bool zero;
            const double c = c_factor<Log>(tb, x, ip, jp, zero);
            if (zero) continue;
            const int e1 = x.k + x.l + x.ga + x.de + x.ta + ip + jp - 2;
            const int e2 = x.be - x.ga - x.de - x.ta - ip - jp + 2;
            if (e1 < 0 || e2 < 0) continue;
            double h;
            int f1, f2;
            if (hh) {
                const int n1 = 1 - ip, n2 = 1 - jp - x.ga - x.de, n3 = 1 - jp - x.ga - x.ta;
                if (!binom_nonzero(x.k, n1) || !binom_nonzero(x.l, n2) || !binom_nonzero(x.l, n3)) continue;
                h = A::mul(A::mul(tb.c(x.k, n1), tb.c(x.k, n1)), A::mul(tb.c(x.l, n2), tb.c(x.l, n3)));
                f1 = x.k + ip - 1;
                f2 = x.l + jp + x.ga - 1 + x.be;
            } else {
                const int n1 = 1 - ip - x.de, n2 = 1 - ip - x.ta, n3 = 1 - jp - x.ga;
                if (!binom_nonzero(x.k, n1) || !binom_nonzero(x.k, n2) || !binom_nonzero(x.l, n3)) continue;
                h = A::mul(A::mul(tb.c(x.k, n1), tb.c(x.k, n2)), A::mul(tb.c(x.l, n3), tb.c(x.l, n3)));
                f1 = x.k + ip - 1 + x.be;
                f2 = x.l + jp + x.ga - 1;
            }
            if (f1 < 0 || f2 < 0) continue;
            double v = A::mul(base, c);
            v = A::mul(v, tb.t2[e1]);
            v = A::mul(v, tb.u2[e2]);
            v = A::mul(v, h);
            v = A::mul(v, tb.f(f1));
            v = A::mul(v, tb.f(f2));
            tot += A::val(v);
        }
    }
    return tot / 4.0;
}

template <bool Log>
double f_onoff(const Tables& tb, const Idx& x, bool hh, double base) {
    using A = Arith<Log>;
    double tot = 0.0;
    for (int ip = 0; ip <= x.i; ++ip) {
        for (int jp = std::max(0, x.si - x.ga); jp <= std::min(x.j, x.j + x.si - x.ga); ++jp) {
            bool zero;
            const double c = c_factor<Log>(tb, x, ip, jp, zero);
            if (zero) continue;
            const double bc = A::mul(base, c);
            int kp_lo, kp_hi;
            if (hh) {
                kp_lo = std::max(0, 1 - ip);
                kp_hi = x.k;
            } else {
                kp_lo = std::max({0, x.ta - x.de, 1 - x.de - ip});
                kp_hi = std::min(x.k, x.k + x.ta - x.de);
            }
            for (int kp = kp_lo; kp <= kp_hi; ++kp) {
                int lp_lo, lp_hi;
                if (hh) {
                    lp_lo = std::max({0, x.ta - x.de, 1 - x.ga - x.de - jp});
                    lp_hi = std::min(x.l, x.l + x.ta - x.de);
                } else {
                    lp_lo = std::max(0, 1 - x.ga - jp);
                    lp_hi = x.l;
                }
                for (int lp = lp_lo; lp <= lp_hi; ++lp) {
                    const int e1 = x.k + x.l - kp - lp + x.ta;
                    const int e2 = x.be + kp + lp - x.ta;
                    if (e1 < 0 || e2 < 0) continue;
                    double h;
                    int fs[4];
                    if (hh) {
                        const int n4 = lp + x.de - x.ta;
                        if (!binom_nonzero(x.k, kp) || !binom_nonzero(x.l, lp) || !binom_nonzero(x.l, n4)) continue;
                        h = A::mul(A::mul(tb.c(x.k, kp), tb.c(x.k, kp)), A::mul(tb.c(x.l, lp), tb.c(x.l, n4)));
                        fs[0] = x.k - kp;
                        fs[1] = x.l - lp + x.be - x.de;
                        fs[2] = ip + kp;
                        fs[3] = jp + lp + x.ga + x.de;
                    } else {
                        const int n2 = kp + x.de - x.ta;
                        if (!binom_nonzero(x.k, kp) || !binom_nonzero(x.k, n2) || !binom_nonzero(x.l, lp)) continue;
                        h = A::mul(A::mul(tb.c(x.k, kp), tb.c(x.k, n2)), A::mul(tb.c(x.l, lp), tb.c(x.l, lp)));
                        fs[0] = x.k - kp + x.be - x.de;
                        fs[1] = x.l - lp;
                        fs[2] = ip + kp + x.de;
                        fs[3] = jp + lp + x.ga;
                    }
                    if (fs[0] < 0 || fs[1] < 0 || fs[2] < 0 || fs[3] < 0) continue;
                    double v = A::mul(bc, tb.t2[e1]);
                    v = A::mul(v, tb.u2[e2]);
                    v = A::mul(v, tb.half[x.ga + x.de + ip + jp + kp + lp]);
                    v = A::mul(v, h);
                    for (int q : fs) v = A::mul(v, tb.f(q));
                    tot += A::val(v);
                }
            }
        }
    }
    return tot;
}

// Contribution of outer index i, both HV and HH.
template <bool Log>
CoincidenceProbs partial_for_i(const Setup& s, const Tables& tb, int i) {
    using A = Arith<Log>;
    CoincidenceProbs out;
    const double pwa[2] = {Log ? (s.sA < 1.0 ? std::log1p(-s.sA) : -INFINITY) : 1.0 - s.sA,
                           Log ? (s.sA > 0.0 ? std::log(s.sA) : -INFINITY) : s.sA};
    const double pwb[2] = {Log ? (s.sB < 1.0 ? std::log1p(-s.sB) : -INFINITY) : 1.0 - s.sB,
                           Log ? (s.sB > 0.0 ? std::log(s.sB) : -INFINITY) : s.sB};
    const bool zero_a[2] = {s.sA >= 1.0, s.sA <= 0.0};
    const bool zero_b[2] = {s.sB >= 1.0, s.sB <= 0.0};
    for (int j = 0; j < s.Ka; ++j) {
        for (int k = 0; k < s.Kb; ++k) {
            for (int l = 0; l < s.Kb; ++l) {
                const int nij = i + j, nkl = k + l;
                double w = A::mul(tb.pa[nij], tb.pa1[nij + 2]);
                w = A::mul(w, A::mul(tb.pb[nkl], tb.pb1[nkl + 2]));
                if (Log) {
                    w -= tb.f(i) + tb.f(j) + tb.f(k) + tb.f(l);
                } else {
                    w /= tb.f(i) * tb.f(j) * tb.f(k) * tb.f(l);
                }
                for (int al = 0; al <= 1; ++al) {
                    if (zero_a[al]) continue;
                    for (int be = 0; be <= 1; ++be) {
                        if (zero_b[be]) continue;
                        const double base = A::mul(w, A::mul(pwa[al], pwb[be]));
                        for (int ga = 0; ga <= al; ++ga)
                            for (int de = 0; de <= be; ++de)
                                for (int si = 0; si <= al; ++si)
                                    for (int ta = 0; ta <= be; ++ta) {
                                        const double sign = ((ga + de + si + ta) & 1) ? -1.0 : 1.0;
                                        const Idx x{i, j, k, l, al, be, ga, de, si, ta};
                                        if (s.onoff) {
                                            out.hv += sign * f_onoff<Log>(tb, x, false, base);
                                            out.hh += sign * f_onoff<Log>(tb, x, true, base);
                                        } else {
                                            out.hv += sign * f_pnr<Log>(tb, x, false, base);
                                            out.hh += sign * f_pnr<Log>(tb, x, true, base);
                                        }
                                    }
                    }
                }
            }
        }
    }
    return out;
}

template <bool Log>
CoincidenceProbs run_sums(const Setup& s, Exec exec) {
    const Tables tb = make_tables(s, Log);
    std::vector<CoincidenceProbs> partial(static_cast<std::size_t>(s.Ka));
    if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < s.Ka; ++i) partial[i] = partial_for_i<Log>(s, tb, i);
    } else {
        for (int i = 0; i < s.Ka; ++i) partial[i] = partial_for_i<Log>(s, tb, i);
    }
    CoincidenceProbs total;
    for (const auto& p : partial) {
        total.hv += p.hv;
        total.hh += p.hh;
    }
    total.hv /= 4.0;
    total.hh /= 4.0;
    return total;
}

}  // namespace

DvMdiConfig DvMdiConfig::symmetric(double q, double xi, double T, double mu, double eta,
                                   DetectorKind central_kind) {
    DvMdiConfig c;
    c.source_a = {q, xi};
    c.source_b = c.source_a;
    c.channel_a = ChannelParams(T, mu);
    c.channel_b = c.channel_a;
    c.local_a = {DetectorKind::kPnr, eta};
    c.local_b = c.local_a;
    c.central = {central_kind, eta};
    c.validate();
    return c;
}

void DvMdiConfig::validate() const {
    source_a.validate();
    source_b.validate();
    channel_a.validate();
    channel_b.validate();
    local_a.validate();
    local_b.validate();
    central.validate();
    truncation.validate();
}

double DvMdiConfig::local_prefactor() const {
    return source_a.pair_prob * source_a.collection_eff * local_a.efficiency * source_b.pair_prob *
           source_b.collection_eff * local_b.efficiency;
}

int appendix_terms_per_index(const DvMdiConfig& cfg) {
    const Setup s = make_setup(cfg);
    return std::max(s.Ka, s.Kb);
}

bool appendix_sums_affordable(const DvMdiConfig& cfg) {
    Setup s;
    try {
        s = make_setup(cfg);
    } catch (const TruncationError&) {
        return false;
    }
    const double K = std::max(s.Ka, s.Kb);
    const double cost = s.onoff ? std::pow(K, 8) / 16.0 : std::pow(K, 4);
    return cost <= 2.0e5;
}

CoincidenceProbs coincidence_probs(const DvMdiConfig& cfg, Exec exec) {
    cfg.validate();
    const Setup s = make_setup(cfg);
    const bool log_mode = max_factorial_arg(s) > cfg.truncation.log_domain_threshold;
    CoincidenceProbs p = log_mode ? run_sums<true>(s, exec) : run_sums<false>(s, exec);
    p.hv = clamp_probability(p.hv, kModule, "P_HV");
    p.hh = clamp_probability(p.hh, kModule, "P_HH");
    return p;
}

CoincidenceProbs coincidence_probs(const DvMdiConfig& cfg, MdiEngine engine) {
    switch (engine) {
        case MdiEngine::kAppendixSums:
            return coincidence_probs(cfg, Exec::kParallel);
        case MdiEngine::kStationModel:
            return coincidence_probs_station(cfg);
        case MdiEngine::kAuto:
            break;
    }
    return appendix_sums_affordable(cfg) ? coincidence_probs(cfg, Exec::kParallel)
                                         : coincidence_probs_station(cfg);
}

dv::Acceptance mdi_acceptance_and_qber(const DvMdiConfig& cfg, MdiEngine engine) {
    const CoincidenceProbs c = coincidence_probs(cfg, engine);
    const double pref = 8.0 * cfg.local_prefactor();
    const double p = clamp_probability(pref * (c.hv + c.hh), kModule, "p_exp");
    if (p <= 0.0) return {p, std::nullopt};
    return {p, std::min(0.5, pref * c.hh / p)};
}

double mu_max_asymptote_mdi(double T, double q_th) {
    const double disc = 1.0 - 3.0 * q_th + 2.0 * q_th * q_th;
    if (disc < 0.0) throw DomainError(kModule, "asymptote discriminant is negative");
    return T * (2.0 * q_th + std::sqrt(disc) - 1.0) / (2.0 * (1.0 - q_th));
}

}  // namespace qkdnoise::mdi
