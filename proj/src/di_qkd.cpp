#include "qkdnoise/di_qkd.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace qkdnoise::di {

namespace {

constexpr const char* kModule = "di_qkd";

// x^e; negative exponents of nonzero bases are allowed, 0^(negative) -> 0
double ipow(double x, int e) {
    if (e == 0) return 1.0;
    if (e < 0 && x == 0.0) return 0.0;
    return std::pow(x, e);
}

// x^e for |e| <= L, same convention as ipow
struct PowTable {
    int L;
    std::vector<double> v;
    PowTable(double x, int L_) : L(L_), v(static_cast<std::size_t>(2 * L_ + 1)) {
        for (int e = -L; e <= L; ++e) v[static_cast<std::size_t>(e + L)] = ipow(x, e);
    }
    double operator()(int e) const {
        if (e < -L || e > L) throw Error(kModule, "power table exponent out of range");
        return v[static_cast<std::size_t>(e + L)];
    }
};

struct Tables {
    std::vector<double> fact;
    std::vector<std::vector<double>> binom;

    explicit Tables(int n) {
        const Combinatorics comb(std::max(n, 1));
        fact.resize(static_cast<std::size_t>(n) + 1);
        binom.resize(static_cast<std::size_t>(n) + 1);
        for (int k = 0; k <= n; ++k) {
            fact[k] = k <= 170 ? comb.factorial(k) : std::numeric_limits<double>::infinity();
            binom[k].resize(static_cast<std::size_t>(k) + 1);
            for (int r = 0; r <= k; ++r) binom[k][r] = comb.binomial(k, r);
        }
    }
    // C(n, k) with the zero convention outside 0 <= k <= n
    double C(int n, int k) const {
        if (n < 0 || k < 0 || k > n) return 0.0;
        return binom[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
    }
    double F(int n) const { return fact[static_cast<std::size_t>(n)]; }
};

struct Truncation {
    int k1, k2;  // kept values of m_1, m_2 (mean mu_1) and m_3, m_4 (mean mu_2)
};

Truncation truncation_for(const DiConfig& cfg) {
    const double eps = cfg.truncation.tail_epsilon / 4.0;
    return {cfg.truncation.terms_for(cfg.channel_a.mean_noise_photons, eps),
            cfg.truncation.terms_for(cfg.channel_b.mean_noise_photons, eps)};
}

// Thermal output of one channel and its derivative-driven single-photon part.
struct SideDist {
    double m;  // (1-T) mu
    double T;
    double p0(int x) const {
        if (m == 0.0) return x == 0 ? 1.0 : 0.0;
        return std::pow(m, x) / std::pow(1.0 + m, x + 1);
    }
    double p1(int x) const {
        double d;
        if (x == 0)
            d = -1.0 / ((1.0 + m) * (1.0 + m));
        else if (m == 0.0)
            d = x == 1 ? 1.0 : 0.0;
        else
            d = std::pow(m, x - 1) * (x - m) / std::pow(1.0 + m, x + 2);
        return p0(x) + T * d;
    }
};

SideDist side(const ChannelParams& ch) {
    return {(1.0 - ch.transmittance) * ch.mean_noise_photons, ch.transmittance};
}

// Rotated polarization components of H (s=0) and V (s=1) at analyzer angle th.
std::array<double, 2> rotated(int s, double th) {
    if (s == 0) return {std::cos(th), std::sin(th)};
    return {-std::sin(th), std::cos(th)};
}

// singlet terms (|H>_A|V>_B, +1) and (|V>_A|H>_B, -1)
constexpr int kSA[2] = {0, 1};
constexpr int kSB[2] = {1, 0};
constexpr double kSign[2] = {1.0, -1.0};

}  // namespace

void DiAngles::validate() const {
    if (theta0_b != theta1_a) throw DomainError(kModule, "theta0_B must equal theta1_A");
}

DiConfig DiConfig::symmetric(double T, double mu) {
    DiConfig c;
    c.channel_a = ChannelParams(T, mu);
    c.channel_b = c.channel_a;
    return c;
}

void DiConfig::validate() const {
    channel_a.validate();
    channel_b.validate();
    angles.validate();
    truncation.validate();
}

double di_event_prob(int n1, int n2, int n3, int n4, double theta_a, double theta_b, const DiConfig& cfg) {
    cfg.validate();
    if (n1 < 0 || n2 < 0 || n3 < 0 || n4 < 0) throw DomainError(kModule, "photon counts must be >= 0");
    const Truncation tr = truncation_for(cfg);
    const double mu1 = cfg.channel_a.mean_noise_photons, mu2 = cfg.channel_b.mean_noise_photons;
    const double TA = cfg.channel_a.transmittance, TB = cfg.channel_b.transmittance;
    const int K = std::max(tr.k1, tr.k2);
    const Tables tb(2 * K + n1 + n2 + n3 + n4 + 8);
    const double sA = std::sin(theta_a), cA = std::cos(theta_a);
    const double sB = std::sin(theta_b), cB = std::cos(theta_b);
    const int na = n1 + n2, nb = n3 + n4;
    const int L = 4 * (2 * K + na + nb + 4);
    const PowTable psA(sA, L), pcA(cA, L), psB(sB, L), pcB(cB, L);
    const PowTable pTA(TA, L), pRA(1.0 - TA, L), pTB(TB, L), pRB(1.0 - TB, L);

    const int AM = K + 2;
    std::vector<double> v1_memo(static_cast<std::size_t>(4 * AM * AM), std::numeric_limits<double>::quiet_NaN());
    auto v1_at = [&](int i, int j, int A1, int A3) {
        double& slot = v1_memo[static_cast<std::size_t>(((i * 2 + j) * AM + A1) * AM + A3)];
        if (!std::isnan(slot)) return slot;
        double v1 = 0.0;
        for (int al = std::max(0, -n2 + A1); al <= std::min(n1, A1); ++al)
            for (int be = std::max(0, -n2 - i + j + A1); be <= std::min(n1, -i + j + A1); ++be)
                for (int ga = std::max(0, -n4 + A3); ga <= std::min(n3, A3); ++ga)
                    for (int de = std::max(0, -n4 + i - j + A3); de <= std::min(n3, i - j + A3); ++de) {
                        double t = tb.C(A1, al) * tb.C(-i + j + A1, be) * tb.C(A3, ga) * tb.C(i - j + A3, de);
                        t *= tb.C(na - A1, n1 - al) * tb.C(na + i - j - A1, n1 - be) * tb.C(nb - A3, n3 - ga) *
                             tb.C(nb - i + j - A3, n3 - de);
                        if (t == 0.0) continue;
                        t *= psA(-i + j + 2 * (n1 + A1 - al - be)) * pcA(i - j + 2 * (n2 - A1 + al + be));
                        t *= psB(i - j + 2 * (n3 + A3 - ga - de)) * pcB(-i + j + 2 * (n4 - A3 + ga + de));
                        if ((al + be + ga + de) & 1) t = -t;
                        v1 += t;
                    }
        slot = v1;
        return v1;
    };

    double total = 0.0, max_partial = 0.0;
    for (int i = 0; i <= 1; ++i) {
        for (int j = 0; j <= 1; ++j) {
            const double sg = ((i + j) & 1) ? -1.0 : 1.0;
            for (int m1 = 0; m1 < tr.k1; ++m1)
                for (int m2 = 0; m2 < tr.k1; ++m2)
                    for (int m3 = 0; m3 < tr.k2; ++m3)
                        for (int m4 = 0; m4 < tr.k2; ++m4) {
                            const double w = std::pow(mu1, m1 + m2) * std::pow(mu2, m3 + m4) /
                                             (std::pow(mu1 + 1.0, m1 + m2 + 2) * std::pow(mu2 + 1.0, m3 + m4 + 2)) /
                                             (tb.F(m1) * tb.F(m2) * tb.F(m3) * tb.F(m4));
                            if (w == 0.0) continue;
                            for (int a1 = 0; a1 <= m1; ++a1)
                                for (int a2 = 0; a2 <= m2; ++a2) {
                                    const int ip_lo = std::max(0, na + i - m1 - m2 + a1 + a2 - 1);
                                    const int ip_hi = std::min(i, na - m1 - m2 + a1 + a2);
                                    if (ip_lo > ip_hi) continue;
                                    for (int a3 = 0; a3 <= m3; ++a3)
                                        for (int a4 = 0; a4 <= m4; ++a4) {
                                            const int iq_lo = std::max(0, nb - i - m3 - m4 + a3 + a4);
                                            const int iq_hi = std::min(1 - i, nb - m3 - m4 + a3 + a4);
                                            if (iq_lo > iq_hi) continue;
                                            const double bb = tb.C(m1, a1) * tb.C(m2, a2) * tb.C(m3, a3) * tb.C(m4, a4);
                                            for (int ip = ip_lo; ip <= ip_hi; ++ip)
                                                for (int iq = iq_lo; iq <= iq_hi; ++iq) {
                                                    const int fs[4] = {i + a1 - ip, 1 - na - i + m1 + m2 - a1 + ip,
                                                                       1 - i + a3 - iq, i - nb + m3 + m4 - a3 + iq};
                                                    if (fs[0] < 0 || fs[1] < 0 || fs[2] < 0 || fs[3] < 0) continue;
                                                    const double ff = tb.F(fs[0]) * tb.F(fs[1]) * tb.F(fs[2]) * tb.F(fs[3]);
                                                    // v1 depends on i, j, A1, A3 only
                                                    const int A1 = m1 - a1 + ip, A3 = m3 - a3 + iq;
                                                    const double v1 = v1_at(i, j, A1, A3);
                                                    if (v1 == 0.0) continue;
                                                    const int b1_lo = std::max(0, i - j + a1 - ip), b1_hi = std::min(m1, i + a1 - ip);
                                                    const int b2_lo = std::max(0, -na - i + j + m1 + m2 - a1 + ip);
                                                    const int b2_hi = std::min(m2, 1 - na - i + m1 + m2 - a1 + ip);
                                                    const int b3_lo = std::max(0, j - i + a3 - iq), b3_hi = std::min(m3, 1 - i + a3 - iq);
                                                    const int b4_lo = std::max(0, -nb + i - j + m3 + m4 - a3 + iq);
                                                    const int b4_hi = std::min(m4, -nb + i + m3 + m4 - a3 + iq);
                                                    // the b sums split into an A factor and a B factor
                                                    double vA = 0.0, vB = 0.0;
                                                    for (int b1 = b1_lo; b1 <= b1_hi; ++b1)
                                                        for (int b2 = b2_lo; b2 <= b2_hi; ++b2) {
                                                            double v = tb.C(m1, b1) * tb.C(m2, b2);
                                                            if ((b1 + b2) & 1) v = -v;
                                                            const int eA = na - m1 - m2 + a1 + a2 + b1 + b2;
                                                            const int fA = 1 - na + 2 * m1 + 2 * m2 - a1 - a2 - b1 - b2;
                                                            vA += v * pTA(eA) * pRA(fA);
                                                        }
                                                    if (vA == 0.0) continue;
                                                    for (int b3 = b3_lo; b3 <= b3_hi; ++b3)
                                                        for (int b4 = b4_lo; b4 <= b4_hi; ++b4) {
                                                            double v = tb.C(m3, b3) * tb.C(m4, b4);
                                                            if ((b3 + b4) & 1) v = -v;
                                                            const int eB = nb - m3 - m4 + a3 + a4 + b3 + b4;
                                                            const int fB = 1 - nb + 2 * m3 + 2 * m4 - a3 - a4 - b3 - b4;
                                                            vB += v * pTB(eB) * pRB(fB);
                                                        }
                                                    const double v2sum = ((a1 + a2 + a3 + a4) & 1) ? -vA * vB : vA * vB;
                                                    total += sg * w * bb * ff * v1 * v2sum;
                                                    max_partial = std::max(max_partial, std::fabs(total));
                                                }
                                        }
                                }
                        }
        }
    }
    const double pref = tb.F(n1) * tb.F(n2) * tb.F(n3) * tb.F(n4) / 2.0;
    const double result = pref * total;
    const double partial = pref * max_partial;
    // absolute floor keeps exact zeros (e.g. singlet anticorrelation) from tripping the alarm
    if (partial > 1e6 * std::max(std::fabs(result), 1e-6))
        throw CancellationError(kModule, "alternating partial sums exceed 1e6 times the event probability");
    return clamp_probability(result, kModule, "event probability");
}

double di_event_prob_channel(int n1, int n2, int n3, int n4, double theta_a, double theta_b,
                             const DiConfig& cfg) {
    cfg.validate();
    const SideDist A = side(cfg.channel_a), B = side(cfg.channel_b);
    auto R = [](const SideDist& d, int s, int sp, double th, int nh, int nv) {
        const auto u = rotated(s, th), v = rotated(sp, th);
        return u[0] * v[0] * d.p1(nh) * d.p0(nv) + u[1] * v[1] * d.p0(nh) * d.p1(nv);
    };
    double p = 0.0;
    for (int t = 0; t < 2; ++t)
        for (int tp = 0; tp < 2; ++tp)
            p += kSign[t] * kSign[tp] * R(A, kSA[t], kSA[tp], theta_a, n1, n2) * R(B, kSB[t], kSB[tp], theta_b, n3, n4);
    return clamp_probability(0.5 * p, kModule, "event probability");
}

int click_sum_cap(const DiConfig& cfg) {
    // x photons on one side need at least x - 1 reservoir photons; the sum S
    // of two thermal reservoirs has P(S >= n) = r^n (1 + n (1 - r))
    const Truncation tr = truncation_for(cfg);
    const int box = 1 + 2 * (std::max(tr.k1, tr.k2) - 1);
    const double mu = std::max(cfg.channel_a.mean_noise_photons, cfg.channel_b.mean_noise_photons);
    if (mu == 0.0) return 1;
    const double r = mu / (1.0 + mu);
    const double eps = cfg.truncation.tail_epsilon / 4.0;
    int n = 1;
    while (n < box && std::pow(r, n) * (1.0 + n * (1.0 - r)) > eps) ++n;
    return n;
}

ClickSums di_click_sums(double theta_a, double theta_b, const DiConfig& cfg, DiEngine engine, Exec exec) {
    cfg.validate();
    ClickSums out;
    if (engine == DiEngine::kChannelModel) {
        const SideDist A = side(cfg.channel_a), B = side(cfg.channel_b);
        // click-only-in-H (h = 0) or only-in-V (h = 1) on one side
        auto R = [](const SideDist& d, int s, int sp, double th, int h) {
            const auto u = rotated(s, th), v = rotated(sp, th);
            // clicks only in the photon's mode, or only in the other mode
            const double own = (1.0 - d.p1(0)) * d.p0(0);
            const double other = d.p1(0) * (1.0 - d.p0(0));
            if (h == 0) return u[0] * v[0] * own + u[1] * v[1] * other;
            return u[0] * v[0] * other + u[1] * v[1] * own;
        };
        auto P = [&](int ha, int hb) {
            double p = 0.0;
            for (int t = 0; t < 2; ++t)
                for (int tp = 0; tp < 2; ++tp)
                    p += kSign[t] * kSign[tp] * R(A, kSA[t], kSA[tp], theta_a, ha) * R(B, kSB[t], kSB[tp], theta_b, hb);
            return 0.5 * p;
        };
        out.same = P(0, 0) + P(1, 1);
        out.opposite = P(0, 1) + P(1, 0);
        return out;
    }
    const int X = click_sum_cap(cfg);
    const int n = X * X;
    std::vector<ClickSums> part(static_cast<std::size_t>(n));
    auto body = [&](int idx) {
        const int x = 1 + idx / X, y = 1 + idx % X;
        ClickSums c;
        c.same = di_event_prob(x, 0, y, 0, theta_a, theta_b, cfg) + di_event_prob(0, x, 0, y, theta_a, theta_b, cfg);
        c.opposite = di_event_prob(x, 0, 0, y, theta_a, theta_b, cfg) + di_event_prob(0, x, y, 0, theta_a, theta_b, cfg);
        part[idx] = c;
    };
    if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
        for (int idx = 0; idx < n; ++idx) body(idx);
    } else {
        for (int idx = 0; idx < n; ++idx) body(idx);
    }
    for (const auto& c : part) {
        out.same += c.same;
        out.opposite += c.opposite;
    }
    return out;
}

double di_correlator(double theta_a, double theta_b, const DiConfig& cfg, DiEngine engine, Exec exec) {
    const ClickSums c = di_click_sums(theta_a, theta_b, cfg, engine, exec);
    return c.same - c.opposite;
}

ChshResult di_chsh_and_key(const DiConfig& cfg, DiEngine engine) {
    const DiAngles& a = cfg.angles;
    ChshResult r;
    r.S = di_correlator(a.theta1_a, a.theta1_b, cfg, engine) + di_correlator(a.theta1_a, a.theta2_b, cfg, engine) +
          di_correlator(a.theta2_a, a.theta1_b, cfg, engine) - di_correlator(a.theta2_a, a.theta2_b, cfg, engine);
    const ClickSums key = di_click_sums(a.theta1_a, a.theta0_b, cfg, engine);
    r.p_exp = clamp_probability(key.same + key.opposite, kModule, "p_exp");
    if (r.p_exp <= 0.0) return r;
    r.qber = std::min(1.0, std::max(0.0, key.same / r.p_exp));
    const double s2 = 0.25 * r.S * r.S - 1.0;
    if (r.S <= 2.0 || s2 <= 0.0) return r;
    const double arg = std::min(1.0, 0.5 * (1.0 + std::sqrt(s2)));
    r.key_rate = r.p_exp * std::max(0.0, 1.0 - binary_entropy(*r.qber) - binary_entropy(arg));
    return r;
}

DiAngles optimize_angles(const DiConfig& cfg, DiEngine engine, double tol) {
    DiConfig work = cfg;
    auto score = [&](const DiAngles& a) {
        work.angles = a;
        const ChshResult r = di_chsh_and_key(work, engine);
        // K first; S breaks ties in the insecure region
        return r.key_rate > 0.0 ? 10.0 + r.key_rate : r.S / 4.0;
    };
    DiAngles best = cfg.angles;
    double best_score = score(best);
    double* coords[4] = {&best.theta1_a, &best.theta2_a, &best.theta1_b, &best.theta2_b};
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double span = std::numbers::pi / 8.0;
    for (int sweep = 0; sweep < 60 && span > tol; ++sweep) {
        bool improved = false;
        for (double* c : coords) {
            // golden-section search on [c - span, c + span]
            const double c0 = *c;
            double lo = c0 - span, hi = c0 + span;
            DiAngles trial = best;
            double* tc = &trial.theta1_a + (c - &best.theta1_a);
            auto eval = [&](double v) {
                *tc = v;
                trial.theta0_b = trial.theta1_a;
                return score(trial);
            };
            double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
            double f1 = eval(x1), f2 = eval(x2);
            while (hi - lo > tol) {
                if (f1 < f2) {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + gr * (hi - lo);
                    f2 = eval(x2);
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - gr * (hi - lo);
                    f1 = eval(x1);
                }
            }
            const double xm = 0.5 * (lo + hi);
            const double fm = eval(xm);
            if (fm > best_score + 1e-12) {
                *c = xm;
                best.theta0_b = best.theta1_a;
                best_score = fm;
                improved = true;
            }
        }
        if (!improved) span *= 0.5;
    }
    best.theta0_b = best.theta1_a;
    return best;
}

}  // namespace qkdnoise::di
