#include "qkdnoise/validation.hpp"

#include <cmath>
#include <cstdio>

#include "qkdnoise/cv_protocols.hpp"
#include "qkdnoise/entanglement.hpp"
#include "qkdnoise/oracle_fock.hpp"

namespace qkdnoise::validation {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

CheckResult finish(std::string name, double worst, double tol, std::string detail = {}) {
    return {std::move(name), worst < tol, worst, tol, std::move(detail)};
}

double table_diff(const mdi::CoincidenceTable& a, const mdi::CoincidenceTable& b) {
    double d = 0.0;
    for (int Y = 0; Y < 2; ++Y)
        for (int Z = 0; Z < 2; ++Z)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) d = std::max(d, std::abs(a[Y][Z][i][j] - b[Y][Z][i][j]));
    return d;
}

mdi::DvMdiConfig mdi_config(double qa, double xia, double TA, double muA, double qb, double xib, double TB,
                            double muB, double eta_local, double eta_c, DetectorKind kind) {
    mdi::DvMdiConfig c;
    c.source_a = {qa, xia};
    c.source_b = {qb, xib};
    c.channel_a = ChannelParams(TA, muA);
    c.channel_b = ChannelParams(TB, muB);
    c.local_a = {DetectorKind::kPnr, eta_local};
    c.local_b = c.local_a;
    c.central = {kind, eta_c};
    c.validate();
    return c;
}

}  // namespace

CheckResult check_mc_source_mid(const ValidationOptions& opt) {
    oracle::SplitMix64 rng(oracle::SplitMix64::derive(opt.seed, 0x5eed, 0));
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    double worst = 0.0;
    for (int k = 0; k < opt.mc_configs; ++k) {
        dv::DvSourceMidConfig cfg;
        cfg.source = {draw(0.3, 1.0), draw(0.5, 1.0)};
        cfg.channel_a = ChannelParams(draw(0.3, 0.99), draw(0.0, 0.2));
        cfg.channel_b = ChannelParams(draw(0.3, 0.99), draw(0.0, 0.2));
        const DetectorKind kind = k % 2 == 0 ? DetectorKind::kPnr : DetectorKind::kOnOff;
        cfg.detector_a = {kind, draw(0.5, 1.0)};
        cfg.detector_b = {kind, draw(0.5, 1.0)};
        const dv::Acceptance a = dv::acceptance_and_qber(cfg);
        const oracle::McDvResult m = oracle::mc_dv_source_mid(cfg, opt.samples, opt.seed + k);
        worst = std::max(worst, std::abs(m.p_exp.value - a.p_exp) / m.p_exp.std_error);
        if (m.qber && a.qber) worst = std::max(worst, std::abs(m.qber->value - *a.qber) / m.qber->std_error);
    }
    return finish("mc_source_mid", worst, 4.0, fmt("%.0f configs, max |z|", opt.mc_configs));
}

CheckResult check_fock_mdi_rectilinear() {
    const mdi::DvMdiConfig cfgs[] = {
        mdi::DvMdiConfig::symmetric(1.0, 1.0, 0.8, 0.1, 1.0, DetectorKind::kPnr),
        mdi::DvMdiConfig::symmetric(0.6, 0.9, 0.5, 0.05, 0.8, DetectorKind::kPnr),
        mdi_config(0.8, 0.9, 0.7, 0.08, 0.5, 0.7, 0.9, 0.02, 0.9, 0.85, DetectorKind::kPnr),
        mdi::DvMdiConfig::symmetric(1.0, 1.0, 0.6, 0.02, 1.0, DetectorKind::kOnOff),
        mdi_config(0.9, 0.8, 0.75, 0.03, 0.7, 0.95, 0.6, 0.01, 1.0, 0.9, DetectorKind::kOnOff),
    };
    double worst = 0.0;
    for (const auto& c : cfgs) {
        const mdi::CoincidenceProbs p = mdi::coincidence_probs(c, mdi::MdiEngine::kAppendixSums);
        const auto t = oracle::fock_mdi_table(c, mdi::Basis::kRectilinear);
        worst = std::max({worst, std::abs(p.hv - t[0][1][0][0]), std::abs(p.hh - t[0][0][0][0])});
    }
    return finish("fock_vs_mdi_sums", worst, 1e-6, "5 configs, P_HV and P_HH");
}

CheckResult check_fock_mdi_diagonal() {
    const mdi::DvMdiConfig cfgs[] = {
        mdi::DvMdiConfig::symmetric(1.0, 0.9, 0.8, 0.01, 1.0, DetectorKind::kOnOff),
        mdi_config(1.0, 0.9, 0.7, 0.01, 1.0, 0.8, 0.85, 0.005, 1.0, 1.0, DetectorKind::kPnr),
    };
    double worst = 0.0;
    for (const auto& c : cfgs)
        worst = std::max(worst, table_diff(oracle::fock_mdi_table(c, mdi::Basis::kDiagonal, 1e-8),
                                           mdi::station_coincidence_table(c, mdi::Basis::kDiagonal)));
    return finish("fock_vs_station_diagonal", worst, 1e-6, "full table, diagonal basis");
}

CheckResult check_fock_di_events() {
    di::DiConfig cfgs[3];
    cfgs[0] = di::DiConfig::symmetric(0.9, 0.01);
    cfgs[1].channel_a = ChannelParams(0.85, 0.02);
    cfgs[1].channel_b = ChannelParams(0.95, 0.005);
    cfgs[2] = di::DiConfig::symmetric(0.7, 0.0);
    const double angles[3][2] = {{0.0, 3.0 * std::numbers::pi / 8.0}, {0.3, 1.1}, {-0.7, 0.2}};
    const int events[][4] = {{1, 0, 1, 0}, {1, 0, 0, 1}, {0, 1, 1, 0}, {0, 0, 0, 0}, {2, 1, 0, 1}, {1, 1, 1, 1}};
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
        const auto dist = oracle::fock_di_event_probs(cfgs[k], angles[k][0], angles[k][1]);
        for (const auto& e : events) {
            const oracle::Occupation key{e[0], e[1], e[2], e[3]};
            const auto it = dist.find(key);
            const double f = it == dist.end() ? 0.0 : it->second;
            worst = std::max(worst, std::abs(f - di::di_event_prob(e[0], e[1], e[2], e[3], angles[k][0],
                                                                    angles[k][1], cfgs[k])));
        }
    }
    return finish("fock_vs_di_sums", worst, 1e-6, "3 configs, 6 events each");
}

CheckResult check_mdi_engines() {
    const mdi::DvMdiConfig cfgs[] = {
        mdi::DvMdiConfig::symmetric(0.5, 0.9, 0.8, 0.05, 0.9, DetectorKind::kPnr),
        mdi_config(0.8, 0.9, 0.7, 0.03, 0.5, 0.7, 0.85, 0.02, 0.9, 0.8, DetectorKind::kOnOff),
    };
    double worst = 0.0;
    for (const auto& c : cfgs) {
        const auto a = mdi::coincidence_probs(c, mdi::MdiEngine::kAppendixSums);
        const auto s = mdi::coincidence_probs_station(c);
        worst = std::max({worst, std::abs(a.hv - s.hv), std::abs(a.hh - s.hh)});
    }
    return finish("mdi_sums_vs_station", worst, 1e-12);
}

CheckResult check_cv_closed_forms() {
    double worst = 0.0;
    for (double V : {1.0, 2.0, 10.0, 100.0, 1000.0})
        for (double T : {0.5, 0.7, 0.9, 0.99})
            for (double N : {1.0, 2.0, 5.0}) {
                const ChannelParams ch(T, (N - 1.0) / 2.0);
                const auto src = TmsvSourceModel::finite(V);
                worst = std::max(worst, std::abs(cv::key_rate_cv_source_closed(src, T, N) -
                                                 cv::key_rate_cv_general(src, ch, ch, cv::CvScheme::kSourceMid).key_rate));
                worst = std::max(worst, std::abs(cv::key_rate_cv_mdi_closed(src, T, N) -
                                                 cv::key_rate_cv_general(src, ch, ch, cv::CvScheme::kMdi).key_rate));
            }
    return finish("cv_closed_vs_pipeline", worst, 1e-8);
}

CheckResult check_cv_mdi_state() {
    double worst = 0.0;
    for (double V : {1.5, 10.0, 200.0})
        for (auto [ta, tb] : {std::pair{0.9, 0.9}, std::pair{0.6, 0.95}})
            for (auto [ma, mb] : {std::pair{0.0, 0.0}, std::pair{0.2, 0.05}}) {
                const ChannelParams a(ta, ma), b(tb, mb);
                const auto s1 = cv::mdi_conditional_state(V, a, b), s2 = cv::mdi_conditional_state_closed(V, a, b);
                worst = std::max(worst, (s1.cov - s2.cov).cwiseAbs().maxCoeff() / std::max(1.0, V));
            }
    return finish("cv_mdi_bell_state", worst, 1e-9);
}

CheckResult check_ln_direct() {
    double worst = 0.0;
    for (double V : {1.0, 3.0, 30.0})
        for (double T : {0.3, 0.6, 0.95})
            for (double N : {1.0, 1.5, 3.0}) {
                const ChannelParams ch(T, (N - 1.0) / 2.0);
                const auto src = TmsvSourceModel::finite(V);
                const auto s = cv::apply_thermal_channels(cv::tmsv_state(V), ch, ch);
                worst = std::max(worst, std::abs(ent::ln_source_scheme(src, T, N).log_negativity -
                                                 ent::ln_direct(s).log_negativity));
                const auto m = cv::mdi_conditional_state(V, ch, ch);
                worst = std::max(worst, std::abs(ent::ln_mdi_scheme(src, T, N).log_negativity -
                                                 ent::ln_direct(m).log_negativity));
            }
    return finish("ln_closed_vs_partial_transpose", worst, 1e-9);
}

CheckResult check_noise_collection() {
    double worst = 0.0;
    for (double mu : {0.001, 0.1, 1.0, 5.0})
        for (double T : {0.0, 0.5, 0.9})
            for (int i = 0; i < 3; ++i)
                worst = std::max(worst, std::abs(noise_collection_prob(i, mu, T, 0.8) -
                                                 thinned_thermal_pmf(i, mu, T, 0.8)));
    return finish("noise_sum_vs_closed_form", worst, 1e-10);
}

std::vector<CheckResult> run_all(const ValidationOptions& opt) {
    return {check_noise_collection(), check_mc_source_mid(opt), check_mdi_engines(), check_fock_mdi_rectilinear(),
            check_fock_mdi_diagonal(), check_fock_di_events(), check_cv_closed_forms(), check_cv_mdi_state(),
            check_ln_direct()};
}

}  // namespace qkdnoise::validation
