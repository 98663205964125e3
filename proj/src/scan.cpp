#include "qkdnoise/scan.hpp"

#include <cmath>
#include <exception>
#include <limits>

#include "qkdnoise/cv_protocols.hpp"
#include "qkdnoise/dv_source_mid.hpp"

namespace qkdnoise::scan {

namespace {

constexpr const char* kModule = "scan";
constexpr double kAbsTol = 1e-15;
constexpr double kTFloor = 1e-4;

// Runs f(0..n-1) and rethrows the first exception after the loop.
template <class F>
void for_each_index(int n, Exec exec, F&& f) {
    std::exception_ptr err;
    if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n; ++i) {
            try {
                f(i);
            } catch (...) {
#pragma omp critical(qkdnoise_scan_error)
                if (!err) err = std::current_exception();
            }
        }
    } else {
        for (int i = 0; i < n; ++i) f(i);
    }
    if (err) std::rethrow_exception(err);
}

template <class F>
std::vector<CurvePoint> over_grid(const CurveSpec& spec, F&& f) {
    spec.validate();
    std::vector<CurvePoint> out(spec.grid.size());
    for_each_index(static_cast<int>(spec.grid.size()), spec.exec, [&](int i) { out[i] = f(spec.grid[i]); });
    return out;
}

dv::DvProtocol dv_protocol(Protocol p) {
    return (p == Protocol::kBb84SourceMid || p == Protocol::kBb84Mdi) ? dv::DvProtocol::kBb84
                                                                       : dv::DvProtocol::kSixState;
}

// Minimal value of a parameter in (0, 1] for which `ok` holds; ok is
// assumed monotone increasing.
CurvePoint min_parameter(double T, double tol, const std::function<bool(double)>& ok) {
    if (!ok(1.0)) return {T, 1.0, Status::kInsecureEverywhere};
    if (ok(0.0)) return {T, 0.0, Status::kConverged};
    const double v = bisect_predicate([&](double x) { return !ok(x); }, 0.0, 1.0, kAbsTol, tol);
    return {T, v, Status::kConverged};
}

bool reaches(const CurvePoint& dv, const CurvePoint& ref) {
    if (dv.status == Status::kUnbounded) return true;
    if (dv.status != Status::kConverged) return false;
    if (ref.status == Status::kUnbounded) return false;
    return dv.y >= ref.y;
}

double ref_target(const CurvePoint& ref) { return ref.status == Status::kNoRoot ? 0.0 : ref.y; }

}  // namespace

std::string to_string(Protocol p) {
    switch (p) {
        case Protocol::kSixStateSourceMid: return "six-state-source-mid";
        case Protocol::kBb84SourceMid: return "bb84-source-mid";
        case Protocol::kSixStateMdi: return "six-state-mdi";
        case Protocol::kBb84Mdi: return "bb84-mdi";
        case Protocol::kCvSourceMid: return "cv-source-mid";
        case Protocol::kCvMdi: return "cv-mdi";
        case Protocol::kDi: return "di";
    }
    return "?";
}

Protocol protocol_from_string(const std::string& s) {
    for (Protocol p : {Protocol::kSixStateSourceMid, Protocol::kBb84SourceMid, Protocol::kSixStateMdi,
                       Protocol::kBb84Mdi, Protocol::kCvSourceMid, Protocol::kCvMdi, Protocol::kDi})
        if (to_string(p) == s) return p;
    throw ConfigError("unknown protocol '" + s + "'");
}

bool is_dv(Protocol p) {
    return p == Protocol::kSixStateSourceMid || p == Protocol::kBb84SourceMid || p == Protocol::kSixStateMdi ||
           p == Protocol::kBb84Mdi;
}

bool is_mdi(Protocol p) { return p == Protocol::kSixStateMdi || p == Protocol::kBb84Mdi || p == Protocol::kCvMdi; }

std::string to_string(Status s) {
    switch (s) {
        case Status::kConverged: return "converged";
        case Status::kNoRoot: return "no_root";
        case Status::kInsecureEverywhere: return "insecure_everywhere";
        case Status::kUnbounded: return "unbounded";
    }
    return "?";
}

std::string to_string(Region r) {
    switch (r) {
        case Region::kBothInsecure: return "both_insecure";
        case Region::kDvOnly: return "dv_only";
        case Region::kDvAhead: return "dv_ahead";
        case Region::kCvAhead: return "cv_ahead";
    }
    return "?";
}

void CurveSpec::validate() const {
    PairSourceModel{q, xi}.validate();
    DetectorModel{detector, eta}.validate();
    cv_source.validate();
    truncation.validate();
    if (!(tolerance > 0.0)) throw DomainError(kModule, "solver tolerance must be positive");
    if (!(mu_cap > 0.0)) throw DomainError(kModule, "mu_cap must be positive");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw DomainError(kModule, "grid must be strictly increasing");
}

double key_rate_at(const CurveSpec& spec, double T, double mu) {
    switch (spec.protocol) {
        case Protocol::kSixStateSourceMid:
        case Protocol::kBb84SourceMid: {
            auto cfg = dv::DvSourceMidConfig::symmetric(spec.q, spec.xi, T, mu, spec.eta, spec.detector);
            cfg.truncation = spec.truncation;
            return dv::evaluate(cfg, dv_protocol(spec.protocol)).key_rate;
        }
        case Protocol::kSixStateMdi:
        case Protocol::kBb84Mdi: {
            auto cfg = mdi::DvMdiConfig::symmetric(spec.q, spec.xi, T, mu, spec.eta, spec.detector);
            cfg.truncation = spec.truncation;
            const dv::Acceptance a = mdi::mdi_acceptance_and_qber(cfg, spec.mdi_engine);
            return dv::key_rate(dv_protocol(spec.protocol), a.p_exp, a.qber);
        }
        case Protocol::kCvSourceMid:
        case Protocol::kCvMdi: {
            const ChannelParams ch(T, mu);
            const auto scheme = spec.protocol == Protocol::kCvMdi ? cv::CvScheme::kMdi : cv::CvScheme::kSourceMid;
            return cv::key_rate_cv_general(spec.cv_source, ch, ch, scheme).key_rate;
        }
        case Protocol::kDi: {
            auto cfg = di::DiConfig::symmetric(T, mu);
            cfg.truncation = spec.truncation;
            return di::di_chsh_and_key(cfg, spec.di_engine).key_rate;
        }
    }
    throw DomainError(kModule, "unknown protocol");
}

bool secure_at(const CurveSpec& spec, double T, double mu) { return key_rate_at(spec, T, mu) > kSecureThreshold; }

std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0.0 && hi > lo) || n < 2) throw DomainError(kModule, "log grid needs 0 < lo < hi and n >= 2");
    std::vector<double> g(n);
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * i / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

std::vector<double> linear_grid(double lo, double hi, int n) {
    if (!(hi > lo) || n < 2) throw DomainError(kModule, "linear grid needs lo < hi and n >= 2");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    g.back() = hi;
    return g;
}

std::vector<double> default_t_grid() { return log_grid(0.01, 0.999, 100); }

CurvePoint mu_max_at(const CurveSpec& spec, double T) {
    if (!secure_at(spec, T, 0.0)) return {T, 0.0, Status::kNoRoot};
    // grow the upper bracket until the key vanishes
    double lo = 0.0, hi = 1e-6;
    while (secure_at(spec, T, hi)) {
        lo = hi;
        if (hi >= spec.mu_cap) return {T, spec.mu_cap, Status::kUnbounded};
        hi = std::min(2.0 * hi, spec.mu_cap);
    }
    const double mu = bisect_predicate([&](double m) { return secure_at(spec, T, m); }, lo, hi, kAbsTol,
                                       spec.tolerance);
    return {T, mu, Status::kConverged};
}

std::vector<CurvePoint> mu_max_curve(const CurveSpec& spec) {
    return over_grid(spec, [&](double T) { return mu_max_at(spec, T); });
}

CurvePoint t_min_at(const CurveSpec& spec, double mu) {
    if (!secure_at(spec, 1.0, mu)) return {mu, 1.0, Status::kInsecureEverywhere};
    if (secure_at(spec, kTFloor, mu)) return {mu, kTFloor, Status::kUnbounded};
    const double T = bisect_predicate([&](double t) { return !secure_at(spec, t, mu); }, kTFloor, 1.0, kAbsTol,
                                      spec.tolerance);
    return {mu, T, Status::kConverged};
}

std::vector<CurvePoint> key_rate_curve(const CurveSpec& spec, double mu) {
    return over_grid(spec, [&](double T) { return CurvePoint{T, key_rate_at(spec, T, mu), Status::kConverged}; });
}

BenchmarkSpec cv_benchmark(const CurveSpec& dv) {
    BenchmarkSpec b;
    b.dv = dv;
    b.reference = dv;
    b.reference.protocol = is_mdi(dv.protocol) ? Protocol::kCvMdi : Protocol::kCvSourceMid;
    b.reference.cv_source = TmsvSourceModel::infinite();
    return b;
}

CurvePoint min_q_at(const BenchmarkSpec& spec, double T) {
    const CurvePoint ref = mu_max_at(spec.reference, T);
    if (ref.status == Status::kNoRoot) return {T, 0.0, Status::kNoRoot};
    const double target = ref_target(ref);
    CurveSpec dv = spec.dv;
    return min_parameter(T, dv.tolerance, [&](double q) {
        dv.q = q;
        const CurvePoint m = mu_max_at(dv, T);
        return m.status == Status::kUnbounded || (m.status == Status::kConverged && m.y >= target) ||
               (target == 0.0 && m.status != Status::kNoRoot);
    });
}

CurvePoint min_xi_at(const BenchmarkSpec& spec, double T) {
    const CurvePoint ref = mu_max_at(spec.reference, T);
    if (ref.status == Status::kNoRoot) return {T, 0.0, Status::kNoRoot};
    const double target = ref_target(ref);
    CurveSpec dv = spec.dv;
    return min_parameter(T, dv.tolerance, [&](double xi) {
        dv.xi = xi;
        const CurvePoint m = mu_max_at(dv, T);
        return m.status == Status::kUnbounded || (m.status == Status::kConverged && m.y >= target) ||
               (target == 0.0 && m.status != Status::kNoRoot);
    });
}

std::vector<CurvePoint> min_q_curve(const BenchmarkSpec& spec) {
    return over_grid(spec.dv, [&](double T) { return min_q_at(spec, T); });
}

std::vector<CurvePoint> min_xi_curve(const BenchmarkSpec& spec) {
    return over_grid(spec.dv, [&](double T) { return min_xi_at(spec, T); });
}

CurvePoint advantage_cutoff(const BenchmarkSpec& spec, double t_lo, double t_hi) {
    if (!(t_lo > 0.0 && t_hi > t_lo && t_hi <= 1.0)) throw DomainError(kModule, "need 0 < t_lo < t_hi <= 1");
    auto ahead = [&](double T) {
        const CurvePoint ref = mu_max_at(spec.reference, T);
        if (ref.status == Status::kNoRoot) return mu_max_at(spec.dv, T).status != Status::kNoRoot;
        return reaches(mu_max_at(spec.dv, T), ref);
    };
    if (!ahead(t_lo)) return {t_lo, t_lo, Status::kInsecureEverywhere};
    if (ahead(t_hi)) return {t_hi, t_hi, Status::kUnbounded};
    const double T = bisect_predicate(ahead, t_lo, t_hi, kAbsTol, spec.dv.tolerance);
    return {T, T, Status::kConverged};
}

CurvePoint source_vs_mdi_q_at(const CurveSpec& source_mid, double T) {
    if (is_mdi(source_mid.protocol) || !is_dv(source_mid.protocol))
        throw DomainError(kModule, "source_vs_mdi_q expects a DV source-in-the-middle protocol");
    CurveSpec m = source_mid;
    m.protocol = source_mid.protocol == Protocol::kBb84SourceMid ? Protocol::kBb84Mdi : Protocol::kSixStateMdi;
    m.q = 1.0;
    BenchmarkSpec b{source_mid, m};
    return min_q_at(b, T);
}

std::vector<CurvePoint> source_vs_mdi_q_threshold(const CurveSpec& source_mid) {
    return over_grid(source_mid, [&](double T) { return source_vs_mdi_q_at(source_mid, T); });
}

MapSpec default_map_spec() {
    MapSpec m;
    m.cv.protocol = Protocol::kCvSourceMid;
    m.dv.protocol = Protocol::kSixStateSourceMid;
    m.t_grid = linear_grid(0.01, 1.0, 200);
    m.mu_grid = linear_grid(0.0, 0.05, 200);
    return m;
}

std::vector<MapCell> key_ratio_map(const MapSpec& spec, Exec exec) {
    spec.cv.validate();
    spec.dv.validate();
    const int nt = static_cast<int>(spec.t_grid.size()), nm = static_cast<int>(spec.mu_grid.size());
    std::vector<MapCell> cells(static_cast<std::size_t>(nt) * nm);
    for_each_index(nt * nm, exec, [&](int idx) {
        const double T = spec.t_grid[idx / nm], mu = spec.mu_grid[idx % nm];
        const double kc = key_rate_at(spec.cv, T, mu), kd = key_rate_at(spec.dv, T, mu);
        const bool cs = kc > kSecureThreshold, ds = kd > kSecureThreshold;
        MapCell c{T, mu, 0.0, Region::kBothInsecure};
        if (!cs && !ds) {
            c.ratio = std::numeric_limits<double>::quiet_NaN();
        } else if (!cs) {
            c.region = Region::kDvOnly;
        } else if (!ds) {
            c.ratio = std::numeric_limits<double>::infinity();
            c.region = Region::kCvAhead;
        } else {
            c.ratio = kc / kd;
            c.region = c.ratio > 1.0 ? Region::kCvAhead : Region::kDvAhead;
        }
        cells[idx] = c;
    });
    return cells;
}

}  // namespace qkdnoise::scan
