// Parameter sweeps and threshold solvers over all key-rate models.
#pragma once

#include <string>
#include <vector>

#include "qkdnoise/core.hpp"
#include "qkdnoise/di_qkd.hpp"
#include "qkdnoise/dv_mdi.hpp"

namespace qkdnoise::scan {

enum class Protocol {
    kSixStateSourceMid,
    kBb84SourceMid,
    kSixStateMdi,
    kBb84Mdi,
    kCvSourceMid,
    kCvMdi,
    kDi,
};

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);  // throws ConfigError
bool is_dv(Protocol p);
bool is_mdi(Protocol p);

enum class Status { kConverged, kNoRoot, kInsecureEverywhere, kUnbounded };
std::string to_string(Status s);

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
    Status status = Status::kConverged;
};

// Symmetric setting: T_A = T_B = T, mu_A = mu_B = mu.
struct CurveSpec {
    Protocol protocol = Protocol::kSixStateSourceMid;
    DetectorKind detector = DetectorKind::kPnr;  // trusted-party (source-mid) or central (MDI) detectors
    double q = 1.0;
    double xi = 1.0;
    double eta = 1.0;
    TmsvSourceModel cv_source = TmsvSourceModel::infinite();
    mdi::MdiEngine mdi_engine = mdi::MdiEngine::kAuto;
    di::DiEngine di_engine = di::DiEngine::kChannelModel;
    TruncationPolicy truncation;

    std::vector<double> grid;  // swept values, strictly increasing
    double tolerance = 1e-6;   // relative bracket width of the solvers
    double mu_cap = 1e6;       // largest mean noise photon number tried
    Exec exec = Exec::kParallel;

    void validate() const;
};

// K > 1e-12 bits per use
constexpr double kSecureThreshold = 1e-12;

double key_rate_at(const CurveSpec& spec, double T, double mu);
bool secure_at(const CurveSpec& spec, double T, double mu);

std::vector<double> log_grid(double lo, double hi, int n);
std::vector<double> linear_grid(double lo, double hi, int n);
// 100 log-spaced points on [0.01, 0.999]
std::vector<double> default_t_grid();

// Largest secure mu at fixed T; no_root if insecure at mu = 0, unbounded if
// still secure at mu_cap.
CurvePoint mu_max_at(const CurveSpec& spec, double T);
std::vector<CurvePoint> mu_max_curve(const CurveSpec& spec);

// Smallest secure T at fixed mu (x = mu, y = T_min).
CurvePoint t_min_at(const CurveSpec& spec, double mu);

// Key rate along the T grid at fixed mu (status always converged).
std::vector<CurvePoint> key_rate_curve(const CurveSpec& spec, double mu);

// Minimal q (resp. xi) for which the DV mu_max reaches the reference mu_max
// at the same T. The reference is the CV scheme of the same layout unless
// overridden.
struct BenchmarkSpec {
    CurveSpec dv;
    CurveSpec reference;
};
BenchmarkSpec cv_benchmark(const CurveSpec& dv);
std::vector<CurvePoint> min_q_curve(const BenchmarkSpec& spec);
std::vector<CurvePoint> min_xi_curve(const BenchmarkSpec& spec);
// Smallest q (xi) whose mu_max reaches the reference's. Status no_root with
// y = 0 when the reference has no key at T, so any positive value suffices.
CurvePoint min_q_at(const BenchmarkSpec& spec, double T);
CurvePoint min_xi_at(const BenchmarkSpec& spec, double T);

// Largest T on [t_lo, t_hi] below which the DV scheme tolerates at least as
// much noise as the reference; assumes a single crossing.
CurvePoint advantage_cutoff(const BenchmarkSpec& spec, double t_lo, double t_hi);

// Minimal source-mid pair probability q with source-mid mu_max >= MDI mu_max.
// `source_mid` supplies everything but q; the MDI side uses the same
// detectors, xi and eta with deterministic sources.
CurvePoint source_vs_mdi_q_at(const CurveSpec& source_mid, double T);
std::vector<CurvePoint> source_vs_mdi_q_threshold(const CurveSpec& source_mid);

enum class Region { kBothInsecure, kDvOnly, kDvAhead, kCvAhead };
std::string to_string(Region r);

struct MapCell {
    double T = 0.0;
    double mu = 0.0;
    double ratio = 0.0;  // K_CV / K_DV; +inf when only CV is secure, NaN when neither
    Region region = Region::kBothInsecure;
};

struct MapSpec {
    CurveSpec cv;  // CV scheme
    CurveSpec dv;  // DV scheme
    std::vector<double> t_grid;
    std::vector<double> mu_grid;
};
// Ideal source-mid six-state vs ideal infinite-variance CV on a 200 x 200
// grid T in [0.01, 1], mu in [0, 0.05].
MapSpec default_map_spec();
std::vector<MapCell> key_ratio_map(const MapSpec& spec, Exec exec = Exec::kParallel);

}  // namespace qkdnoise::scan
