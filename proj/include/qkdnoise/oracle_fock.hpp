// Verification engines: exact truncated-Fock linear optics and Monte Carlo
// photon-event sampling. Both are deliberately written from the physical
// model (modes, beam splitters, photon counting) rather than from the
// closed-form probability expressions they are used to check.
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qkdnoise/core.hpp"
#include "qkdnoise/di_qkd.hpp"
#include "qkdnoise/dv_mdi.hpp"
#include "qkdnoise/dv_source_mid.hpp"

namespace qkdnoise::oracle {

using Occupation = std::vector<int>;
using cplx = std::complex<double>;

class FockStateVector {
public:
    FockStateVector(int modes, int cap);
    static FockStateVector vacuum(int modes, int cap);
    static FockStateVector basis(const Occupation& occ, int cap);

    int modes() const { return modes_; }
    int cap() const { return cap_; }
    const std::map<Occupation, cplx>& amplitudes() const { return amp_; }

    void add(const Occupation& occ, cplx a);
    double norm() const;  // sum of |amplitude|^2
    double truncation_loss() const { return truncation_loss_; }
    void add_truncation_loss(double p) { truncation_loss_ += p; }

private:
    int modes_;
    int cap_;
    std::map<Occupation, cplx> amp_;
    double truncation_loss_ = 0.0;
};

// transfer(d, k): creation operator of input mode k maps to
// sum_d transfer(d, k) b_d^dagger. The first `detectors.size()` entries of
// `detectors` list the output modes that are read out; all other output
// modes are traced over.
struct BellSpec {
    Eigen::MatrixXcd transfer;
    std::vector<int> detectors;
    DetectorKind kind = DetectorKind::kPnr;
    int cap = 12;  // per output mode
};

struct OutcomeMap {
    std::map<Occupation, double> probability;  // counts (PNR) or 0/1 clicks (on/off)
    double truncation_loss = 0.0;
    bool cap_warning = false;  // truncation loss above 1e-8
};

OutcomeMap fock_bell_measurement(const FockStateVector& input, const BellSpec& spec);

// Balanced two-port station with a polarizing split at each output:
// inputs (A_H, A_V, B_H, B_V), detectors (D1H, D1V, D2H, D2V).
BellSpec station_spec(DetectorKind kind);

// Exact central-station table (same layout as mdi::station_coincidence_table)
// from a full mode-level simulation: pair photon, bath photons as thermal
// number-state mixtures, channel beam splitters, station optics and detector
// loss modes. Bath occupations are truncated per mode by `bath_tail`; the
// discarded thermal mass is returned through `truncation_loss`.
mdi::CoincidenceTable fock_mdi_table(const mdi::DvMdiConfig& cfg, mdi::Basis basis,
                                     double bath_tail = 1e-9, double* truncation_loss = nullptr);

// Joint detector-count distribution (n1, n2, n3, n4) of the DI setup.
std::map<Occupation, double> fock_di_event_probs(const di::DiConfig& cfg, double theta_a, double theta_b,
                                                 double bath_tail = 1e-9,
                                                 double* truncation_loss = nullptr);
double fock_di_correlator(const di::DiConfig& cfg, double theta_a, double theta_b, double bath_tail = 1e-9);

// ---------------------------------------------------------------- Monte Carlo

// SplitMix64 used as a counter-based generator: draw n of stream s is
// mix64(seed_s + (n+1) * golden), with seed_s itself derived from the
// run seed, the shard index and the sample index. Every sample therefore
// owns a fixed sub-stream and results do not depend on thread count.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform();  // [0, 1)
    static std::uint64_t mix(std::uint64_t z);
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

private:
    std::uint64_t state_;
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t samples = 0;
    std::uint64_t seed = 0;
};

struct McDvResult {
    McEstimate p_exp;
    std::optional<McEstimate> qber;  // empty when nothing was accepted
    std::int64_t accepted = 0;
    std::int64_t errors = 0;
};

McDvResult mc_dv_source_mid(const dv::DvSourceMidConfig& cfg, std::int64_t samples, std::uint64_t seed,
                            Exec exec = Exec::kParallel, int shards = 64);

}  // namespace qkdnoise::oracle
