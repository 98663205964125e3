// DV detectors-in-the-middle scheme: two pair sources, Bell-type central station.
#pragma once

#include <array>
#include <optional>

#include "qkdnoise/core.hpp"
#include "qkdnoise/dv_source_mid.hpp"

namespace qkdnoise::mdi {

struct DvMdiConfig {
    PairSourceModel source_a;
    PairSourceModel source_b;
    ChannelParams channel_a;
    ChannelParams channel_b;
    DetectorModel local_a;
    DetectorModel local_b;
    DetectorModel central;  // eta_C and PNR / on-off
    TruncationPolicy truncation;

    static DvMdiConfig symmetric(double q, double xi, double T, double mu, double eta,
                                 DetectorKind central_kind);
    void validate() const;
    // q_A xi_A eta_A q_B xi_B eta_B
    double local_prefactor() const;
};

// Alice H / Bob V and Alice H / Bob H, both with a D1H-D1V coincidence.
struct CoincidenceProbs {
    double hv = 0.0;
    double hh = 0.0;
};

enum class MdiEngine {
    kAppendixSums,  // truncated four-index noise sums
    kStationModel,  // exact per-mode station input distributions
    kAuto,          // nested sums when their cost is small, station model otherwise
};

// Nested-sum evaluation. The outer noise index is split across threads
// for Exec::kParallel; partial sums are reduced in index order so both
// paths return identical bits.
CoincidenceProbs coincidence_probs(const DvMdiConfig& cfg, Exec exec = Exec::kParallel);
CoincidenceProbs coincidence_probs_station(const DvMdiConfig& cfg);
CoincidenceProbs coincidence_probs(const DvMdiConfig& cfg, MdiEngine engine);

// Number of kept values per noise index for the nested sums.
int appendix_terms_per_index(const DvMdiConfig& cfg);
bool appendix_sums_affordable(const DvMdiConfig& cfg);

enum class Basis { kRectilinear, kDiagonal };

// table[Y][Z][i][j]: Alice's local outcome Y and Bob's Z (index 0/1 in the
// chosen basis), central coincidence in D_(i+1)H and D_(j+1)V. Each entry
// already contains the 1/4 from the two local outcome probabilities.
using CoincidenceTable = std::array<std::array<std::array<std::array<double, 2>, 2>, 2>, 2>;
CoincidenceTable station_coincidence_table(const DvMdiConfig& cfg, Basis basis);

// 8-term symmetric reduction
dv::Acceptance mdi_acceptance_and_qber(const DvMdiConfig& cfg, MdiEngine engine = MdiEngine::kAppendixSums);
// 16-term form, valid for asymmetric arms
dv::Acceptance mdi_acceptance_and_qber_general(const DvMdiConfig& cfg);
std::optional<double> qber_other_bases(const DvMdiConfig& cfg);

double mu_max_asymptote_mdi(double T, double q_th);

}  // namespace qkdnoise::mdi
