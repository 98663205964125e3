// Gaussian CV QKD with a TMSV source: covariance matrices, symplectic
// spectra and asymptotic key rates for the two central-station layouts.
#pragma once

#include <utility>

#include <Eigen/Dense>

#include "qkdnoise/core.hpp"

namespace qkdnoise::cv {

// Two-mode covariance matrix, ordering (x_A, p_A, x_B, p_B), shot-noise units.
struct GaussianState {
    Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();

    Eigen::Matrix2d block_a() const { return cov.topLeftCorner<2, 2>(); }
    Eigen::Matrix2d block_b() const { return cov.bottomRightCorner<2, 2>(); }
    Eigen::Matrix2d block_c() const { return cov.topRightCorner<2, 2>(); }
    // throws NonPhysicalStateError for an asymmetric matrix or a symplectic
    // eigenvalue below 1 - 1e-9
    void validate() const;
};

struct CvResult {
    double mutual_info = 0.0;
    double holevo = 0.0;
    double key_rate = 0.0;
};

enum class CvScheme { kSourceMid, kMdi };
enum class CvMode { kA, kB };

GaussianState tmsv_state(double V);
GaussianState apply_thermal_channels(const GaussianState& s, const ChannelParams& ch_a, const ChannelParams& ch_b);

// Conditional covariance of the other mode after an x homodyne on `measured`.
Eigen::Matrix2d condition_on_homodyne_x(const GaussianState& s, CvMode measured);

// Two-mode determinant through the block Schur complement.
double determinant(const GaussianState& s);
// (lambda_+, lambda_-) from the two-mode invariants.
std::pair<double, double> symplectic_eigenvalues(const GaussianState& s);
// Same spectrum without the physicality check (e.g. for partial transposes).
std::pair<double, double> symplectic_spectrum_unchecked(const Eigen::Matrix4d& cov);
// 1e-9 plus the rounding floor eps * max|cov|^2 of the determinant
double physicality_tolerance(const Eigen::Matrix4d& cov);
// single-mode symplectic eigenvalue sqrt(det)
double symplectic_eigenvalue(const Eigen::Matrix2d& m);

// Alice/Bob conditional state of the MDI layout. `mdi_conditional_state`
// builds the four-mode state (A, A', B', B), sends A' and B' through the
// channels, mixes them on a balanced beam splitter and conditions on x of
// one output and p of the other. The closed variant is the published
// conditional matrix.
GaussianState mdi_conditional_state(double V, const ChannelParams& ch_a, const ChannelParams& ch_b);
GaussianState mdi_conditional_state_closed(double V, const ChannelParams& ch_a, const ChannelParams& ch_b);

// Shared-state pipeline with Bob as the reference side. I_AB from x
// quadratures, chi = sum G((lambda_i - 1)/2) - G((lambda_3 - 1)/2).
CvResult key_rate_from_state(const GaussianState& s);

// General pipeline. Infinite source variance uses the analytic limits and
// requires symmetric channels.
CvResult key_rate_cv_general(const TmsvSourceModel& src, const ChannelParams& ch_a, const ChannelParams& ch_b,
                             CvScheme scheme);

// Closed forms for symmetric channels, N = 2 mu + 1. Results clamped at 0.
double key_rate_cv_source_closed(const TmsvSourceModel& src, double T, double N);
double key_rate_cv_mdi_closed(const TmsvSourceModel& src, double T, double N);

// Equal transmittance, unequal bath variances: (lambda_1, lambda_2, lambda_3).
struct SourceSpectrum {
    double lambda1, lambda2, lambda3;
};
SourceSpectrum source_spectrum_closed(double V, double T, double NA, double NB);
double key_rate_cv_source_closed_asym(double V, double T, double NA, double NB);

enum class CvThreshold { kNmax, kTmin, kEpsMax };
// kNmax and kEpsMax take T, kTmin takes N. Infinite-variance thresholds.
double cv_threshold(CvScheme scheme, CvThreshold kind, double param);

}  // namespace qkdnoise::cv
