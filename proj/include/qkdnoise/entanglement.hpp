// Gaussian logarithmic negativity and entanglement-breaking noise levels.
#pragma once

#include "qkdnoise/core.hpp"
#include "qkdnoise/cv_protocols.hpp"

namespace qkdnoise::ent {

struct LnResult {
    double log_negativity = 0.0;  // max(0, -log2 nu_minus)
    double nu_minus = 1.0;
};

// Smallest symplectic eigenvalue of the partial transpose (p_B -> -p_B).
double min_pt_symplectic_eigenvalue(const cv::GaussianState& s);
LnResult ln_direct(const cv::GaussianState& s);

// Closed forms for symmetric channels, N = 2 mu + 1.
LnResult ln_source_scheme(const TmsvSourceModel& src, double T, double N);
LnResult ln_mdi_scheme(const TmsvSourceModel& src, double T, double N);

// Bath variance at which LN reaches zero; +inf at T = 1.
double ln_breaking_noise(cv::CvScheme scheme, const TmsvSourceModel& src, double T);

}  // namespace qkdnoise::ent
