#include "qkdnoise/entanglement.hpp"

#include <cmath>
#include <limits>

namespace qkdnoise::ent {

namespace {

constexpr const char* kModule = "entanglement_measures";

LnResult from_nu(double nu) { return {std::max(0.0, -std::log2(nu)), nu}; }

void check_tn(double T, double N) {
    if (!(T >= 0.0 && T <= 1.0)) throw DomainError(kModule, "T must lie in [0, 1]");
    if (!(N >= 1.0)) throw DomainError(kModule, "N must be >= 1");
}

}  // namespace

double min_pt_symplectic_eigenvalue(const cv::GaussianState& s) {
    Eigen::Matrix4d pt = s.cov;
    pt.row(3) *= -1.0;
    pt.col(3) *= -1.0;
    return cv::symplectic_spectrum_unchecked(pt).second;
}

LnResult ln_direct(const cv::GaussianState& s) { return from_nu(min_pt_symplectic_eigenvalue(s)); }

LnResult ln_source_scheme(const TmsvSourceModel& src, double T, double N) {
    src.validate();
    check_tn(T, N);
    const double u = N * (1.0 - T);
    if (src.infinite_variance) return from_nu(u);
    const double V = src.variance;
    const double bracket = u * u + 2.0 * u * T * V - 2.0 * T * (T * V + u) * std::sqrt(V * V - 1.0) +
                           T * T * (2.0 * V * V - 1.0);
    return from_nu(std::sqrt(std::max(0.0, bracket)));
}

LnResult ln_mdi_scheme(const TmsvSourceModel& src, double T, double N) {
    src.validate();
    check_tn(T, N);
    const double u = N * (1.0 - T);
    if (src.infinite_variance) return from_nu(u / T);
    const double V = src.variance;
    return from_nu((T + u * V) / (T * V + u));
}

double ln_breaking_noise(cv::CvScheme scheme, const TmsvSourceModel& src, double T) {
    src.validate();
    if (!(T >= 0.0 && T <= 1.0)) throw DomainError(kModule, "T must lie in [0, 1]");
    if (T == 1.0) return std::numeric_limits<double>::infinity();
    if (scheme == cv::CvScheme::kMdi) return T / (1.0 - T);
    if (src.infinite_variance) return 1.0 / (1.0 - T);
    const double V = src.variance;
    return (T * std::sqrt(V * V - 1.0) - T * V + 1.0) / (1.0 - T);
}

}  // namespace qkdnoise::ent
