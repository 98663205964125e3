#include "qkdnoise/cv_protocols.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace qkdnoise::cv {

namespace {

constexpr const char* kModule = "cv_protocols";
constexpr double kPhysTol = 1e-9;

double g_of_lambda(double lambda) { return bosonic_entropy(std::max(0.0, (lambda - 1.0) / 2.0)); }

bool symmetric_channels(const ChannelParams& a, const ChannelParams& b) {
    return a.transmittance == b.transmittance && a.mean_noise_photons == b.mean_noise_photons;
}

void check_variance(double V) {
    if (!(V >= 1.0) || !std::isfinite(V)) throw DomainError(kModule, "TMSV variance must be finite and >= 1");
}

double infinite_limit(CvScheme scheme, double T, double N) {
    const double t = scheme == CvScheme::kSourceMid ? 1.0 : T;
    return std::log2(t / (N * (1.0 - T))) - 1.0 / std::numbers::ln2;
}

}  // namespace

void GaussianState::validate() const {
    if (!cov.isApprox(cov.transpose(), 1e-12) && (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw NonPhysicalStateError(kModule, "covariance matrix is not symmetric");
    const auto [lp, lm] = symplectic_eigenvalues(*this);
    (void)lp;
    if (!(lm >= 1.0 - physicality_tolerance(cov))) throw NonPhysicalStateError(kModule, "symplectic eigenvalue below 1");
}

GaussianState tmsv_state(double V) {
    check_variance(V);
    const double c = std::sqrt(V * V - 1.0);
    GaussianState s;
    s.cov.setZero();
    s.cov.diagonal().setConstant(V);
    s.cov(0, 2) = s.cov(2, 0) = c;
    s.cov(1, 3) = s.cov(3, 1) = -c;
    return s;
}

GaussianState apply_thermal_channels(const GaussianState& s, const ChannelParams& ch_a, const ChannelParams& ch_b) {
    ch_a.validate();
    ch_b.validate();
    const double t[2] = {ch_a.transmittance, ch_b.transmittance};
    const double n[2] = {ch_a.quadrature_noise_variance(), ch_b.quadrature_noise_variance()};
    GaussianState out = s;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const int mi = i / 2, mj = j / 2;
            out.cov(i, j) = std::sqrt(t[mi] * t[mj]) * s.cov(i, j);
            if (i == j) out.cov(i, j) += (1.0 - t[mi]) * n[mi];
        }
    return out;
}

Eigen::Matrix2d condition_on_homodyne_x(const GaussianState& s, CvMode measured) {
    const Eigen::Matrix2d keep = measured == CvMode::kB ? s.block_a() : s.block_b();
    const Eigen::Matrix2d meas = measured == CvMode::kB ? s.block_b() : s.block_a();
    const Eigen::Matrix2d c = measured == CvMode::kB ? s.block_c() : Eigen::Matrix2d(s.block_c().transpose());
    if (meas(0, 0) == 0.0) throw NonPhysicalStateError(kModule, "degenerate x variance on the measured mode");
    // (X gamma X)^MP has the single entry 1 / gamma_xx
    Eigen::Matrix2d pinv = Eigen::Matrix2d::Zero();
    pinv(0, 0) = 1.0 / meas(0, 0);
    return keep - c * pinv * c.transpose();
}

double determinant(const GaussianState& s) {
    // det A * det(B - C^T A^-1 C); the plain 4x4 expansion loses most digits
    // once the entries grow to ~V while the determinant stays O(1)
    const Eigen::Matrix2d A = s.block_a(), B = s.block_b(), C = s.block_c();
    const double da = A.determinant();
    if (da <= 0.0) return s.cov.determinant();
    const Eigen::Matrix2d schur = B - C.transpose() * A.inverse() * C;
    return da * schur.determinant();
}

std::pair<double, double> symplectic_spectrum_unchecked(const Eigen::Matrix4d& cov) {
    // lambda_+ from the spectrum of S Omega^T S Omega S, S = cov^(1/2): the
    // eigenvalues are lambda_i^2, each twice, and stay accurate where the two
    // symplectic eigenvalues coincide. lambda_- then follows from the determinant.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> root(cov);
    if (root.info() != Eigen::Success || root.eigenvalues().minCoeff() <= 0.0)
        throw NonPhysicalStateError(kModule, "covariance matrix is not positive definite");
    const Eigen::Matrix4d S = root.operatorSqrt();
    Eigen::Matrix4d omega = Eigen::Matrix4d::Zero();
    omega(0, 1) = omega(2, 3) = 1.0;
    omega(1, 0) = omega(3, 2) = -1.0;
    const Eigen::Matrix4d a = S * omega * S;
    const Eigen::Matrix4d m = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    const double lp = std::sqrt(std::max(0.0, es.eigenvalues()(3)));
    GaussianState g;
    g.cov = cov;
    const double det = determinant(g);
    const double lm = lp > 0.0 ? std::sqrt(std::max(0.0, det)) / lp : 0.0;
    return {lp, lm};
}

double physicality_tolerance(const Eigen::Matrix4d& cov) {
    // entries are rounded, so det carries a relative error of order eps * |cov|^2
    const double scale = cov.cwiseAbs().maxCoeff();
    return kPhysTol + 16.0 * std::numeric_limits<double>::epsilon() * scale * scale;
}

std::pair<double, double> symplectic_eigenvalues(const GaussianState& s) {
    const auto [lp, lm] = symplectic_spectrum_unchecked(s.cov);
    if (!(lm >= 1.0 - physicality_tolerance(s.cov)))
        throw NonPhysicalStateError(kModule, "symplectic eigenvalue below 1");
    return {lp, lm};
}

double symplectic_eigenvalue(const Eigen::Matrix2d& m) {
    const double det = m.determinant();
    if (!(det >= 0.0)) throw NonPhysicalStateError(kModule, "negative single-mode determinant");
    return std::sqrt(det);
}

GaussianState mdi_conditional_state(double V, const ChannelParams& ch_a, const ChannelParams& ch_b) {
    check_variance(V);
    ch_a.validate();
    ch_b.validate();
    // modes 0 A, 1 A', 2 B', 3 B; quadratures (x, p) per mode
    using M8 = Eigen::Matrix<double, 8, 8>;
    M8 g = M8::Zero();
    const double c = std::sqrt(V * V - 1.0);
    g.diagonal().setConstant(V);
    auto corr = [&](int m1, int m2) {
        g(2 * m1, 2 * m2) = g(2 * m2, 2 * m1) = c;
        g(2 * m1 + 1, 2 * m2 + 1) = g(2 * m2 + 1, 2 * m1 + 1) = -c;
    };
    corr(0, 1);
    corr(3, 2);
    // thermal channels on A' and B'
    M8 L = M8::Identity(), add = M8::Zero();
    const ChannelParams* ch[2] = {&ch_a, &ch_b};
    for (int k = 0; k < 2; ++k) {
        const int m = 1 + k;
        for (int q = 0; q < 2; ++q) {
            L(2 * m + q, 2 * m + q) = std::sqrt(ch[k]->transmittance);
            add(2 * m + q, 2 * m + q) = (1.0 - ch[k]->transmittance) * ch[k]->quadrature_noise_variance();
        }
    }
    g = L * g * L.transpose() + add;
    // balanced beam splitter: C = (A' - B')/sqrt 2, D = (A' + B')/sqrt 2
    M8 S = M8::Identity();
    const double r = 1.0 / std::sqrt(2.0);
    for (int q = 0; q < 2; ++q) {
        S(2 + q, 2 + q) = r;
        S(2 + q, 4 + q) = -r;
        S(4 + q, 2 + q) = r;
        S(4 + q, 4 + q) = r;
    }
    g = S * g * S.transpose();
    // condition on p_C (index 3) and x_D (index 4)
    const int rest[4] = {0, 1, 6, 7};
    const int meas[2] = {3, 4};
    Eigen::Matrix4d grr;
    Eigen::Matrix<double, 4, 2> grm;
    Eigen::Matrix2d gmm;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) grr(i, j) = g(rest[i], rest[j]);
        for (int j = 0; j < 2; ++j) grm(i, j) = g(rest[i], meas[j]);
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) gmm(i, j) = g(meas[i], meas[j]);
    GaussianState out;
    out.cov = grr - grm * gmm.inverse() * grm.transpose();
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

GaussianState mdi_conditional_state_closed(double V, const ChannelParams& ch_a, const ChannelParams& ch_b) {
    check_variance(V);
    const double TA = ch_a.transmittance, TB = ch_b.transmittance;
    const double NA = ch_a.quadrature_noise_variance(), NB = ch_b.quadrature_noise_variance();
    const double den = V * (TA + TB) + (1.0 - TA) * NA + (1.0 - TB) * NB;
    const double a = V - TA * (V * V - 1.0) / den;
    const double b = V - TB * (V * V - 1.0) / den;
    const double c = -std::sqrt(TA * TB) * (V * V - 1.0) / den;
    GaussianState s;
    s.cov.setZero();
    s.cov(0, 0) = s.cov(1, 1) = a;
    s.cov(2, 2) = s.cov(3, 3) = b;
    s.cov(0, 2) = s.cov(2, 0) = c;
    s.cov(1, 3) = s.cov(3, 1) = -c;
    return s;
}

CvResult key_rate_from_state(const GaussianState& s) {
    const auto [l1, l2] = symplectic_eigenvalues(s);
    const Eigen::Matrix2d cond = condition_on_homodyne_x(s, CvMode::kB);
    const double l3 = symplectic_eigenvalue(cond);
    CvResult r;
    r.mutual_info = 0.5 * std::log2(s.cov(0, 0) / cond(0, 0));
    r.holevo = g_of_lambda(l1) + g_of_lambda(l2) - g_of_lambda(l3);
    r.key_rate = std::max(0.0, r.mutual_info - r.holevo);
    return r;
}

CvResult key_rate_cv_general(const TmsvSourceModel& src, const ChannelParams& ch_a, const ChannelParams& ch_b,
                             CvScheme scheme) {
    src.validate();
    ch_a.validate();
    ch_b.validate();
    CvResult r;
    if (src.infinite_variance) {
        if (!symmetric_channels(ch_a, ch_b))
            throw DomainError(kModule, "the infinite-variance limit needs symmetric channels");
        r.key_rate = std::max(0.0, infinite_limit(scheme, ch_a.transmittance, ch_a.quadrature_noise_variance()));
        r.mutual_info = std::numeric_limits<double>::infinity();
        r.holevo = std::numeric_limits<double>::infinity();
        return r;
    }
    const double V = src.variance;
    const GaussianState s = scheme == CvScheme::kSourceMid ? apply_thermal_channels(tmsv_state(V), ch_a, ch_b)
                                                           : mdi_conditional_state(V, ch_a, ch_b);
    s.validate();
    if (ch_a.transmittance == 1.0 && ch_b.transmittance == 1.0) {
        // pure shared state: Eve holds nothing
        const Eigen::Matrix2d cond = condition_on_homodyne_x(s, CvMode::kB);
        r.mutual_info = 0.5 * std::log2(s.cov(0, 0) / cond(0, 0));
        r.holevo = 0.0;
        r.key_rate = std::max(0.0, r.mutual_info);
        return r;
    }
    return key_rate_from_state(s);
}

double key_rate_cv_source_closed(const TmsvSourceModel& src, double T, double N) {
    src.validate();
    ChannelParams(T, (N - 1.0) / 2.0).validate();
    if (src.infinite_variance) return std::max(0.0, infinite_limit(CvScheme::kSourceMid, T, N));
    const double V = src.variance;
    if (T == 1.0) {
        const ChannelParams ch(T, (N - 1.0) / 2.0);
        return key_rate_cv_general(src, ch, ch, CvScheme::kSourceMid).key_rate;
    }
    const double a = T * V + (1.0 - T) * N;
    const double d = a * a - T * T * (V * V - 1.0);
    const double s = std::sqrt(d);
    const double k = 0.5 * std::log2(a * a / d) - 0.5 * std::log2(0.25 * (d - 1.0)) -
                     0.5 * s * std::log2((s + 1.0) / (s - 1.0));
    return std::max(0.0, k);
}

double key_rate_cv_mdi_closed(const TmsvSourceModel& src, double T, double N) {
    src.validate();
    ChannelParams(T, (N - 1.0) / 2.0).validate();
    if (src.infinite_variance) return std::max(0.0, infinite_limit(CvScheme::kMdi, T, N));
    const double V = src.variance;
    if (T == 1.0 || V == 1.0) {
        const ChannelParams ch(T, (N - 1.0) / 2.0);
        return key_rate_cv_general(src, ch, ch, CvScheme::kMdi).key_rate;
    }
    const double u = N * (1.0 - T);
    const double num = T * (1.0 + V * V) + 2.0 * (1.0 - T) * V * N;
    const double x = std::sqrt(V) * std::sqrt(u * V + T);
    const double y = std::sqrt(u + T * V);
    const double k = 0.5 * std::log2(num * num / (V * (u * V + T) * (u + T * V))) -
                     0.5 * std::log2(u * (V * V - 1.0) / (u + T * V)) + x / (2.0 * y) * std::log2((x - y) / (x + y));
    return std::max(0.0, k);
}

SourceSpectrum source_spectrum_closed(double V, double T, double NA, double NB) {
    check_variance(V);
    const double u = 1.0 - T;
    const double base = (u * u * (NA * NA + NB * NB) + 2.0 * T * u * V * (NA + NB) + 2.0 * T * T) / 2.0;
    const double root = std::sqrt(u * u * (NA + NB) * (NA + NB) + 4.0 * T * T + 4.0 * T * u * V * (NA + NB));
    const double pm = u * (NA - NB) * root / 2.0;
    SourceSpectrum s;
    s.lambda1 = std::sqrt(base + pm);
    s.lambda2 = std::sqrt(std::max(0.0, base - pm));
    s.lambda3 = std::sqrt(NA * u + T * V) * std::sqrt(NA * u * (NB * u + T * V) + T * (NB * u * V + T)) /
                std::sqrt(NB * u + T * V);
    return s;
}

double key_rate_cv_source_closed_asym(double V, double T, double NA, double NB) {
    const SourceSpectrum sp = source_spectrum_closed(V, T, NA, NB);
    const double aa = NA * (1.0 - T) + T * V, ab = NB * (1.0 - T) + T * V;
    const double i_ab = 0.5 * std::log2(aa * ab / (aa * ab - T * T * (V * V - 1.0)));
    return std::max(0.0, i_ab - g_of_lambda(sp.lambda1) - g_of_lambda(sp.lambda2) + g_of_lambda(sp.lambda3));
}

double cv_threshold(CvScheme scheme, CvThreshold kind, double param) {
    const double e = std::numbers::e;
    const bool src = scheme == CvScheme::kSourceMid;
    switch (kind) {
        case CvThreshold::kNmax: {
            const double T = param;
            if (!(T >= 0.0 && T <= 1.0)) throw DomainError(kModule, "T must lie in [0, 1]");
            if (T == 1.0) return std::numeric_limits<double>::infinity();
            return (src ? 1.0 : T) / (e * (1.0 - T));
        }
        case CvThreshold::kTmin: {
            const double N = param;
            if (!(N >= 1.0)) throw DomainError(kModule, "N must be >= 1");
            return src ? 1.0 - 1.0 / (e * N) : e * N / (e * N + 1.0);
        }
        case CvThreshold::kEpsMax: {
            const double T = param;
            if (!(T > 0.0 && T <= 1.0)) throw DomainError(kModule, "T must lie in (0, 1]");
            return 1.0 + ((src ? 1.0 : T) - e) / (e * T);
        }
    }
    throw DomainError(kModule, "unknown threshold kind");
}

}  // namespace qkdnoise::cv
