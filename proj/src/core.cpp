#include "qkdnoise/core.hpp"

#include <cmath>
#include <limits>

namespace qkdnoise {

namespace {

constexpr double kProbSlack = 1e-12;

double xlog2x(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

}  // namespace

ChannelParams::ChannelParams(double T, double mu) : transmittance(T), mean_noise_photons(mu) {
    validate();
}

void ChannelParams::validate() const {
    if (!(transmittance >= 0.0 && transmittance <= 1.0))
        throw DomainError("core", "transmittance must lie in [0,1]");
    if (!(mean_noise_photons >= 0.0) || !std::isfinite(mean_noise_photons))
        throw DomainError("core", "mean noise photon number must be finite and >= 0");
}

double ChannelParams::excess_noise() const {
    const double T = transmittance;
    const double N = quadrature_noise_variance();
    if (T == 0.0) return N == 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return (1.0 - T) * (N - 1.0) / T;
}

void DetectorModel::validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
        throw DomainError("core", "detector efficiency must lie in [0,1]");
}

void PairSourceModel::validate() const {
    if (!(pair_prob >= 0.0 && pair_prob <= 1.0))
        throw DomainError("core", "pair probability q must lie in [0,1]");
    if (!(collection_eff >= 0.0 && collection_eff <= 1.0))
        throw DomainError("core", "collection efficiency xi must lie in [0,1]");
}

TmsvSourceModel TmsvSourceModel::finite(double V) {
    TmsvSourceModel s;
    s.variance = V;
    s.validate();
    return s;
}

TmsvSourceModel TmsvSourceModel::infinite() {
    TmsvSourceModel s;
    s.variance = std::numeric_limits<double>::infinity();
    s.infinite_variance = true;
    return s;
}

void TmsvSourceModel::validate() const {
    if (infinite_variance) return;
    if (!(variance >= 1.0) || !std::isfinite(variance))
        throw DomainError("core", "TMSV variance must be finite and >= 1");
}

void TruncationPolicy::validate() const {
    if (!(tail_epsilon > 0.0 && tail_epsilon < 1.0))
        throw DomainError("core", "tail_epsilon must lie in (0,1)");
    if (max_terms < 1) throw DomainError("core", "max_terms must be >= 1");
}

int TruncationPolicy::terms_for(double mean, double eps) const {
    if (mean <= 0.0) return 1;
    const double r = mean / (1.0 + mean);
    const double k = std::ceil(std::log(eps) / std::log(r));
    if (!(k <= static_cast<double>(max_terms)))
        throw TruncationError("core", "thermal tail bound needs more than max_terms terms (mean " +
                                          std::to_string(mean) + ")");
    return std::max(1, static_cast<int>(k));
}

double binary_entropy(double Q) {
    if (!(Q >= 0.0 && Q <= 1.0)) throw DomainError("core", "binary_entropy argument outside [0,1]");
    return -xlog2x(Q) - xlog2x(1.0 - Q);
}

double six_state_entropy(double Q) {
    if (!(Q >= 0.0 && Q <= 2.0 / 3.0))
        throw DomainError("core", "six_state_entropy argument outside [0,2/3]");
    const double a = std::max(0.0, 1.0 - 1.5 * Q);
    // (3Q/2) log2(Q/2) written without forming 0 * -inf
    const double b = Q > 0.0 ? 1.5 * Q * std::log2(0.5 * Q) : 0.0;
    return -xlog2x(a) - b;
}

double bosonic_entropy(double x) {
    if (!(x >= 0.0)) throw DomainError("core", "bosonic_entropy argument must be >= 0");
    return (x + 1.0) * std::log2(x + 1.0) - xlog2x(x);
}

double qber_threshold_bb84() {
    return bisect([](double q) { return 1.0 - 2.0 * binary_entropy(q); }, 1e-6, 0.5, 1e-8);
}

double qber_threshold_six_state() {
    return bisect([](double q) { return 1.0 - six_state_entropy(q); }, 1e-6, 0.5, 1e-8);
}

double thermal_pmf(int n, double mu) {
    if (n < 0 || !(mu >= 0.0)) throw DomainError("core", "thermal_pmf needs n >= 0 and mu >= 0");
    if (mu == 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(n * std::log(mu) - (n + 1) * std::log1p(mu));
}

double thermal_tail(int n, double mu) {
    if (n <= 0) return 1.0;
    if (mu == 0.0) return 0.0;
    return std::exp(n * (std::log(mu) - std::log1p(mu)));
}

double noise_collection_prob(int i, double mu, double T, double eta, const TruncationPolicy& policy) {
    if (i < 0 || !(mu >= 0.0) || !(T >= 0.0 && T <= 1.0) || !(eta >= 0.0 && eta <= 1.0))
        throw DomainError("core", "noise_collection_prob arguments out of range");
    const double t = (1.0 - T) * eta;
    if (mu == 0.0 || t == 0.0) return i == 0 ? 1.0 : 0.0;
    const int K = policy.terms_for(mu, policy.tail_epsilon);
    if (i >= K) return 0.0;
    const Combinatorics comb(policy.log_domain_threshold);
    const double lmu = std::log(mu), l1mu = std::log1p(mu);
    const double lt = std::log(t);
    const double l1t = t < 1.0 ? std::log1p(-t) : 0.0;
    double sum = 0.0;
    for (int n = i; n < K; ++n) {
        if (t == 1.0 && n > i) break;
        const double lterm = n * lmu - (n + 1) * l1mu + comb.log_binomial(n, i) + i * lt + (n - i) * l1t;
        sum += std::exp(lterm);
    }
    return clamp_probability(sum, "core", "noise_collection_prob");
}

double thinned_thermal_pmf(int i, double mu, double T, double eta) {
    if (i < 0 || !(mu >= 0.0) || !(T >= 0.0 && T <= 1.0) || !(eta >= 0.0 && eta <= 1.0))
        throw DomainError("core", "thinned_thermal_pmf arguments out of range");
    return thermal_pmf(i, mu * (1.0 - T) * eta);
}

double clamp_probability(double p, const char* module, const char* what) {
    if (!(p >= -kProbSlack && p <= 1.0 + kProbSlack))
        throw NonPhysicalStateError(module, std::string(what) + " produced probability " +
                                                std::to_string(p) + " outside [0,1]");
    return std::min(1.0, std::max(0.0, p));
}

Combinatorics::Combinatorics(int log_domain_threshold) : threshold_(log_domain_threshold) {
    log_fact_.resize(static_cast<std::size_t>(std::max(threshold_, 1)) + 1, 0.0);
    for (std::size_t n = 2; n < log_fact_.size(); ++n)
        log_fact_[n] = log_fact_[n - 1] + std::log(static_cast<double>(n));
}

double Combinatorics::log_factorial(int n) const {
    if (n < 0) throw DomainError("core", "factorial of a negative integer");
    if (static_cast<std::size_t>(n) < log_fact_.size()) return log_fact_[static_cast<std::size_t>(n)];
    return std::lgamma(static_cast<double>(n) + 1.0);
}

double Combinatorics::factorial(int n) const {
    if (n < 0) throw DomainError("core", "factorial of a negative integer");
    if (n > 170) throw DomainError("core", "factorial overflows double; use log_factorial");
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

double Combinatorics::log_binomial(int n, int k) const {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double Combinatorics::binomial(int n, int k) const {
    if (k < 0 || k > n) return 0.0;
    return std::round(std::exp(log_binomial(n, k)));
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol, int max_iter) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw DomainError("core", "bisect: no sign change in bracket");
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double bisect_predicate(const std::function<bool(double)>& pred, double lo, double hi, double abs_tol,
                        double rel_tol, int max_iter) {
    for (int it = 0; it < max_iter; ++it) {
        if (hi - lo <= abs_tol + rel_tol * std::fabs(hi)) break;
        const double mid = 0.5 * (lo + hi);
        if (pred(mid))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace qkdnoise
