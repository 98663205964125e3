// Shared types, entropies and thermal photon statistics.
#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkdnoise {

// ---------------------------------------------------------------- errors

class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}
    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

class DomainError : public Error {
    using Error::Error;
};
class TruncationError : public Error {
    using Error::Error;
};
class NonPhysicalStateError : public Error {
    using Error::Error;
};
class CancellationError : public Error {
    using Error::Error;
};
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("cli", what) {}
};

// ---------------------------------------------------------------- types

enum class Exec { kSerial, kParallel };

struct ChannelParams {
    double transmittance = 1.0;
    double mean_noise_photons = 0.0;

    ChannelParams() = default;
    ChannelParams(double T, double mu);

    // N = 2 mu + 1, shot-noise units
    double quadrature_noise_variance() const { return 2.0 * mean_noise_photons + 1.0; }
    // excess noise referred to the channel input; +inf at T = 0 with noise
    double excess_noise() const;
    void validate() const;
};

enum class DetectorKind { kPnr, kOnOff };

struct DetectorModel {
    DetectorKind kind = DetectorKind::kPnr;
    double efficiency = 1.0;
    void validate() const;
};

struct PairSourceModel {
    double pair_prob = 1.0;        // q
    double collection_eff = 1.0;   // xi
    void validate() const;
};

struct TmsvSourceModel {
    double variance = 1.0;
    bool infinite_variance = false;

    static TmsvSourceModel finite(double V);
    static TmsvSourceModel infinite();
    void validate() const;
};

struct TruncationPolicy {
    double tail_epsilon = 1e-12;
    int max_terms = 100000;
    // factorials above this argument are evaluated through lgamma
    int log_domain_threshold = 40;

    void validate() const;
    // Smallest K with sum_{n >= K} thermal_pmf(n, mean) <= eps, i.e. indices
    // 0..K-1 are kept. Throws TruncationError if K exceeds max_terms.
    int terms_for(double mean, double eps) const;
};

// ---------------------------------------------------------------- entropies

double binary_entropy(double Q);
double six_state_entropy(double Q);
double bosonic_entropy(double x);

double qber_threshold_bb84();       // root of 1 - 2 H(Q)
double qber_threshold_six_state();  // root of 1 - F(Q)

// ---------------------------------------------------------------- statistics

double thermal_pmf(int n, double mu);
// sum_{k >= n} thermal_pmf(k, mu) = (mu/(1+mu))^n
double thermal_tail(int n, double mu);

// pi_i as the truncated binomial-thinned thermal sum
double noise_collection_prob(int i, double mu, double T, double eta,
                             const TruncationPolicy& policy = {});
// closed form mu'^i/(1+mu')^(i+1), mu' = mu (1-T) eta
double thinned_thermal_pmf(int i, double mu, double T, double eta);

// Validates p in [-1e-12, 1+1e-12] and clamps it into [0, 1].
double clamp_probability(double p, const char* module, const char* what);

// ---------------------------------------------------------------- combinatorics

class Combinatorics {
public:
    explicit Combinatorics(int log_domain_threshold = 40);
    double log_factorial(int n) const;
    double factorial(int n) const;  // exact double for n <= 170
    double log_binomial(int n, int k) const;
    double binomial(int n, int k) const;

private:
    int threshold_;
    std::vector<double> log_fact_;
};

// ---------------------------------------------------------------- roots

// Bisection for a bracketed sign change of f on [lo, hi]. Returns the
// midpoint once hi - lo <= tol. Requires f(lo) and f(hi) to differ in sign.
double bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
              int max_iter = 400);

// Bisection on a monotone predicate: pred(lo) true, pred(hi) false; returns
// the boundary once (hi - lo) <= abs_tol + rel_tol * |hi|.
double bisect_predicate(const std::function<bool(double)>& pred, double lo, double hi,
                        double abs_tol, double rel_tol, int max_iter = 400);

}  // namespace qkdnoise
