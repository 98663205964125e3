// Oracle-vs-analytic checks behind `qkdnoise validate`.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qkdnoise::validation {

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;      // worst deviation (absolute, or |z| for Monte Carlo)
    double tolerance = 0.0;
    std::string detail;
};

struct ValidationOptions {
    std::uint64_t seed = 42;
    std::int64_t samples = 1000000;  // per Monte Carlo configuration
    int mc_configs = 10;
};

std::vector<CheckResult> run_all(const ValidationOptions& opt);

// individual suites
CheckResult check_mc_source_mid(const ValidationOptions& opt);
CheckResult check_fock_mdi_rectilinear();
CheckResult check_fock_mdi_diagonal();
CheckResult check_fock_di_events();
CheckResult check_mdi_engines();
CheckResult check_cv_closed_forms();
CheckResult check_cv_mdi_state();
CheckResult check_ln_direct();
CheckResult check_noise_collection();

}  // namespace qkdnoise::validation
