#include <cmath>
#include <vector>

#include "qkdnoise/oracle_fock.hpp"

namespace qkdnoise::oracle {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// thermal draw by inversion of the geometric tail, then binomial thinning
int thinned_thermal_draw(SplitMix64& rng, double mu, double keep) {
    if (mu <= 0.0) return 0;
    const double r = mu / (1.0 + mu);
    const double u = 1.0 - rng.uniform();  // (0, 1]
    const int n = static_cast<int>(std::floor(std::log(u) / std::log(r)));
    int kept = 0;
    for (int k = 0; k < n; ++k)
        if (rng.uniform() < keep) ++kept;
    return kept;
}

struct Side {
    double signal;  // xi T eta
    double mu;
    double keep;    // (1 - T) eta
};

// Key bit for one side, or -1 when the side rejects the round.
int side_outcome(SplitMix64& rng, const Side& s, DetectorKind kind, bool pair, int signal_detector) {
    int counts[2] = {thinned_thermal_draw(rng, s.mu, s.keep), thinned_thermal_draw(rng, s.mu, s.keep)};
    if (pair && rng.uniform() < s.signal) ++counts[signal_detector];
    if (kind == DetectorKind::kPnr) {
        if (counts[0] + counts[1] != 1) return -1;
        return counts[0] == 1 ? 0 : 1;
    }
    const bool c0 = counts[0] > 0, c1 = counts[1] > 0;
    if (!c0 && !c1) return -1;
    if (c0 && c1) return rng.uniform() < 0.5 ? 0 : 1;
    return c0 ? 0 : 1;
}

}  // namespace

std::uint64_t SplitMix64::mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next() {
    state_ += kGolden;
    return mix(state_);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t SplitMix64::derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix(mix(seed ^ mix(a + kGolden)) + mix(b * kGolden + 1));
}

McDvResult mc_dv_source_mid(const dv::DvSourceMidConfig& cfg, std::int64_t samples, std::uint64_t seed,
                            Exec exec, int shards) {
    cfg.validate();
    if (samples <= 0) throw DomainError("oracle_mc", "sample count must be positive");
    if (shards < 1) throw DomainError("oracle_mc", "shard count must be positive");
    const DetectorKind kind = cfg.detector_a.kind;
    const Side a{cfg.source.collection_eff * cfg.channel_a.transmittance * cfg.detector_a.efficiency,
                 cfg.channel_a.mean_noise_photons,
                 (1.0 - cfg.channel_a.transmittance) * cfg.detector_a.efficiency};
    const Side b{cfg.source.collection_eff * cfg.channel_b.transmittance * cfg.detector_b.efficiency,
                 cfg.channel_b.mean_noise_photons,
                 (1.0 - cfg.channel_b.transmittance) * cfg.detector_b.efficiency};
    const double q = cfg.source.pair_prob;

    std::vector<std::int64_t> acc(shards, 0), err(shards, 0);
    const std::int64_t per = (samples + shards - 1) / shards;
    auto run_shard = [&](int sh) {
        const std::int64_t begin = sh * per, end = std::min(samples, begin + per);
        std::int64_t na = 0, ne = 0;
        for (std::int64_t i = begin; i < end; ++i) {
            SplitMix64 rng(SplitMix64::derive(seed, static_cast<std::uint64_t>(sh), static_cast<std::uint64_t>(i)));
            const bool pair = rng.uniform() < q;
            const int bit = rng.uniform() < 0.5 ? 0 : 1;
            const int ka = side_outcome(rng, a, kind, pair, bit);
            if (ka < 0) continue;
            const int kb = side_outcome(rng, b, kind, pair, 1 - bit);
            if (kb < 0) continue;
            ++na;
            if (ka != 1 - kb) ++ne;
        }
        acc[sh] = na;
        err[sh] = ne;
    };
    if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
        for (int sh = 0; sh < shards; ++sh) run_shard(sh);
    } else {
        for (int sh = 0; sh < shards; ++sh) run_shard(sh);
    }

    McDvResult r;
    for (int sh = 0; sh < shards; ++sh) {
        r.accepted += acc[sh];
        r.errors += err[sh];
    }
    const double n = static_cast<double>(samples);
    const double p = r.accepted / n;
    r.p_exp = {p, std::sqrt(p * (1.0 - p) / n), samples, seed};
    if (r.accepted > 0) {
        const double m = static_cast<double>(r.accepted);
        const double Q = r.errors / m;
        r.qber = McEstimate{Q, std::sqrt(std::max(Q * (1.0 - Q), 0.25 / m) / m), r.accepted, seed};
    }
    return r;
}

}  // namespace qkdnoise::oracle
