#pragma once
// Monte Carlo verification of the multi-path concentration argument: the
// Chebyshev deviation bound, the total-variation threshold ingredient, and
// the large-n convergence trend, over synthetic path-utility distributions.
//
// The trial loop is an OpenMP kernel over fixed-size blocks; a straight
// serial implementation is kept as the reference. Both draw per-trial
// substreams from a counter-based generator, so results are independent of
// scheduling and thread count.

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rrmp/core.hpp"

namespace rrmp::sim {

// ---------------------------------------------------------------------------
// Counter-based generator (Philox4x32-10)

inline constexpr const char* kRngAlgorithm = "philox4x32-10";

struct Philox4x32 {
    static std::array<uint32_t, 4> block(std::array<uint32_t, 4> counter,
                                         std::array<uint32_t, 2> key);
};

// One substream per (seed, stream) pair; yields 53-bit doubles in [0,1).
class PhiloxStream {
public:
    PhiloxStream(uint64_t seed, uint64_t stream);
    double next_u01();

private:
    std::array<uint32_t, 2> key_;
    uint64_t stream_;
    uint64_t block_index_ = 0;
    std::array<uint64_t, 2> buffer_{};
    int buffered_ = 0;
};

// ---------------------------------------------------------------------------
// Utility models

struct BernoulliUtility {
    double p = 0.5;
    bool operator==(const BernoulliUtility&) const = default;
};

struct UniformUtility {
    double lo = 0.0;
    double hi = 1.0;
    bool operator==(const UniformUtility&) const = default;
};

struct DiscreteDist {
    std::vector<double> values;
    std::vector<double> probs;  // same length; sums to 1 +- 1e-9
    bool operator==(const DiscreteDist&) const = default;
};

using UtilityKind = std::variant<BernoulliUtility, UniformUtility, DiscreteDist>;

enum class Aggregator { MeanOfUtilities, ProductOfUtilities };

std::string to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& s);

struct UtilityModel {
    UtilityKind kind;
    long n_paths = 1;
    Aggregator aggregator = Aggregator::MeanOfUtilities;
    double sigma2 = 0.0;   // single-draw variance (mean) / aggregate variance (product)
    double epsilon = 0.01;
    bool operator==(const UtilityModel&) const = default;
};

struct SimReport {
    long n = 0;
    double t = 0.0;
    double bound = 0.0;  // sigma^2/(n t^2) clamped to [0,1] for reporting
    double empirical_deviation_freq = 0.0;
    long trials = 0;
    double mean_abs_deviation = 0.0;
    long long seed = 0;
    std::string rng_algorithm = kRngAlgorithm;
    bool operator==(const SimReport&) const = default;
};

void to_json(json& j, const UtilityModel& m);
void from_json(const json& j, UtilityModel& m);
void to_json(json& j, const SimReport& r);
void from_json(const json& j, SimReport& r);

// ---------------------------------------------------------------------------
// Analytic helpers

void validate_utility_kind(const UtilityKind& kind);  // InvalidUtilityModel / NotNormalized
double kind_mean(const UtilityKind& kind);
double kind_variance(const UtilityKind& kind);
double sample_utility(const UtilityKind& kind, PhiloxStream& rng);

// Builds a model with sigma2 filled in: analytic single-draw variance under
// the mean aggregator, empirical aggregate variance (estimated on a reserved
// substream) under the product aggregator.
UtilityModel make_utility_model(UtilityKind kind, long n_paths, Aggregator aggregator,
                                double epsilon = 0.01, long sigma2_trials = 100000,
                                uint64_t sigma2_seed = 0);

// ---------------------------------------------------------------------------
// Operations

// sigma^2 / (n t^2), unclamped. Throws NonPositiveT.
double chebyshev_bound(double sigma2, long n, double t);

// 0.5 * sum |p_i - q_i| over a shared support ordering; equals the
// sup-over-events form for discrete distributions.
double total_variation(const DiscreteDist& p, const DiscreteDist& q);

// g_sup * tv + epsilon.
double deviation_threshold(double g_sup, double tv, double epsilon);

// Runs `trials` replicates: each draws n i.i.d. utilities, applies the
// aggregator, and tests |aggregate - true expectation| >= t. Deterministic
// given the seed; identical results for any thread count.
SimReport simulate_concentration(const UtilityModel& model, double t, long trials,
                                 long long seed);

// Straightforward single-loop reference used to cross-check the kernel.
SimReport simulate_concentration_serial(const UtilityModel& model, double t, long trials,
                                        long long seed);

// Deviation atoms sitting exactly at t must count as deviating even though t
// itself may not be binary-representable (e.g. t=0.1, mean of 100 Bernoulli
// draws at k=40). Both implementations and any oracle share this slack.
inline constexpr double kDeviationSlackScale = 1e-12;

inline bool deviates_at_least(double deviation, double t) {
    return deviation >= t - kDeviationSlackScale * (t > 1.0 ? t : 1.0);
}

}  // namespace rrmp::sim
