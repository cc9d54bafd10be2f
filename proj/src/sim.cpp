#include "rrmp/sim.hpp"

#include <algorithm>
#include <cmath>

namespace rrmp::sim {

// ---------------------------------------------------------------------------
// Philox4x32-10

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

}  // namespace

std::array<uint32_t, 4> Philox4x32::block(std::array<uint32_t, 4> counter,
                                          std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const uint64_t prod0 = static_cast<uint64_t>(kPhiloxM0) * counter[0];
        const uint64_t prod1 = static_cast<uint64_t>(kPhiloxM1) * counter[2];
        const uint32_t hi0 = static_cast<uint32_t>(prod0 >> 32);
        const uint32_t lo0 = static_cast<uint32_t>(prod0);
        const uint32_t hi1 = static_cast<uint32_t>(prod1 >> 32);
        const uint32_t lo1 = static_cast<uint32_t>(prod1);
        counter = {hi1 ^ counter[1] ^ key[0], lo1, hi0 ^ counter[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return counter;
}

PhiloxStream::PhiloxStream(uint64_t seed, uint64_t stream)
    : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)}, stream_(stream) {}

double PhiloxStream::next_u01() {
    if (buffered_ == 0) {
        std::array<uint32_t, 4> counter{
            static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32),
            static_cast<uint32_t>(block_index_), static_cast<uint32_t>(block_index_ >> 32)};
        auto out = Philox4x32::block(counter, key_);
        buffer_[0] = (static_cast<uint64_t>(out[0]) << 32) | out[1];
        buffer_[1] = (static_cast<uint64_t>(out[2]) << 32) | out[3];
        buffered_ = 2;
        ++block_index_;
    }
    uint64_t bits = buffer_[2 - buffered_];
    --buffered_;
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Utility kinds

std::string to_string(Aggregator a) {
    return a == Aggregator::MeanOfUtilities ? "mean" : "product";
}

Aggregator aggregator_from_string(const std::string& s) {
    if (s == "mean") return Aggregator::MeanOfUtilities;
    if (s == "product") return Aggregator::ProductOfUtilities;
    throw Error("InvalidValue", "unknown aggregator '" + s + "'");
}

void validate_utility_kind(const UtilityKind& kind) {
    if (const auto* b = std::get_if<BernoulliUtility>(&kind)) {
        if (b->p < 0.0 || b->p > 1.0) {
            throw Error("InvalidUtilityModel", "bernoulli p must lie in [0,1]");
        }
        return;
    }
    if (const auto* u = std::get_if<UniformUtility>(&kind)) {
        if (!(u->lo <= u->hi)) {
            throw Error("InvalidUtilityModel", "uniform range must have lo <= hi");
        }
        return;
    }
    const auto& d = std::get<DiscreteDist>(kind);
    if (d.values.empty() || d.values.size() != d.probs.size()) {
        throw Error("InvalidUtilityModel", "discrete distribution needs matching values/probs");
    }
    double total = 0.0;
    for (double p : d.probs) {
        if (p < 0.0) throw Error("InvalidUtilityModel", "discrete probabilities must be >= 0");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw Error("NotNormalized",
                    "discrete probabilities sum to " + std::to_string(total) + ", need 1");
    }
}

double kind_mean(const UtilityKind& kind) {
    if (const auto* b = std::get_if<BernoulliUtility>(&kind)) return b->p;
    if (const auto* u = std::get_if<UniformUtility>(&kind)) return 0.5 * (u->lo + u->hi);
    const auto& d = std::get<DiscreteDist>(kind);
    double m = 0.0;
    for (size_t i = 0; i < d.values.size(); ++i) m += d.values[i] * d.probs[i];
    return m;
}

double kind_variance(const UtilityKind& kind) {
    if (const auto* b = std::get_if<BernoulliUtility>(&kind)) return b->p * (1.0 - b->p);
    if (const auto* u = std::get_if<UniformUtility>(&kind)) {
        double w = u->hi - u->lo;
        return w * w / 12.0;
    }
    const auto& d = std::get<DiscreteDist>(kind);
    double mean = kind_mean(kind);
    double v = 0.0;
    for (size_t i = 0; i < d.values.size(); ++i) {
        double delta = d.values[i] - mean;
        v += delta * delta * d.probs[i];
    }
    return v;
}

double sample_utility(const UtilityKind& kind, PhiloxStream& rng) {
    if (const auto* b = std::get_if<BernoulliUtility>(&kind)) {
        return rng.next_u01() < b->p ? 1.0 : 0.0;
    }
    if (const auto* u = std::get_if<UniformUtility>(&kind)) {
        return u->lo + (u->hi - u->lo) * rng.next_u01();
    }
    const auto& d = std::get<DiscreteDist>(kind);
    double u01 = rng.next_u01();
    double cum = 0.0;
    for (size_t i = 0; i < d.values.size(); ++i) {
        cum += d.probs[i];
        if (u01 < cum) return d.values[i];
    }
    return d.values.back();
}

// ---------------------------------------------------------------------------
// Aggregation core

namespace {

double aggregate_trial(const UtilityModel& model, PhiloxStream& rng) {
    if (model.aggregator == Aggregator::MeanOfUtilities) {
        double sum = 0.0;
        for (long i = 0; i < model.n_paths; ++i) sum += sample_utility(model.kind, rng);
        return sum / static_cast<double>(model.n_paths);
    }
    double prod = 1.0;
    for (long i = 0; i < model.n_paths; ++i) prod *= sample_utility(model.kind, rng);
    return prod;
}

double expected_aggregate(const UtilityModel& model) {
    double mu = kind_mean(model.kind);
    if (model.aggregator == Aggregator::MeanOfUtilities) return mu;
    return std::pow(mu, static_cast<double>(model.n_paths));  // i.i.d. product expectation
}

void validate_model(const UtilityModel& model) {
    validate_utility_kind(model.kind);
    if (model.n_paths < 1) throw Error("InvalidUtilityModel", "n_paths must be >= 1");
    if (model.epsilon < 0) throw Error("InvalidUtilityModel", "epsilon must be >= 0");
    if (model.sigma2 < 0) throw Error("InvalidUtilityModel", "sigma2 must be >= 0");
}

// Reserved substream tag for variance pre-estimation; never collides with
// simulation trial indices.
constexpr uint64_t kSigma2StreamTag = 1ull << 63;

}  // namespace

UtilityModel make_utility_model(UtilityKind kind, long n_paths, Aggregator aggregator,
                                double epsilon, long sigma2_trials, uint64_t sigma2_seed) {
    UtilityModel model{std::move(kind), n_paths, aggregator, 0.0, epsilon};
    validate_utility_kind(model.kind);
    if (model.n_paths < 1) throw Error("InvalidUtilityModel", "n_paths must be >= 1");
    if (aggregator == Aggregator::MeanOfUtilities) {
        model.sigma2 = kind_variance(model.kind);
    } else {
        double sum = 0.0, sumsq = 0.0;
        for (long k = 0; k < sigma2_trials; ++k) {
            PhiloxStream rng(sigma2_seed, kSigma2StreamTag | static_cast<uint64_t>(k));
            double agg = aggregate_trial(model, rng);
            sum += agg;
            sumsq += agg * agg;
        }
        double mean = sum / static_cast<double>(sigma2_trials);
        model.sigma2 = std::max(0.0, sumsq / static_cast<double>(sigma2_trials) - mean * mean);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Operations

double chebyshev_bound(double sigma2, long n, double t) {
    if (t <= 0.0) throw Error("NonPositiveT", "chebyshev bound requires t > 0");
    if (sigma2 < 0.0) throw Error("InvalidUtilityModel", "sigma2 must be >= 0");
    if (n < 1) throw Error("InvalidUtilityModel", "n must be >= 1");
    return sigma2 / (static_cast<double>(n) * t * t);
}

double total_variation(const DiscreteDist& p, const DiscreteDist& q) {
    if (p.values.size() != q.values.size() || p.values != q.values) {
        throw Error("MismatchedSupport",
                    "total variation requires the same support in the same order");
    }
    if (p.values.size() != p.probs.size() || q.values.size() != q.probs.size()) {
        throw Error("MismatchedSupport", "values/probs length mismatch");
    }
    auto check_normalized = [](const DiscreteDist& d, const char* which) {
        double total = 0.0;
        for (double x : d.probs) total += x;
        if (std::abs(total - 1.0) > 1e-9) {
            throw Error("NotNormalized", std::string(which) + " distribution sums to " +
                                             std::to_string(total));
        }
    };
    check_normalized(p, "first");
    check_normalized(q, "second");
    double sum = 0.0;
    for (size_t i = 0; i < p.probs.size(); ++i) sum += std::abs(p.probs[i] - q.probs[i]);
    return 0.5 * sum;
}

double deviation_threshold(double g_sup, double tv, double epsilon) {
    if (g_sup < 0.0) throw Error("InvalidValue", "g_sup must be >= 0");
    if (tv < 0.0 || tv > 1.0) throw Error("InvalidValue", "tv must lie in [0,1]");
    if (epsilon < 0.0) throw Error("InvalidValue", "epsilon must be >= 0");
    return g_sup * tv + epsilon;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

// Fixed block size decouples the merge order from the thread count: block
// partials are computed independently and merged in index order.
constexpr long kTrialBlock = 8192;

struct BlockPartial {
    long long deviating = 0;
    double abs_deviation_sum = 0.0;
};

BlockPartial run_block(const UtilityModel& model, double t, double expected, long long seed,
                       long first, long last) {
    BlockPartial out;
    for (long k = first; k < last; ++k) {
        PhiloxStream rng(static_cast<uint64_t>(seed), static_cast<uint64_t>(k));
        double deviation = std::abs(aggregate_trial(model, rng) - expected);
        if (deviates_at_least(deviation, t)) ++out.deviating;
        out.abs_deviation_sum += deviation;
    }
    return out;
}

SimReport finish_report(const UtilityModel& model, double t, long trials, long long seed,
                        long long deviating, double abs_sum) {
    SimReport r;
    r.n = model.n_paths;
    r.t = t;
    r.bound = std::clamp(chebyshev_bound(model.sigma2, model.n_paths, t), 0.0, 1.0);
    r.empirical_deviation_freq =
        static_cast<double>(deviating) / static_cast<double>(trials);
    r.trials = trials;
    r.mean_abs_deviation = abs_sum / static_cast<double>(trials);
    r.seed = seed;
    r.rng_algorithm = kRngAlgorithm;
    return r;
}

}  // namespace

SimReport simulate_concentration(const UtilityModel& model, double t, long trials,
                                 long long seed) {
    validate_model(model);
    if (t <= 0.0) throw Error("NonPositiveT", "simulation requires t > 0");
    if (trials < 1) throw Error("InvalidValue", "trials must be >= 1");

    const double expected = expected_aggregate(model);
    const long blocks = (trials + kTrialBlock - 1) / kTrialBlock;
    std::vector<BlockPartial> partials(static_cast<size_t>(blocks));

#pragma omp parallel for schedule(static)
    for (long b = 0; b < blocks; ++b) {
        const long first = b * kTrialBlock;
        const long last = std::min(trials, first + kTrialBlock);
        partials[static_cast<size_t>(b)] = run_block(model, t, expected, seed, first, last);
    }

    long long deviating = 0;
    double abs_sum = 0.0;
    for (const auto& p : partials) {  // fixed merge order, independent of threads
        deviating += p.deviating;
        abs_sum += p.abs_deviation_sum;
    }
    return finish_report(model, t, trials, seed, deviating, abs_sum);
}

SimReport simulate_concentration_serial(const UtilityModel& model, double t, long trials,
                                        long long seed) {
    validate_model(model);
    if (t <= 0.0) throw Error("NonPositiveT", "simulation requires t > 0");
    if (trials < 1) throw Error("InvalidValue", "trials must be >= 1");

    const double expected = expected_aggregate(model);
    long long deviating = 0;
    double abs_sum = 0.0;
    for (long k = 0; k < trials; ++k) {
        PhiloxStream rng(static_cast<uint64_t>(seed), static_cast<uint64_t>(k));
        double deviation = std::abs(aggregate_trial(model, rng) - expected);
        if (deviates_at_least(deviation, t)) ++deviating;
        abs_sum += deviation;
    }
    return finish_report(model, t, trials, seed, deviating, abs_sum);
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const UtilityModel& m) {
    json kind;
    if (const auto* b = std::get_if<BernoulliUtility>(&m.kind)) {
        kind = json{{"type", "bernoulli"}, {"p", b->p}};
    } else if (const auto* u = std::get_if<UniformUtility>(&m.kind)) {
        kind = json{{"type", "uniform"}, {"lo", u->lo}, {"hi", u->hi}};
    } else {
        const auto& d = std::get<DiscreteDist>(m.kind);
        kind = json{{"type", "discrete"}, {"values", d.values}, {"probs", d.probs}};
    }
    j = json{{"kind", kind},
             {"n_paths", m.n_paths},
             {"aggregator", to_string(m.aggregator)},
             {"sigma2", m.sigma2},
             {"epsilon", m.epsilon}};
}

void from_json(const json& j, UtilityModel& m) {
    const json& kind = j.at("kind");
    auto type = kind.at("type").get<std::string>();
    if (type == "bernoulli") {
        m.kind = BernoulliUtility{kind.at("p").get<double>()};
    } else if (type == "uniform") {
        m.kind = UniformUtility{kind.at("lo").get<double>(), kind.at("hi").get<double>()};
    } else if (type == "discrete") {
        m.kind = DiscreteDist{kind.at("values").get<std::vector<double>>(),
                              kind.at("probs").get<std::vector<double>>()};
    } else {
        throw Error("InvalidUtilityModel", "unknown utility kind '" + type + "'");
    }
    m.n_paths = j.at("n_paths").get<long>();
    m.aggregator = aggregator_from_string(j.at("aggregator").get<std::string>());
    m.sigma2 = j.at("sigma2").get<double>();
    m.epsilon = j.at("epsilon").get<double>();
}

void to_json(json& j, const SimReport& r) {
    j = json{{"n", r.n},
             {"t", r.t},
             {"bound", r.bound},
             {"empirical_deviation_freq", r.empirical_deviation_freq},
             {"trials", r.trials},
             {"mean_abs_deviation", r.mean_abs_deviation},
             {"seed", r.seed},
             {"rng_algorithm", r.rng_algorithm}};
}

void from_json(const json& j, SimReport& r) {
    r.n = j.at("n").get<long>();
    r.t = j.at("t").get<double>();
    r.bound = j.at("bound").get<double>();
    r.empirical_deviation_freq = j.at("empirical_deviation_freq").get<double>();
    r.trials = j.at("trials").get<long>();
    r.mean_abs_deviation = j.at("mean_abs_deviation").get<double>();
    r.seed = j.at("seed").get<long long>();
    r.rng_algorithm = j.at("rng_algorithm").get<std::string>();
}

}  // namespace rrmp::sim
