#pragma once

// Synthetic peer-grading instances and the avg-vs-vancouver accuracy experiment.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "peergrade/aggregation.hpp"
#include "peergrade/core.hpp"

namespace peergrade {

/// How a user's Gamma draw d_j turns into the variance of their grading noise.
enum class NoiseModel {
    gamma_squared_stddev,  // noise standard deviation d_j^2, variance d_j^4
    gamma_variance,        // noise variance d_j
    none,                  // grades equal true qualities
};

std::string to_string(NoiseModel m);
NoiseModel parse_noise_model(std::string_view name);

/// Variance of the grading noise for a user with Gamma draw `draw`.
double noise_variance(double draw, NoiseModel model);

struct SynthConfig {
    int n_users = 50;
    int n_items = 50;
    int reviews_per_user = 6;
    double item_quality_sd = 1.0;
    double user_variance_shape = 2.0;  // Gamma shape k
    double user_variance_scale = 0.4;  // Gamma scale (mean = k * scale)
    NoiseModel noise = NoiseModel::gamma_squared_stddev;
    int runs = 100;
    std::uint64_t seed = 20130801;

    /// Throws InvalidInput on non-positive sizes or parameters, InfeasibleConfig
    /// when no balanced assignment with every degree >= 2 exists.
    void validate() const;
};

using Rng = std::mt19937_64;

/// Independent generator for run `run_index` of the experiment seeded with `seed`.
Rng run_stream(std::uint64_t seed, std::uint64_t run_index);

/// (item, user) pairs: every user reviews exactly `reviews_per_user` distinct
/// items and item in-degrees differ by at most one.
std::vector<std::pair<std::size_t, std::size_t>> balanced_assignment(int n_users, int n_items,
                                                                     int reviews_per_user, Rng& rng);

struct SynthInstance {
    ReviewGraph graph;  // RangePolicy::unbounded
    std::map<std::string, double> true_qualities;
    std::map<std::string, double> true_user_variances;  // variance of each user's noise
    std::map<std::string, double> gamma_draws;
    /// Noise added on each edge, aligned with graph.edges(): grade = quality + noise.
    std::vector<double> noise;
};

/// Deterministic in (cfg.seed, run_index).
SynthInstance generate_instance(const SynthConfig& cfg, std::uint64_t run_index);

struct RunScore {
    double rho;    // Pearson correlation of consensus and true quality
    double sigma;  // standard deviation of (true - consensus)
};

RunScore score_run(const SynthInstance& inst, const ConsensusResult& r);

struct ExperimentCell {
    Algorithm algorithm;
    double shape;
    int runs = 0;
    double mean_rho = 0.0;
    double mean_sigma = 0.0;
};

struct ExperimentReport {
    static constexpr int kSchemaVersion = 1;
    SynthConfig config;  // shape field reflects the last shape run
    std::vector<double> shapes;
    std::vector<ExperimentCell> cells;

    const ExperimentCell& cell(Algorithm a, double shape) const;
};

/// Generates cfg.runs instances and scores every algorithm on each. Runs are
/// spread over `threads` workers; results do not depend on the thread count.
ExperimentReport run_experiment(const SynthConfig& cfg,
                                std::span<const Algorithm> algorithms,
                                const AggregatorConfig& base = {},
                                unsigned threads = 1);

/// run_experiment once per Gamma shape, cells concatenated in shape order.
ExperimentReport run_experiment(const SynthConfig& cfg,
                                std::span<const double> shapes,
                                std::span<const Algorithm> algorithms,
                                const AggregatorConfig& base = {},
                                unsigned threads = 1);

}  // namespace peergrade
