#pragma once

// Consensus grades from peer grades: plain average, the iterative
// reputation-weighted estimator ("vancouver"), and two variants of it.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "peergrade/core.hpp"

namespace peergrade {

enum class Algorithm { avg, vancouver, maverage, debiased };

std::string to_string(Algorithm a);
/// Throws InvalidInput on an unknown name.
Algorithm parse_algorithm(std::string_view name);

struct AggregatorConfig {
    Algorithm algorithm = Algorithm::vancouver;
    /// Number of item->user->item rounds. Zero reduces vancouver to the plain mean.
    int iterations = 10;
    /// Defaults to the graph's GradeScale::variance_floor().
    std::optional<double> variance_floor;
    /// Variance given to every grade before the first round.
    double initial_variance = 1.0;
    /// Process graphs with degree <= 1 nodes instead of rejecting them.
    bool allow_degenerate = false;
};

struct ItemEstimate {
    double grade;
    /// Uncertainty of `grade`; absent when it cannot be estimated (avg on one grade).
    std::optional<double> variance;
};

struct ConsensusResult {
    std::map<std::string, ItemEstimate> item_grades;
    /// Estimated grading variance per user; absent when not estimated (avg, K = 0).
    std::map<std::string, std::optional<double>> user_variances;
    /// Items by descending grade, ties by ascending id.
    std::vector<std::string> ranking;
    /// Per-user additive bias that was subtracted (debiased only).
    std::map<std::string, double> user_bias;
    /// Number of computed variances raised to the variance floor.
    std::size_t floor_hits = 0;
};

/// An item->user message emitted during a vancouver iteration (1-based).
struct ItemToUserMessage {
    int iteration;
    std::size_t item;
    std::size_t user;
    Estimate estimate;
};

using MessageObserver = std::function<void(const ItemToUserMessage&)>;

ConsensusResult aggregate_avg(const ReviewGraph& g);

/// Iterative estimator. Alternates between estimating each item's grade from
/// its reviewers (weighting by inverse user variance) and each user's variance
/// from the squared gaps between their grades and those item estimates.
/// Messages sent along an edge never include information that came from the
/// other endpoint of that same edge.
///
/// Throws GraphNotAdmissible when validate_graph() reports violations (degree
/// violations are tolerated with cfg.allow_degenerate).
ConsensusResult aggregate_vancouver(const ReviewGraph& g,
                                    const AggregatorConfig& cfg,
                                    const MessageObserver& observer = {});

/// vancouver user variances, then per item a trimmed weighted mean: with four
/// or more grades one lowest and one highest grade are dropped first.
ConsensusResult aggregate_maverage(const ReviewGraph& g, const AggregatorConfig& cfg);

/// vancouver, subtract each user's mean deviation from consensus, vancouver again.
ConsensusResult aggregate_debiased(const ReviewGraph& g, const AggregatorConfig& cfg);

/// Dispatches on cfg.algorithm.
ConsensusResult aggregate(const ReviewGraph& g, const AggregatorConfig& cfg);

std::vector<std::string> rank_from_grades(const std::map<std::string, ItemEstimate>& grades);
inline std::vector<std::string> rank_from_grades(const ConsensusResult& r) {
    return rank_from_grades(r.item_grades);
}

/// Mean of (grade - consensus) over each user's reviews.
std::map<std::string, double> user_biases(const ReviewGraph& g, const ConsensusResult& r);

struct WeightedGrade {
    std::string user;
    double grade;
    double variance;
};

/// The per-item step of maverage. Ties for the dropped extremes go to the
/// lowest user id. Throws EmptyInput on an empty list.
Estimate trimmed_weighted_mean(std::vector<WeightedGrade> grades);

}  // namespace peergrade
