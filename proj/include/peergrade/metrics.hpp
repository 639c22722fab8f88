#pragma once

// Agreement between computed and control grades.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace peergrade {

/// Control and computed grades aligned on the items both maps share.
struct GradeVectorPair {
    std::vector<std::string> items;
    std::vector<double> control;
    std::vector<double> computed;

    /// Intersects the keys. Throws EmptyInput if fewer than `min_common` items remain.
    static GradeVectorPair from_maps(const std::map<std::string, double>& control,
                                     const std::map<std::string, double>& computed,
                                     std::size_t min_common = 2);

    std::size_t size() const { return items.size(); }
};

/// Sample correlation. Throws DegenerateVector if either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Fraction of discordant pairs. A pair tied in exactly one vector counts as
/// half discordant; a pair tied in both counts as concordant. O(n log n).
double kendall_tau_distance(std::span<const double> x, std::span<const double> y);

/// 1-based ranks, tied values sharing their average rank.
std::vector<double> average_ranks(std::span<const double> x);

/// sum |rank_x - rank_y| divided by its maximum floor(n^2 / 2).
double spearman_footrule(std::span<const double> x, std::span<const double> y);

/// sqrt(sum (x - y)^2).
double norm2(std::span<const double> x, std::span<const double> y);
/// norm2 / sqrt(n).
double rms(std::span<const double> x, std::span<const double> y);

/// 1 - sd(z(x) - z(y)) / sqrt(2), with z the zero-mean unit-sample-variance
/// standardization. 1 for perfect positive linear agreement, about 0 for
/// independent inputs.
double s_score(std::span<const double> x, std::span<const double> y);

/// Mean of (g_a - g_b)^2 over pairs of submissions known to be identical.
/// Throws MissingItem for an id absent from `grades`, EmptyInput on no pairs.
double identical_pair_d(const std::map<std::string, double>& grades,
                        std::span<const std::pair<std::string, std::string>> pairs);

struct MetricSuite {
    std::size_t items = 0;
    double pearson = 0.0;
    double kendall_tau = 0.0;
    double footrule = 0.0;
    double norm2 = 0.0;
    double rms = 0.0;
    double s_score = 0.0;
};

/// Every metric above on one pair. Needs at least two items and non-constant vectors.
MetricSuite evaluate_all(const GradeVectorPair& p);

}  // namespace peergrade
