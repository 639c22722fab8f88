#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "peergrade/core.hpp"
#include "peergrade/synth.hpp"

namespace peergrade::testing {

using GradeTriples = std::vector<std::tuple<std::string, std::string, double>>;

inline ReviewGraph graph_of(const GradeTriples& triples, GradeScale scale = GradeScale(10.0),
                            RangePolicy range = RangePolicy::enforce) {
    std::vector<ReviewRecord> records;
    for (const auto& [item, user, grade] : triples) records.push_back(ReviewRecord::graded(item, user, grade));
    return ReviewGraph::from_records(records, scale, nullptr, range);
}

/// The 2 items x 2 users instance whose grades differ by exactly 1 everywhere.
inline ReviewGraph symmetric_two_by_two() {
    return graph_of({{"i1", "A", 5.0}, {"i1", "B", 6.0}, {"i2", "A", 7.0}, {"i2", "B", 8.0}});
}

/// Users A and B grade close to truth (3, 5, 7, 9); C is noisy.
inline ReviewGraph noisy_three_users() {
    return graph_of({{"i1", "A", 3.2}, {"i2", "A", 4.9}, {"i3", "A", 7.1}, {"i4", "A", 8.8},
                     {"i1", "B", 2.9}, {"i2", "B", 5.2}, {"i3", "B", 6.8}, {"i4", "B", 9.1},
                     {"i1", "C", 5.5}, {"i2", "C", 2.0}, {"i3", "C", 9.5}, {"i4", "C", 6.0}});
}

/// Admissible random graph on the 0..10 scale with grades uniform in [lo, hi].
/// n_users is raised when needed so that every item gets at least two reviews.
inline ReviewGraph random_admissible_graph(std::mt19937_64& rng, int n_users, int n_items, int per_user,
                                           double lo = 0.0, double hi = 10.0) {
    n_users = std::max(n_users, (2 * n_items + per_user - 1) / per_user);
    Rng stream(rng());
    const auto pairs = balanced_assignment(n_users, n_items, per_user, stream);
    std::uniform_real_distribution<double> grade(lo, hi);
    GradeTriples triples;
    for (const auto& [i, u] : pairs) triples.emplace_back(fmt::format("i{:03}", i), fmt::format("u{:03}", u), grade(rng));
    return graph_of(triples);
}

inline std::map<std::pair<std::string, std::string>, double> grade_map(const ReviewGraph& g) {
    std::map<std::pair<std::string, std::string>, double> out;
    for (const auto& e : g.edges()) out[{g.items()[e.item], g.users()[e.user]}] = e.grade;
    return out;
}

}  // namespace peergrade::testing
