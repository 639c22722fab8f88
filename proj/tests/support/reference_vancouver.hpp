#pragma once

// Literal, unoptimized version of the iterative estimator used as a test
// oracle. Every exclusion rebuilds its message list from scratch; nothing
// from peergrade/core.hpp is used.

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace peergrade::testing {

struct RefMessage {
    std::string source;
    double value;
    double variance;
};

inline double ref_mean(const std::vector<RefMessage>& m) {
    double num = 0.0, den = 0.0;
    for (const auto& x : m) {
        num += x.value / x.variance;
        den += 1.0 / x.variance;
    }
    return num / den;
}

inline double ref_var(const std::vector<RefMessage>& m) {
    double den = 0.0;
    for (const auto& x : m) den += 1.0 / x.variance;
    return 1.0 / den;
}

struct RefResult {
    std::map<std::string, double> items;
    std::map<std::string, double> users;
};

/// grades: (item, user) -> grade. Requires every node to have degree >= 2.
inline RefResult reference_vancouver(const std::map<std::pair<std::string, std::string>, double>& grades,
                                     int iterations, double floor, double initial_variance = 1.0) {
    std::map<std::string, std::vector<RefMessage>> to_item;
    std::map<std::string, std::vector<RefMessage>> to_user;
    for (const auto& [key, g] : grades) to_item[key.first].push_back({key.second, g, initial_variance});

    for (int k = 0; k < iterations; ++k) {
        to_user.clear();
        for (const auto& [item, msgs] : to_item) {
            for (const auto& m : msgs) {
                std::vector<RefMessage> others;
                for (const auto& o : msgs) {
                    if (o.source != m.source) others.push_back(o);
                }
                to_user[m.source].push_back({item, ref_mean(others), std::max(ref_var(others), floor)});
            }
        }
        to_item.clear();
        for (const auto& [user, msgs] : to_user) {
            for (const auto& m : msgs) {
                std::vector<RefMessage> gaps;
                for (const auto& o : msgs) {
                    if (o.source == m.source) continue;
                    const double d = o.value - grades.at({o.source, user});
                    gaps.push_back({o.source, d * d, o.variance});
                }
                to_item[m.source].push_back({user, grades.at({m.source, user}), std::max(ref_mean(gaps), floor)});
            }
        }
    }

    RefResult r;
    for (const auto& [item, msgs] : to_item) r.items[item] = ref_mean(msgs);
    for (const auto& [user, msgs] : to_user) {
        std::vector<RefMessage> gaps;
        for (const auto& o : msgs) {
            const double d = o.value - grades.at({o.source, user});
            gaps.push_back({o.source, d * d, o.variance});
        }
        r.users[user] = std::max(ref_mean(gaps), floor);
    }
    return r;
}

}  // namespace peergrade::testing
