#include "peergrade/assigner.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "peergrade/error.hpp"

namespace peergrade {

AssignmentState::AssignmentState(AuthorMap submissions, AssignPolicy policy, std::set<std::string> extra_users) {
    if (policy.likely_window <= std::chrono::seconds::zero()) throw InvalidInput("likely window must be positive");
    if (policy.reviews_due < 1) throw InvalidInput("reviews due must be at least 1");
    data_.policy = policy;
    data_.submissions = std::move(submissions);
    data_.users = std::move(extra_users);
}

AssignmentState AssignmentState::from_data(AssignmentData data) {
    AssignmentState s(std::move(data));
    if (s.data_.policy.likely_window <= std::chrono::seconds::zero()) {
        throw InvalidInput("likely window must be positive");
    }
    if (auto problems = s.audit(); !problems.empty()) {
        throw InvalidInput("inconsistent assignment state: " + problems.front());
    }
    return s;
}

std::set<std::string> AssignmentState::all_users() const {
    std::set<std::string> users = data_.users;
    for (const auto& [item, author] : data_.submissions) users.insert(author);
    return users;
}

void AssignmentState::require_user(const std::string& user) const {
    if (data_.users.contains(user)) return;
    for (const auto& [item, author] : data_.submissions) {
        if (author == user) return;
    }
    throw DomainError("unknown user: " + user);
}

bool AssignmentState::assigned(const TaskKey& key) const {
    return data_.pending.contains(key) || data_.completed.contains(key) || data_.declined.contains(key);
}

int AssignmentState::likely_reviews(const std::string& item, Timestamp now) const {
    if (!data_.submissions.contains(item)) throw MissingItem(item);
    int n = 0;
    // Keys sort by item first, so each item's tasks are contiguous.
    const TaskKey first{item, std::string{}};
    for (auto it = data_.completed.lower_bound(first); it != data_.completed.end() && it->first.first == item; ++it) {
        ++n;
    }
    for (auto it = data_.pending.lower_bound(first); it != data_.pending.end() && it->first.first == item; ++it) {
        if (now - it->second.assigned_at <= data_.policy.likely_window) ++n;
    }
    return n;
}

int AssignmentState::tasks_for(const std::string& user) const {
    int n = 0;
    for (const auto& [key, t] : data_.pending) n += key.second == user;
    return n + reviews_done(user);
}

int AssignmentState::reviews_done(const std::string& user) const {
    int n = 0;
    for (const auto& [key, t] : data_.completed) n += key.second == user;
    for (const auto& [key, t] : data_.declined) n += key.second == user;
    return n;
}

std::string AssignmentState::next_task(const std::string& user, Timestamp now, bool extra) {
    require_user(user);
    if (!extra && tasks_for(user) >= data_.policy.reviews_due) {
        throw InvalidTransition(fmt::format("user {} already holds {} task(s); request an extra review explicitly",
                                            user, tasks_for(user)));
    }

    std::vector<std::string> candidates;
    int fewest = std::numeric_limits<int>::max();
    for (const auto& [item, author] : data_.submissions) {
        if (author == user || assigned({item, user})) continue;
        const int likely = likely_reviews(item, now);
        if (likely < fewest) {
            fewest = likely;
            candidates.clear();
        }
        if (likely == fewest) candidates.push_back(item);
    }
    if (candidates.empty()) throw NoEligibleSubmission(user);

    const std::uint64_t seed = data_.policy.rng_seed;
    const std::uint64_t draw = data_.draws++;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(draw), static_cast<std::uint32_t>(draw >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    std::string chosen = candidates[pick(rng)];

    data_.pending.emplace(TaskKey{chosen, user}, PendingTask{now});
    return chosen;
}

void AssignmentState::complete_task(const std::string& user, const std::string& item, double grade, Timestamp now) {
    const TaskKey key{item, user};
    auto it = data_.pending.find(key);
    if (it == data_.pending.end()) {
        throw InvalidTransition(fmt::format("review of {} by {} is not pending", item, user));
    }
    if (!data_.policy.scale.contains(grade)) {
        throw InvalidInput(fmt::format("grade {} outside [0, {}]", grade, data_.policy.scale.max_grade()));
    }
    data_.completed.emplace(key, CompletedTask{it->second.assigned_at, now, grade});
    data_.pending.erase(it);
}

void AssignmentState::decline_task(const std::string& user,
                                   const std::string& item,
                                   const std::string& reason,
                                   Timestamp now) {
    const TaskKey key{item, user};
    auto it = data_.pending.find(key);
    if (it == data_.pending.end()) {
        throw InvalidTransition(fmt::format("review of {} by {} is not pending", item, user));
    }
    if (reason.find_first_not_of(" \t\r\n") == std::string::npos) throw MissingReason();
    data_.declined.emplace(key, DeclinedTask{it->second.assigned_at, now, reason});
    data_.pending.erase(it);
}

std::vector<std::string> AssignmentState::orphaned_submissions() const {
    std::vector<std::string> out;
    for (const auto& [item, author] : data_.submissions) {
        const TaskKey first{item, std::string{}};
        auto has_item = [&](const auto& tasks) {
            auto it = tasks.lower_bound(first);
            return it != tasks.end() && it->first.first == item;
        };
        if (has_item(data_.declined) && !has_item(data_.completed) && !has_item(data_.pending)) out.push_back(item);
    }
    return out;
}

std::vector<ReviewRecord> AssignmentState::records() const {
    std::vector<ReviewRecord> out;
    for (const auto& [key, t] : data_.completed) out.push_back(ReviewRecord::graded(key.first, key.second, t.grade));
    for (const auto& [key, t] : data_.declined) out.push_back(ReviewRecord::declined(key.first, key.second, t.reason));
    return out;
}

ReviewGraph AssignmentState::graph() const {
    const auto recs = records();
    std::vector<std::string> items;
    for (const auto& [item, author] : data_.submissions) items.push_back(item);
    return ReviewGraph::from_records(recs, data_.policy.scale, &data_.submissions, RangePolicy::enforce, items);
}

std::vector<std::string> AssignmentState::audit() const {
    std::vector<std::string> problems;
    const auto users = all_users();
    auto check = [&](const TaskKey& key, const char* set) {
        const auto& [item, user] = key;
        auto sub = data_.submissions.find(item);
        if (sub == data_.submissions.end()) {
            problems.push_back(fmt::format("{} task on unknown item {}", set, item));
        } else if (sub->second == user) {
            problems.push_back(fmt::format("{} task pairs author {} with own item {}", set, user, item));
        }
        if (!users.contains(user)) problems.push_back(fmt::format("{} task for unknown user {}", set, user));
    };
    for (const auto& [key, t] : data_.pending) {
        check(key, "pending");
        if (data_.completed.contains(key) || data_.declined.contains(key)) {
            problems.push_back(fmt::format("task ({}, {}) is in more than one set", key.first, key.second));
        }
    }
    for (const auto& [key, t] : data_.completed) {
        check(key, "completed");
        if (data_.declined.contains(key)) {
            problems.push_back(fmt::format("task ({}, {}) is in more than one set", key.first, key.second));
        }
        if (!data_.policy.scale.contains(t.grade)) {
            problems.push_back(fmt::format("completed task ({}, {}) has grade {} outside the scale", key.first,
                                           key.second, t.grade));
        }
    }
    for (const auto& [key, t] : data_.declined) {
        check(key, "declined");
        if (t.reason.empty()) problems.push_back(fmt::format("declined task ({}, {}) has no reason", key.first, key.second));
    }
    return problems;
}

}  // namespace peergrade
