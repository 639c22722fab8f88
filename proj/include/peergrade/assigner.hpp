#pragma once

// One-at-a-time review task assignment with decline handling.

#include <chrono>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "peergrade/core.hpp"

namespace peergrade {

using Timestamp = std::chrono::sys_seconds;

struct AssignPolicy {
    /// Pending tasks younger than this count as likely reviews.
    std::chrono::seconds likely_window{std::chrono::hours(6)};
    std::uint64_t rng_seed = 0;
    int reviews_due = 5;
    GradeScale scale;
};

/// (item id, user id)
using TaskKey = std::pair<std::string, std::string>;

struct PendingTask {
    Timestamp assigned_at;
};

struct CompletedTask {
    Timestamp assigned_at;
    Timestamp completed_at;
    double grade;
};

struct DeclinedTask {
    Timestamp assigned_at;
    Timestamp declined_at;
    std::string reason;
};

/// Plain data behind AssignmentState, as persisted.
struct AssignmentData {
    AssignPolicy policy;
    AuthorMap submissions;          // item -> author
    std::set<std::string> users;    // reviewers besides the authors
    std::map<TaskKey, PendingTask> pending;
    std::map<TaskKey, CompletedTask> completed;
    std::map<TaskKey, DeclinedTask> declined;
    std::uint64_t draws = 0;        // tie-break streams consumed so far
};

/// Single-writer state machine over review tasks. Each (item, user) pair is
/// in at most one of pending/completed/declined and never pairs an author
/// with their own submission.
class AssignmentState {
public:
    AssignmentState(AuthorMap submissions, AssignPolicy policy, std::set<std::string> extra_users = {});

    /// Rebuilds a state from persisted data; throws InvalidInput if audit() fails.
    static AssignmentState from_data(AssignmentData data);

    const AssignmentData& data() const { return data_; }
    const AssignPolicy& policy() const { return data_.policy; }
    std::set<std::string> all_users() const;

    /// Completed reviews plus pending ones assigned within the likely window.
    int likely_reviews(const std::string& item, Timestamp now) const;

    /// Pending + completed + declined tasks of `user`.
    int tasks_for(const std::string& user) const;
    /// Completed + declined tasks of `user`.
    int reviews_done(const std::string& user) const;

    /// Assigns `user` a submission with the fewest likely reviews, ties broken
    /// at random from the seeded stream. Once the user holds reviews_due tasks
    /// only `extra` requests are honored.
    std::string next_task(const std::string& user, Timestamp now, bool extra = false);

    void complete_task(const std::string& user, const std::string& item, double grade, Timestamp now);
    void decline_task(const std::string& user, const std::string& item, const std::string& reason, Timestamp now);

    /// Items with at least one decline, no completed review, and none pending.
    std::vector<std::string> orphaned_submissions() const;

    /// Completed and declined tasks as review records.
    std::vector<ReviewRecord> records() const;
    ReviewGraph graph() const;

    /// Descriptions of every broken invariant; empty when consistent.
    std::vector<std::string> audit() const;

private:
    explicit AssignmentState(AssignmentData data) : data_(std::move(data)) {}

    void require_user(const std::string& user) const;
    bool assigned(const TaskKey& key) const;

    AssignmentData data_;
};

}  // namespace peergrade
