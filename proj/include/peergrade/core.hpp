#pragma once

// Review-graph data model and inverse-variance combination primitives.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace peergrade {

/// Upper end of the grading scale; grades live in [0, max_grade].
class GradeScale {
public:
    GradeScale() = default;
    explicit GradeScale(double max_grade);

    double max_grade() const { return max_grade_; }

    /// Smallest variance any estimate may take: 1e-6 * max_grade^2.
    double variance_floor() const { return 1e-6 * max_grade_ * max_grade_; }

    bool contains(double grade) const { return grade >= 0.0 && grade <= max_grade_; }

private:
    double max_grade_ = 10.0;
};

/// One reviewer's verdict on one submission: either a grade or a decline.
struct ReviewRecord {
    std::string item_id;
    std::string user_id;
    std::optional<double> grade;
    std::optional<std::string> decline_reason;

    static ReviewRecord graded(std::string item, std::string user, double grade);
    static ReviewRecord declined(std::string item, std::string user, std::string reason);

    bool is_declined() const { return !grade.has_value(); }
};

/// item id -> id of the user who submitted it.
using AuthorMap = std::map<std::string, std::string>;

enum class RangePolicy {
    enforce,    // grades must lie on the GradeScale
    unbounded,  // synthetic data: any finite real grade
};

struct Edge {
    std::size_t item;
    std::size_t user;
    double grade;
};

/// Bipartite item/user graph of non-declined reviews.
///
/// Items and users are indexed separately by their position in the sorted id
/// lists. Edges are stored sorted by (item, user). Instances are immutable;
/// with_grades() derives a structurally identical graph with new grades.
class ReviewGraph {
public:
    ReviewGraph() = default;

    /// Builds the graph from review records.
    ///
    /// Items referenced only by declined records are kept (they still need a
    /// grade); users appear only if they contributed at least one grade.
    /// `extra_items` adds submissions that received no review at all.
    /// Throws InvalidInput on a duplicate (item, user) pair, on a review of
    /// the reviewer's own submission, or on a non-finite grade.
    static ReviewGraph from_records(std::span<const ReviewRecord> records,
                                    GradeScale scale,
                                    const AuthorMap* authors = nullptr,
                                    RangePolicy range = RangePolicy::enforce,
                                    std::span<const std::string> extra_items = {});

    const std::vector<std::string>& items() const { return items_; }
    const std::vector<std::string>& users() const { return users_; }
    const std::vector<Edge>& edges() const { return edges_; }

    /// Indices into edges() of the reviews of item `i` (ascending user order).
    std::span<const std::size_t> item_edges(std::size_t i) const { return item_adj_[i]; }
    /// Indices into edges() of the reviews written by user `u` (ascending item order).
    std::span<const std::size_t> user_edges(std::size_t u) const { return user_adj_[u]; }

    std::optional<std::size_t> item_index(const std::string& id) const;
    std::optional<std::size_t> user_index(const std::string& id) const;

    GradeScale scale() const { return scale_; }
    RangePolicy range_policy() const { return range_; }

    /// Same structure, grades replaced edge-by-edge (grades.size() == edges().size()).
    ReviewGraph with_grades(std::span<const double> grades) const;

private:
    void build_adjacency();

    std::vector<std::string> items_;
    std::vector<std::string> users_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> item_adj_;
    std::vector<std::vector<std::size_t>> user_adj_;
    GradeScale scale_;
    RangePolicy range_ = RangePolicy::enforce;
};

enum class ViolationKind {
    item_degree,
    user_degree,
    grade_range,
    duplicate_edge,
    self_review,
};

struct Violation {
    ViolationKind kind;
    std::string node;  // offending item or user id
    std::string detail;
};

std::string to_string(ViolationKind kind);

/// Every reason `g` is not an admissible input for the iterative estimator:
/// nodes of degree <= 1 and (under RangePolicy::enforce) out-of-range grades.
std::vector<Violation> validate_graph(const ReviewGraph& g);

/// Record-level checks that from_records() turns into exceptions: duplicate
/// pairs, self-reviews, out-of-range grades. Useful to report all at once.
std::vector<Violation> validate_records(std::span<const ReviewRecord> records,
                                        GradeScale scale,
                                        const AuthorMap* authors = nullptr);

/// A (source, value, variance) triple. `source` is the index of the sending
/// node; whether it refers to an item or a user is fixed by context.
struct Message {
    std::size_t source;
    double value;
    double variance;
};

struct Estimate {
    double value;
    double variance;
};

/// Ordered message list with incrementally maintained sums of 1/v and x/v.
class MessageSet {
public:
    MessageSet() = default;

    /// Throws InvalidInput unless variance > 0 and both fields are finite.
    void add(Message m);
    void clear();
    void reserve(std::size_t n) { messages_.reserve(n); }

    const std::vector<Message>& messages() const { return messages_; }
    std::size_t size() const { return messages_.size(); }
    bool empty() const { return messages_.empty(); }

    double sum_precision() const { return sum_precision_; }
    double sum_weighted_value() const { return sum_weighted_value_; }

private:
    std::vector<Message> messages_;
    double sum_precision_ = 0.0;
    double sum_weighted_value_ = 0.0;
};

/// Minimum-variance combination: value = (sum x/v)/(sum 1/v), variance = (sum 1/v)^-1.
/// Throws EmptyMessageSet on an empty set.
Estimate combine(const MessageSet& m);

/// combine() over every message except the one at position `index`, computed
/// by removing that message from the running sums.
Estimate combine_excluding_at(const MessageSet& m, std::size_t index);

/// combine() over every message whose source differs from `source`. Throws
/// InvalidInput unless exactly one message comes from `source`, and
/// EmptyMessageSet if nothing remains.
Estimate combine_excluding(const MessageSet& m, std::size_t source);

}  // namespace peergrade
