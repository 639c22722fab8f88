#include "peergrade/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "peergrade/error.hpp"

namespace peergrade {

UngradedItem::UngradedItem(std::vector<std::string> ids)
    : DomainError("items without any grade: " + fmt::format("{}", fmt::join(ids, ", "))),
      items(std::move(ids)) {}

GradeScale::GradeScale(double max_grade) : max_grade_(max_grade) {
    if (!(max_grade > 0.0) || !std::isfinite(max_grade)) {
        throw InvalidInput(fmt::format("grade scale maximum must be positive, got {}", max_grade));
    }
}

ReviewRecord ReviewRecord::graded(std::string item, std::string user, double grade) {
    return ReviewRecord{std::move(item), std::move(user), grade, std::nullopt};
}

ReviewRecord ReviewRecord::declined(std::string item, std::string user, std::string reason) {
    return ReviewRecord{std::move(item), std::move(user), std::nullopt, std::move(reason)};
}

namespace {

std::size_t index_of(const std::vector<std::string>& sorted, const std::string& id) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), id) - sorted.begin());
}

std::optional<std::size_t> find_sorted(const std::vector<std::string>& sorted, const std::string& id) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), id);
    if (it == sorted.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - sorted.begin());
}

bool is_self_review(const AuthorMap* authors, const ReviewRecord& r) {
    if (authors == nullptr) return false;
    auto it = authors->find(r.item_id);
    return it != authors->end() && it->second == r.user_id;
}

}  // namespace

ReviewGraph ReviewGraph::from_records(std::span<const ReviewRecord> records,
                                      GradeScale scale,
                                      const AuthorMap* authors,
                                      RangePolicy range,
                                      std::span<const std::string> extra_items) {
    std::set<std::string> item_set(extra_items.begin(), extra_items.end());
    std::set<std::string> user_set;
    std::set<std::pair<std::string, std::string>> seen;

    for (const auto& r : records) {
        if (!seen.emplace(r.item_id, r.user_id).second) {
            throw InvalidInput(fmt::format("duplicate review of item {} by user {}", r.item_id, r.user_id));
        }
        if (is_self_review(authors, r)) {
            throw InvalidInput(fmt::format("user {} reviewed their own item {}", r.user_id, r.item_id));
        }
        item_set.insert(r.item_id);
        if (r.grade) {
            if (!std::isfinite(*r.grade)) {
                throw InvalidInput(fmt::format("non-finite grade on item {} by user {}", r.item_id, r.user_id));
            }
            user_set.insert(r.user_id);
        }
    }

    ReviewGraph g;
    g.scale_ = scale;
    g.range_ = range;
    g.items_.assign(item_set.begin(), item_set.end());
    g.users_.assign(user_set.begin(), user_set.end());
    for (const auto& r : records) {
        if (!r.grade) continue;
        g.edges_.push_back(Edge{index_of(g.items_, r.item_id), index_of(g.users_, r.user_id), *r.grade});
    }
    std::sort(g.edges_.begin(), g.edges_.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.item, a.user) < std::tie(b.item, b.user);
    });
    g.build_adjacency();
    return g;
}

void ReviewGraph::build_adjacency() {
    item_adj_.assign(items_.size(), {});
    user_adj_.assign(users_.size(), {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        item_adj_[edges_[e].item].push_back(e);
        user_adj_[edges_[e].user].push_back(e);
    }
}

std::optional<std::size_t> ReviewGraph::item_index(const std::string& id) const {
    return find_sorted(items_, id);
}

std::optional<std::size_t> ReviewGraph::user_index(const std::string& id) const {
    return find_sorted(users_, id);
}

ReviewGraph ReviewGraph::with_grades(std::span<const double> grades) const {
    if (grades.size() != edges_.size()) {
        throw InvalidInput(fmt::format("expected {} grades, got {}", edges_.size(), grades.size()));
    }
    ReviewGraph g = *this;
    for (std::size_t e = 0; e < grades.size(); ++e) g.edges_[e].grade = grades[e];
    return g;
}

std::string to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::item_degree: return "item_degree";
        case ViolationKind::user_degree: return "user_degree";
        case ViolationKind::grade_range: return "grade_range";
        case ViolationKind::duplicate_edge: return "duplicate_edge";
        case ViolationKind::self_review: return "self_review";
    }
    return "unknown";
}

std::vector<Violation> validate_graph(const ReviewGraph& g) {
    std::vector<Violation> out;
    for (std::size_t i = 0; i < g.items().size(); ++i) {
        if (auto d = g.item_edges(i).size(); d <= 1) {
            out.push_back({ViolationKind::item_degree, g.items()[i], fmt::format("item has {} review(s)", d)});
        }
    }
    for (std::size_t u = 0; u < g.users().size(); ++u) {
        if (auto d = g.user_edges(u).size(); d <= 1) {
            out.push_back({ViolationKind::user_degree, g.users()[u], fmt::format("user has {} review(s)", d)});
        }
    }
    if (g.range_policy() == RangePolicy::enforce) {
        for (const auto& e : g.edges()) {
            if (!g.scale().contains(e.grade)) {
                out.push_back({ViolationKind::grade_range, g.items()[e.item],
                               fmt::format("grade {} by {} outside [0, {}]", e.grade, g.users()[e.user],
                                           g.scale().max_grade())});
            }
        }
    }
    return out;
}

std::vector<Violation> validate_records(std::span<const ReviewRecord> records,
                                        GradeScale scale,
                                        const AuthorMap* authors) {
    std::vector<Violation> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : records) {
        if (!seen.emplace(r.item_id, r.user_id).second) {
            out.push_back({ViolationKind::duplicate_edge, r.item_id, "duplicate review by " + r.user_id});
        }
        if (is_self_review(authors, r)) {
            out.push_back({ViolationKind::self_review, r.item_id, "reviewed by its author " + r.user_id});
        }
        if (r.grade && !scale.contains(*r.grade)) {
            out.push_back({ViolationKind::grade_range, r.item_id,
                           fmt::format("grade {} by {} outside [0, {}]", *r.grade, r.user_id, scale.max_grade())});
        }
    }
    return out;
}

void MessageSet::add(Message m) {
    if (!std::isfinite(m.value) || !std::isfinite(m.variance) || !(m.variance > 0.0)) {
        throw InvalidInput(fmt::format("invalid message (value {}, variance {})", m.value, m.variance));
    }
    messages_.push_back(m);
    sum_precision_ += 1.0 / m.variance;
    sum_weighted_value_ += m.value / m.variance;
}

void MessageSet::clear() {
    messages_.clear();
    sum_precision_ = 0.0;
    sum_weighted_value_ = 0.0;
}

Estimate combine(const MessageSet& m) {
    if (m.empty()) throw EmptyMessageSet();
    return Estimate{m.sum_weighted_value() / m.sum_precision(), 1.0 / m.sum_precision()};
}

namespace {

// Below this fraction of the total precision, subtracting the excluded term
// loses too many digits and the remainder is summed afresh.
constexpr double kCancellationGuard = 1e-6;

Estimate recombine_without(const MessageSet& m, std::size_t index) {
    double precision = 0.0;
    double weighted = 0.0;
    const auto& msgs = m.messages();
    for (std::size_t k = 0; k < msgs.size(); ++k) {
        if (k == index) continue;
        precision += 1.0 / msgs[k].variance;
        weighted += msgs[k].value / msgs[k].variance;
    }
    return Estimate{weighted / precision, 1.0 / precision};
}

}  // namespace

Estimate combine_excluding_at(const MessageSet& m, std::size_t index) {
    if (index >= m.size()) {
        throw InvalidInput(fmt::format("exclusion index {} out of range for {} messages", index, m.size()));
    }
    if (m.size() < 2) throw EmptyMessageSet();
    const Message& x = m.messages()[index];
    const double precision = m.sum_precision() - 1.0 / x.variance;
    if (precision <= kCancellationGuard * m.sum_precision()) return recombine_without(m, index);
    const double weighted = m.sum_weighted_value() - x.value / x.variance;
    return Estimate{weighted / precision, 1.0 / precision};
}

Estimate combine_excluding(const MessageSet& m, std::size_t source) {
    const auto& msgs = m.messages();
    std::optional<std::size_t> found;
    for (std::size_t k = 0; k < msgs.size(); ++k) {
        if (msgs[k].source != source) continue;
        if (found) throw InvalidInput(fmt::format("source {} appears more than once", source));
        found = k;
    }
    if (!found) throw InvalidInput(fmt::format("source {} not present in message set", source));
    return combine_excluding_at(m, *found);
}

}  // namespace peergrade
