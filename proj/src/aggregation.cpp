#include "peergrade/aggregation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "peergrade/error.hpp"

namespace peergrade {

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::avg: return "avg";
        case Algorithm::vancouver: return "vancouver";
        case Algorithm::maverage: return "maverage";
        case Algorithm::debiased: return "debiased";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
    if (name == "avg") return Algorithm::avg;
    if (name == "vancouver") return Algorithm::vancouver;
    if (name == "maverage") return Algorithm::maverage;
    if (name == "debiased") return Algorithm::debiased;
    throw InvalidInput(fmt::format("unknown algorithm '{}'", name));
}

namespace {

void require_graded_items(const ReviewGraph& g) {
    std::vector<std::string> ungraded;
    for (std::size_t i = 0; i < g.items().size(); ++i) {
        if (g.item_edges(i).empty()) ungraded.push_back(g.items()[i]);
    }
    if (!ungraded.empty()) throw UngradedItem(std::move(ungraded));
}

void require_admissible(const ReviewGraph& g, bool allow_degenerate) {
    std::vector<std::string> nodes;
    std::string first;
    for (const auto& v : validate_graph(g)) {
        const bool degree = v.kind == ViolationKind::item_degree || v.kind == ViolationKind::user_degree;
        if (degree && allow_degenerate) continue;
        if (first.empty()) first = to_string(v.kind) + " at " + v.node + ": " + v.detail;
        nodes.push_back(v.node);
    }
    if (!nodes.empty()) {
        std::string what = fmt::format("review graph not admissible ({} violation(s); first: {})", nodes.size(), first);
        throw GraphNotAdmissible(what, std::move(nodes));
    }
}

void require_config(const AggregatorConfig& cfg) {
    if (cfg.iterations < 0) throw InvalidInput("iterations must be >= 0");
    if (!(cfg.initial_variance > 0.0)) throw InvalidInput("initial variance must be positive");
    if (cfg.variance_floor && !(*cfg.variance_floor > 0.0)) throw InvalidInput("variance floor must be positive");
}

class FloorClamp {
public:
    explicit FloorClamp(double floor) : floor_(floor) {}
    double operator()(double v) {
        if (v >= floor_) return v;
        ++hits_;
        return floor_;
    }
    std::size_t hits() const { return hits_; }

private:
    double floor_;
    std::size_t hits_ = 0;
};

void fill_ranking(ConsensusResult& r) { r.ranking = rank_from_grades(r.item_grades); }

}  // namespace

ConsensusResult aggregate_avg(const ReviewGraph& g) {
    require_graded_items(g);
    if (g.range_policy() == RangePolicy::enforce) {
        for (const auto& e : g.edges()) {
            if (!g.scale().contains(e.grade)) {
                throw GraphNotAdmissible(fmt::format("grade {} outside [0, {}]", e.grade, g.scale().max_grade()),
                                         {g.items()[e.item]});
            }
        }
    }
    ConsensusResult r;
    for (std::size_t i = 0; i < g.items().size(); ++i) {
        const auto adj = g.item_edges(i);
        double sum = 0.0;
        for (auto e : adj) sum += g.edges()[e].grade;
        const double n = static_cast<double>(adj.size());
        const double mean = sum / n;
        std::optional<double> variance;
        if (adj.size() > 1) {
            double ss = 0.0;
            for (auto e : adj) ss += (g.edges()[e].grade - mean) * (g.edges()[e].grade - mean);
            variance = ss / (n - 1.0) / n;
        }
        r.item_grades.emplace(g.items()[i], ItemEstimate{mean, variance});
    }
    for (const auto& u : g.users()) r.user_variances.emplace(u, std::nullopt);
    fill_ranking(r);
    return r;
}

ConsensusResult aggregate_vancouver(const ReviewGraph& g,
                                    const AggregatorConfig& cfg,
                                    const MessageObserver& observer) {
    require_config(cfg);
    require_admissible(g, cfg.allow_degenerate);
    require_graded_items(g);

    const auto& edges = g.edges();
    FloorClamp clamp(cfg.variance_floor.value_or(g.scale().variance_floor()));

    // Variance attached to each user->item message, indexed by edge.
    std::vector<double> edge_variance(edges.size(), cfg.initial_variance);
    // Item->user message along each edge; absent when the item has no other reviewer.
    std::vector<std::optional<Estimate>> to_user(edges.size());
    std::vector<std::optional<double>> user_variance(g.users().size());

    MessageSet set;
    for (int k = 1; k <= cfg.iterations; ++k) {
        for (std::size_t i = 0; i < g.items().size(); ++i) {
            const auto adj = g.item_edges(i);
            set.clear();
            for (auto e : adj) set.add({edges[e].user, edges[e].grade, edge_variance[e]});
            for (std::size_t p = 0; p < adj.size(); ++p) {
                const auto e = adj[p];
                if (set.size() < 2) {
                    to_user[e].reset();
                    continue;
                }
                Estimate est = combine_excluding_at(set, p);
                est.variance = clamp(est.variance);
                to_user[e] = est;
                if (observer) observer({k, i, edges[e].user, est});
            }
        }

        for (std::size_t u = 0; u < g.users().size(); ++u) {
            const auto adj = g.user_edges(u);
            set.clear();
            // Position of each edge's squared-gap message in `set`, if any.
            std::vector<std::optional<std::size_t>> position(adj.size());
            for (std::size_t p = 0; p < adj.size(); ++p) {
                const auto e = adj[p];
                if (!to_user[e]) continue;
                const double gap = to_user[e]->value - edges[e].grade;
                position[p] = set.size();
                set.add({edges[e].item, gap * gap, to_user[e]->variance});
            }
            for (std::size_t p = 0; p < adj.size(); ++p) {
                double v = cfg.initial_variance;
                if (position[p]) {
                    if (set.size() >= 2) v = combine_excluding_at(set, *position[p]).value;
                } else if (!set.empty()) {
                    v = combine(set).value;
                }
                edge_variance[adj[p]] = clamp(v);
            }
            if (k == cfg.iterations) {
                user_variance[u] = set.empty() ? cfg.initial_variance : clamp(combine(set).value);
            }
        }
    }

    ConsensusResult r;
    for (std::size_t i = 0; i < g.items().size(); ++i) {
        set.clear();
        for (auto e : g.item_edges(i)) set.add({edges[e].user, edges[e].grade, edge_variance[e]});
        const Estimate est = combine(set);
        r.item_grades.emplace(g.items()[i], ItemEstimate{est.value, est.variance});
    }
    for (std::size_t u = 0; u < g.users().size(); ++u) r.user_variances.emplace(g.users()[u], user_variance[u]);
    r.floor_hits = clamp.hits();
    fill_ranking(r);
    return r;
}

Estimate trimmed_weighted_mean(std::vector<WeightedGrade> grades) {
    if (grades.empty()) throw EmptyInput("no grades to average");
    if (grades.size() >= 4) {
        auto by_grade_then_user = [](const WeightedGrade& a, const WeightedGrade& b) {
            return a.grade < b.grade || (a.grade == b.grade && a.user < b.user);
        };
        auto lowest = std::min_element(grades.begin(), grades.end(), by_grade_then_user);
        grades.erase(lowest);
        auto highest = std::min_element(grades.begin(), grades.end(), [](const WeightedGrade& a, const WeightedGrade& b) {
            return a.grade > b.grade || (a.grade == b.grade && a.user < b.user);
        });
        grades.erase(highest);
    }
    MessageSet set;
    for (std::size_t k = 0; k < grades.size(); ++k) set.add({k, grades[k].grade, grades[k].variance});
    return combine(set);
}

ConsensusResult aggregate_maverage(const ReviewGraph& g, const AggregatorConfig& cfg) {
    ConsensusResult base = aggregate_vancouver(g, cfg);
    const double fallback = cfg.initial_variance;

    ConsensusResult r;
    r.user_variances = base.user_variances;
    r.floor_hits = base.floor_hits;
    for (std::size_t i = 0; i < g.items().size(); ++i) {
        std::vector<WeightedGrade> grades;
        for (auto e : g.item_edges(i)) {
            const auto& user = g.users()[g.edges()[e].user];
            grades.push_back({user, g.edges()[e].grade, base.user_variances.at(user).value_or(fallback)});
        }
        const Estimate est = trimmed_weighted_mean(std::move(grades));
        r.item_grades.emplace(g.items()[i], ItemEstimate{est.value, est.variance});
    }
    fill_ranking(r);
    return r;
}

std::map<std::string, double> user_biases(const ReviewGraph& g, const ConsensusResult& r) {
    std::map<std::string, double> out;
    for (std::size_t u = 0; u < g.users().size(); ++u) {
        const auto adj = g.user_edges(u);
        if (adj.empty()) continue;
        double sum = 0.0;
        for (auto e : adj) {
            const auto& edge = g.edges()[e];
            sum += edge.grade - r.item_grades.at(g.items()[edge.item]).grade;
        }
        out.emplace(g.users()[u], sum / static_cast<double>(adj.size()));
    }
    return out;
}

ConsensusResult aggregate_debiased(const ReviewGraph& g, const AggregatorConfig& cfg) {
    const ConsensusResult first = aggregate_vancouver(g, cfg);
    const auto bias = user_biases(g, first);

    std::vector<double> adjusted;
    adjusted.reserve(g.edges().size());
    for (const auto& e : g.edges()) {
        double grade = e.grade - bias.at(g.users()[e.user]);
        if (g.range_policy() == RangePolicy::enforce) grade = std::clamp(grade, 0.0, g.scale().max_grade());
        adjusted.push_back(grade);
    }
    ConsensusResult r = aggregate_vancouver(g.with_grades(adjusted), cfg);
    r.user_bias = bias;
    r.floor_hits += first.floor_hits;
    return r;
}

ConsensusResult aggregate(const ReviewGraph& g, const AggregatorConfig& cfg) {
    switch (cfg.algorithm) {
        case Algorithm::avg: return aggregate_avg(g);
        case Algorithm::vancouver: return aggregate_vancouver(g, cfg);
        case Algorithm::maverage: return aggregate_maverage(g, cfg);
        case Algorithm::debiased: return aggregate_debiased(g, cfg);
    }
    throw InvalidInput("unknown algorithm");
}

std::vector<std::string> rank_from_grades(const std::map<std::string, ItemEstimate>& grades) {
    std::vector<std::pair<std::string, double>> rows;
    rows.reserve(grades.size());
    for (const auto& [id, est] : grades) rows.emplace_back(id, est.grade);
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.second > b.second;
    });
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (auto& row : rows) out.push_back(std::move(row.first));
    return out;
}

}  // namespace peergrade
