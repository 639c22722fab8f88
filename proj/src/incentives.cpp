#include "peergrade/incentives.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "peergrade/error.hpp"

namespace peergrade {

std::string to_string(QualityMetric m) {
    return m == QualityMetric::random_baseline ? "random-baseline" : "reference-level";
}

QualityMetric parse_quality_metric(std::string_view name) {
    if (name == "random-baseline" || name == "random_baseline") return QualityMetric::random_baseline;
    if (name == "reference-level" || name == "reference_level") return QualityMetric::reference_level;
    throw InvalidInput(fmt::format("unknown review-quality metric '{}'", name));
}

void IncentiveConfig::validate() const {
    if (reviews_due < 1) throw InvalidInput("reviews due must be at least 1");
    if (!(review_weight > 0.0 && review_weight < 1.0)) throw InvalidInput("review weight must lie in (0, 1)");
    if (!(reference_divisor > 0.0)) throw InvalidInput("reference divisor must be positive");
}

double random_baseline_variance(std::span<const double> grades, std::span<const double> consensus) {
    if (grades.empty() || consensus.empty()) throw EmptyInput("random baseline needs grades and consensus grades");
    // Over the full cross product, mean (g - c)^2 = var(g) + var(c) + (mean g - mean c)^2.
    const double ng = static_cast<double>(grades.size());
    const double nc = static_cast<double>(consensus.size());
    double mean_g = 0.0, mean_c = 0.0;
    for (double g : grades) mean_g += g;
    for (double c : consensus) mean_c += c;
    mean_g /= ng;
    mean_c /= nc;
    double var_g = 0.0, var_c = 0.0;
    for (double g : grades) var_g += (g - mean_g) * (g - mean_g);
    for (double c : consensus) var_c += (c - mean_c) * (c - mean_c);
    return var_g / ng + var_c / nc + (mean_g - mean_c) * (mean_g - mean_c);
}

double random_baseline_variance(const ReviewGraph& g, const ConsensusResult& r) {
    std::vector<double> grades;
    grades.reserve(g.edges().size());
    for (const auto& e : g.edges()) grades.push_back(e.grade);
    std::vector<double> consensus;
    consensus.reserve(r.item_grades.size());
    for (const auto& [id, est] : r.item_grades) consensus.push_back(est.grade);
    return random_baseline_variance(grades, consensus);
}

double user_squared_error(const std::string& user, const ReviewGraph& g, const ConsensusResult& r) {
    const auto u = g.user_index(user);
    if (!u || g.user_edges(*u).empty()) throw NoGrades(user);
    double sum = 0.0;
    for (auto e : g.user_edges(*u)) {
        const auto& edge = g.edges()[e];
        const double gap = edge.grade - r.item_grades.at(g.items()[edge.item]).grade;
        sum += gap * gap;
    }
    return sum / static_cast<double>(g.user_edges(*u).size());
}

double reference_level_variance(GradeScale scale, double divisor) {
    return scale.max_grade() * scale.max_grade() / divisor;
}

QualityScore review_quality(double squared_error, double denominator) {
    if (squared_error < 0.0) throw InvalidInput("squared error must be non-negative");
    if (!(denominator > 0.0)) return QualityScore{squared_error == 0.0 ? 1.0 : 0.0, true};
    return QualityScore{1.0 - std::sqrt(std::min(squared_error, denominator) / denominator), false};
}

double crowd_grade(double submission_grade, const ReviewQuality& rq, const IncentiveConfig& cfg) {
    if (!cfg.scale.contains(submission_grade)) {
        throw InvalidInput(fmt::format("submission grade {} outside [0, {}]", submission_grade,
                                       cfg.scale.max_grade()));
    }
    const double done = static_cast<double>(std::min(std::max(rq.reviews_done, 0), cfg.reviews_due));
    const double p = cfg.review_weight;
    return (1.0 - p) * submission_grade + p * (done / cfg.reviews_due) * (cfg.scale.max_grade() * rq.quality);
}

GradeInterpolator::GradeInterpolator(std::vector<AnchorPoint> anchors) : anchors_(std::move(anchors)) {
    if (anchors_.size() < 2) throw NotEnoughAnchors();
    for (std::size_t k = 1; k < anchors_.size(); ++k) {
        const auto& a = anchors_[k - 1];
        const auto& b = anchors_[k];
        if (!(b.crowd_grade > a.crowd_grade)) {
            throw InvalidAnchors(fmt::format("anchor crowd grades must strictly increase ({} then {})",
                                             a.crowd_grade, b.crowd_grade));
        }
        if (b.final_grade < a.final_grade) {
            throw InvalidAnchors(fmt::format("anchor final grades must not decrease ({} then {})",
                                             a.final_grade, b.final_grade));
        }
    }
}

double GradeInterpolator::operator()(double crowd) const {
    // Segment whose right end is the first anchor above `crowd`, clamped to the
    // first and last segments for extrapolation.
    auto upper = std::upper_bound(anchors_.begin(), anchors_.end(), crowd,
                                  [](double x, const AnchorPoint& a) { return x < a.crowd_grade; });
    std::size_t hi = static_cast<std::size_t>(upper - anchors_.begin());
    hi = std::clamp<std::size_t>(hi, 1, anchors_.size() - 1);
    const auto& a = anchors_[hi - 1];
    const auto& b = anchors_[hi];
    if (crowd == a.crowd_grade) return a.final_grade;
    if (crowd == b.crowd_grade) return b.final_grade;
    const double t = (crowd - a.crowd_grade) / (b.crowd_grade - a.crowd_grade);
    return a.final_grade + t * (b.final_grade - a.final_grade);
}

std::map<std::string, double> interpolate_final_grades(std::span<const AnchorPoint> anchors,
                                                       const std::map<std::string, double>& crowd) {
    const GradeInterpolator f({anchors.begin(), anchors.end()});
    std::map<std::string, double> out;
    for (const auto& [user, c] : crowd) out.emplace(user, f(c));
    return out;
}

std::vector<UserGrade> compute_user_grades(std::span<const ReviewRecord> records,
                                           const ReviewGraph& g,
                                           const ConsensusResult& consensus,
                                           const AuthorMap& authors,
                                           const IncentiveConfig& cfg,
                                           const std::optional<GradeInterpolator>& anchors) {
    cfg.validate();

    std::map<std::string, int> done;
    for (const auto& r : records) ++done[r.user_id];

    std::map<std::string, std::string> submission_of;
    for (const auto& [item, author] : authors) {
        if (!submission_of.emplace(author, item).second) {
            throw InvalidInput(fmt::format("user {} authored more than one submission", author));
        }
    }

    std::set<std::string> users(g.users().begin(), g.users().end());
    for (const auto& [user, n] : done) users.insert(user);
    for (const auto& [user, item] : submission_of) users.insert(user);

    const double denominator = cfg.metric == QualityMetric::random_baseline
                                   ? random_baseline_variance(g, consensus)
                                   : reference_level_variance(cfg.scale, cfg.reference_divisor);

    std::vector<UserGrade> out;
    out.reserve(users.size());
    for (const auto& user : users) {
        UserGrade ug;
        ug.review.user_id = user;
        ug.review.reviews_done = done.contains(user) ? done.at(user) : 0;
        const auto u = g.user_index(user);
        if (u && !g.user_edges(*u).empty()) {
            ug.review.squared_error = user_squared_error(user, g, consensus);
            const auto score = review_quality(ug.review.squared_error, denominator);
            ug.review.quality = score.quality;
            ug.review.degenerate_baseline = score.degenerate;
        }
        if (auto it = submission_of.find(user); it != submission_of.end()) {
            if (auto c = consensus.item_grades.find(it->second); c != consensus.item_grades.end()) {
                ug.submission_grade = c->second.grade;
                ug.crowd_grade = crowd_grade(c->second.grade, ug.review, cfg);
                if (anchors) ug.final_grade = (*anchors)(*ug.crowd_grade);
            }
        }
        out.push_back(std::move(ug));
    }
    return out;
}

}  // namespace peergrade
