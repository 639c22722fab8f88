#pragma once

// Review-quality scores, crowd-grades, and anchor-based final grades.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peergrade/aggregation.hpp"
#include "peergrade/core.hpp"

namespace peergrade {

enum class QualityMetric {
    random_baseline,  // compare against a grader drawing grades at random from the pool
    reference_level,  // compare against the fixed level G^2 / 3.125
};

std::string to_string(QualityMetric m);
QualityMetric parse_quality_metric(std::string_view name);

struct IncentiveConfig {
    int reviews_due = 5;
    double review_weight = 0.25;
    GradeScale scale;
    QualityMetric metric = QualityMetric::reference_level;
    /// v_G = G^2 / reference_divisor under QualityMetric::reference_level.
    double reference_divisor = 3.125;

    /// Throws InvalidInput unless reviews_due >= 1, 0 < review_weight < 1, reference_divisor > 0.
    void validate() const;
};

struct ReviewQuality {
    std::string user_id;
    double squared_error = 0.0;  // mean squared gap to consensus
    double quality = 0.0;        // in [0, 1]
    int reviews_done = 0;        // completed plus declined
    bool degenerate_baseline = false;
};

/// Mean of (g - c)^2 over every pair of an assigned grade g and a consensus grade c.
double random_baseline_variance(std::span<const double> grades, std::span<const double> consensus);
/// Throws EmptyInput if the graph has no grades or the result no items.
double random_baseline_variance(const ReviewGraph& g, const ConsensusResult& r);

/// Mean of (g_ij - q_i)^2 over the items j graded. Throws NoGrades.
double user_squared_error(const std::string& user, const ReviewGraph& g, const ConsensusResult& r);

double reference_level_variance(GradeScale scale, double divisor = 3.125);

struct QualityScore {
    double quality;
    bool degenerate;  // denominator was zero; limit convention applied
};

/// 1 - sqrt(min(squared_error, denominator) / denominator). A zero denominator
/// yields 1 for a zero error and 0 otherwise.
QualityScore review_quality(double squared_error, double denominator);

/// (1 - p_r) * submission_grade + p_r * min(m, N)/N * G * quality.
double crowd_grade(double submission_grade, const ReviewQuality& rq, const IncentiveConfig& cfg);

struct AnchorPoint {
    double crowd_grade;
    double final_grade;
};

/// Piecewise-linear map through instructor anchors, extended linearly past
/// both ends.
class GradeInterpolator {
public:
    /// Throws NotEnoughAnchors, or InvalidAnchors unless crowd grades strictly
    /// increase and final grades do not decrease.
    explicit GradeInterpolator(std::vector<AnchorPoint> anchors);

    double operator()(double crowd) const;
    const std::vector<AnchorPoint>& anchors() const { return anchors_; }

private:
    std::vector<AnchorPoint> anchors_;
};

std::map<std::string, double> interpolate_final_grades(std::span<const AnchorPoint> anchors,
                                                       const std::map<std::string, double>& crowd);

struct UserGrade {
    ReviewQuality review;
    std::optional<double> submission_grade;
    std::optional<double> crowd_grade;
    std::optional<double> final_grade;
};

/// Everything cmd_grade reports, for every user seen in the records, the
/// graph, or the author map. Users without a known submission get no crowd grade.
std::vector<UserGrade> compute_user_grades(std::span<const ReviewRecord> records,
                                           const ReviewGraph& g,
                                           const ConsensusResult& consensus,
                                           const AuthorMap& authors,
                                           const IncentiveConfig& cfg,
                                           const std::optional<GradeInterpolator>& anchors = std::nullopt);

}  // namespace peergrade
