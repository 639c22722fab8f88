#include "peergrade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "peergrade/error.hpp"

namespace peergrade {

namespace {

void require_same_length(std::span<const double> x, std::span<const double> y, std::size_t min_n) {
    if (x.size() != y.size()) {
        throw InvalidInput(fmt::format("vector lengths differ ({} vs {})", x.size(), y.size()));
    }
    if (x.size() < min_n) throw EmptyInput(fmt::format("need at least {} items, got {}", min_n, x.size()));
}

double mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Sample standard deviation.
double stddev(std::span<const double> x) {
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

std::vector<double> standardize(std::span<const double> x) {
    const double m = mean(x);
    const double s = stddev(x);
    if (!(s > 0.0)) throw DegenerateVector("vector has zero variance");
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m) / s;
    return z;
}

// Pairs within runs of equal values of a sorted sequence.
template <class It, class Eq>
double tied_pairs(It first, It last, Eq eq) {
    double total = 0.0;
    while (first != last) {
        It run_end = first + 1;
        while (run_end != last && eq(*first, *run_end)) ++run_end;
        const double len = static_cast<double>(run_end - first);
        total += len * (len - 1.0) / 2.0;
        first = run_end;
    }
    return total;
}

// Counts pairs i < j with v[i] > v[j] while sorting v ascending.
double count_inversions(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0.0;
    const std::size_t mid = lo + (hi - lo) / 2;
    double inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
    std::size_t a = lo, b = mid, out = lo;
    while (a < mid && b < hi) {
        if (v[b] < v[a]) {
            inv += static_cast<double>(mid - a);
            scratch[out++] = v[b++];
        } else {
            scratch[out++] = v[a++];
        }
    }
    while (a < mid) scratch[out++] = v[a++];
    while (b < hi) scratch[out++] = v[b++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

}  // namespace

GradeVectorPair GradeVectorPair::from_maps(const std::map<std::string, double>& control,
                                           const std::map<std::string, double>& computed,
                                           std::size_t min_common) {
    GradeVectorPair p;
    for (const auto& [id, q] : control) {
        auto it = computed.find(id);
        if (it == computed.end()) continue;
        p.items.push_back(id);
        p.control.push_back(q);
        p.computed.push_back(it->second);
    }
    if (p.items.size() < min_common) {
        throw EmptyInput(fmt::format("control and computed grades share {} item(s); need {}", p.items.size(),
                                     min_common));
    }
    return p;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 2);
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateVector("vector has zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double kendall_tau_distance(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 2);
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    std::vector<std::pair<double, double>> sorted(n);
    for (std::size_t k = 0; k < n; ++k) sorted[k] = {x[order[k]], y[order[k]]};
    const double tied_x = tied_pairs(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.first == b.first; });
    const double tied_both = tied_pairs(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a == b; });

    // With ties in x ordered by y, every strict inversion of y is a strictly
    // discordant pair.
    std::vector<double> ys(n), scratch(n);
    for (std::size_t k = 0; k < n; ++k) ys[k] = sorted[k].second;
    const double discordant = count_inversions(ys, scratch, 0, n);
    const double tied_y = tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });

    const double total = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    const double half_ties = tied_x + tied_y - 2.0 * tied_both;
    return (discordant + 0.5 * half_ties) / total;
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t k = 0;
    while (k < order.size()) {
        std::size_t end = k + 1;
        while (end < order.size() && x[order[end]] == x[order[k]]) ++end;
        const double rank = (static_cast<double>(k + 1) + static_cast<double>(end)) / 2.0;
        for (std::size_t t = k; t < end; ++t) ranks[order[t]] = rank;
        k = end;
    }
    return ranks;
}

double spearman_footrule(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 2);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    double sum = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) sum += std::abs(rx[i] - ry[i]);
    const double n = static_cast<double>(x.size());
    return sum / std::floor(n * n / 2.0);
}

double norm2(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 1);
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(ss);
}

double rms(std::span<const double> x, std::span<const double> y) {
    return norm2(x, y) / std::sqrt(static_cast<double>(x.size()));
}

double s_score(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 2);
    const auto zx = standardize(x);
    const auto zy = standardize(y);
    std::vector<double> diff(zx.size());
    for (std::size_t i = 0; i < zx.size(); ++i) diff[i] = zx[i] - zy[i];
    return 1.0 - stddev(diff) / std::sqrt(2.0);
}

double identical_pair_d(const std::map<std::string, double>& grades,
                        std::span<const std::pair<std::string, std::string>> pairs) {
    if (pairs.empty()) throw EmptyInput("no identical pairs given");
    double sum = 0.0;
    for (const auto& [a, b] : pairs) {
        auto ia = grades.find(a);
        if (ia == grades.end()) throw MissingItem(a);
        auto ib = grades.find(b);
        if (ib == grades.end()) throw MissingItem(b);
        sum += (ia->second - ib->second) * (ia->second - ib->second);
    }
    return sum / static_cast<double>(pairs.size());
}

MetricSuite evaluate_all(const GradeVectorPair& p) {
    MetricSuite m;
    m.items = p.size();
    m.pearson = pearson(p.control, p.computed);
    m.kendall_tau = kendall_tau_distance(p.control, p.computed);
    m.footrule = spearman_footrule(p.control, p.computed);
    m.norm2 = norm2(p.control, p.computed);
    m.rms = rms(p.control, p.computed);
    m.s_score = s_score(p.control, p.computed);
    return m;
}

}  // namespace peergrade
