#include "peergrade/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "peergrade/error.hpp"
#include "peergrade/metrics.hpp"

namespace peergrade {

std::string to_string(NoiseModel m) {
    switch (m) {
        case NoiseModel::gamma_squared_stddev: return "gamma-squared-stddev";
        case NoiseModel::gamma_variance: return "gamma-variance";
        case NoiseModel::none: return "none";
    }
    return "unknown";
}

NoiseModel parse_noise_model(std::string_view name) {
    if (name == "gamma-squared-stddev") return NoiseModel::gamma_squared_stddev;
    if (name == "gamma-variance") return NoiseModel::gamma_variance;
    if (name == "none") return NoiseModel::none;
    throw InvalidInput(fmt::format("unknown noise model '{}'", name));
}

double noise_variance(double draw, NoiseModel model) {
    switch (model) {
        case NoiseModel::gamma_squared_stddev: return draw * draw * draw * draw;
        case NoiseModel::gamma_variance: return draw;
        case NoiseModel::none: return 0.0;
    }
    return draw;
}

void SynthConfig::validate() const {
    if (n_users < 1 || n_items < 1) throw InvalidInput("need at least one user and one item");
    if (reviews_per_user < 2) throw InvalidInput("reviews per user must be at least 2");
    if (runs < 1) throw InvalidInput("runs must be at least 1");
    if (!(item_quality_sd >= 0.0)) throw InvalidInput("item quality sd must be non-negative");
    if (!(user_variance_shape > 0.0) || !(user_variance_scale > 0.0)) {
        throw InvalidInput("Gamma shape and scale must be positive");
    }
    if (reviews_per_user > n_items - 1) {
        throw InfeasibleConfig(fmt::format("{} reviews per user needs more than {} items", reviews_per_user, n_items));
    }
    const long long slots = static_cast<long long>(n_users) * reviews_per_user;
    if (slots / n_items < 2) {
        throw InfeasibleConfig(fmt::format("{} review slots cannot give each of {} items two reviews", slots, n_items));
    }
}

Rng run_stream(std::uint64_t seed, std::uint64_t run_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run_index), static_cast<std::uint32_t>(run_index >> 32)};
    return Rng(seq);
}

std::vector<std::pair<std::size_t, std::size_t>> balanced_assignment(int n_users, int n_items,
                                                                     int reviews_per_user, Rng& rng) {
    if (n_users < 1 || n_items < 1 || reviews_per_user < 1 || reviews_per_user > n_items) {
        throw InfeasibleConfig(fmt::format("cannot assign {} distinct items to each user out of {}",
                                           reviews_per_user, n_items));
    }
    const auto users = static_cast<std::size_t>(n_users);
    const auto items = static_cast<std::size_t>(n_items);
    const std::size_t n_slots = users * static_cast<std::size_t>(reviews_per_user);

    // Slot s is dealt to item s % items; slot_user[s] reviews it.
    std::vector<std::size_t> slot_user(n_slots);
    for (std::size_t s = 0; s < n_slots; ++s) slot_user[s] = s / static_cast<std::size_t>(reviews_per_user);
    std::vector<std::uint16_t> count(items * users);
    auto cell = [&](std::size_t item, std::size_t user) -> std::uint16_t& { return count[item * users + user]; };
    std::uniform_int_distribution<std::size_t> pick(0, n_slots - 1);

    constexpr int kMaxShuffles = 100;
    for (int attempt = 0; attempt < kMaxShuffles; ++attempt) {
        std::shuffle(slot_user.begin(), slot_user.end(), rng);
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t s = 0; s < n_slots; ++s) ++cell(s % items, slot_user[s]);

        // Swap the user of each duplicate slot with a slot on another item
        // where neither user is already present.
        bool ok = true;
        for (std::size_t s = 0; s < n_slots && ok; ++s) {
            const std::size_t is = s % items;
            if (cell(is, slot_user[s]) < 2) continue;
            bool fixed = false;
            for (std::size_t tries = 0; tries < 64 * n_slots && !fixed; ++tries) {
                const std::size_t t = pick(rng);
                const std::size_t it = t % items;
                const std::size_t u = slot_user[s];
                const std::size_t w = slot_user[t];
                if (it == is || cell(it, u) != 0 || cell(is, w) != 0) continue;
                --cell(is, u);
                --cell(it, w);
                ++cell(is, w);
                ++cell(it, u);
                std::swap(slot_user[s], slot_user[t]);
                fixed = true;
            }
            ok = fixed;
        }
        if (!ok) continue;

        std::vector<std::pair<std::size_t, std::size_t>> edges;
        edges.reserve(n_slots);
        for (std::size_t s = 0; s < n_slots; ++s) edges.emplace_back(s % items, slot_user[s]);
        std::sort(edges.begin(), edges.end());
        return edges;
    }
    throw InfeasibleConfig("could not find a duplicate-free balanced assignment");
}

namespace {

std::string make_id(char prefix, std::size_t index, std::size_t count) {
    const std::size_t width = std::max<std::size_t>(3, fmt::format("{}", count > 0 ? count - 1 : 0).size());
    return fmt::format("{}{:0{}}", prefix, index, width);
}

}  // namespace

SynthInstance generate_instance(const SynthConfig& cfg, std::uint64_t run_index) {
    cfg.validate();
    Rng rng = run_stream(cfg.seed, run_index);
    const auto users = static_cast<std::size_t>(cfg.n_users);
    const auto items = static_cast<std::size_t>(cfg.n_items);

    std::normal_distribution<double> standard_normal(0.0, 1.0);
    std::gamma_distribution<double> gamma(cfg.user_variance_shape, cfg.user_variance_scale);

    SynthInstance inst;
    std::vector<double> quality(items);
    for (std::size_t i = 0; i < items; ++i) {
        quality[i] = cfg.item_quality_sd * standard_normal(rng);
        inst.true_qualities.emplace(make_id('i', i, items), quality[i]);
    }
    std::vector<double> variance(users);
    for (std::size_t u = 0; u < users; ++u) {
        const double draw = gamma(rng);
        variance[u] = noise_variance(draw, cfg.noise);
        inst.gamma_draws.emplace(make_id('u', u, users), draw);
        inst.true_user_variances.emplace(make_id('u', u, users), variance[u]);
    }

    const auto pairs = balanced_assignment(cfg.n_users, cfg.n_items, cfg.reviews_per_user, rng);
    std::vector<ReviewRecord> records;
    records.reserve(pairs.size());
    inst.noise.reserve(pairs.size());
    for (const auto& [i, u] : pairs) {
        const double delta = std::sqrt(variance[u]) * standard_normal(rng);
        inst.noise.push_back(delta);
        records.push_back(ReviewRecord::graded(make_id('i', i, items), make_id('u', u, users), quality[i] + delta));
    }
    // Zero-padded ids sort like their indices, so graph edges follow `pairs`.
    inst.graph = ReviewGraph::from_records(records, GradeScale{}, nullptr, RangePolicy::unbounded);
    return inst;
}

RunScore score_run(const SynthInstance& inst, const ConsensusResult& r) {
    std::vector<double> truth;
    std::vector<double> estimate;
    for (const auto& [id, q] : inst.true_qualities) {
        truth.push_back(q);
        estimate.push_back(r.item_grades.at(id).grade);
    }
    std::vector<double> diff(truth.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        diff[i] = truth[i] - estimate[i];
        mean += diff[i];
    }
    mean /= static_cast<double>(diff.size());
    double ss = 0.0;
    for (double d : diff) ss += (d - mean) * (d - mean);
    return RunScore{pearson(truth, estimate), std::sqrt(ss / static_cast<double>(diff.size()))};
}

const ExperimentCell& ExperimentReport::cell(Algorithm a, double shape) const {
    for (const auto& c : cells) {
        if (c.algorithm == a && c.shape == shape) return c;
    }
    throw InvalidInput(fmt::format("no experiment cell for {} at shape {}", to_string(a), shape));
}

ExperimentReport run_experiment(const SynthConfig& cfg,
                                std::span<const Algorithm> algorithms,
                                const AggregatorConfig& base,
                                unsigned threads) {
    cfg.validate();
    if (algorithms.empty()) throw InvalidInput("no algorithms to compare");

    const auto runs = static_cast<std::size_t>(cfg.runs);
    // scores[run * algorithms.size() + a]
    std::vector<RunScore> scores(runs * algorithms.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (std::size_t run = next++; run < runs; run = next++) {
            try {
                const SynthInstance inst = generate_instance(cfg, run);
                for (std::size_t a = 0; a < algorithms.size(); ++a) {
                    AggregatorConfig ac = base;
                    ac.algorithm = algorithms[a];
                    scores[run * algorithms.size() + a] = score_run(inst, aggregate(inst.graph, ac));
                }
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::make_exception_ptr(Error(fmt::format(
                        "run {} (seed {}, shape {}): {}", run, cfg.seed, cfg.user_variance_shape, e.what())));
                }
                next = runs;
            }
        }
    };

    const unsigned n_threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(runs));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    ExperimentReport report;
    report.config = cfg;
    report.shapes.push_back(cfg.user_variance_shape);
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        ExperimentCell c{algorithms[a], cfg.user_variance_shape, cfg.runs};
        // Summed in run order so the result is independent of scheduling.
        for (std::size_t run = 0; run < runs; ++run) {
            c.mean_rho += scores[run * algorithms.size() + a].rho;
            c.mean_sigma += scores[run * algorithms.size() + a].sigma;
        }
        c.mean_rho /= static_cast<double>(runs);
        c.mean_sigma /= static_cast<double>(runs);
        report.cells.push_back(c);
    }
    return report;
}

ExperimentReport run_experiment(const SynthConfig& cfg,
                                std::span<const double> shapes,
                                std::span<const Algorithm> algorithms,
                                const AggregatorConfig& base,
                                unsigned threads) {
    if (shapes.empty()) throw InvalidInput("no Gamma shapes given");
    ExperimentReport report;
    for (double shape : shapes) {
        SynthConfig c = cfg;
        c.user_variance_shape = shape;
        ExperimentReport part = run_experiment(c, algorithms, base, threads);
        report.config = part.config;
        report.shapes.push_back(shape);
        report.cells.insert(report.cells.end(), part.cells.begin(), part.cells.end());
    }
    return report;
}

}  // namespace peergrade
