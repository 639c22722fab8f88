#include "peergrade/cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "peergrade/aggregation.hpp"
#include "peergrade/assigner.hpp"
#include "peergrade/incentives.hpp"
#include "peergrade/io.hpp"
#include "peergrade/metrics.hpp"
#include "peergrade/synth.hpp"

namespace peergrade::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20130801;
constexpr const char* kSeedEnv = "PEERGRADE_SEED";

std::uint64_t default_seed() {
    if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
        std::uint64_t v = 0;
        std::string_view s(env);
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || end != s.data() + s.size()) {
            throw InvalidInput(fmt::format("{}='{}' is not an unsigned integer", kSeedEnv, env));
        }
        return v;
    }
    return kDefaultSeed;
}

json input_entry(const std::string& path) {
    return {{"path", path}, {"sha256", io::sha256_hex(io::read_file(path))}};
}

json manifest(const std::string& command, json config, json inputs) {
    return {{"schema_version", io::kSchemaVersion},
            {"tool", "peergrade"},
            {"version", kVersion},
            {"command", command},
            {"config", std::move(config)},
            {"inputs", std::move(inputs)}};
}

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

std::string default_users_output(const std::string& output) {
    fs::path p(output);
    fs::path stem = p.parent_path() / p.stem();
    return stem.string() + "_users" + (p.has_extension() ? p.extension().string() : std::string(".csv"));
}

Timestamp resolve_now(const std::string& now) {
    if (!now.empty()) return io::parse_timestamp(now);
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

void report_violations(const std::vector<Violation>& violations, std::ostream& err) {
    for (const auto& v : violations) fmt::print(err, "violation: {} {} ({})\n", to_string(v.kind), v.node, v.detail);
}

// ---------------------------------------------------------------- aggregate

struct AggregateArgs {
    std::string input;
    std::string authors;
    std::string algorithm = "vancouver";
    int iterations = 10;
    double scale_max = 10.0;
    double initial_variance = 1.0;
    bool allow_degenerate = false;
    std::string output;
    std::string users_output;
};

int cmd_aggregate(const AggregateArgs& a, std::ostream& out, std::ostream& err) {
    const GradeScale scale(a.scale_max);
    AggregatorConfig cfg;
    cfg.algorithm = parse_algorithm(a.algorithm);
    cfg.iterations = a.iterations;
    cfg.initial_variance = a.initial_variance;
    cfg.allow_degenerate = a.allow_degenerate;

    const auto records = io::parse_reviews(io::read_csv(a.input));
    std::optional<AuthorMap> authors;
    if (!a.authors.empty()) authors = io::parse_authors(io::read_csv(a.authors));
    const AuthorMap* author_ptr = authors ? &*authors : nullptr;

    if (auto bad = validate_records(records, scale, author_ptr); !bad.empty()) {
        report_violations(bad, err);
        return kDomainViolation;
    }
    const auto graph = ReviewGraph::from_records(records, scale, author_ptr);

    std::vector<Violation> blocking;
    for (const auto& v : validate_graph(graph)) {
        const bool degree = v.kind == ViolationKind::item_degree || v.kind == ViolationKind::user_degree;
        if (degree && (cfg.algorithm == Algorithm::avg || cfg.allow_degenerate)) continue;
        blocking.push_back(v);
    }
    if (!blocking.empty()) {
        report_violations(blocking, err);
        return kDomainViolation;
    }

    const ConsensusResult result = aggregate(graph, cfg);
    const std::string items_csv = io::format_item_grades(result);
    const std::string users_csv = io::format_user_variances(result);
    const std::string users_path = a.users_output.empty() ? default_users_output(a.output) : a.users_output;

    json inputs = json::array({input_entry(a.input)});
    if (!a.authors.empty()) inputs.push_back(input_entry(a.authors));
    json m = manifest("aggregate",
                      {{"algorithm", to_string(cfg.algorithm)},
                       {"iterations", cfg.iterations},
                       {"scale_max", scale.max_grade()},
                       {"initial_variance", cfg.initial_variance},
                       {"variance_floor", scale.variance_floor()},
                       {"allow_degenerate", cfg.allow_degenerate}},
                      std::move(inputs));
    m["outputs"] = json::array({{{"path", a.output}, {"sha256", io::sha256_hex(items_csv)}},
                                {{"path", users_path}, {"sha256", io::sha256_hex(users_csv)}}});

    io::write_file_atomic(a.output, items_csv);
    io::write_file_atomic(users_path, users_csv);
    io::write_file_atomic(manifest_path(a.output), m.dump(2) + "\n");
    if (result.floor_hits > 0) {
        fmt::print(err, "note: {} variance estimate(s) raised to the floor {}\n", result.floor_hits,
                   scale.variance_floor());
    }
    fmt::print(out, "wrote {} item grades to {} and {} user variances to {}\n", result.item_grades.size(), a.output,
               result.user_variances.size(), users_path);
    return kOk;
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
    int users = 50;
    int items = 50;
    int reviews_per_user = 6;
    std::vector<double> shapes{2.0, 3.0};
    double scale = 0.4;
    double quality_sd = 1.0;
    int runs = 100;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> algorithms{"avg", "vancouver"};
    std::string noise = "gamma-squared-stddev";
    int iterations = 10;
    unsigned threads = 1;
    std::string json_out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream&) {
    SynthConfig cfg;
    cfg.n_users = a.users;
    cfg.n_items = a.items;
    cfg.reviews_per_user = a.reviews_per_user;
    cfg.user_variance_scale = a.scale;
    cfg.item_quality_sd = a.quality_sd;
    cfg.runs = a.runs;
    cfg.seed = a.seed ? *a.seed : default_seed();
    cfg.noise = parse_noise_model(a.noise);
    std::vector<Algorithm> algorithms;
    for (const auto& name : a.algorithms) algorithms.push_back(parse_algorithm(name));
    AggregatorConfig base;
    base.iterations = a.iterations;

    const ExperimentReport report = run_experiment(cfg, a.shapes, algorithms, base, a.threads);
    if (!a.json_out.empty()) {
        json j = io::report_to_json(report);
        j["manifest"] = manifest("simulate", {{"iterations", a.iterations}, {"algorithms", a.algorithms}},
                                 json::array());
        io::write_file_atomic(a.json_out, j.dump(2) + "\n");
    }
    out << io::format_report_table(report);
    return kOk;
}

// -------------------------------------------------------------------- grade

struct GradeArgs {
    std::string reviews;
    std::string consensus;
    std::string authors;
    std::string anchors;
    int n_reviews = 5;
    double review_weight = 0.25;
    double scale_max = 10.0;
    std::string metric = "reference-level";
    double reference_divisor = 3.125;
    std::string output;
};

int cmd_grade(const GradeArgs& a, std::ostream& out, std::ostream& err) {
    IncentiveConfig cfg;
    cfg.reviews_due = a.n_reviews;
    cfg.review_weight = a.review_weight;
    cfg.scale = GradeScale(a.scale_max);
    cfg.metric = parse_quality_metric(a.metric);
    cfg.reference_divisor = a.reference_divisor;
    cfg.validate();

    const auto records = io::parse_reviews(io::read_csv(a.reviews));
    const ConsensusResult consensus = io::parse_item_grades(io::read_csv(a.consensus));
    AuthorMap authors;
    if (!a.authors.empty()) authors = io::parse_authors(io::read_csv(a.authors));
    std::optional<GradeInterpolator> interpolator;
    if (!a.anchors.empty()) interpolator.emplace(io::parse_anchors(io::read_csv(a.anchors)));

    const auto graph = ReviewGraph::from_records(records, cfg.scale, authors.empty() ? nullptr : &authors);
    for (const auto& e : graph.edges()) {
        if (!consensus.item_grades.contains(graph.items()[e.item])) {
            throw MissingItem(graph.items()[e.item]);
        }
    }
    const auto grades = compute_user_grades(records, graph, consensus, authors, cfg, interpolator);
    for (const auto& g : grades) {
        if (g.review.degenerate_baseline) {
            fmt::print(err, "warning: random baseline variance is zero; limit convention used for {}\n",
                       g.review.user_id);
        }
    }
    const std::string csv = io::format_user_grades(grades);
    if (a.output.empty()) {
        out << csv;
        return kOk;
    }
    json inputs = json::array({input_entry(a.reviews), input_entry(a.consensus)});
    if (!a.authors.empty()) inputs.push_back(input_entry(a.authors));
    if (!a.anchors.empty()) inputs.push_back(input_entry(a.anchors));
    json m = manifest("grade",
                      {{"reviews_due", cfg.reviews_due},
                       {"review_weight", cfg.review_weight},
                       {"scale_max", cfg.scale.max_grade()},
                       {"metric", to_string(cfg.metric)},
                       {"reference_divisor", cfg.reference_divisor}},
                      std::move(inputs));
    m["outputs"] = json::array({{{"path", a.output}, {"sha256", io::sha256_hex(csv)}}});
    io::write_file_atomic(a.output, csv);
    io::write_file_atomic(manifest_path(a.output), m.dump(2) + "\n");
    fmt::print(out, "wrote {} user grades to {}\n", grades.size(), a.output);
    return kOk;
}

// ----------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string computed;
    std::string control;
    std::string pairs;
    bool json_out = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream&) {
    const auto computed = io::parse_grade_map(io::read_csv(a.computed));
    const auto control = io::parse_grade_map(io::read_csv(a.control));
    const auto pair = GradeVectorPair::from_maps(control, computed, 2);
    const MetricSuite m = evaluate_all(pair);
    std::optional<double> d;
    std::size_t n_pairs = 0;
    if (!a.pairs.empty()) {
        const auto pairs = io::parse_pairs(io::read_csv(a.pairs));
        n_pairs = pairs.size();
        d = identical_pair_d(computed, pairs);
    }
    if (a.json_out) {
        json j = {{"schema_version", io::kSchemaVersion}, {"items", m.items},     {"pearson", m.pearson},
                  {"kendall_tau", m.kendall_tau},         {"footrule", m.footrule}, {"norm2", m.norm2},
                  {"rms", m.rms},                         {"s_score", m.s_score}};
        if (d) {
            j["identical_pair_d"] = *d;
            j["pairs"] = n_pairs;
        }
        out << j.dump(2) << '\n';
        return kOk;
    }
    fmt::print(out, "items        {}\n", m.items);
    fmt::print(out, "pearson      {}\n", io::format_real(m.pearson));
    fmt::print(out, "kendall_tau  {}\n", io::format_real(m.kendall_tau));
    fmt::print(out, "footrule     {}\n", io::format_real(m.footrule));
    fmt::print(out, "norm2        {}\n", io::format_real(m.norm2));
    fmt::print(out, "rms          {}\n", io::format_real(m.rms));
    fmt::print(out, "s_score      {}\n", io::format_real(m.s_score));
    if (d) fmt::print(out, "pair_d       {} ({} pairs)\n", io::format_real(*d), n_pairs);
    return kOk;
}

// ------------------------------------------------------------------- assign

struct AssignArgs {
    std::string state;
    std::string now;
    // init
    std::string submissions;
    std::vector<std::string> users;
    int reviews_due = 5;
    std::optional<std::uint64_t> seed;
    double window_hours = 6.0;
    double scale_max = 10.0;
    // transitions
    std::string user;
    std::string item;
    double grade = 0.0;
    std::string reason;
    bool extra = false;
    std::string export_path;
};

AssignmentState load_state(const std::string& path) {
    const std::string text = io::read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(fmt::format("{}: corrupt state file: {}", path, e.what()));
    }
    return io::state_from_json(j);
}

void save_state(const std::string& path, const AssignmentState& s) {
    io::write_file_atomic(path, io::state_to_json(s).dump(2) + "\n");
}

int cmd_assign(const AssignArgs& a, const std::string& action, std::ostream& out) {
    if (action == "init") {
        if (fs::exists(a.state)) throw DomainError(a.state + " already exists");
        io::LockFile lock(a.state);
        AssignPolicy policy;
        policy.reviews_due = a.reviews_due;
        policy.rng_seed = a.seed ? *a.seed : default_seed();
        policy.likely_window = std::chrono::seconds(static_cast<long long>(std::llround(a.window_hours * 3600.0)));
        policy.scale = GradeScale(a.scale_max);
        AssignmentState s(io::parse_authors(io::read_csv(a.submissions)), policy,
                          std::set<std::string>(a.users.begin(), a.users.end()));
        save_state(a.state, s);
        fmt::print(out, "initialized {} with {} submissions\n", a.state, s.data().submissions.size());
        return kOk;
    }

    io::LockFile lock(a.state);
    AssignmentState s = load_state(a.state);
    const Timestamp now = resolve_now(a.now);

    if (action == "next") {
        const std::string item = s.next_task(a.user, now, a.extra);
        save_state(a.state, s);
        out << item << '\n';
    } else if (action == "complete") {
        s.complete_task(a.user, a.item, a.grade, now);
        save_state(a.state, s);
        fmt::print(out, "completed {} {}\n", a.item, a.user);
    } else if (action == "decline") {
        s.decline_task(a.user, a.item, a.reason, now);
        save_state(a.state, s);
        fmt::print(out, "declined {} {}\n", a.item, a.user);
    } else if (action == "orphans") {
        for (const auto& item : s.orphaned_submissions()) out << item << '\n';
    } else if (action == "export") {
        io::write_file_atomic(a.export_path, io::format_reviews(s.records()));
        fmt::print(out, "wrote {} review records to {}\n", s.records().size(), a.export_path);
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reputation-weighted consensus grading for peer-reviewed submissions", "peergrade"};
    app.set_version_flag("--version", std::string("peergrade ") + kVersion);
    app.require_subcommand(1);

    AggregateArgs agg;
    auto* aggregate = app.add_subcommand("aggregate", "Compute consensus grades from peer reviews");
    aggregate->add_option("--input", agg.input, "reviews CSV (item_id,user_id,grade[,reason])")->required();
    aggregate->add_option("--authors", agg.authors, "authors CSV (item_id,author_id) for self-review checks");
    aggregate->add_option("--algorithm", agg.algorithm, "avg | vancouver | maverage | debiased")
        ->check(CLI::IsMember({"avg", "vancouver", "maverage", "debiased"}));
    aggregate->add_option("--iterations", agg.iterations, "iterations K")->check(CLI::NonNegativeNumber);
    aggregate->add_option("--scale-max", agg.scale_max, "maximum grade G")->check(CLI::PositiveNumber);
    aggregate->add_option("--initial-variance", agg.initial_variance)->check(CLI::PositiveNumber);
    aggregate->add_flag("--allow-degenerate", agg.allow_degenerate, "process nodes with fewer than two reviews");
    aggregate->add_option("--output", agg.output, "item grades CSV")->required();
    aggregate->add_option("--users-output", agg.users_output, "user variances CSV (default <output>_users.csv)");

    SimulateArgs sim;
    std::uint64_t sim_seed = 0;
    auto* simulate = app.add_subcommand("simulate", "Run the synthetic accuracy experiment");
    simulate->add_option("--users", sim.users)->check(CLI::PositiveNumber);
    simulate->add_option("--items", sim.items)->check(CLI::PositiveNumber);
    simulate->add_option("--reviews-per-user", sim.reviews_per_user)->check(CLI::PositiveNumber);
    simulate->add_option("--shape", sim.shapes, "Gamma shape k (repeatable)")->delimiter(',');
    simulate->add_option("--scale", sim.scale, "Gamma scale")->check(CLI::PositiveNumber);
    simulate->add_option("--quality-sd", sim.quality_sd)->check(CLI::NonNegativeNumber);
    simulate->add_option("--runs", sim.runs)->check(CLI::PositiveNumber);
    auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "base seed (default $PEERGRADE_SEED or fixed)");
    simulate->add_option("--algorithms", sim.algorithms)->delimiter(',')
        ->check(CLI::IsMember({"avg", "vancouver", "maverage", "debiased"}));
    simulate->add_option("--noise-model", sim.noise)
        ->check(CLI::IsMember({"gamma-squared-stddev", "gamma-variance", "none"}));
    simulate->add_option("--iterations", sim.iterations)->check(CLI::NonNegativeNumber);
    simulate->add_option("--threads", sim.threads)->check(CLI::PositiveNumber);
    simulate->add_option("--json", sim.json_out, "write the JSON report here");

    GradeArgs grd;
    auto* grade = app.add_subcommand("grade", "Review quality, crowd-grades and final grades");
    grade->add_option("--reviews", grd.reviews)->required();
    grade->add_option("--consensus", grd.consensus, "grades CSV from `aggregate`")->required();
    grade->add_option("--authors", grd.authors, "authors CSV (item_id,author_id)");
    grade->add_option("--anchors", grd.anchors, "anchors CSV (crowd_grade,final_grade)");
    grade->add_option("--n-reviews", grd.n_reviews, "reviews due N")->check(CLI::PositiveNumber);
    grade->add_option("--review-weight", grd.review_weight, "review share p_r")->check(CLI::Range(0.0, 1.0));
    grade->add_option("--scale-max", grd.scale_max)->check(CLI::PositiveNumber);
    grade->add_option("--metric", grd.metric)->check(CLI::IsMember({"random-baseline", "reference-level"}));
    grade->add_option("--reference-divisor", grd.reference_divisor)->check(CLI::PositiveNumber);
    grade->add_option("--output", grd.output, "CSV output (default stdout)");

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Compare computed grades against control grades");
    evaluate->add_option("--computed", ev.computed)->required();
    evaluate->add_option("--control", ev.control)->required();
    evaluate->add_option("--pairs", ev.pairs, "identical-submission pairs CSV (item_a,item_b)");
    evaluate->add_flag("--json", ev.json_out);

    AssignArgs as;
    std::uint64_t as_seed = 0;
    auto* assign = app.add_subcommand("assign", "Review task assignment state machine");
    assign->add_option("--state", as.state, "state JSON file")->required();
    assign->add_option("--now", as.now, "current time, YYYY-MM-DDTHH:MM:SSZ (default: system clock)");
    assign->require_subcommand(1);
    auto* a_init = assign->add_subcommand("init", "Create a fresh state file");
    a_init->add_option("--submissions", as.submissions, "CSV item_id,author_id")->required();
    a_init->add_option("--users", as.users, "additional reviewers")->delimiter(',');
    a_init->add_option("--reviews-due", as.reviews_due)->check(CLI::PositiveNumber);
    auto* a_seed_opt = a_init->add_option("--seed", as_seed);
    a_init->add_option("--window-hours", as.window_hours)->check(CLI::PositiveNumber);
    a_init->add_option("--scale-max", as.scale_max)->check(CLI::PositiveNumber);
    auto* a_next = assign->add_subcommand("next", "Assign the next review task to a user");
    a_next->add_option("--user", as.user)->required();
    a_next->add_flag("--extra", as.extra, "allow a task beyond the reviews due");
    auto* a_complete = assign->add_subcommand("complete", "Record a grade for a pending task");
    a_complete->add_option("--user", as.user)->required();
    a_complete->add_option("--item", as.item)->required();
    a_complete->add_option("--grade", as.grade)->required();
    auto* a_decline = assign->add_subcommand("decline", "Decline a pending task with a reason");
    a_decline->add_option("--user", as.user)->required();
    a_decline->add_option("--item", as.item)->required();
    a_decline->add_option("--reason", as.reason)->required();
    assign->add_subcommand("orphans", "List submissions whose every review was declined");
    auto* a_export = assign->add_subcommand("export", "Write completed and declined tasks as a reviews CSV");
    a_export->add_option("--output", as.export_path)->required();

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.emplace_back("peergrade");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kBadInput;
    }

    try {
        if (aggregate->parsed()) return cmd_aggregate(agg, out, err);
        if (simulate->parsed()) {
            if (sim_seed_opt->count() > 0) sim.seed = sim_seed;
            return cmd_simulate(sim, out, err);
        }
        if (grade->parsed()) return cmd_grade(grd, out, err);
        if (evaluate->parsed()) return cmd_evaluate(ev, out, err);
        if (assign->parsed()) {
            if (a_seed_opt->count() > 0) as.seed = as_seed;
            for (const auto* sub : assign->get_subcommands()) return cmd_assign(as, sub->get_name(), out);
        }
    } catch (const GraphNotAdmissible& e) {
        fmt::print(err, "error: {}\n", e.what());
        for (const auto& n : e.nodes) fmt::print(err, "  node: {}\n", n);
        return kDomainViolation;
    } catch (const DomainError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kDomainViolation;
    } catch (const InvalidInput& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kBadInput;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kBadInput;
    }
    return kBadInput;
}

}  // namespace peergrade::cli
