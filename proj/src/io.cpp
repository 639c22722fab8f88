#include "peergrade/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace peergrade::io {

namespace fs = std::filesystem;
using nlohmann::json;

ParseError::ParseError(std::string src, std::size_t ln, const std::string& message)
    : InvalidInput(ln > 0 ? fmt::format("{}:{}: {}", src, ln, message) : fmt::format("{}: {}", src, message)),
      source(std::move(src)),
      line(ln) {}

std::optional<std::size_t> CsvTable::column(std::initializer_list<std::string_view> names) const {
    for (auto name : names) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == name) return c;
        }
    }
    return std::nullopt;
}

std::size_t CsvTable::require_column(std::initializer_list<std::string_view> names) const {
    if (auto c = column(names)) return *c;
    throw ParseError(source, 1, fmt::format("missing column '{}'", *names.begin()));
}

CsvTable parse_csv(std::string_view text, std::string source) {
    CsvTable t;
    t.source = std::move(source);
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

    std::size_t pos = 0;
    std::size_t line = 1;
    while (pos < text.size()) {
        const std::size_t start_line = line;
        std::vector<std::string> fields;
        std::string field;
        bool quoted = false;
        bool was_quoted = false;
        bool row_done = false;
        while (pos < text.size() && !row_done) {
            const char ch = text[pos++];
            if (quoted) {
                if (ch == '"') {
                    if (pos < text.size() && text[pos] == '"') {
                        field.push_back('"');
                        ++pos;
                    } else {
                        quoted = false;
                    }
                } else {
                    if (ch == '\n') ++line;
                    field.push_back(ch);
                }
                continue;
            }
            switch (ch) {
                case '"':
                    if (!field.empty() || was_quoted) {
                        throw ParseError(t.source, line, "unexpected quote inside an unquoted field");
                    }
                    quoted = was_quoted = true;
                    break;
                case ',':
                    fields.push_back(std::move(field));
                    field.clear();
                    was_quoted = false;
                    break;
                case '\r':
                    break;
                case '\n':
                    ++line;
                    row_done = true;
                    break;
                default:
                    if (was_quoted) throw ParseError(t.source, line, "text after closing quote");
                    field.push_back(ch);
            }
        }
        if (quoted) throw ParseError(t.source, start_line, "unterminated quoted field");
        fields.push_back(std::move(field));
        const bool blank = fields.size() == 1 && fields[0].empty() && !was_quoted;
        if (blank) continue;
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw ParseError(t.source, start_line,
                             fmt::format("expected {} fields, found {}", t.header.size(), fields.size()));
        }
        t.rows.push_back(std::move(fields));
        t.lines.push_back(start_line);
    }
    if (t.header.empty()) throw ParseError(t.source, 0, "missing header row");
    return t;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path), path.string()); }

std::string csv_field(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_real(double v) {
    auto text = fmt::format("{:.9f}", v);
    // Values that round to zero print without a sign.
    if (text == "-0.000000000") text.erase(0, 1);
    return text;
}

double parse_real(std::string_view text, const CsvTable& t, std::size_t row) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(v)) {
        throw ParseError(t.source, t.lines[row], fmt::format("'{}' is not a number", text));
    }
    return v;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput(fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    const fs::path tmp = dir / fmt::format(".{}.tmp.{}", path.filename().string(), ::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InvalidInput(fmt::format("cannot write {}", tmp.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            fs::remove(tmp, ignored);
            throw InvalidInput(fmt::format("failed writing {}", tmp.string()));
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw InvalidInput(fmt::format("cannot replace {}: {}", path.string(), ec.message()));
    }
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

LockFile::LockFile(fs::path target) : lock_(target.string() + ".lock") {
    const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw DomainError(fmt::format("{} is locked by another invocation (remove {} if stale)", target.string(),
                                      lock_.string()));
    }
    ::close(fd);
}

LockFile::~LockFile() {
    std::error_code ignored;
    fs::remove(lock_, ignored);
}

std::vector<ReviewRecord> parse_reviews(const CsvTable& t) {
    const auto item_col = t.require_column({"item_id", "item"});
    const auto user_col = t.require_column({"user_id", "user"});
    const auto grade_col = t.require_column({"grade"});
    const auto reason_col = t.column({"reason", "decline_reason"});

    std::vector<ReviewRecord> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string& item = row[item_col];
        const std::string& user = row[user_col];
        if (item.empty() || user.empty()) throw ParseError(t.source, t.lines[r], "empty item or user id");
        if (!seen.emplace(item, user).second) {
            throw ParseError(t.source, t.lines[r], fmt::format("duplicate review of {} by {}", item, user));
        }
        const std::string reason = reason_col ? row[*reason_col] : std::string{};
        if (row[grade_col] == kDeclinedToken) {
            if (reason.empty()) throw ParseError(t.source, t.lines[r], "declined review without a reason");
            out.push_back(ReviewRecord::declined(item, user, reason));
        } else {
            if (!reason.empty()) throw ParseError(t.source, t.lines[r], "reason given for a graded review");
            out.push_back(ReviewRecord::graded(item, user, parse_real(row[grade_col], t, r)));
        }
    }
    return out;
}

std::string format_reviews(const std::vector<ReviewRecord>& records) {
    std::string out = "item_id,user_id,grade,reason\n";
    for (const auto& r : records) {
        out += csv_field(r.item_id) + ',' + csv_field(r.user_id) + ',';
        if (r.grade) {
            out += format_real(*r.grade) + ",\n";
        } else {
            out += std::string(kDeclinedToken) + ',' + csv_field(r.decline_reason.value_or("")) + '\n';
        }
    }
    return out;
}

AuthorMap parse_authors(const CsvTable& t) {
    const auto item_col = t.require_column({"item_id", "item"});
    const auto author_col = t.require_column({"author_id", "user_id", "author"});
    AuthorMap out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row[item_col].empty() || row[author_col].empty()) {
            throw ParseError(t.source, t.lines[r], "empty item or author id");
        }
        if (!out.emplace(row[item_col], row[author_col]).second) {
            throw ParseError(t.source, t.lines[r], "item listed twice: " + row[item_col]);
        }
    }
    return out;
}

std::string format_item_grades(const ConsensusResult& r) {
    std::map<std::string, std::size_t> rank;
    for (std::size_t k = 0; k < r.ranking.size(); ++k) rank.emplace(r.ranking[k], k + 1);
    std::string out = "item_id,consensus_grade,variance,rank\n";
    for (const auto& [id, est] : r.item_grades) {
        out += fmt::format("{},{},{},{}\n", csv_field(id), format_real(est.grade),
                           est.variance ? format_real(*est.variance) : std::string{}, rank.at(id));
    }
    return out;
}

std::string format_user_variances(const ConsensusResult& r) {
    const bool with_bias = !r.user_bias.empty();
    std::string out = with_bias ? "user_id,reputation_variance,bias\n" : "user_id,reputation_variance\n";
    for (const auto& [id, v] : r.user_variances) {
        out += csv_field(id) + ',' + (v ? format_real(*v) : std::string{});
        if (with_bias) {
            auto b = r.user_bias.find(id);
            out += ',' + (b != r.user_bias.end() ? format_real(b->second) : std::string{});
        }
        out += '\n';
    }
    return out;
}

std::map<std::string, double> parse_grade_map(const CsvTable& t) {
    const auto item_col = t.require_column({"item_id", "item"});
    const auto grade_col = t.require_column({"consensus_grade", "grade", "control_grade"});
    std::map<std::string, double> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (!out.emplace(t.rows[r][item_col], parse_real(t.rows[r][grade_col], t, r)).second) {
            throw ParseError(t.source, t.lines[r], "item listed twice: " + t.rows[r][item_col]);
        }
    }
    return out;
}

ConsensusResult parse_item_grades(const CsvTable& t) {
    const auto item_col = t.require_column({"item_id", "item"});
    const auto grade_col = t.require_column({"consensus_grade", "grade"});
    const auto var_col = t.column({"variance"});
    ConsensusResult r;
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& row = t.rows[k];
        ItemEstimate est{parse_real(row[grade_col], t, k), std::nullopt};
        if (var_col && !row[*var_col].empty()) est.variance = parse_real(row[*var_col], t, k);
        if (!r.item_grades.emplace(row[item_col], est).second) {
            throw ParseError(t.source, t.lines[k], "item listed twice: " + row[item_col]);
        }
    }
    r.ranking = rank_from_grades(r.item_grades);
    return r;
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const CsvTable& t) {
    const auto a = t.require_column({"item_a"});
    const auto b = t.require_column({"item_b"});
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& row : t.rows) out.emplace_back(row[a], row[b]);
    return out;
}

std::vector<AnchorPoint> parse_anchors(const CsvTable& t) {
    const auto c = t.require_column({"crowd_grade"});
    const auto f = t.require_column({"final_grade"});
    std::vector<AnchorPoint> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.push_back({parse_real(t.rows[r][c], t, r), parse_real(t.rows[r][f], t, r)});
    }
    return out;
}

std::string format_user_grades(const std::vector<UserGrade>& grades) {
    auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string{}; };
    std::string out =
        "user_id,reviews_done,squared_error,review_quality,submission_grade,crowd_grade,final_grade\n";
    for (const auto& g : grades) {
        out += fmt::format("{},{},{},{},{},{},{}\n", csv_field(g.review.user_id), g.review.reviews_done,
                           format_real(g.review.squared_error), format_real(g.review.quality),
                           opt(g.submission_grade), opt(g.crowd_grade), opt(g.final_grade));
    }
    return out;
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                       hms.minutes().count(), hms.seconds().count());
}

Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char tail = 0;
    const std::string str(text);
    if (text.size() != 20 ||
        std::sscanf(str.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%c", &y, &mo, &d, &h, &mi, &s, &tail) != 7 || tail != 'Z') {
        throw InvalidInput(fmt::format("timestamp '{}' is not YYYY-MM-DDTHH:MM:SSZ", text));
    }
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59) throw InvalidInput(fmt::format("invalid timestamp '{}'", text));
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

json state_to_json(const AssignmentState& s) {
    const auto& d = s.data();
    json j;
    j["schema_version"] = kSchemaVersion;
    j["policy"] = {{"likely_window_seconds", d.policy.likely_window.count()},
                   {"rng_seed", d.policy.rng_seed},
                   {"reviews_due", d.policy.reviews_due},
                   {"max_grade", d.policy.scale.max_grade()}};
    j["draws"] = d.draws;
    j["submissions"] = json::array();
    for (const auto& [item, author] : d.submissions) j["submissions"].push_back({{"item", item}, {"author", author}});
    j["users"] = d.users;
    j["pending"] = json::array();
    for (const auto& [k, t] : d.pending) {
        j["pending"].push_back({{"item", k.first}, {"user", k.second}, {"assigned_at", format_timestamp(t.assigned_at)}});
    }
    j["completed"] = json::array();
    for (const auto& [k, t] : d.completed) {
        j["completed"].push_back({{"item", k.first},
                                  {"user", k.second},
                                  {"assigned_at", format_timestamp(t.assigned_at)},
                                  {"completed_at", format_timestamp(t.completed_at)},
                                  {"grade", t.grade}});
    }
    j["declined"] = json::array();
    for (const auto& [k, t] : d.declined) {
        j["declined"].push_back({{"item", k.first},
                                 {"user", k.second},
                                 {"assigned_at", format_timestamp(t.assigned_at)},
                                 {"declined_at", format_timestamp(t.declined_at)},
                                 {"reason", t.reason}});
    }
    return j;
}

AssignmentState state_from_json(const json& j) {
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion) {
            throw InvalidInput(fmt::format("unsupported state schema_version {}", j.at("schema_version").dump()));
        }
        AssignmentData d;
        const auto& p = j.at("policy");
        d.policy.likely_window = std::chrono::seconds(p.at("likely_window_seconds").get<long long>());
        d.policy.rng_seed = p.at("rng_seed").get<std::uint64_t>();
        d.policy.reviews_due = p.at("reviews_due").get<int>();
        d.policy.scale = GradeScale(p.at("max_grade").get<double>());
        d.draws = j.at("draws").get<std::uint64_t>();
        for (const auto& s : j.at("submissions")) {
            if (!d.submissions.emplace(s.at("item").get<std::string>(), s.at("author").get<std::string>()).second) {
                throw InvalidInput("submission listed twice: " + s.at("item").get<std::string>());
            }
        }
        d.users = j.at("users").get<std::set<std::string>>();
        auto key = [](const json& e) { return TaskKey{e.at("item").get<std::string>(), e.at("user").get<std::string>()}; };
        auto duplicate = [](const TaskKey& k) {
            return InvalidInput(fmt::format("task ({}, {}) listed twice", k.first, k.second));
        };
        for (const auto& e : j.at("pending")) {
            if (!d.pending.emplace(key(e), PendingTask{parse_timestamp(e.at("assigned_at").get<std::string>())}).second) {
                throw duplicate(key(e));
            }
        }
        for (const auto& e : j.at("completed")) {
            CompletedTask t{parse_timestamp(e.at("assigned_at").get<std::string>()),
                            parse_timestamp(e.at("completed_at").get<std::string>()), e.at("grade").get<double>()};
            if (!d.completed.emplace(key(e), t).second) throw duplicate(key(e));
        }
        for (const auto& e : j.at("declined")) {
            DeclinedTask t{parse_timestamp(e.at("assigned_at").get<std::string>()),
                           parse_timestamp(e.at("declined_at").get<std::string>()), e.at("reason").get<std::string>()};
            if (!d.declined.emplace(key(e), t).second) throw duplicate(key(e));
        }
        return AssignmentState::from_data(std::move(d));
    } catch (const json::exception& e) {
        throw InvalidInput(fmt::format("malformed state document: {}", e.what()));
    }
}

json report_to_json(const ExperimentReport& r) {
    json j;
    j["schema_version"] = ExperimentReport::kSchemaVersion;
    const auto& c = r.config;
    j["config"] = {{"users", c.n_users},
                   {"items", c.n_items},
                   {"reviews_per_user", c.reviews_per_user},
                   {"item_quality_sd", c.item_quality_sd},
                   {"gamma_scale", c.user_variance_scale},
                   {"noise_model", to_string(c.noise)},
                   {"runs", c.runs},
                   {"seed", c.seed}};
    j["shapes"] = r.shapes;
    j["results"] = json::array();
    for (const auto& cell : r.cells) {
        j["results"].push_back({{"algorithm", to_string(cell.algorithm)},
                                {"shape", cell.shape},
                                {"runs", cell.runs},
                                {"mean_rho", cell.mean_rho},
                                {"mean_sigma", cell.mean_sigma}});
    }
    return j;
}

std::string format_report_table(const ExperimentReport& r) {
    std::vector<Algorithm> algorithms;
    for (const auto& c : r.cells) {
        if (std::find(algorithms.begin(), algorithms.end(), c.algorithm) == algorithms.end()) {
            algorithms.push_back(c.algorithm);
        }
    }
    std::string out = fmt::format("{:<12}", "");
    for (double k : r.shapes) out += fmt::format(" | rho k={:<4g}", k);
    for (double k : r.shapes) out += fmt::format(" | sigma k={:<4g}", k);
    out += '\n';
    out += std::string(out.size() - 1, '-') + '\n';
    for (auto a : algorithms) {
        std::string row = fmt::format("{:<12}", to_string(a));
        for (double k : r.shapes) row += fmt::format(" | {:>10.2f}", r.cell(a, k).mean_rho);
        for (double k : r.shapes) row += fmt::format(" | {:>12.2f}", r.cell(a, k).mean_sigma);
        out += row + '\n';
    }
    out += fmt::format("({} runs per cell, seed {}, {} users, {} items, {} reviews/user, noise {})\n", r.config.runs,
                       r.config.seed, r.config.n_users, r.config.n_items, r.config.reviews_per_user,
                       to_string(r.config.noise));
    return out;
}

}  // namespace peergrade::io
