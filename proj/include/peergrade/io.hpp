#pragma once

// File formats: CSV tables with a header row, JSON reports and state.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "peergrade/aggregation.hpp"
#include "peergrade/assigner.hpp"
#include "peergrade/core.hpp"
#include "peergrade/error.hpp"
#include "peergrade/incentives.hpp"
#include "peergrade/synth.hpp"

namespace peergrade::io {

inline constexpr std::string_view kDeclinedToken = "DECLINED";
inline constexpr int kSchemaVersion = 1;

class ParseError : public InvalidInput {
public:
    ParseError(std::string source, std::size_t line, const std::string& message);
    std::string source;
    std::size_t line;  // 1-based; 0 when not tied to a line
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // source line of each row
    std::string source;

    /// Index of the first header column named any of `names`.
    std::optional<std::size_t> column(std::initializer_list<std::string_view> names) const;
    /// Same, throwing ParseError (line 1) when absent.
    std::size_t require_column(std::initializer_list<std::string_view> names) const;
};

/// Comma-separated, double-quote escaping, first non-empty line is the header.
/// Blank lines are skipped. A leading UTF-8 byte-order mark is ignored.
CsvTable parse_csv(std::string_view text, std::string source = "<input>");
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_field(std::string_view field);
/// Fixed-point with nine fractional digits.
std::string format_real(double v);
double parse_real(std::string_view text, const CsvTable& t, std::size_t row);

std::string read_file(const std::filesystem::path& path);
/// Writes into a temporary sibling file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string sha256_hex(std::string_view bytes);

/// Holds `<path>.lock` for its lifetime; throws DomainError if it already exists.
class LockFile {
public:
    explicit LockFile(std::filesystem::path target);
    ~LockFile();
    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;

private:
    std::filesystem::path lock_;
};

// reviews.csv: item_id,user_id,grade[,reason]; grade may be DECLINED.
std::vector<ReviewRecord> parse_reviews(const CsvTable& t);
std::string format_reviews(const std::vector<ReviewRecord>& records);

// authors.csv / submissions.csv: item_id,author_id
AuthorMap parse_authors(const CsvTable& t);

// grades.csv: item_id,consensus_grade,variance,rank
std::string format_item_grades(const ConsensusResult& r);
// users.csv: user_id,reputation_variance[,bias]
std::string format_user_variances(const ConsensusResult& r);
/// Reads item grades from a consensus_grade (or grade) column.
std::map<std::string, double> parse_grade_map(const CsvTable& t);
/// Item grades and variances of a grades.csv, ranking recomputed.
ConsensusResult parse_item_grades(const CsvTable& t);

// pairs.csv: item_a,item_b
std::vector<std::pair<std::string, std::string>> parse_pairs(const CsvTable& t);
// anchors.csv: crowd_grade,final_grade
std::vector<AnchorPoint> parse_anchors(const CsvTable& t);

std::string format_user_grades(const std::vector<UserGrade>& grades);

std::string format_timestamp(Timestamp t);
/// Accepts YYYY-MM-DDTHH:MM:SSZ. Throws InvalidInput.
Timestamp parse_timestamp(std::string_view text);

nlohmann::json state_to_json(const AssignmentState& s);
/// Throws InvalidInput on schema or consistency errors.
AssignmentState state_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const ExperimentReport& r);
/// Rows per algorithm, rho then sigma columns per shape.
std::string format_report_table(const ExperimentReport& r);

}  // namespace peergrade::io
