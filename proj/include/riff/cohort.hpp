#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace riff {

/// One student. Grades are absent only for students who dropped out.
struct CohortRow {
    std::string student_id;
    int riff_calls_total = 0;
    int riff_calls_first4wk = 0;
    std::optional<double> final_grade;
    std::optional<double> coding_grade;
    std::optional<double> capstone_grade;
    std::optional<double> collab_grade;
    int pitch_completed = 0;
    int certificate = 0;
    int passed = 0;
    int dropped = 0;

    friend bool operator==(const CohortRow&, const CohortRow&) = default;
};

struct CohortTable {
    std::vector<CohortRow> rows;

    std::size_t completers() const;
    std::size_t dropped() const;
};

inline constexpr std::array<std::string_view, 11> kCohortColumns = {
    "student_id",     "riff_calls_total", "riff_calls_first4wk", "final_grade",
    "coding_grade",   "capstone_grade",   "collab_grade",        "pitch_completed",
    "certificate",    "passed",           "dropped"};

/// Parses and validates a cohort CSV. Errors are ValidationError with codes
/// empty_cohort, unknown_column, missing_column, duplicate_column,
/// duplicate_id, non_binary_flag, invalid_number, grade_out_of_range,
/// missing_grade, bad_row; messages carry the source name and line number.
CohortTable parse_cohort(std::string_view csv, std::string_view source = "<memory>");
CohortTable load_cohort(const std::string& path);

/// Writes the documented header followed by one line per row. Grades are
/// printed with one decimal; missing grades are empty cells.
std::string write_cohort_csv(const CohortTable& table);

}  // namespace riff
