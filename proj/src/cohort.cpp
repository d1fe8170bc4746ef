#include "riff/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "riff/error.hpp"

namespace riff {

std::size_t CohortTable::completers() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const CohortRow& r) { return r.dropped == 0; }));
}

std::size_t CohortTable::dropped() const { return rows.size() - completers(); }

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(std::move(cur));
    for (auto& cell : cells) {
        const auto b = cell.find_first_not_of(" \t");
        const auto e = cell.find_last_not_of(" \t");
        cell = b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1);
    }
    return cells;
}

struct RowContext {
    std::string_view source;
    std::size_t line;

    [[noreturn]] void fail(const std::string& code, const std::string& what) const {
        throw ValidationError(code, std::string(source) + ":" + std::to_string(line) + ": " + what);
    }
};

int parse_int(const RowContext& ctx, std::string_view column, const std::string& cell) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
        ctx.fail("invalid_number", "column '" + std::string(column) + "' has non-integer value '" + cell + "'");
    if (v < 0) ctx.fail("invalid_number", "column '" + std::string(column) + "' is negative");
    return v;
}

int parse_flag(const RowContext& ctx, std::string_view column, const std::string& cell) {
    if (cell == "0") return 0;
    if (cell == "1") return 1;
    ctx.fail("non_binary_flag", "column '" + std::string(column) + "' must be 0 or 1, got '" + cell + "'");
}

std::optional<double> parse_grade(const RowContext& ctx, std::string_view column, const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        ctx.fail("invalid_number", "column '" + std::string(column) + "' has non-numeric value '" + cell + "'");
    if (!(v >= 0.0 && v <= 100.0))
        ctx.fail("grade_out_of_range", "column '" + std::string(column) + "' = " + cell + " is outside [0, 100]");
    return v;
}

}  // namespace

CohortTable parse_cohort(std::string_view csv, std::string_view source) {
    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos < csv.size();) {
        auto nl = csv.find('\n', pos);
        if (nl == std::string_view::npos) nl = csv.size();
        lines.push_back(csv.substr(pos, nl - pos));
        pos = nl + 1;
    }
    auto blank = [](std::string_view l) { return l.find_first_not_of(" \t\r") == std::string_view::npos; };
    while (!lines.empty() && blank(lines.back())) lines.pop_back();
    if (lines.empty() || blank(lines.front()))
        throw ValidationError("empty_cohort", std::string(source) + ": no header");

    const auto header = split_csv_line(lines.front());
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (std::find(kCohortColumns.begin(), kCohortColumns.end(), header[i]) == kCohortColumns.end())
            throw ValidationError("unknown_column", std::string(source) + ":1: unknown column '" + header[i] + "'");
        if (!col.emplace(header[i], i).second)
            throw ValidationError("duplicate_column", std::string(source) + ":1: column '" + header[i] + "' repeated");
    }
    for (auto name : kCohortColumns) {
        if (!col.count(std::string(name)))
            throw ValidationError("missing_column", std::string(source) + ":1: missing column '" + std::string(name) + "'");
    }

    CohortTable table;
    std::set<std::string> ids;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (blank(lines[ln])) continue;
        const RowContext ctx{source, ln + 1};
        const auto cells = split_csv_line(lines[ln]);
        if (cells.size() != header.size())
            ctx.fail("bad_row", "expected " + std::to_string(header.size()) + " cells, found " +
                                    std::to_string(cells.size()));
        auto cell = [&](std::string_view name) -> const std::string& { return cells[col.at(std::string(name))]; };

        CohortRow r;
        r.student_id = cell("student_id");
        if (r.student_id.empty()) ctx.fail("bad_row", "empty student_id");
        if (!ids.insert(r.student_id).second) ctx.fail("duplicate_id", "student_id '" + r.student_id + "' repeated");
        r.riff_calls_total = parse_int(ctx, "riff_calls_total", cell("riff_calls_total"));
        r.riff_calls_first4wk = parse_int(ctx, "riff_calls_first4wk", cell("riff_calls_first4wk"));
        r.final_grade = parse_grade(ctx, "final_grade", cell("final_grade"));
        r.coding_grade = parse_grade(ctx, "coding_grade", cell("coding_grade"));
        r.capstone_grade = parse_grade(ctx, "capstone_grade", cell("capstone_grade"));
        r.collab_grade = parse_grade(ctx, "collab_grade", cell("collab_grade"));
        r.pitch_completed = parse_flag(ctx, "pitch_completed", cell("pitch_completed"));
        r.certificate = parse_flag(ctx, "certificate", cell("certificate"));
        r.passed = parse_flag(ctx, "passed", cell("passed"));
        r.dropped = parse_flag(ctx, "dropped", cell("dropped"));
        if (r.riff_calls_first4wk > r.riff_calls_total)
            ctx.fail("bad_row", "riff_calls_first4wk exceeds riff_calls_total");
        if (!r.dropped && !(r.final_grade && r.coding_grade && r.capstone_grade && r.collab_grade))
            ctx.fail("missing_grade", "student '" + r.student_id + "' completed the course but has a missing grade");
        table.rows.push_back(std::move(r));
    }
    if (table.rows.empty()) throw ValidationError("empty_cohort", std::string(source) + ": no data rows");
    return table;
}

CohortTable load_cohort(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("io_error", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_cohort(ss.str(), path);
}

std::string write_cohort_csv(const CohortTable& table) {
    std::string out;
    for (std::size_t i = 0; i < kCohortColumns.size(); ++i) {
        if (i) out += ',';
        out += kCohortColumns[i];
    }
    out += '\n';
    auto grade = [](const std::optional<double>& g) {
        if (!g) return std::string{};
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", *g);
        return std::string(buf);
    };
    for (const auto& r : table.rows) {
        out += r.student_id + ',' + std::to_string(r.riff_calls_total) + ',' +
               std::to_string(r.riff_calls_first4wk) + ',' + grade(r.final_grade) + ',' + grade(r.coding_grade) +
               ',' + grade(r.capstone_grade) + ',' + grade(r.collab_grade) + ',' +
               std::to_string(r.pitch_completed) + ',' + std::to_string(r.certificate) + ',' +
               std::to_string(r.passed) + ',' + std::to_string(r.dropped) + '\n';
    }
    return out;
}

}  // namespace riff
