#include "riff/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>

#include <json.hpp>

#include "riff/error.hpp"
#include "riff/stats.hpp"

namespace riff {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Predictor p) { return p == Predictor::Total ? "total" : "first4wk"; }
std::string_view to_string(CohortFilter f) { return f == CohortFilter::Completers ? "completers" : "all"; }

Predictor predictor_from_string(std::string_view s) {
    if (s == "total") return Predictor::Total;
    if (s == "first4wk") return Predictor::First4Weeks;
    throw ValidationError("invalid_argument", "predictor must be total or first4wk");
}

CohortFilter cohort_filter_from_string(std::string_view s) {
    if (s == "completers") return CohortFilter::Completers;
    if (s == "all") return CohortFilter::All;
    throw ValidationError("invalid_argument", "cohort must be completers or all");
}

namespace {

constexpr std::size_t kMinRows = 10;

std::string predictor_column(Predictor p) {
    return p == Predictor::Total ? "riff_calls_total" : "riff_calls_first4wk";
}

struct Outcome {
    std::string attribute;
    // nullopt: row excluded (listwise) from this outcome
    std::function<std::optional<double>(const CohortRow&)> value;
};

std::optional<double> grade_or_skip(const std::optional<double>& g) { return g; }

template <typename Fn>
auto named(const std::string& attribute, Fn&& fn) {
    try {
        return fn();
    } catch (const DegenerateError& e) {
        throw DegenerateError(e.code(), "outcome '" + attribute + "': " + e.what());
    }
}

std::string format_stat(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%#.3g", v);
    return buf;
}

std::string format_p(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", p);
    return buf;
}

std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

StatsReport analyze(const CohortTable& table, const AnalysisOptions& options) {
    if (!(options.alpha > 0.0 && options.alpha < 1.0))
        throw ValidationError("invalid_argument", "alpha must be in (0, 1)");
    if (options.plot_outcome != "certificate" && options.plot_outcome != "passed")
        throw ValidationError("invalid_argument", "plot outcome must be certificate or passed");

    const bool completers = options.filter == CohortFilter::Completers;
    std::vector<const CohortRow*> rows;
    for (const auto& r : table.rows)
        if (!completers || r.dropped == 0) rows.push_back(&r);
    if (rows.size() < kMinRows)
        throw DegenerateError("insufficient_rows", "only " + std::to_string(rows.size()) +
                                                       " rows after filtering (need " +
                                                       std::to_string(kMinRows) + ")");

    auto predictor = [&](const CohortRow& r) {
        return static_cast<double>(options.predictor == Predictor::Total ? r.riff_calls_total
                                                                          : r.riff_calls_first4wk);
    };
    auto passed = [&](const CohortRow& r) -> double {
        return r.final_grade && *r.final_grade >= options.pass_mark ? 1.0 : 0.0;
    };

    const std::vector<Outcome> outcomes = {
        {"Final Grades", [](const CohortRow& r) { return grade_or_skip(r.final_grade); }},
        {"Coding Exercise Grades", [](const CohortRow& r) { return grade_or_skip(r.coding_grade); }},
        {"Capstone Exercise Grades", [](const CohortRow& r) { return grade_or_skip(r.capstone_grade); }},
        {"Collaboration Exercise Grades", [](const CohortRow& r) { return grade_or_skip(r.collab_grade); }},
        {"Pitch Video Completion",
         [](const CohortRow& r) -> std::optional<double> { return r.dropped ? 0.0 : r.pitch_completed; }},
        {"Certificate Earned",
         [](const CohortRow& r) -> std::optional<double> { return r.dropped ? 0.0 : r.certificate; }},
    };

    StatsReport report;
    report.predictor = options.predictor;
    report.filter = options.filter;
    report.alpha = options.alpha;
    report.pass_mark = options.pass_mark;
    report.rows_total = table.rows.size();
    report.rows_used = rows.size();
    report.holm_family = outcomes.size();

    std::vector<double> p_raw;
    for (const auto& outcome : outcomes) {
        std::vector<double> xs, ys;
        for (const auto* r : rows) {
            if (auto v = outcome.value(*r)) {
                xs.push_back(predictor(*r));
                ys.push_back(*v);
            }
        }
        if (xs.size() < 3)
            throw DegenerateError("insufficient_rows", "outcome '" + outcome.attribute + "' has " +
                                                           std::to_string(xs.size()) + " observations");
        const double r = named(outcome.attribute, [&] { return stats::pearson(xs, ys); });
        StatsRow row;
        row.attribute = outcome.attribute;
        row.statistic = r;
        row.n = xs.size();
        row.p_raw = stats::pearson_p(r, xs.size()).p;
        report.correlations.push_back(row);
        p_raw.push_back(row.p_raw);
    }
    const auto adjusted = stats::holm_adjust(p_raw);
    for (std::size_t i = 0; i < report.correlations.size(); ++i) {
        auto& row = report.correlations[i];
        row.p_adjusted = adjusted[i];
        row.stars = stats::significance_stars(row.p_adjusted);
        row.reject = row.p_adjusted < options.alpha;
    }

    struct Binary {
        std::string attribute;
        std::string key;
        std::function<double(const CohortRow&)> value;
    };
    const std::vector<Binary> binaries = {
        {"Grades", "passed", [&](const CohortRow& r) { return r.dropped ? 0.0 : passed(r); }},
        {"Certificate Earned", "certificate",
         [](const CohortRow& r) { return r.dropped ? 0.0 : static_cast<double>(r.certificate); }},
    };
    std::vector<double> odds_p;
    for (const auto& b : binaries) {
        std::vector<double> xs, ys;
        for (const auto* r : rows) {
            xs.push_back(predictor(*r));
            ys.push_back(b.value(*r));
        }
        const auto fit = named(b.attribute, [&] { return stats::fit_logistic(xs, ys); });
        StatsRow row;
        row.attribute = b.attribute;
        row.statistic = fit.odds_ratio;
        row.n = xs.size();
        row.p_raw = fit.p_wald;
        report.odds.push_back(row);
        odds_p.push_back(row.p_raw);
        if (b.key == options.plot_outcome) {
            report.plot.outcome = b.key;
            report.plot.x_label = predictor_column(options.predictor);
            report.plot.beta0 = fit.beta0;
            report.plot.beta1 = fit.beta1;
            for (std::size_t i = 0; i < rows.size(); ++i)
                report.plot.points.push_back({xs[i], ys[i], rows[i]->dropped != 0});
        }
    }
    const auto odds_adjusted = stats::holm_adjust(odds_p);
    report.odds_holm_family = report.odds.size();
    for (std::size_t i = 0; i < report.odds.size(); ++i) {
        auto& row = report.odds[i];
        row.p_adjusted = odds_adjusted[i];
        row.stars = stats::significance_stars(row.p_adjusted);
        row.reject = row.p_adjusted < options.alpha;
    }
    return report;
}

// ---------------------------------------------------------------------------

std::string render_table(const StatsReport& report) {
    const std::string legend = "*p < 0.05, **p < 0.01, ***p < 0.001, ****p < 0.0001";
    auto line = [](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                   const std::string& e) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-32s%-10s%-6s%-11s%s", a.c_str(), b.c_str(), c.c_str(), d.c_str(),
                      e.c_str());
        std::string s = buf;
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s + "\n";
    };
    auto section = [&](const std::string& title, const std::string& stat_name, const std::vector<StatsRow>& rows,
                       std::size_t family) {
        std::string out = title + "\n" + legend + "\n";
        out += "Holm family m = " + std::to_string(family) + "\n\n";
        out += line("Attribute", stat_name, "n", "p", "Significance");
        for (const auto& r : rows)
            out += line(r.attribute, format_stat(r.statistic), std::to_string(r.n), format_p(r.p_adjusted), r.stars);
        return out;
    };
    std::string out;
    out += "Predictor: " + predictor_column(report.predictor) + "\n";
    out += "Cohort: " + std::string(to_string(report.filter)) + " (" + std::to_string(report.rows_used) + " of " +
           std::to_string(report.rows_total) + " students)\n";
    out += "Pass mark: " + format_stat(report.pass_mark) + "   alpha: " + format_stat(report.alpha) + "\n\n";
    out += section("Correlation to # Riff calls made (Pearson)", "r", report.correlations, report.holm_family);
    out += "\n";
    out += section("Odds ratio per additional Riff call (logistic regression)", "OR", report.odds,
                   report.odds_holm_family);
    return out;
}

namespace {

ordered_json row_json(const StatsRow& r) {
    return {{"attribute", r.attribute}, {"statistic", r.statistic}, {"n", r.n},
            {"p_raw", r.p_raw},         {"p_adjusted", r.p_adjusted}, {"stars", r.stars},
            {"reject", r.reject}};
}

StatsRow row_from_json(const nlohmann::json& j) {
    StatsRow r;
    r.attribute = j.at("attribute").get<std::string>();
    r.statistic = j.at("statistic").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.p_raw = j.at("p_raw").get<double>();
    r.p_adjusted = j.at("p_adjusted").get<double>();
    r.stars = j.at("stars").get<std::string>();
    r.reject = j.at("reject").get<bool>();
    return r;
}

}  // namespace

std::string render_json(const StatsReport& report) {
    ordered_json j;
    j["predictor"] = to_string(report.predictor);
    j["cohort"] = to_string(report.filter);
    j["alpha"] = report.alpha;
    j["pass_mark"] = report.pass_mark;
    j["rows_total"] = report.rows_total;
    j["rows_used"] = report.rows_used;
    j["holm_family"] = report.holm_family;
    j["odds_holm_family"] = report.odds_holm_family;
    j["correlations"] = ordered_json::array();
    for (const auto& r : report.correlations) j["correlations"].push_back(row_json(r));
    j["odds"] = ordered_json::array();
    for (const auto& r : report.odds) j["odds"].push_back(row_json(r));
    ordered_json points = ordered_json::array();
    for (const auto& p : report.plot.points) points.push_back({p.x, p.y, p.dropped});
    j["plot"] = {{"outcome", report.plot.outcome},
                 {"x_label", report.plot.x_label},
                 {"beta0", report.plot.beta0},
                 {"beta1", report.plot.beta1},
                 {"points", std::move(points)}};
    return j.dump(2) + "\n";
}

StatsReport report_from_json(std::string_view text) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("malformed_json", "cannot parse report");
    try {
        StatsReport r;
        r.predictor = predictor_from_string(j.at("predictor").get<std::string>());
        r.filter = cohort_filter_from_string(j.at("cohort").get<std::string>());
        r.alpha = j.at("alpha").get<double>();
        r.pass_mark = j.at("pass_mark").get<double>();
        r.rows_total = j.at("rows_total").get<std::size_t>();
        r.rows_used = j.at("rows_used").get<std::size_t>();
        r.holm_family = j.at("holm_family").get<std::size_t>();
        r.odds_holm_family = j.at("odds_holm_family").get<std::size_t>();
        for (const auto& row : j.at("correlations")) r.correlations.push_back(row_from_json(row));
        for (const auto& row : j.at("odds")) r.odds.push_back(row_from_json(row));
        const auto& plot = j.at("plot");
        r.plot.outcome = plot.at("outcome").get<std::string>();
        r.plot.x_label = plot.at("x_label").get<std::string>();
        r.plot.beta0 = plot.at("beta0").get<double>();
        r.plot.beta1 = plot.at("beta1").get<double>();
        for (const auto& p : plot.at("points"))
            r.plot.points.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<bool>()});
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed_report", e.what());
    }
}

std::string render_svg(const StatsReport& report) {
    constexpr double width = 640, height = 400;
    constexpr double left = 60, right = 20, top = 40, bottom = 50;
    const auto& plot = report.plot;

    double x_max = 1.0;
    for (const auto& p : plot.points) x_max = std::max(x_max, p.x);
    x_max = std::ceil(x_max);
    auto sx = [&](double x) { return left + (width - left - right) * x / x_max; };
    auto sy = [&](double y) { return top + (height - top - bottom) * (1.0 - y); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    out += "  <title>" + plot.outcome + " vs " + plot.x_label + " (" + std::string(to_string(report.filter)) +
           ")</title>\n";
    out += "  <rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
    out += "  <line class=\"axis\" x1=\"" + format_coord(left) + "\" y1=\"" + format_coord(sy(0)) + "\" x2=\"" +
           format_coord(width - right) + "\" y2=\"" + format_coord(sy(0)) + "\" stroke=\"black\"/>\n";
    out += "  <line class=\"axis\" x1=\"" + format_coord(left) + "\" y1=\"" + format_coord(sy(0)) + "\" x2=\"" +
           format_coord(left) + "\" y2=\"" + format_coord(sy(1)) + "\" stroke=\"black\"/>\n";
    out += "  <text x=\"" + format_coord((left + width - right) / 2) + "\" y=\"" + format_coord(height - 12) +
           "\" text-anchor=\"middle\">" + plot.x_label + "</text>\n";
    out += "  <text x=\"16\" y=\"" + format_coord((top + height - bottom) / 2) + "\" transform=\"rotate(-90 16 " +
           format_coord((top + height - bottom) / 2) + ")\" text-anchor=\"middle\">P(" + plot.outcome +
           ")</text>\n";
    for (const auto& p : plot.points) {
        out += "  <circle class=\"" + std::string(p.dropped ? "point dropped" : "point") + "\" cx=\"" +
               format_coord(sx(p.x)) + "\" cy=\"" + format_coord(sy(p.y)) + "\" r=\"4\" fill=\"" +
               (p.dropped ? "#d62728" : "#1f77b4") + "\" fill-opacity=\"0.6\"/>\n";
    }
    std::string d;
    constexpr int samples = 100;
    for (int i = 0; i <= samples; ++i) {
        const double x = x_max * i / samples;
        const double y = stats::logistic(plot.beta0 + plot.beta1 * x);
        d += (i ? " L " : "M ") + format_coord(sx(x)) + " " + format_coord(sy(y));
    }
    out += "  <path class=\"logistic\" d=\"" + d + "\" fill=\"none\" stroke=\"#6a3d9a\" stroke-width=\"2\"/>\n";
    out += "</svg>\n";
    return out;
}

}  // namespace riff
