#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "riff/cohort.hpp"

namespace riff {

enum class Predictor { Total, First4Weeks };
enum class CohortFilter { Completers, All };

std::string_view to_string(Predictor p);
std::string_view to_string(CohortFilter f);
Predictor predictor_from_string(std::string_view s);
CohortFilter cohort_filter_from_string(std::string_view s);

struct AnalysisOptions {
    Predictor predictor = Predictor::Total;
    CohortFilter filter = CohortFilter::Completers;
    double alpha = 0.05;
    double pass_mark = 70.0;  // "Grades" odds row: final_grade >= pass_mark
    std::string plot_outcome = "certificate";  // "certificate" or "passed"
};

struct StatsRow {
    std::string attribute;
    double statistic = 0.0;  // r for correlations, odds ratio for logistic rows
    std::size_t n = 0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    std::string stars;
    bool reject = false;  // p_adjusted < alpha

    friend bool operator==(const StatsRow&, const StatsRow&) = default;
};

struct PlotPoint {
    double x = 0.0;
    double y = 0.0;
    bool dropped = false;

    friend bool operator==(const PlotPoint&, const PlotPoint&) = default;
};

/// Scatter of predictor vs a binary outcome with its fitted logistic curve.
struct PlotData {
    std::string outcome;
    std::string x_label;
    double beta0 = 0.0;
    double beta1 = 0.0;
    std::vector<PlotPoint> points;

    friend bool operator==(const PlotData&, const PlotData&) = default;
};

struct StatsReport {
    Predictor predictor = Predictor::Total;
    CohortFilter filter = CohortFilter::Completers;
    double alpha = 0.05;
    double pass_mark = 70.0;
    std::size_t rows_total = 0;
    std::size_t rows_used = 0;
    std::size_t holm_family = 0;       // correlation family size
    std::size_t odds_holm_family = 0;  // logistic rows form their own family
    std::vector<StatsRow> correlations;
    std::vector<StatsRow> odds;
    PlotData plot;

    friend bool operator==(const StatsReport&, const StatsReport&) = default;
};

/// Correlations of the predictor against the six course outcomes (Holm family
/// of 6) and logistic odds ratios for passing and certificate attainment.
///
/// Completers: dropped rows are never read. All: dropped students without
/// grades are left out of the grade correlations but enter the pitch,
/// certificate and pass/fail models with outcome 0.
StatsReport analyze(const CohortTable& table, const AnalysisOptions& options);

std::string render_table(const StatsReport& report);
std::string render_json(const StatsReport& report);
std::string render_svg(const StatsReport& report);
StatsReport report_from_json(std::string_view text);

}  // namespace riff
