#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace riff::stats {

/// Pearson product-moment correlation, accumulated in one pass with
/// co-moment updates. Requires equal lengths >= 3. Throws
/// DegenerateError("degenerate_variance") if either vector is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct PearsonP {
    double p = 1.0;
    bool exact = false;  // |r| == 1: the t statistic is infinite and p is 0 by definition
};

/// Two-sided p-value for H0: rho = 0 via t = r sqrt((n-2)/(1-r^2)) on n-2 df.
PearsonP pearson_p(double r, std::size_t n);

/// Holm step-down adjusted p-values, returned in input order.
std::vector<double> holm_adjust(std::span<const double> p_raw);

/// Bonferroni adjusted p-values (m * p capped at 1).
std::vector<double> bonferroni_adjust(std::span<const double> p_raw);

struct LogisticFit {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double se0 = 0.0;
    double se1 = 0.0;
    int iterations = 0;
    bool converged = false;
    double odds_ratio = 1.0;  // exp(beta1)
    double p_wald = 1.0;
    double log_likelihood = 0.0;
    std::size_t n = 0;
};

struct LogisticOptions {
    int max_iterations = 50;
    double tolerance = 1e-10;        // on the largest coefficient change
    double separation_slope = 15.0;  // |beta1| beyond this while improving => separation
};

/// Maximum-likelihood fit of P(y=1) = logistic(beta0 + beta1 x) by Newton's
/// method with step halving. Throws DegenerateError with codes
/// "degenerate_outcome" (one class only), "degenerate_variance" (constant x)
/// or "perfect_separation".
LogisticFit fit_logistic(std::span<const double> x, std::span<const double> y,
                         const LogisticOptions& options = {});

double logistic_log_likelihood(std::span<const double> x, std::span<const double> y, double beta0,
                               double beta1);

struct Score {
    double d_beta0 = 0.0;
    double d_beta1 = 0.0;
};

/// Analytic gradient of logistic_log_likelihood.
Score logistic_score(std::span<const double> x, std::span<const double> y, double beta0, double beta1);

inline double logistic(double eta) {
    return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

struct Odds {
    double num = 0.0;  // "num to den", e.g. 1 to 5
    double den = 1.0;
};

/// Ratio of the odds `to` over the odds `from`. Throws Error("invalid_odds")
/// unless every component is > 0.
double odds_ratio_from_odds(Odds from, Odds to);

/// "****" p < 1e-4, "***" p < 1e-3, "**" p < 0.01, "*" p < 0.05, "" otherwise.
std::string significance_stars(double p);

/// Net promoter score: percentage of 9-10 minus percentage of 0-6, rounded
/// half away from zero.
int nps(std::span<const int> scores);

}  // namespace riff::stats
