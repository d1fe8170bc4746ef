#include "riff/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riff/error.hpp"
#include "riff/special_functions.hpp"

namespace riff::stats {

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw ValidationError("length_mismatch", "pearson inputs have lengths " + std::to_string(x.size()) +
                                                     " and " + std::to_string(y.size()));
    if (x.size() < 3) throw ValidationError("too_few_observations", "pearson needs at least 3 pairs");
    // shifting by the first pair keeps the running mean small when the data
    // sit far from zero
    const double x0 = x[0], y0 = y[0];
    double mean_x = 0, mean_y = 0, m2x = 0, m2y = 0, cxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double k = static_cast<double>(i + 1);
        const double xi = x[i] - x0;
        const double yi = y[i] - y0;
        const double dx = xi - mean_x;
        const double dy = yi - mean_y;
        mean_x += dx / k;
        mean_y += dy / k;
        m2x += dx * (xi - mean_x);
        m2y += dy * (yi - mean_y);
        cxy += dx * (yi - mean_y);
    }
    if (m2x <= 0 || m2y <= 0) throw DegenerateError("degenerate_variance", "a correlated variable is constant");
    return std::clamp(cxy / std::sqrt(m2x * m2y), -1.0, 1.0);
}

PearsonP pearson_p(double r, std::size_t n) {
    if (n < 3) throw ValidationError("too_few_observations", "pearson_p needs n >= 3");
    if (!(std::abs(r) <= 1.0)) throw ValidationError("invalid_r", "|r| must be <= 1");
    if (std::abs(r) == 1.0) return {0.0, true};
    const double df = static_cast<double>(n) - 2.0;
    const double t = r * std::sqrt(df / (1.0 - r * r));
    return {special::student_t_two_sided(t, df), false};
}

namespace {

void check_p_values(std::span<const double> p) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0 && p[i] <= 1.0))
            throw ValidationError("invalid_p", "p-value #" + std::to_string(i) + " outside [0, 1]");
    }
}

}  // namespace

std::vector<double> holm_adjust(std::span<const double> p_raw) {
    check_p_values(p_raw);
    const std::size_t m = p_raw.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p_raw[a] < p_raw[b]; });
    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t rank = 0; rank < m; ++rank) {
        const double scaled = static_cast<double>(m - rank) * p_raw[order[rank]];
        running = std::max(running, std::min(1.0, scaled));
        adjusted[order[rank]] = running;
    }
    return adjusted;
}

std::vector<double> bonferroni_adjust(std::span<const double> p_raw) {
    check_p_values(p_raw);
    std::vector<double> out(p_raw.size());
    const double m = static_cast<double>(p_raw.size());
    std::transform(p_raw.begin(), p_raw.end(), out.begin(), [m](double p) { return std::min(1.0, m * p); });
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// log(1 + exp(eta)) without overflow
double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

struct Curvature {
    Score g;
    double h00 = 0, h01 = 0, h11 = 0;  // Fisher information
};

Curvature curvature(std::span<const double> x, std::span<const double> y, double b0, double b1) {
    Curvature c;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = logistic(b0 + b1 * x[i]);
        const double r = y[i] - p;
        const double w = p * (1.0 - p);
        c.g.d_beta0 += r;
        c.g.d_beta1 += r * x[i];
        c.h00 += w;
        c.h01 += w * x[i];
        c.h11 += w * x[i] * x[i];
    }
    return c;
}

}  // namespace

double logistic_log_likelihood(std::span<const double> x, std::span<const double> y, double beta0,
                               double beta1) {
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double eta = beta0 + beta1 * x[i];
        ll += y[i] * eta - softplus(eta);
    }
    return ll;
}

Score logistic_score(std::span<const double> x, std::span<const double> y, double beta0, double beta1) {
    return curvature(x, y, beta0, beta1).g;
}

LogisticFit fit_logistic(std::span<const double> x, std::span<const double> y, const LogisticOptions& options) {
    if (x.size() != y.size())
        throw ValidationError("length_mismatch", "logistic inputs have different lengths");
    if (x.size() < 10) throw ValidationError("too_few_observations", "logistic fit needs at least 10 rows");
    std::size_t ones = 0;
    for (double v : y) {
        if (v != 0.0 && v != 1.0) throw ValidationError("non_binary_outcome", "outcome must be 0 or 1");
        ones += v == 1.0;
    }
    if (ones == 0 || ones == y.size())
        throw DegenerateError("degenerate_outcome", "outcome has a single class");
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); }))
        throw DegenerateError("degenerate_variance", "predictor is constant");

    const double ybar = static_cast<double>(ones) / static_cast<double>(y.size());
    LogisticFit fit;
    fit.n = x.size();
    double b0 = std::log(ybar / (1.0 - ybar));
    double b1 = 0.0;
    double ll = logistic_log_likelihood(x, y, b0, b1);

    for (int it = 1; it <= options.max_iterations; ++it) {
        fit.iterations = it;
        const auto c = curvature(x, y, b0, b1);
        const double det = c.h00 * c.h11 - c.h01 * c.h01;
        if (!(det > 0.0)) throw DegenerateError("perfect_separation", "information matrix became singular");
        double s0 = (c.h11 * c.g.d_beta0 - c.h01 * c.g.d_beta1) / det;
        double s1 = (c.h00 * c.g.d_beta1 - c.h01 * c.g.d_beta0) / det;
        const bool last = std::max(std::abs(s0), std::abs(s1)) < options.tolerance;

        // Near the optimum the gain is below the rounding of the summed
        // likelihood, so a step is only refused when it clearly loses.
        const double slack = 1e-12 * (1.0 + std::abs(ll));
        double n0 = b0 + s0;
        double n1 = b1 + s1;
        double nll = logistic_log_likelihood(x, y, n0, n1);
        for (int halving = 0; halving < 40 && nll < ll - slack; ++halving) {
            s0 *= 0.5;
            s1 *= 0.5;
            n0 = b0 + s0;
            n1 = b1 + s1;
            nll = logistic_log_likelihood(x, y, n0, n1);
        }
        const bool improved = nll > ll;
        if (nll >= ll - slack) {
            b0 = n0;
            b1 = n1;
            ll = nll;
        }
        if (std::abs(b1) > options.separation_slope && improved)
            throw DegenerateError("perfect_separation", "slope diverges while the likelihood keeps improving");
        if (last) {
            fit.converged = true;
            break;
        }
    }

    const auto c = curvature(x, y, b0, b1);
    const double det = c.h00 * c.h11 - c.h01 * c.h01;
    if (!(det > 0.0)) throw DegenerateError("perfect_separation", "information matrix is singular at the optimum");
    fit.beta0 = b0;
    fit.beta1 = b1;
    fit.se0 = std::sqrt(c.h11 / det);
    fit.se1 = std::sqrt(c.h00 / det);
    fit.odds_ratio = std::exp(b1);
    fit.p_wald = 2.0 * special::normal_sf(std::abs(b1 / fit.se1));
    fit.log_likelihood = ll;
    return fit;
}

double odds_ratio_from_odds(Odds from, Odds to) {
    if (!(from.num > 0 && from.den > 0 && to.num > 0 && to.den > 0))
        throw ValidationError("invalid_odds", "odds components must all be > 0");
    return (to.num * from.den) / (to.den * from.num);
}

std::string significance_stars(double p) {
    if (p < 1e-4) return "****";
    if (p < 1e-3) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

int nps(std::span<const int> scores) {
    if (scores.empty()) throw ValidationError("empty_scores", "NPS needs at least one score");
    long promoters = 0;
    long detractors = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int s = scores[i];
        if (s < 0 || s > 10)
            throw ValidationError("invalid_score", "score #" + std::to_string(i) + " = " + std::to_string(s) +
                                                       " is outside 0..10");
        promoters += s >= 9;
        detractors += s <= 6;
    }
    const long n = static_cast<long>(scores.size());
    const long num = 100 * (promoters - detractors);
    const long mag = (2 * std::abs(num) + n) / (2 * n);  // half away from zero
    return static_cast<int>(num < 0 ? -mag : mag);
}

}  // namespace riff::stats
