#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace levsim {

/// Log returns of a price series plus the activity mask: mask[i] is true when
/// the mispricing V - p was positive at the start of return interval i, i.e.
/// when the funds were in the market.
struct ReturnSeries {
    std::vector<double> values;
    std::vector<bool> mask;
};

inline ReturnSeries log_returns(std::span<const double> prices, double V) {
    if (prices.size() < 2)
        throw std::invalid_argument("log_returns: need at least two prices");
    ReturnSeries rs;
    rs.values.reserve(prices.size() - 1);
    rs.mask.reserve(prices.size() - 1);
    for (std::size_t i = 0; i + 1 < prices.size(); ++i) {
        if (!(prices[i] > 0) || !(prices[i + 1] > 0))
            throw std::invalid_argument("log_returns: prices must be > 0");
        rs.values.push_back(std::log(prices[i + 1]) - std::log(prices[i]));
        rs.mask.push_back(V - prices[i] > 0);
    }
    return rs;
}

enum class TailSide { kNegative, kPositive };

/// Power-law tail fit of return magnitudes.
struct TailFit {
    double gamma = 0.0;
    long k = 0;        // order statistics used
    double x_min = 0;  // threshold magnitude (the (k+1)-th largest)
    TailSide side = TailSide::kNegative;
};

/// Hill estimator over the k largest magnitudes:
///   gamma = k / sum_{i=1..k} log(X_(i) / X_(k+1)),
/// X_(i) the descending order statistics. Absent when the sample cannot
/// support the fit (k+1 > n, non-positive threshold, or zero spread).
inline std::optional<double> hill_estimate(std::span<const double> magnitudes, long k) {
    const long n = static_cast<long>(magnitudes.size());
    if (k < 1 || k + 1 > n) return std::nullopt;
    std::vector<double> xs(magnitudes.begin(), magnitudes.end());
    std::sort(xs.begin(), xs.end(), std::greater<>());
    const double threshold = xs[static_cast<std::size_t>(k)];
    if (!(threshold > 0)) return std::nullopt;
    double denom = 0.0;
    for (long i = 0; i < k; ++i) denom += std::log(xs[static_cast<std::size_t>(i)] / threshold);
    if (!(denom > 0)) return std::nullopt;
    return static_cast<double>(k) / denom;
}

/// Fit the tail exponent from the largest tail_fraction of the sample.
/// Requires at least 10 usable order statistics; otherwise the result is
/// absent rather than a fabricated number.
inline std::optional<TailFit> hill_tail_exponent(std::span<const double> magnitudes,
                                                 double tail_fraction,
                                                 TailSide side = TailSide::kNegative) {
    if (!(tail_fraction > 0 && tail_fraction < 1))
        throw std::invalid_argument("hill_tail_exponent: tail_fraction must lie in (0,1)");
    const long n = static_cast<long>(magnitudes.size());
    const long k = static_cast<long>(std::ceil(tail_fraction * static_cast<double>(n)));
    if (k < 10) return std::nullopt;
    auto gamma = hill_estimate(magnitudes, k);
    if (!gamma) return std::nullopt;
    std::vector<double> xs(magnitudes.begin(), magnitudes.end());
    std::nth_element(xs.begin(), xs.begin() + k, xs.end(), std::greater<>());
    return TailFit{*gamma, k, xs[static_cast<std::size_t>(k)], side};
}

/// Cross-check estimator: OLS slope of the log empirical CCDF against log
/// magnitude over the largest tail_fraction of the sample.
inline std::optional<double> rank_size_gamma(std::span<const double> magnitudes,
                                             double tail_fraction) {
    const long n = static_cast<long>(magnitudes.size());
    const long k = static_cast<long>(std::ceil(tail_fraction * static_cast<double>(n)));
    if (k < 10 || k > n) return std::nullopt;
    std::vector<double> xs(magnitudes.begin(), magnitudes.end());
    std::sort(xs.begin(), xs.end(), std::greater<>());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long used = 0;
    for (long i = 0; i < k; ++i) {
        if (!(xs[static_cast<std::size_t>(i)] > 0)) break;
        const double x = std::log(xs[static_cast<std::size_t>(i)]);
        const double y = std::log(static_cast<double>(i + 1) / static_cast<double>(n));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++used;
    }
    if (used < 10) return std::nullopt;
    const double det = used * sxx - sx * sx;
    if (!(std::fabs(det) > 0)) return std::nullopt;
    return -(used * sxy - sx * sy) / det;
}

/// Sample autocorrelation of |returns| at lags 0..max_lag, using only index
/// pairs whose both endpoints carry the mask. Mean and variance are taken
/// over the masked sample; covariances are normalized by the pair count, so
/// an all-true mask reduces to the plain estimator. Entries with fewer than
/// min_pairs pairs (or a degenerate variance) are absent.
inline std::vector<std::optional<double>> acf_abs_returns(const ReturnSeries& series,
                                                          int max_lag, long min_pairs = 100) {
    if (series.values.size() != series.mask.size())
        throw std::invalid_argument("acf_abs_returns: values/mask length mismatch");
    const std::size_t n = series.values.size();
    std::vector<std::optional<double>> out(static_cast<std::size_t>(max_lag) + 1);

    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = std::fabs(series.values[i]);

    double mean = 0.0;
    long n_masked = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (series.mask[i]) {
            mean += xs[i];
            ++n_masked;
        }
    if (n_masked == 0) return out;
    mean /= static_cast<double>(n_masked);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (series.mask[i]) var += (xs[i] - mean) * (xs[i] - mean);
    var /= static_cast<double>(n_masked);
    if (!(var > 0)) return out;

    out[0] = 1.0;
    for (int lag = 1; lag <= max_lag; ++lag) {
        const std::size_t l = static_cast<std::size_t>(lag);
        if (l >= n) break;
        double cov = 0.0;
        long pairs = 0;
        for (std::size_t i = 0; i + l < n; ++i) {
            if (series.mask[i] && series.mask[i + l]) {
                cov += (xs[i] - mean) * (xs[i + l] - mean);
                ++pairs;
            }
        }
        if (pairs >= min_pairs) out[l] = (cov / static_cast<double>(pairs)) / var;
    }
    return out;
}

/// Bias-corrected excess kurtosis. Absent for n < 4 or zero variance.
inline std::optional<double> excess_kurtosis(std::span<const double> xs) {
    const long n = static_cast<long>(xs.size());
    if (n < 4) return std::nullopt;
    const double nd = static_cast<double>(n);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= nd;
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= nd;
    m4 /= nd;
    if (!(m2 > 0)) return std::nullopt;
    const double g2 = m4 / (m2 * m2) - 3.0;
    return (nd - 1.0) / ((nd - 2.0) * (nd - 3.0)) * ((nd + 1.0) * g2 + 6.0);
}

inline std::optional<double> mean_of(std::span<const double> xs) {
    if (xs.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Per-run summary statistics.
struct RunSummary {
    std::optional<double> volatility;       // mean |log return|
    std::optional<double> excess_kurt;      // bias-corrected, all returns
    std::optional<TailFit> tail_neg;        // negative returns, mask m > 0
    std::optional<TailFit> tail_pos;        // positive returns, mask m > 0
    std::optional<double> rank_size_neg;    // regression cross-checks
    std::optional<double> rank_size_pos;
    std::vector<std::optional<double>> acf_abs;  // lags 0..L, mask m > 0
    std::optional<double> default_rate;     // default events per timestep
    std::optional<double> mean_price;
};

/// Assemble the summary from a price path p(0..T) and the default count.
/// A degenerate run (T < 1) yields the all-absent summary.
inline RunSummary summarize_prices(std::span<const double> prices, double V, long default_events,
                                   long T, int acf_max_lag = 50, double tail_fraction = 0.025) {
    RunSummary s;
    if (T < 1 || prices.size() < 2) return s;
    const ReturnSeries rs = log_returns(prices, V);

    double abs_sum = 0.0;
    for (double r : rs.values) abs_sum += std::fabs(r);
    s.volatility = abs_sum / static_cast<double>(rs.values.size());
    s.excess_kurt = excess_kurtosis(rs.values);

    std::vector<double> neg, pos;
    for (std::size_t i = 0; i < rs.values.size(); ++i) {
        if (!rs.mask[i]) continue;
        if (rs.values[i] < 0) neg.push_back(-rs.values[i]);
        if (rs.values[i] > 0) pos.push_back(rs.values[i]);
    }
    s.tail_neg = hill_tail_exponent(neg, tail_fraction, TailSide::kNegative);
    s.tail_pos = hill_tail_exponent(pos, tail_fraction, TailSide::kPositive);
    s.rank_size_neg = rank_size_gamma(neg, tail_fraction);
    s.rank_size_pos = rank_size_gamma(pos, tail_fraction);
    s.acf_abs = acf_abs_returns(rs, acf_max_lag);
    s.default_rate = static_cast<double>(default_events) / static_cast<double>(T);
    s.mean_price = mean_of(std::span<const double>(prices.data() + 1, prices.size() - 1));
    return s;
}

}  // namespace levsim
