#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "selfbias/errors.hpp"
#include "selfbias/rng.hpp"

namespace selfbias {

enum class Sidedness { OneGreater, OneLess, Two };

inline const char* sidedness_name(Sidedness s) {
    switch (s) {
        case Sidedness::OneGreater: return "one-greater";
        case Sidedness::OneLess: return "one-less";
        case Sidedness::Two: return "two";
    }
    return "?";
}

struct TestVerdict {
    double statistic = 0.0;
    double p_value = 1.0;
    double alpha = 0.05;
    bool significant = false; // p_value < alpha
    Sidedness sidedness = Sidedness::Two;
};

inline TestVerdict make_verdict(double statistic, double p, double alpha, Sidedness sided) {
    return TestVerdict{statistic, p, alpha, p < alpha, sided};
}

// Standard normal tail P(Z <= z) via the complementary error function.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------
// Exact binomial test
//
// Tail sums use log-space coefficients via lgamma and accumulate the
// exponentiated terms from the small end of the tail inward, in long double.
// Exact summation is used up to kExactLimit trials; beyond that a normal
// approximation with continuity correction takes over.

namespace detail {

constexpr std::int64_t kBinomExactLimit = 100000;

inline long double log_pmf(std::int64_t n, std::int64_t j, double p0) {
    const long double lp = std::log(static_cast<long double>(p0));
    const long double lq = std::log1p(static_cast<long double>(-p0));
    const long double lchoose = std::lgamma(static_cast<long double>(n) + 1.0L) -
                                std::lgamma(static_cast<long double>(j) + 1.0L) -
                                std::lgamma(static_cast<long double>(n - j) + 1.0L);
    return lchoose + static_cast<long double>(j) * lp + static_cast<long double>(n - j) * lq;
}

// P(X >= k): pmf decreases moving away from the mode, so summing from n down
// to k adds ascending terms.
inline double binom_tail_geq(std::int64_t k, std::int64_t n, double p0) {
    if (k <= 0) return 1.0;
    if (k > n) return 0.0;
    const double mode = (n + 1) * p0;
    if (static_cast<double>(k) > mode) {
        long double sum = 0.0L;
        for (std::int64_t j = n; j >= k; --j) sum += std::exp(log_pmf(n, j, p0));
        return static_cast<double>(std::min(sum, 1.0L));
    }
    long double below = 0.0L;
    for (std::int64_t j = 0; j < k; ++j) below += std::exp(log_pmf(n, j, p0));
    return static_cast<double>(std::max(0.0L, std::min(1.0L, 1.0L - below)));
}

inline double binom_tail_leq(std::int64_t k, std::int64_t n, double p0) {
    if (k >= n) return 1.0;
    if (k < 0) return 0.0;
    const double mode = (n + 1) * p0;
    if (static_cast<double>(k) < mode - 1.0) {
        long double sum = 0.0L;
        for (std::int64_t j = 0; j <= k; ++j) sum += std::exp(log_pmf(n, j, p0));
        return static_cast<double>(std::min(sum, 1.0L));
    }
    long double above = 0.0L;
    for (std::int64_t j = n; j > k; --j) above += std::exp(log_pmf(n, j, p0));
    return static_cast<double>(std::max(0.0L, std::min(1.0L, 1.0L - above)));
}

// Minimum-likelihood two-sided p: the sum of all outcome probabilities not
// exceeding the observed one (with a small relative slack for ties).
inline double binom_two_sided(std::int64_t k, std::int64_t n, double p0) {
    const long double observed = log_pmf(n, k, p0) + 1e-7L;
    long double sum = 0.0L;
    for (std::int64_t j = 0; j <= n; ++j) {
        const long double lp = log_pmf(n, j, p0);
        if (lp <= observed) sum += std::exp(lp);
    }
    return static_cast<double>(std::min(sum, 1.0L));
}

} // namespace detail

inline TestVerdict binomial_test(std::int64_t k, std::int64_t n, double p0, Sidedness sided,
                                 double alpha = 0.05) {
    if (k < 0 || n < 0 || k > n) {
        throw InvalidParams("binomial_test: need 0 <= k <= n, got k=" + std::to_string(k) +
                            " n=" + std::to_string(n));
    }
    if (!(p0 > 0.0 && p0 < 1.0)) {
        throw InvalidParams("binomial_test: null probability must lie in (0, 1)");
    }
    if (n == 0) return make_verdict(0.0, 1.0, alpha, sided);

    double p = 1.0;
    if (n <= detail::kBinomExactLimit) {
        switch (sided) {
            case Sidedness::OneGreater: p = detail::binom_tail_geq(k, n, p0); break;
            case Sidedness::OneLess: p = detail::binom_tail_leq(k, n, p0); break;
            case Sidedness::Two: p = detail::binom_two_sided(k, n, p0); break;
        }
    } else {
        const double mu = n * p0;
        const double sigma = std::sqrt(n * p0 * (1.0 - p0));
        switch (sided) {
            case Sidedness::OneGreater: p = normal_sf((k - 0.5 - mu) / sigma); break;
            case Sidedness::OneLess: p = normal_cdf((k + 0.5 - mu) / sigma); break;
            case Sidedness::Two:
                p = std::min(1.0, 2.0 * std::min(normal_sf((k - 0.5 - mu) / sigma),
                                                 normal_cdf((k + 0.5 - mu) / sigma)));
                break;
        }
    }
    return make_verdict(static_cast<double>(k), p, alpha, sided);
}

// ---------------------------------------------------------------------------
// Two-proportion Z-test (pooled variance)

inline TestVerdict two_proportion_z(std::int64_t k1, std::int64_t n1, std::int64_t k2,
                                    std::int64_t n2, Sidedness sided, double alpha = 0.05) {
    if (n1 <= 0 || n2 <= 0 || k1 < 0 || k2 < 0 || k1 > n1 || k2 > n2) {
        throw InvalidParams("two_proportion_z: need 0 <= k_i <= n_i and n_i > 0");
    }
    const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
    const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
    const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
    if (pooled <= 0.0 || pooled >= 1.0) {
        throw DegenerateVariance("two_proportion_z: pooled proportion is " + std::to_string(pooled));
    }
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
    const double z = (p1 - p2) / se;

    double p = 1.0;
    switch (sided) {
        case Sidedness::OneGreater: p = normal_sf(z); break;
        case Sidedness::OneLess: p = normal_cdf(z); break;
        case Sidedness::Two: p = std::erfc(std::fabs(z) / std::sqrt(2.0)); break;
    }
    return make_verdict(z, p, alpha, sided);
}

// ---------------------------------------------------------------------------
// Majority significance rule: at least two of the three tests agree.

inline bool sig_rule(bool a, bool b, bool c) {
    return (static_cast<int>(a) + static_cast<int>(b) + static_cast<int>(c)) >= 2;
}

// ---------------------------------------------------------------------------
// Spearman rank correlation with mid-rank tie handling.

namespace detail {

inline std::vector<double> mid_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        throw DegenerateInput("correlation undefined for a constant sequence");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

} // namespace detail

inline double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DegenerateInput("spearman: length mismatch");
    if (x.size() < 2) throw DegenerateInput("spearman: need at least two observations");
    const auto rx = detail::mid_ranks(x);
    const auto ry = detail::mid_ranks(y);
    return detail::pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// Fleiss' kappa over an items x categories count matrix.

inline double fleiss_kappa(const std::vector<std::vector<std::int64_t>>& ratings) {
    if (ratings.empty() || ratings.front().empty()) {
        throw InvalidParams("fleiss_kappa: empty rating matrix");
    }
    const std::size_t categories = ratings.front().size();
    std::int64_t raters = std::accumulate(ratings.front().begin(), ratings.front().end(),
                                          std::int64_t{0});
    if (raters < 2) throw InvalidParams("fleiss_kappa: need at least two raters per item");

    const double n_items = static_cast<double>(ratings.size());
    const double n = static_cast<double>(raters);

    std::vector<double> category_share(categories, 0.0);
    double p_bar = 0.0;
    for (const auto& row : ratings) {
        if (row.size() != categories) throw InvalidParams("fleiss_kappa: ragged rating matrix");
        std::int64_t row_sum = 0;
        double agree = 0.0;
        for (std::size_t c = 0; c < categories; ++c) {
            if (row[c] < 0) throw InvalidParams("fleiss_kappa: negative count");
            row_sum += row[c];
            agree += static_cast<double>(row[c]) * static_cast<double>(row[c]);
            category_share[c] += static_cast<double>(row[c]);
        }
        if (row_sum != raters) {
            throw InvalidParams("fleiss_kappa: every item must be rated by the same number of raters");
        }
        p_bar += (agree - n) / (n * (n - 1.0));
    }
    p_bar /= n_items;

    double pe_bar = 0.0;
    for (double share : category_share) {
        const double pj = share / (n_items * n);
        pe_bar += pj * pj;
    }
    if (pe_bar >= 1.0 - 1e-12) {
        throw PerfectExpectedAgreement("fleiss_kappa: expected agreement is 1");
    }
    return (p_bar - pe_bar) / (1.0 - pe_bar);
}

// ---------------------------------------------------------------------------
// Percentile bootstrap
//
// Flat mode resamples individual decisions, stratified so that every stratum
// (e.g. the self and null legs of a bias estimate) keeps its original sample
// size. Hierarchical mode resamples prompts with replacement and takes all of
// a drawn prompt's decisions, preserving within-prompt multiplicity.
// Iteration b draws from its own stream derived from (seed, "bootstrap", b),
// so results do not depend on scheduling.

struct BootstrapConfig {
    enum class Mode { Flat, HierarchicalByPrompt };

    int iterations = 1000;
    double alpha = 0.05;
    Mode mode = Mode::HierarchicalByPrompt;
    std::uint64_t rng_seed = 0;
};

struct BootstrapInterval {
    double point = 0.0;
    double low = 0.0;
    double high = 0.0;
};

namespace detail {

// Linear-interpolation quantile over sorted data (R type 7).
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Groups row indices by key, in first-appearance order.
template <typename Key>
std::vector<std::vector<std::uint32_t>> group_indices(const std::vector<Key>& keys) {
    std::map<Key, std::uint32_t> group_of;
    std::vector<std::vector<std::uint32_t>> groups;
    for (std::uint32_t i = 0; i < keys.size(); ++i) {
        auto [it, inserted] = group_of.try_emplace(keys[i], static_cast<std::uint32_t>(groups.size()));
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    return groups;
}

} // namespace detail

// Rows: arbitrary record type. Estimator: double(const std::vector<Row>&).
// PromptOf/StratumOf: projections Row -> comparable key.
template <typename Row, typename Estimator, typename PromptOf, typename StratumOf>
BootstrapInterval bootstrap_ci(const std::vector<Row>& rows, Estimator estimator,
                               const BootstrapConfig& cfg, PromptOf prompt_of,
                               StratumOf stratum_of) {
    if (rows.empty()) throw NoData("bootstrap_ci: no records");
    if (cfg.iterations < 100) throw InvalidParams("bootstrap_ci: need at least 100 iterations");

    BootstrapInterval result;
    result.point = estimator(rows);

    std::vector<std::vector<std::uint32_t>> groups;
    if (cfg.mode == BootstrapConfig::Mode::HierarchicalByPrompt) {
        std::vector<std::decay_t<decltype(prompt_of(rows.front()))>> keys;
        keys.reserve(rows.size());
        for (const Row& r : rows) keys.push_back(prompt_of(r));
        groups = detail::group_indices(keys);
    } else {
        std::vector<std::decay_t<decltype(stratum_of(rows.front()))>> keys;
        keys.reserve(rows.size());
        for (const Row& r : rows) keys.push_back(stratum_of(r));
        groups = detail::group_indices(keys);
    }

    std::vector<double> estimates;
    estimates.reserve(static_cast<std::size_t>(cfg.iterations));
    std::vector<Row> sample;
    sample.reserve(rows.size());

    for (int b = 0; b < cfg.iterations; ++b) {
        Rng rng(derive_seed(cfg.rng_seed, "bootstrap", static_cast<std::uint64_t>(b)));
        sample.clear();
        if (cfg.mode == BootstrapConfig::Mode::HierarchicalByPrompt) {
            const std::size_t n_groups = groups.size();
            for (std::size_t g = 0; g < n_groups; ++g) {
                const auto& drawn = groups[rng.below(n_groups)];
                for (std::uint32_t idx : drawn) sample.push_back(rows[idx]);
            }
        } else {
            for (const auto& stratum : groups) {
                const std::size_t m = stratum.size();
                for (std::size_t i = 0; i < m; ++i) {
                    sample.push_back(rows[stratum[rng.below(m)]]);
                }
            }
        }
        estimates.push_back(estimator(sample));
    }

    std::sort(estimates.begin(), estimates.end());
    result.low = detail::sorted_quantile(estimates, cfg.alpha / 2.0);
    result.high = detail::sorted_quantile(estimates, 1.0 - cfg.alpha / 2.0);
    return result;
}

template <typename Row, typename Estimator, typename PromptOf>
BootstrapInterval bootstrap_ci(const std::vector<Row>& rows, Estimator estimator,
                               const BootstrapConfig& cfg, PromptOf prompt_of) {
    return bootstrap_ci(rows, estimator, cfg, prompt_of, [](const Row&) { return 0; });
}

} // namespace selfbias
