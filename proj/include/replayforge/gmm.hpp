// Per-column 1-D Gaussian mixtures fitted by EM.
//
// Plain EM with k-means++ style seeding: 100 iterations max, stop when the
// mean log-likelihood improves by less than 1e-4, then drop components whose
// weight fell below 0.005 and renormalize. Component sigmas are floored at
// 1e-4, which also covers constant columns (single mode, sigma = 1e-4).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "replayforge/common.hpp"

namespace replayforge {

struct GaussianMode {
    double mean = 0.0;
    double stddev = 1.0;
    double weight = 1.0;
};

struct GmmFitInfo {
    std::vector<double> log_likelihoods;  // one entry per EM iteration
    std::size_t iterations = 0;
};

namespace detail {

constexpr double kSigmaFloor = 1e-4;
constexpr double kPruneWeight = 0.005;
constexpr double kLogTwoPi = 1.8378770664093453;

inline double log_normal_pdf(double x, double mean, double stddev) {
    const double z = (x - mean) / stddev;
    return -0.5 * (z * z + kLogTwoPi) - std::log(stddev);
}

inline double log_sum_exp(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// k-means++ seeding: first center uniform, later centers proportional to
// squared distance from the nearest chosen center.
inline std::vector<double> kmeanspp_centers(const std::vector<double>& x,
                                            std::size_t k, Rng& rng) {
    std::vector<double> centers;
    centers.push_back(x[rng.below(x.size())]);
    std::vector<double> d2(x.size());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double best = std::abs(x[i] - centers[0]);
            for (std::size_t c = 1; c < centers.size(); ++c)
                best = std::min(best, std::abs(x[i] - centers[c]));
            d2[i] = best * best;
            total += d2[i];
        }
        if (total <= 0.0) break;  // all points coincide with a center
        centers.push_back(x[rng.categorical(d2)]);
    }
    return centers;
}

}  // namespace detail

namespace detail {

struct EmResult {
    std::vector<GaussianMode> modes;
    double mean_ll = -std::numeric_limits<double>::infinity();
    std::vector<double> ll_trace;
};

// Plain EM at a fixed component count.
inline EmResult em_fit(const std::vector<double>& x, std::size_t k, Rng& rng) {
    const std::size_t n = x.size();
    auto centers = kmeanspp_centers(x, k, rng);
    k = centers.size();  // fewer when points coincide

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);

    EmResult res;
    res.modes.resize(k);
    const double init_sigma =
        std::max(std::sqrt(var) / static_cast<double>(k), kSigmaFloor);
    for (std::size_t c = 0; c < k; ++c)
        res.modes[c] =
            GaussianMode{centers[c], init_sigma, 1.0 / static_cast<double>(k)};

    std::vector<std::vector<double>> resp(k, std::vector<double>(n));
    std::vector<double> logp(k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    constexpr std::size_t kMaxIter = 100;
    constexpr double kTol = 1e-4;

    for (std::size_t iter = 0; iter < kMaxIter; ++iter) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < k; ++c)
                logp[c] = std::log(res.modes[c].weight) +
                          log_normal_pdf(x[i], res.modes[c].mean,
                                         res.modes[c].stddev);
            const double lse = log_sum_exp(logp);
            ll += lse;
            for (std::size_t c = 0; c < k; ++c)
                resp[c][i] = std::exp(logp[c] - lse);
        }
        ll /= static_cast<double>(n);
        res.ll_trace.push_back(ll);
        res.mean_ll = ll;
        if (ll - prev_ll < kTol && iter > 0) break;
        prev_ll = ll;

        for (std::size_t c = 0; c < k; ++c) {
            double nc = 0.0, mu = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nc += resp[c][i];
                mu += resp[c][i] * x[i];
            }
            if (nc < 1e-12) {
                res.modes[c].weight = 0.0;  // dead component; pruned later
                continue;
            }
            mu /= nc;
            double s2 = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s2 += resp[c][i] * (x[i] - mu) * (x[i] - mu);
            s2 /= nc;
            res.modes[c].mean = mu;
            res.modes[c].stddev = std::max(std::sqrt(s2), kSigmaFloor);
            res.modes[c].weight = nc / static_cast<double>(n);
        }
    }
    return res;
}

}  // namespace detail

// Fits a mixture of <= max_modes Gaussians to `x`. The component count is
// chosen by BIC over k = 1..max_modes (stopping after two consecutive
// regressions), standing in for the self-pruning of a variational-Bayes
// mixture. Light components (< 0.005 weight) are dropped and the rest
// renormalized; modes come back sorted by mean.
inline std::vector<GaussianMode> fit_gmm_1d(const std::vector<double>& x,
                                            std::size_t max_modes, Rng& rng,
                                            GmmFitInfo* info = nullptr) {
    if (x.empty()) throw DomainError("fit_gmm_1d: empty column");
    if (max_modes < 1) throw DomainError("fit_gmm_1d: max_modes must be >= 1");
    const std::size_t n = x.size();

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);

    // Constant column: one clamped mode, no EM.
    if (var < detail::kSigmaFloor * detail::kSigmaFloor) {
        if (info) info->iterations = 0;
        return {GaussianMode{mean, detail::kSigmaFloor, 1.0}};
    }

    detail::EmResult best;
    double best_bic = std::numeric_limits<double>::infinity();
    std::size_t worse_streak = 0;
    const double logn = std::log(static_cast<double>(n));
    for (std::size_t k = 1; k <= std::min(max_modes, n); ++k) {
        auto res = detail::em_fit(x, k, rng);
        const double n_params = 3.0 * static_cast<double>(k) - 1.0;
        const double bic =
            -2.0 * res.mean_ll * static_cast<double>(n) + n_params * logn;
        if (bic < best_bic) {
            best_bic = bic;
            best = std::move(res);
            worse_streak = 0;
        } else if (++worse_streak >= 2) {
            break;
        }
    }
    if (info) {
        info->log_likelihoods = best.ll_trace;
        info->iterations = best.ll_trace.size();
    }

    // Prune light components, renormalize, sort by mean.
    std::vector<GaussianMode> kept;
    for (const auto& m : best.modes)
        if (m.weight >= detail::kPruneWeight) kept.push_back(m);
    if (kept.empty()) {
        auto it = std::max_element(best.modes.begin(), best.modes.end(),
                                   [](const GaussianMode& a, const GaussianMode& b) {
                                       return a.weight < b.weight;
                                   });
        kept.push_back(*it);
    }
    double wsum = 0.0;
    for (const auto& m : kept) wsum += m.weight;
    for (auto& m : kept) m.weight /= wsum;
    std::sort(kept.begin(), kept.end(),
              [](const GaussianMode& a, const GaussianMode& b) {
                  return a.mean < b.mean;
              });
    return kept;
}

// Posterior membership probabilities of `v` under the mixture.
inline std::vector<double> gmm_responsibilities(
    const std::vector<GaussianMode>& modes, double v) {
    std::vector<double> logp(modes.size());
    for (std::size_t c = 0; c < modes.size(); ++c)
        logp[c] = std::log(modes[c].weight) +
                  detail::log_normal_pdf(v, modes[c].mean, modes[c].stddev);
    const double lse = detail::log_sum_exp(logp);
    std::vector<double> r(modes.size());
    for (std::size_t c = 0; c < modes.size(); ++c)
        r[c] = std::exp(logp[c] - lse);
    return r;
}

}  // namespace replayforge
