#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace mixforge::stats {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Sample variance (n - 1 denominator); 0 for fewer than two values.
inline double variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double sd(std::span<const double> v) { return std::sqrt(variance(v)); }

/// Linear-interpolated quantile (type 7) of unsorted data.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double autocorrelation(std::span<const double> v, std::size_t lag) {
    const double m = mean(v);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        den += (v[i] - m) * (v[i] - m);
        if (i + lag < v.size()) num += (v[i] - m) * (v[i + lag] - m);
    }
    return num / den;
}

// Log densities. Each returns -inf outside its support.

inline double log_normal_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double log_half_normal_pdf(double x, double sigma) {
    if (x < 0.0) return neg_inf;
    const double z = x / sigma;
    return -0.5 * z * z - std::log(sigma) + 0.5 * std::log(2.0 / std::numbers::pi);
}

inline double log_beta_pdf(double x, double a, double b) {
    if (!(x > 0.0 && x < 1.0)) {
        // the density is finite at 0 only for a == 1
        if (x == 0.0 && a == 1.0) return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (b - 1.0) * std::log1p(-x);
        return neg_inf;
    }
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
}

/// Gamma(shape, scale).
inline double log_gamma_pdf(double x, double shape, double scale) {
    if (!(x > 0.0)) return neg_inf;
    return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

/**
 * Split-chain potential scale reduction (R-hat). `chains` holds equal-length
 * draw sequences, one per chain.
 */
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
    std::vector<std::span<const double>> halves;
    for (const auto& c : chains) {
        const std::size_t n = c.size() / 2;
        if (n < 2) return std::numeric_limits<double>::quiet_NaN();
        halves.emplace_back(c.data(), n);
        halves.emplace_back(c.data() + c.size() - n, n);
    }
    const auto n = static_cast<double>(halves.front().size());
    const auto m = static_cast<double>(halves.size());
    std::vector<double> means;
    double w = 0.0;
    for (auto h : halves) {
        means.push_back(mean(h));
        w += variance(h);
    }
    w /= m;
    const double b = n * variance(means);
    if (w <= 0.0) return 1.0;
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

/// Multi-chain effective sample size with Geyer's initial positive sequence.
inline double effective_sample_size(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = chains.front().size();
    if (n < 4) return static_cast<double>(m * n);
    std::vector<double> chain_means(m), chain_vars(m);
    for (std::size_t c = 0; c < m; ++c) {
        chain_means[c] = mean(chains[c]);
        chain_vars[c] = variance(chains[c]);
    }
    const double w = mean(chain_vars);
    const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w +
                            (m > 1 ? variance(chain_means) : 0.0);
    if (var_plus <= 0.0) return static_cast<double>(m * n);
    auto rho = [&](std::size_t lag) {
        double acov = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i + lag < n; ++i) {
                s += (chains[c][i] - chain_means[c]) * (chains[c][i + lag] - chain_means[c]);
            }
            acov += s / static_cast<double>(n);
        }
        acov /= static_cast<double>(m);
        return 1.0 - (w - acov) / var_plus;
    };
    double tau = -1.0;
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        const double pair = rho(2 * k) + rho(2 * k + 1);
        if (pair <= 0.0) break;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n)));
    return static_cast<double>(m * n) / tau;
}

} // namespace mixforge::stats
