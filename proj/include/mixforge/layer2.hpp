#pragma once

#include "mixforge/core.hpp"
#include "mixforge/decomposition.hpp"
#include "mixforge/layer1.hpp"
#include "mixforge/optim.hpp"
#include "mixforge/stats.hpp"
#include "mixforge/transforms.hpp"

#include <cmath>
#include <cstdint>
#include <exception>
#include <random>
#include <thread>
#include <vector>

namespace mixforge {

/// Knot placement for kernel-smoothed coefficients.
struct KnotGrid {
    std::vector<double> positions; // time indices, strictly increasing
    double bandwidth = 1.0;

    std::size_t count() const noexcept { return positions.size(); }

    void validate(std::size_t T) const {
        require(!positions.empty() && positions.size() <= T, ErrorKind::parameter,
                "knot count must lie in [1, T]");
        require(bandwidth > 0.0, ErrorKind::parameter, "kernel bandwidth must be positive");
        for (std::size_t j = 1; j < positions.size(); ++j) {
            require(positions[j] > positions[j - 1], ErrorKind::parameter, "knot positions must increase strictly");
        }
    }

    /// J knots spaced evenly over [0, T-1] including both ends. A non-positive bandwidth means
    /// "use the knot spacing".
    static KnotGrid uniform(std::size_t T, std::size_t J, double bandwidth = 0.0) {
        require(J >= 1 && J <= T, ErrorKind::parameter, "knot count must lie in [1, T]");
        KnotGrid g;
        const double span = static_cast<double>(T - 1);
        if (J == 1) {
            g.positions = {0.0};
        } else {
            for (std::size_t j = 0; j < J; ++j) {
                g.positions.push_back(span * static_cast<double>(j) / static_cast<double>(J - 1));
            }
        }
        const double spacing = J > 1 ? span / static_cast<double>(J - 1) : std::max(span, 1.0);
        g.bandwidth = bandwidth > 0.0 ? bandwidth : spacing;
        return g;
    }

    /// Roughly one knot per 13 steps (a quarter of weekly data), at least two.
    static std::size_t default_count(std::size_t T) {
        return std::min(T, std::max<std::size_t>(2, (T + 12) / 13));
    }

    friend bool operator==(const KnotGrid&, const KnotGrid&) = default;
};

/// Normalized Gaussian kernel weights of every knot at (possibly fractional or out-of-range) time t.
inline std::vector<double> kernel_row(double t, const KnotGrid& grid) {
    const std::size_t J = grid.count();
    std::vector<double> w(J);
    double max_e = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < J; ++j) {
        const double z = (t - grid.positions[j]) / grid.bandwidth;
        w[j] = -0.5 * z * z;
        max_e = std::max(max_e, w[j]);
    }
    // subtracting the max keeps the row well defined as the bandwidth shrinks
    double sum = 0.0;
    for (auto& v : w) {
        v = std::exp(v - max_e);
        sum += v;
    }
    for (auto& v : w) v /= sum;
    return w;
}

/// T x J row-stochastic kernel matrix.
inline Matrix build_kernel(std::size_t T, const KnotGrid& grid) {
    grid.validate(T);
    Matrix K(T, grid.count());
    for (std::size_t t = 0; t < T; ++t) {
        const auto row = kernel_row(static_cast<double>(t), grid);
        for (std::size_t j = 0; j < grid.count(); ++j) K(t, j) = row[j];
    }
    return K;
}

struct Layer2Config {
    /// 0 selects KnotGrid::default_count.
    std::size_t knots = 0;
    /// 0 selects the knot spacing.
    double bandwidth = 0.0;
    std::size_t restarts = 4;
    std::size_t max_iter = 2000;
    double tolerance = 1e-9;
    double jitter = 0.25;
    /// Cap on the per-knot log-scale perturbation sd; flat directions would otherwise explode.
    double max_log_sd = 0.5;
    std::uint64_t seed = 11;
    /// Overrides the per-channel random-walk scale when non-empty.
    std::vector<double> random_walk_scale;

    friend bool operator==(const Layer2Config&, const Layer2Config&) = default;
};

/// Time-varying coefficients beta_tp = sum_j K_tj b_jp with posterior draws of the knot values b.
struct KtrModel {
    KnotGrid grid;
    Matrix kernel;                  // T x J
    std::vector<Matrix> knot_draws; // N matrices of J x P
    std::vector<double> sigma_p;    // random-walk scale per channel
    std::vector<double> anchor;     // random-walk starting value per channel
    Matrix coefficient_mean;        // T x P
    Matrix coefficient_std;         // T x P
    std::vector<double> objective_trace;
    std::vector<double> restart_objectives;

    std::size_t size() const noexcept { return knot_draws.size(); }
    std::size_t channels() const noexcept { return coefficient_mean.cols(); }
    std::size_t length() const noexcept { return kernel.rows(); }

    /// Coefficient draws (N x P) at time index t; t may be fractional or outside [0, T-1].
    Matrix coefficients_at(double t) const {
        const auto row = t >= 0.0 && t <= static_cast<double>(length() - 1) && t == std::floor(t)
                             ? std::vector<double>(kernel.row(static_cast<std::size_t>(t)).begin(),
                                                   kernel.row(static_cast<std::size_t>(t)).end())
                             : kernel_row(t, grid);
        Matrix out(size(), channels());
        for (std::size_t n = 0; n < size(); ++n) {
            for (std::size_t p = 0; p < channels(); ++p) {
                double v = 0.0;
                for (std::size_t j = 0; j < grid.count(); ++j) v += row[j] * knot_draws[n](j, p);
                out(n, p) = v;
            }
        }
        return out;
    }

    /// Time average of the mean coefficient path per channel.
    std::vector<double> average_coefficients() const {
        std::vector<double> out(channels(), 0.0);
        for (std::size_t t = 0; t < length(); ++t) {
            for (std::size_t p = 0; p < channels(); ++p) out[p] += coefficient_mean(t, p);
        }
        for (auto& v : out) v /= static_cast<double>(length());
        return out;
    }

    friend bool operator==(const KtrModel&, const KtrModel&) = default;
};

/**
 * Log posterior of the knot values for
 *
 *   r_t ~ Normal(sum_p beta_tp F_tp, sigma),  beta = K b,
 *
 * with a random-walk prior beta_0p ~ N+(anchor_p, s_p), beta_tp ~ N+(beta_(t-1)p, s_p).
 * Knot values are optimized on the log scale, which keeps them positive.
 */
class Layer2Objective {
public:
    Layer2Objective(Matrix kernel, Matrix regressors, std::vector<double> target, double sigma,
                    std::vector<double> anchor, std::vector<double> rw_scale)
        : K_(std::move(kernel)), F_(std::move(regressors)), r_(std::move(target)), sigma_(sigma),
          anchor_(std::move(anchor)), rw_(std::move(rw_scale)) {
        require(K_.rows() == F_.rows() && F_.rows() == r_.size(), ErrorKind::dimension,
                "kernel, regressors and target lengths differ");
        require(anchor_.size() == F_.cols() && rw_.size() == F_.cols(), ErrorKind::dimension,
                "prior vectors need one entry per channel");
        require(sigma_ > 0.0, ErrorKind::parameter, "noise scale must be positive");
    }

    std::size_t knots() const noexcept { return K_.cols(); }
    std::size_t channels() const noexcept { return F_.cols(); }
    std::size_t dimension() const noexcept { return knots() * channels(); }

    /// Coefficient path (T x P) for knot values b (J x P, row-major in `b`).
    Matrix coefficients(std::span<const double> b) const {
        const std::size_t T = K_.rows(), J = knots(), P = channels();
        Matrix beta(T, P);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t j = 0; j < J; ++j) {
                const double k = K_(t, j);
                for (std::size_t p = 0; p < P; ++p) beta(t, p) += k * b[j * P + p];
            }
        }
        return beta;
    }

    /// Log posterior in log-knot coordinates v (b = exp v); writes the gradient with respect to v.
    double value_and_gradient(const std::vector<double>& v, std::vector<double>& grad) const {
        const std::size_t T = K_.rows(), J = knots(), P = channels();
        std::vector<double> b(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) b[i] = std::exp(v[i]);
        const Matrix beta = coefficients(b);
        Matrix dbeta(T, P); // d logpost / d beta_tp
        double lp = 0.0;
        const double s2 = sigma_ * sigma_;
        for (std::size_t t = 0; t < T; ++t) {
            double m = 0.0;
            for (std::size_t p = 0; p < P; ++p) m += beta(t, p) * F_(t, p);
            const double e = r_[t] - m;
            lp -= 0.5 * e * e / s2;
            for (std::size_t p = 0; p < P; ++p) dbeta(t, p) += e / s2 * F_(t, p);
        }
        for (std::size_t p = 0; p < P; ++p) {
            const double w = 1.0 / (rw_[p] * rw_[p]);
            const double d0 = beta(0, p) - anchor_[p];
            lp -= 0.5 * w * d0 * d0;
            dbeta(0, p) -= w * d0;
            for (std::size_t t = 1; t < T; ++t) {
                const double d = beta(t, p) - beta(t - 1, p);
                lp -= 0.5 * w * d * d;
                dbeta(t, p) -= w * d;
                dbeta(t - 1, p) += w * d;
            }
        }
        grad.assign(v.size(), 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t j = 0; j < J; ++j) {
                const double k = K_(t, j);
                if (k == 0.0) continue;
                for (std::size_t p = 0; p < P; ++p) grad[j * P + p] += k * dbeta(t, p);
            }
        }
        for (std::size_t i = 0; i < v.size(); ++i) grad[i] *= b[i];
        return lp;
    }

    double value(const std::vector<double>& v) const {
        std::vector<double> g;
        return value_and_gradient(v, g);
    }

    /// Diagonal of the negative Hessian at v by central differences of the gradient.
    std::vector<double> curvature_diagonal(const std::vector<double>& v) const {
        std::vector<double> diag(v.size());
        std::vector<double> gp, gm;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double h = 1e-5 * std::max(1.0, std::abs(v[i]));
            auto vp = v, vm = v;
            vp[i] += h;
            vm[i] -= h;
            value_and_gradient(vp, gp);
            value_and_gradient(vm, gm);
            diag[i] = -(gp[i] - gm[i]) / (2.0 * h);
        }
        return diag;
    }

private:
    Matrix K_;
    Matrix F_;
    std::vector<double> r_;
    double sigma_;
    std::vector<double> anchor_;
    std::vector<double> rw_;
};

/// Adstocked, scaled spend under the given parameters (T x P), unfiltered.
inline Matrix adstocked_spend(const Dataset& scaled, std::span<const double> alpha, std::span<const double> mu,
                              std::optional<std::size_t> max_lag = std::nullopt) {
    Matrix f(scaled.length(), scaled.channels());
    for (std::size_t p = 0; p < scaled.channels(); ++p) {
        f.set_column(p, adstock(scaled.spend().column(p), alpha[p], mu[p], max_lag));
    }
    return f;
}

namespace detail {

/**
 * Multi-start MAP of the knot values plus perturbed draws. Restarts run
 * concurrently; draw n is restart n mod R perturbed along the inverse curvature
 * diagonal of its optimum (mean-preserving on the natural scale) and multiplied
 * per channel by draw_scale(n, p).
 */
inline KtrModel fit_knots(const KnotGrid& grid, const Matrix& F, const std::vector<double>& r, double sigma,
                          const CoefficientPrior& prior, const std::vector<double>& init_beta,
                          const Matrix& draw_scale, const Layer2Config& cfg) {
    const std::size_t T = F.rows();
    const std::size_t P = F.cols();
    grid.validate(T);
    require(cfg.restarts >= 1, ErrorKind::configuration, "at least one restart is required");
    const std::vector<double> rw = cfg.random_walk_scale.empty() ? prior.scale : cfg.random_walk_scale;
    require(rw.size() == P, ErrorKind::configuration, "random-walk scale needs one entry per channel");

    KtrModel model;
    model.grid = grid;
    model.kernel = build_kernel(T, grid);
    model.sigma_p = rw;
    model.anchor = prior.location;
    const Layer2Objective objective(model.kernel, F, r, sigma, prior.location, rw);
    const std::size_t J = grid.count();
    const std::size_t D = objective.dimension();

    struct RestartResult {
        optim::MaximizeResult opt;
        std::vector<double> curvature;
    };
    std::vector<RestartResult> results(cfg.restarts);
    std::vector<std::exception_ptr> errors(cfg.restarts);
    {
        std::vector<std::jthread> workers;
        for (std::size_t k = 0; k < cfg.restarts; ++k) {
            workers.emplace_back([&, k] {
                try {
                    std::mt19937_64 rng(cfg.seed + k);
                    std::normal_distribution<double> jitter(0.0, cfg.jitter);
                    std::vector<double> v0(D);
                    for (std::size_t j = 0; j < J; ++j) {
                        for (std::size_t p = 0; p < P; ++p) {
                            v0[j * P + p] = std::log(std::max(init_beta[p], 1e-6)) + (k == 0 ? 0.0 : jitter(rng));
                        }
                    }
                    optim::LbfgsOptions opt;
                    opt.max_iter = cfg.max_iter;
                    opt.tolerance = cfg.tolerance;
                    auto res = optim::lbfgs_maximize(
                        [&](const std::vector<double>& v, std::vector<double>& g) {
                            return objective.value_and_gradient(v, g);
                        },
                        v0, opt);
                    results[k].curvature = objective.curvature_diagonal(res.x);
                    results[k].opt = std::move(res);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::size_t best = 0;
    for (std::size_t k = 0; k < cfg.restarts; ++k) {
        model.restart_objectives.push_back(results[k].opt.value);
        if (results[k].opt.value > results[best].opt.value) best = k;
    }
    model.objective_trace = results[best].opt.trace;
    bool any_converged = false;
    for (const auto& rr : results) any_converged = any_converged || rr.opt.converged;
    if (!any_converged) {
        fail(ErrorKind::fit, "knot optimization did not converge in " + std::to_string(cfg.max_iter) +
                                 " iterations; best log posterior " + std::to_string(results[best].opt.value));
    }

    const std::size_t N = draw_scale.rows();
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> z01(0.0, 1.0);
    for (std::size_t n = 0; n < N; ++n) {
        const auto& rr = results[n % cfg.restarts];
        const auto& base = rr.opt.converged ? rr.opt.x : results[best].opt.x;
        const auto& curv = rr.opt.converged ? rr.curvature : results[best].curvature;
        Matrix b(J, P);
        for (std::size_t i = 0; i < D; ++i) {
            const double sd = curv[i] > 0.0 ? std::min(1.0 / std::sqrt(curv[i]), cfg.max_log_sd) : cfg.max_log_sd;
            b.data()[i] = std::exp(base[i] + sd * z01(rng) - 0.5 * sd * sd) * draw_scale(n, i % P);
        }
        model.knot_draws.push_back(std::move(b));
    }

    model.coefficient_mean = Matrix(T, P);
    model.coefficient_std = Matrix(T, P);
    std::vector<Matrix> paths;
    paths.reserve(N);
    for (const auto& b : model.knot_draws) paths.push_back(objective.coefficients(b.data()));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t p = 0; p < P; ++p) {
            std::vector<double> v(N);
            for (std::size_t n = 0; n < N; ++n) v[n] = paths[n](t, p);
            model.coefficient_mean(t, p) = stats::mean(v);
            model.coefficient_std(t, p) = stats::sd(v);
        }
    }
    return model;
}

} // namespace detail

/**
 * Fits kernel time-varying coefficients on spend adstocked with the layer-1
 * posterior-mean carryover and saturation.
 *
 * `dec` is the baseline decomposition; the regression target is
 * (y - trend - seasonal) / target_scale - mean intercept. Draw n is scaled by
 * the ratio of layer-1 draw n's coefficient to the layer-1 mean, which keeps it
 * consistent with the saturation of layer-1 draw n it is paired with downstream.
 */
inline KtrModel fit_layer2(const Dataset& d, const Decomposition& dec, const AdstockPosterior& post,
                           const KnotGrid& grid, const Layer2Config& cfg,
                           std::optional<std::size_t> max_lag = std::nullopt) {
    const std::size_t P = d.channels();
    require(post.channels() == P, ErrorKind::dimension, "posterior channel count does not match dataset");
    require(dec.length() == d.length(), ErrorKind::dimension, "decomposition length does not match dataset");

    const auto [scaled, scales] = max_abs_scale(d);
    const auto mean = post.mean();
    const Matrix F = adstocked_spend(scaled, mean.alpha, mean.mu, max_lag);
    std::vector<double> r = detrend(d.target(), dec);
    for (double& v : r) v = v / scales.target_scale - mean.intercept;
    Matrix ratio(post.size(), P);
    for (std::size_t n = 0; n < post.size(); ++n) {
        for (std::size_t p = 0; p < P; ++p) ratio(n, p) = post.beta_draws(n, p) / mean.beta[p];
    }
    return detail::fit_knots(grid, F, r, mean.sigma, compute_beta_prior(scaled), mean.beta, ratio, cfg);
}

/// Kernel coefficients on raw scaled spend with no adstock, for model comparison.
inline KtrModel fit_ktr_only(const Dataset& d, const Decomposition& dec, const KnotGrid& grid,
                             const Layer2Config& cfg, std::size_t draws = 200) {
    require(dec.length() == d.length(), ErrorKind::dimension, "decomposition length does not match dataset");
    const auto [scaled, scales] = max_abs_scale(d);
    std::vector<double> r = detrend(d.target(), dec);
    for (double& v : r) v /= scales.target_scale;
    const auto prior = compute_beta_prior(scaled);
    const double sigma = std::max(stats::sd(r), 1e-6);
    return detail::fit_knots(grid, scaled.spend(), r, sigma, prior, prior.location, Matrix(draws, d.channels(), 1.0),
                             cfg);
}

} // namespace mixforge
