#pragma once

#include "mixforge/core.hpp"
#include "mixforge/decomposition.hpp"
#include "mixforge/stats.hpp"
#include "mixforge/transforms.hpp"

#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace mixforge {

// ---------------------------------------------------------------------------
// Spend-share coefficient prior

/// Per-channel prior location and scale for the regression coefficients.
struct CoefficientPrior {
    std::vector<double> location;
    std::vector<double> scale;
};

/// 1 / sqrt(1 - 2/pi): the half-normal correction applied to both location and scale.
inline double half_normal_correction() { return 1.0 / std::sqrt(1.0 - 2.0 / std::numbers::pi); }

/**
 * Spend-share prior for the coefficients of a scaled dataset.
 *
 * For channel p the per-step term is x_tp * y_t / sum_q x_tq. The location is
 * the mean of that term over steps with nonzero total spend, the scale its
 * sample standard deviation; both are divided by max|y| and max|x_p| and
 * multiplied by the half-normal correction. Steps without any spend are
 * skipped. If the sample standard deviation is zero the scale falls back to the
 * location.
 */
inline CoefficientPrior compute_beta_prior(const Dataset& scaled) {
    const std::size_t T = scaled.length();
    const std::size_t P = scaled.channels();
    double max_y = 0.0;
    for (double v : scaled.target()) max_y = std::max(max_y, std::abs(v));
    std::vector<std::vector<double>> terms(P);
    for (std::size_t t = 0; t < T; ++t) {
        double total = 0.0;
        for (std::size_t p = 0; p < P; ++p) total += scaled.spend()(t, p);
        if (total <= 0.0) continue;
        for (std::size_t p = 0; p < P; ++p) {
            terms[p].push_back(scaled.spend()(t, p) * scaled.target()[t] / total);
        }
    }
    require(!terms.front().empty(), ErrorKind::prior, "every time step has zero total spend");
    require(max_y > 0.0, ErrorKind::prior, "target is identically zero");
    const double k = half_normal_correction();
    CoefficientPrior prior;
    for (std::size_t p = 0; p < P; ++p) {
        double max_x = 0.0;
        for (std::size_t t = 0; t < T; ++t) max_x = std::max(max_x, std::abs(scaled.spend()(t, p)));
        require(max_x > 0.0, ErrorKind::prior, "channel '" + scaled.channel_names()[p] + "' has no spend");
        const double norm = k / (max_y * max_x);
        const double loc = norm * stats::mean(terms[p]);
        double scale = norm * stats::sd(terms[p]);
        require(loc > 0.0, ErrorKind::prior,
                "spend-share prior for '" + scaled.channel_names()[p] + "' is not positive");
        if (!(scale > 0.0)) scale = loc;
        prior.location.push_back(loc);
        prior.scale.push_back(scale);
    }
    return prior;
}

// ---------------------------------------------------------------------------
// Model

struct Layer1Priors {
    std::vector<FunnelSegment> segments;
    /// Half-normal scale per coefficient.
    std::vector<double> beta_scale;
    double intercept_mean = 0.0;
    double intercept_sd = 1.0;
    /// Half-normal scale of the noise standard deviation.
    double sigma_scale = 1.0;
};

/// Point in parameter space on the constrained scale.
struct Layer1Params {
    std::vector<double> alpha;
    std::vector<double> mu;
    std::vector<double> beta;
    double intercept = 0.0;
    double sigma = 1.0;

    std::size_t channels() const noexcept { return alpha.size(); }
};

/**
 * Static-coefficient regression of the detrended, scaled target on adstocked
 * scaled spend:
 *
 *   r_t ~ Normal(intercept + sum_p beta_p f*(x_tp; mu_p, alpha_p), sigma).
 */
class Layer1Problem {
public:
    Layer1Problem(Matrix scaled_spend, std::vector<double> scaled_residual, Layer1Priors priors,
                  std::optional<std::size_t> max_lag = std::nullopt,
                  std::optional<DecompositionFilter> filter = std::nullopt)
        : spend_(std::move(scaled_spend)), residual_(std::move(scaled_residual)), priors_(std::move(priors)),
          max_lag_(max_lag), filter_(filter) {
        require(spend_.rows() == residual_.size(), ErrorKind::dimension, "spend and residual lengths differ");
        require(priors_.segments.size() == spend_.cols() && priors_.beta_scale.size() == spend_.cols(),
                ErrorKind::dimension, "priors must have one entry per channel");
    }

    std::size_t length() const noexcept { return residual_.size(); }
    std::size_t channels() const noexcept { return spend_.cols(); }
    std::size_t dimension() const noexcept { return 3 * channels() + 2; }
    const Matrix& spend() const noexcept { return spend_; }
    const std::vector<double>& residual() const noexcept { return residual_; }
    const Layer1Priors& priors() const noexcept { return priors_; }
    std::optional<std::size_t> max_lag() const noexcept { return max_lag_; }
    const std::optional<DecompositionFilter>& filter() const noexcept { return filter_; }

    /// Regressors (T x P): adstocked spend, passed through the target's decomposition filter when set.
    Matrix transformed(std::span<const double> alpha, std::span<const double> mu) const {
        Matrix f(length(), channels());
        for (std::size_t p = 0; p < channels(); ++p) {
            auto col = adstock(spend_.column(p), alpha[p], mu[p], max_lag_);
            f.set_column(p, filter_ ? filter_->apply(col) : col);
        }
        return f;
    }

    bool in_support(const Layer1Params& q) const {
        if (q.alpha.size() != channels() || q.mu.size() != channels() || q.beta.size() != channels()) {
            return false;
        }
        for (std::size_t p = 0; p < channels(); ++p) {
            if (!(q.alpha[p] >= 0.0 && q.alpha[p] < 1.0) || !(q.mu[p] > 0.0) || !(q.beta[p] >= 0.0)) return false;
        }
        return q.sigma > 0.0 && std::isfinite(q.intercept) && std::isfinite(q.sigma);
    }

    double log_prior(const Layer1Params& q) const {
        double lp = 0.0;
        for (std::size_t p = 0; p < channels(); ++p) {
            const auto& seg = priors_.segments[p];
            lp += stats::log_beta_pdf(q.alpha[p], seg.carryover_prior.a, seg.carryover_prior.b);
            lp += stats::log_gamma_pdf(q.mu[p], seg.saturation_prior.shape, seg.saturation_prior.scale);
            lp += stats::log_half_normal_pdf(q.beta[p], priors_.beta_scale[p]);
        }
        lp += stats::log_normal_pdf(q.intercept, priors_.intercept_mean, priors_.intercept_sd);
        lp += stats::log_half_normal_pdf(q.sigma, priors_.sigma_scale);
        return lp;
    }

    /// Gaussian log likelihood given precomputed adstocked spend.
    double log_likelihood(const Matrix& f, std::span<const double> beta, double intercept, double sigma) const {
        double ss = 0.0;
        for (std::size_t t = 0; t < length(); ++t) {
            double m = intercept;
            for (std::size_t p = 0; p < channels(); ++p) m += beta[p] * f(t, p);
            const double e = residual_[t] - m;
            ss += e * e;
        }
        const auto n = static_cast<double>(length());
        return -0.5 * ss / (sigma * sigma) - n * std::log(sigma) - 0.5 * n * std::log(2.0 * std::numbers::pi);
    }

    /// Log prior plus log likelihood; -inf outside the support.
    double log_posterior(const Layer1Params& q) const {
        if (!in_support(q)) return stats::neg_inf;
        const double lp = log_prior(q);
        if (!std::isfinite(lp)) return stats::neg_inf;
        return lp + log_likelihood(transformed(q.alpha, q.mu), q.beta, q.intercept, q.sigma);
    }

    // Unconstrained layout: [logit alpha (P), log mu (P), log beta (P), intercept, log sigma].

    Layer1Params constrain(std::span<const double> u) const {
        const std::size_t P = channels();
        Layer1Params q;
        for (std::size_t p = 0; p < P; ++p) {
            q.alpha.push_back(1.0 / (1.0 + std::exp(-u[p])));
            q.mu.push_back(std::exp(u[P + p]));
            q.beta.push_back(std::exp(u[2 * P + p]));
        }
        q.intercept = u[3 * P];
        q.sigma = std::exp(u[3 * P + 1]);
        return q;
    }

    std::vector<double> unconstrain(const Layer1Params& q) const {
        const std::size_t P = channels();
        std::vector<double> u(dimension());
        for (std::size_t p = 0; p < P; ++p) {
            u[p] = std::log(q.alpha[p] / (1.0 - q.alpha[p]));
            u[P + p] = std::log(q.mu[p]);
            u[2 * P + p] = std::log(q.beta[p]);
        }
        u[3 * P] = q.intercept;
        u[3 * P + 1] = std::log(q.sigma);
        return u;
    }

    /// Log density on the unconstrained scale, Jacobian included.
    double log_density(std::span<const double> u) const {
        const Layer1Params q = constrain(u);
        // saturated transforms can land exactly on the support boundary
        if (!in_support(q)) return stats::neg_inf;
        return log_posterior(q) + log_jacobian(q);
    }

    double log_jacobian(const Layer1Params& q) const {
        double lj = std::log(q.sigma);
        for (std::size_t p = 0; p < channels(); ++p) {
            lj += std::log(q.alpha[p]) + std::log1p(-q.alpha[p]) + std::log(q.mu[p]) + std::log(q.beta[p]);
        }
        return lj;
    }

    /// Analytic gradient of log_density with respect to the unconstrained vector.
    std::vector<double> log_density_gradient(std::span<const double> u) const {
        const std::size_t P = channels();
        const std::size_t T = length();
        const Layer1Params q = constrain(u);
        std::vector<double> g(dimension(), 0.0);

        Matrix f(T, P), df_dalpha(T, P), df_dmu(T, P);
        for (std::size_t p = 0; p < P; ++p) {
            const auto [c, dc] = carryover_with_derivative(spend_.column(p), q.alpha[p]);
            std::vector<double> fp(T), da(T), dm(T);
            for (std::size_t t = 0; t < T; ++t) {
                fp[t] = std::tanh(c[t] / (2.0 * q.mu[p]));
                da[t] = reach_derivative(c[t], q.mu[p]) * dc[t];
                dm[t] = reach_dmu(c[t], q.mu[p]);
            }
            if (filter_) {
                // the filter is linear, so it commutes with differentiation
                fp = filter_->apply(fp);
                da = filter_->apply(da);
                dm = filter_->apply(dm);
            }
            f.set_column(p, fp);
            df_dalpha.set_column(p, da);
            df_dmu.set_column(p, dm);
        }
        const double s2 = q.sigma * q.sigma;
        double ss = 0.0;
        std::vector<double> d_alpha(P, 0.0), d_mu(P, 0.0), d_beta(P, 0.0);
        double d_intercept = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            double m = q.intercept;
            for (std::size_t p = 0; p < P; ++p) m += q.beta[p] * f(t, p);
            const double e = residual_[t] - m;
            ss += e * e;
            const double w = e / s2;
            d_intercept += w;
            for (std::size_t p = 0; p < P; ++p) {
                d_beta[p] += w * f(t, p);
                d_alpha[p] += w * q.beta[p] * df_dalpha(t, p);
                d_mu[p] += w * q.beta[p] * df_dmu(t, p);
            }
        }
        double d_sigma = ss / (s2 * q.sigma) - static_cast<double>(T) / q.sigma;
        for (std::size_t p = 0; p < P; ++p) {
            const auto& seg = priors_.segments[p];
            const double a = q.alpha[p];
            d_alpha[p] += (seg.carryover_prior.a - 1.0) / a - (seg.carryover_prior.b - 1.0) / (1.0 - a);
            d_mu[p] += (seg.saturation_prior.shape - 1.0) / q.mu[p] - 1.0 / seg.saturation_prior.scale;
            d_beta[p] += -q.beta[p] / (priors_.beta_scale[p] * priors_.beta_scale[p]);
            // chain rule to the unconstrained scale plus the Jacobian term
            g[p] = d_alpha[p] * a * (1.0 - a) + (1.0 - 2.0 * a);
            g[P + p] = d_mu[p] * q.mu[p] + 1.0;
            g[2 * P + p] = d_beta[p] * q.beta[p] + 1.0;
        }
        d_intercept += -(q.intercept - priors_.intercept_mean) / (priors_.intercept_sd * priors_.intercept_sd);
        d_sigma += -q.sigma / (priors_.sigma_scale * priors_.sigma_scale);
        g[3 * P] = d_intercept;
        g[3 * P + 1] = d_sigma * q.sigma + 1.0;
        return g;
    }

private:
    /// Carryover and its derivative with respect to alpha.
    std::pair<std::vector<double>, std::vector<double>> carryover_with_derivative(std::span<const double> x,
                                                                                  double alpha) const {
        const std::size_t T = x.size();
        std::vector<double> c(T), dc(T);
        if (!max_lag_) {
            double num = 0.0, den = 0.0, dnum = 0.0, dden = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                dnum = num + alpha * dnum;
                dden = den + alpha * dden;
                num = x[t] + alpha * num;
                den = 1.0 + alpha * den;
                c[t] = num / den;
                dc[t] = (dnum * den - num * dden) / (den * den);
            }
            return {c, dc};
        }
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t lags = std::min(t, *max_lag_);
            double num = x[t], den = 1.0, dnum = 0.0, dden = 0.0;
            double w_prev = 1.0; // alpha^(l-1)
            for (std::size_t l = 1; l <= lags; ++l) {
                const double dw = static_cast<double>(l) * w_prev;
                const double w = w_prev * alpha;
                num += w * x[t - l];
                den += w;
                dnum += dw * x[t - l];
                dden += dw;
                w_prev = w;
            }
            c[t] = num / den;
            dc[t] = (dnum * den - num * dden) / (den * den);
        }
        return {c, dc};
    }

    Matrix spend_;
    std::vector<double> residual_;
    Layer1Priors priors_;
    std::optional<std::size_t> max_lag_;
    std::optional<DecompositionFilter> filter_;
};

// ---------------------------------------------------------------------------
// Sampler

struct Layer1Config {
    /// Retained draws per chain.
    std::size_t draws = 500;
    std::size_t warmup = 3000;
    std::size_t chains = 4;
    /// Iterations between retained draws.
    std::size_t thin = 4;
    std::uint64_t seed = 1;
    std::optional<std::size_t> max_lag;
    /// Funnel position per channel; empty means mid for every channel.
    std::vector<FunnelSegment> segments;
    /// Multiplies the spend-share coefficient prior when used as the half-normal scale.
    double beta_prior_multiplier = 1.0;
    double intercept_sd = 1.0;
    double sigma_scale = 1.0;
    double target_acceptance = 0.3;

    void validate() const {
        require(draws >= 100, ErrorKind::configuration, "layer-1 draws must be at least 100");
        require(chains >= 2, ErrorKind::configuration, "layer-1 needs at least 2 chains");
        require(thin >= 1, ErrorKind::configuration, "thin must be at least 1");
        require(warmup >= 100, ErrorKind::configuration, "warmup must be at least 100");
        require(beta_prior_multiplier > 0.0, ErrorKind::configuration, "beta prior multiplier must be positive");
    }

    friend bool operator==(const Layer1Config&, const Layer1Config&) = default;
};

struct ParameterDiagnostic {
    std::string name;
    double rhat = 1.0;
    double ess = 0.0;

    friend bool operator==(const ParameterDiagnostic&, const ParameterDiagnostic&) = default;
};

/// Joint posterior draws of the static-coefficient model. Draws are ordered by chain.
struct AdstockPosterior {
    Matrix alpha_draws; // N x P
    Matrix mu_draws;    // N x P
    Matrix beta_draws;  // N x P
    std::vector<double> intercept_draws;
    std::vector<double> sigma_draws;
    std::size_t chains = 0;
    std::size_t draws_per_chain = 0;
    std::vector<ParameterDiagnostic> diagnostics;
    std::vector<double> acceptance; // per block: adstock, regression, joint
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return intercept_draws.size(); }
    std::size_t channels() const noexcept { return alpha_draws.cols(); }

    Layer1Params draw(std::size_t n) const {
        Layer1Params q;
        for (std::size_t p = 0; p < channels(); ++p) {
            q.alpha.push_back(alpha_draws(n, p));
            q.mu.push_back(mu_draws(n, p));
            q.beta.push_back(beta_draws(n, p));
        }
        q.intercept = intercept_draws[n];
        q.sigma = sigma_draws[n];
        return q;
    }

    Layer1Params mean() const {
        Layer1Params q;
        const auto N = static_cast<double>(size());
        for (std::size_t p = 0; p < channels(); ++p) {
            double a = 0.0, m = 0.0, b = 0.0;
            for (std::size_t n = 0; n < size(); ++n) {
                a += alpha_draws(n, p);
                m += mu_draws(n, p);
                b += beta_draws(n, p);
            }
            q.alpha.push_back(a / N);
            q.mu.push_back(m / N);
            q.beta.push_back(b / N);
        }
        q.intercept = stats::mean(intercept_draws);
        q.sigma = stats::mean(sigma_draws);
        return q;
    }

    friend bool operator==(const AdstockPosterior&, const AdstockPosterior&) = default;
};

namespace detail {

/// Lower Cholesky factor of a small symmetric positive definite matrix (row-major, n x n).
inline std::vector<double> cholesky(std::vector<double> a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) return {};
        d = std::sqrt(d);
        a[j * n + j] = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / d;
        }
        for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
    }
    return a;
}

/// Random-walk proposal block with an adaptive scale and covariance factor.
struct ProposalBlock {
    std::vector<std::size_t> index;
    std::vector<double> chol; // lower factor, |index| x |index|
    double log_scale = 0.0;
    std::size_t proposed = 0;
    std::size_t accepted = 0;

    void reset_diagonal(double step) {
        const std::size_t n = index.size();
        chol.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) chol[i * n + i] = step;
    }

    void set_covariance(const std::vector<double>& full_cov, std::size_t dim) {
        const std::size_t n = index.size();
        std::vector<double> sub(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                sub[i * n + j] = full_cov[index[i] * dim + index[j]] + (i == j ? 1e-8 : 0.0);
            }
        }
        const double dscale = 2.38 * 2.38 / static_cast<double>(n);
        for (double& v : sub) v *= dscale;
        auto l = cholesky(std::move(sub), n);
        if (!l.empty()) {
            chol = std::move(l);
        }
    }

    template <class Rng>
    std::vector<double> propose(const std::vector<double>& u, Rng& rng) const {
        std::normal_distribution<double> z01(0.0, 1.0);
        const std::size_t n = index.size();
        std::vector<double> z(n);
        for (auto& v : z) v = z01(rng);
        std::vector<double> out = u;
        const double s = std::exp(log_scale);
        for (std::size_t i = 0; i < n; ++i) {
            double step = 0.0;
            for (std::size_t k = 0; k <= i; ++k) step += chol[i * n + k] * z[k];
            out[index[i]] += s * step;
        }
        return out;
    }
};

struct ChainResult {
    std::vector<std::vector<double>> draws; // unconstrained vectors
    std::vector<double> acceptance;
};

/// Maximizes the unconstrained log density by gradient ascent with backtracking.
inline std::vector<double> find_mode(const Layer1Problem& problem, std::vector<double> u, std::size_t iterations) {
    double f = problem.log_density(u);
    double step = 1e-3;
    for (std::size_t it = 0; it < iterations && std::isfinite(f); ++it) {
        const auto g = problem.log_density_gradient(u);
        double gnorm = 0.0;
        for (double v : g) gnorm += v * v;
        gnorm = std::sqrt(gnorm);
        if (!(gnorm > 1e-10)) break;
        bool moved = false;
        for (int k = 0; k < 40; ++k) {
            std::vector<double> cand = u;
            for (std::size_t i = 0; i < u.size(); ++i) cand[i] += step * g[i] / gnorm;
            const double fc = problem.log_density(cand);
            if (std::isfinite(fc) && fc > f) {
                u = std::move(cand);
                f = fc;
                step *= 1.5;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return u;
}

inline ChainResult run_chain(const Layer1Problem& problem, const Layer1Config& cfg, std::vector<double> u,
                             std::size_t chain) {
    std::mt19937_64 rng(cfg.seed + chain);
    const std::size_t P = problem.channels();
    const std::size_t D = problem.dimension();

    std::vector<ProposalBlock> blocks(3);
    for (std::size_t i = 0; i < 2 * P; ++i) blocks[0].index.push_back(i);
    for (std::size_t i = 2 * P; i < D; ++i) blocks[1].index.push_back(i);
    for (std::size_t i = 0; i < D; ++i) blocks[2].index.push_back(i);
    for (auto& b : blocks) b.reset_diagonal(0.1);

    {
        // jitter the start so chains are distinguishable
        std::normal_distribution<double> jitter(0.0, 0.05);
        std::vector<double> cand = u;
        for (auto& v : cand) v += jitter(rng);
        if (std::isfinite(problem.log_density(cand))) u = std::move(cand);
    }
    double current = problem.log_density(u);
    if (!std::isfinite(current)) {
        fail(ErrorKind::initialization, "log posterior is not finite at the initial point of chain " +
                                            std::to_string(chain));
    }

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t total = cfg.warmup + cfg.draws * cfg.thin;
    const std::size_t adapt_start = cfg.warmup / 5;
    std::vector<double> mean_u(D, 0.0);
    std::vector<double> cov(D * D, 0.0);
    std::size_t cov_n = 0;
    std::size_t warmup_accepts = 0;

    ChainResult out;
    for (std::size_t it = 0; it < total; ++it) {
        const bool warming = it < cfg.warmup;
        for (auto& block : blocks) {
            const auto cand = block.propose(u, rng);
            const double lp = problem.log_density(cand);
            const bool accept = std::isfinite(lp) && std::log(unif(rng)) < lp - current;
            ++block.proposed;
            if (accept) {
                u = cand;
                current = lp;
                ++block.accepted;
                if (warming) ++warmup_accepts;
            }
            if (warming) {
                const double gamma = 2.0 / std::pow(static_cast<double>(it) + 10.0, 0.5);
                block.log_scale += gamma * ((accept ? 1.0 : 0.0) - cfg.target_acceptance);
                block.log_scale = std::clamp(block.log_scale, -12.0, 4.0);
            }
        }
        if (warming && it >= adapt_start) {
            ++cov_n;
            std::vector<double> delta(D);
            for (std::size_t i = 0; i < D; ++i) {
                delta[i] = u[i] - mean_u[i];
                mean_u[i] += delta[i] / static_cast<double>(cov_n);
            }
            for (std::size_t i = 0; i < D; ++i) {
                for (std::size_t j = 0; j < D; ++j) {
                    cov[i * D + j] += delta[i] * (u[j] - mean_u[j]);
                }
            }
            if (cov_n >= 2 * D + 20 && cov_n % 200 == 0) {
                std::vector<double> c = cov;
                for (double& v : c) v /= static_cast<double>(cov_n - 1);
                for (auto& b : blocks) b.set_covariance(c, D);
            }
        }
        if (it + 1 == cfg.warmup) {
            if (warmup_accepts == 0) {
                fail(ErrorKind::sampler, "no proposal accepted during warmup in chain " + std::to_string(chain));
            }
            for (auto& b : blocks) b.proposed = b.accepted = 0;
        }
        if (!warming && (it - cfg.warmup + 1) % cfg.thin == 0) {
            out.draws.push_back(u);
        }
    }
    for (const auto& b : blocks) {
        out.acceptance.push_back(b.proposed ? static_cast<double>(b.accepted) / static_cast<double>(b.proposed) : 0.0);
    }
    return out;
}

} // namespace detail

inline std::vector<std::string> layer1_parameter_names(const std::vector<std::string>& channels) {
    std::vector<std::string> names;
    for (const char* kind : {"alpha", "mu", "beta"}) {
        for (const auto& c : channels) names.push_back(std::string(kind) + "[" + c + "]");
    }
    names.emplace_back("intercept");
    names.emplace_back("sigma");
    return names;
}

/**
 * Adaptive Metropolis-within-Gibbs over the unconstrained parameters.
 *
 * Each iteration updates the adstock block (alpha, mu), then the regression
 * block (beta, intercept, sigma), then all parameters jointly. Proposal scales
 * adapt towards the target acceptance rate during warmup and proposal shapes
 * follow the running warmup covariance. Chains start from the posterior mode,
 * run concurrently with seeds seed + chain and are concatenated in chain order.
 */
inline AdstockPosterior sample_layer1(const Layer1Problem& problem, const Layer1Config& cfg,
                                      const std::vector<std::string>& channel_names) {
    cfg.validate();
    const std::size_t P = problem.channels();

    Layer1Params start;
    for (std::size_t p = 0; p < P; ++p) {
        const auto& seg = problem.priors().segments[p];
        start.alpha.push_back(std::clamp(seg.carryover_prior.mean(), 0.01, 0.99));
        start.mu.push_back(seg.saturation_prior.mean());
        start.beta.push_back(problem.priors().beta_scale[p] * std::sqrt(2.0 / std::numbers::pi));
    }
    start.intercept = stats::mean(problem.residual());
    start.sigma = std::max(stats::sd(problem.residual()), 1e-6);
    auto u0 = problem.unconstrain(start);
    if (!std::isfinite(problem.log_density(u0))) {
        fail(ErrorKind::initialization, "log posterior is not finite at the prior-based starting point");
    }
    u0 = detail::find_mode(problem, u0, 500);

    std::vector<detail::ChainResult> results(cfg.chains);
    std::vector<std::exception_ptr> errors(cfg.chains);
    {
        std::vector<std::jthread> workers;
        for (std::size_t c = 0; c < cfg.chains; ++c) {
            workers.emplace_back([&, c] {
                try {
                    results[c] = detail::run_chain(problem, cfg, u0, c);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    const std::size_t N = cfg.chains * cfg.draws;
    AdstockPosterior post;
    post.alpha_draws = Matrix(N, P);
    post.mu_draws = Matrix(N, P);
    post.beta_draws = Matrix(N, P);
    post.chains = cfg.chains;
    post.draws_per_chain = cfg.draws;
    post.acceptance.assign(3, 0.0);
    std::size_t n = 0;
    for (const auto& r : results) {
        for (std::size_t b = 0; b < 3; ++b) post.acceptance[b] += r.acceptance[b] / static_cast<double>(cfg.chains);
        for (const auto& u : r.draws) {
            const auto q = problem.constrain(u);
            for (std::size_t p = 0; p < P; ++p) {
                // guard against rounding onto the closed end of the support
                post.alpha_draws(n, p) = std::min(q.alpha[p], std::nextafter(1.0, 0.0));
                post.mu_draws(n, p) = q.mu[p];
                post.beta_draws(n, p) = q.beta[p];
            }
            post.intercept_draws.push_back(q.intercept);
            post.sigma_draws.push_back(q.sigma);
            ++n;
        }
    }

    const auto names = layer1_parameter_names(channel_names);
    for (std::size_t i = 0; i < problem.dimension(); ++i) {
        std::vector<std::vector<double>> per_chain;
        for (const auto& r : results) {
            std::vector<double> v;
            for (const auto& u : r.draws) v.push_back(u[i]);
            per_chain.push_back(std::move(v));
        }
        ParameterDiagnostic d{names[i], stats::split_rhat(per_chain), stats::effective_sample_size(per_chain)};
        if (d.rhat > 1.05) {
            post.warnings.push_back("R-hat " + std::to_string(d.rhat) + " for " + d.name + " exceeds 1.05");
        }
        post.diagnostics.push_back(std::move(d));
    }
    return post;
}

/// Inputs the layer-1 problem is built from, recomputed from a raw dataset.
struct Layer1Inputs {
    Dataset scaled;
    DecompositionFilter filter;
    ScalePair scales;
    std::vector<double> scaled_residual;
    CoefficientPrior beta_prior;
};

inline Layer1Inputs prepare_layer1(const Dataset& d, const Decomposition& dec) {
    auto [scaled, scales] = max_abs_scale(d);
    auto residual = detrend(d.target(), dec);
    for (double& v : residual) v /= scales.target_scale;
    auto prior = compute_beta_prior(scaled);
    return {std::move(scaled), filter_of(dec), std::move(scales), std::move(residual), std::move(prior)};
}

inline Layer1Problem make_layer1_problem(const Layer1Inputs& in, const Layer1Config& cfg) {
    const std::size_t P = in.scaled.channels();
    Layer1Priors priors;
    priors.segments = cfg.segments.empty() ? std::vector<FunnelSegment>(P, FunnelSegment::defaults(FunnelLabel::mid))
                                           : cfg.segments;
    require(priors.segments.size() == P, ErrorKind::configuration, "one funnel segment per channel is required");
    for (double loc : in.beta_prior.location) priors.beta_scale.push_back(loc * cfg.beta_prior_multiplier);
    priors.intercept_sd = cfg.intercept_sd;
    priors.sigma_scale = cfg.sigma_scale;
    return Layer1Problem(in.scaled.spend(), in.scaled_residual, std::move(priors), cfg.max_lag, in.filter);
}

/// Fits the static-coefficient adstock model to the detrended target of `d`.
inline AdstockPosterior fit_layer1(const Dataset& d, const Decomposition& dec, const Layer1Config& cfg) {
    const auto inputs = prepare_layer1(d, dec);
    return sample_layer1(make_layer1_problem(inputs, cfg), cfg, d.channel_names());
}

} // namespace mixforge
