#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ordcast {

// Per-step Gaussian predictive, the common output shape of both classical
// baselines.
struct GaussianForecast {
    Eigen::VectorXd mean;      // horizon
    Eigen::VectorXd variance;  // horizon, observation noise included

    int horizon() const { return static_cast<int>(mean.size()); }
};

// ---------------------------------------------------------------------------
// Autoregression
// ---------------------------------------------------------------------------

// AR(p) with intercept, fitted by conditional least squares. A rank-deficient
// design (constant or near-constant history) degrades to the intercept-only
// model instead of failing.
struct ArModel {
    int p = 0;
    double intercept = 0.0;
    Eigen::VectorXd coeffs;        // p lag coefficients, coeffs[0] on y_{t-1}
    double noise_variance = 0.0;   // residual variance, dof-corrected
    bool intercept_only = false;

    double one_step_mean(const std::vector<double>& history) const;
};

ArModel fit_ar(const std::vector<double>& values, int p);

// Iterated forecast with the exact multi-step variance from the companion
// form: P_0 = 0, P_h = F P_{h-1} F^T + sigma^2 e_1 e_1^T, so the first step
// has variance sigma^2 and later steps accumulate coefficient feedback.
GaussianForecast ar_forecast(const ArModel& model, const std::vector<double>& history,
                             int horizon);

// ---------------------------------------------------------------------------
// Gaussian-process regression on time
// ---------------------------------------------------------------------------

enum class GpKernel { Matern52, RationalQuadratic };

std::string kernel_name(GpKernel k);

// All optimization happens in log space; alpha is ignored by Matern 5/2.
struct GpHypers {
    double log_signal = 0.0;     // log sigma_f^2
    double log_length = 0.0;     // log lengthscale
    double log_noise = 0.0;      // log sigma_n^2
    double log_alpha = 0.0;      // log alpha (rational quadratic shape)
};

// Covariance between two points at distance r, noise term excluded.
double kernel_eval(GpKernel kernel, const GpHypers& h, double r);

// Log marginal likelihood of targets y at inputs x under the kernel plus
// noise; when grad is non-null it receives d(lml)/d(log hyper) in the packed
// order [signal, length, noise, alpha] (alpha only for rational quadratic).
double gp_log_marginal(GpKernel kernel, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const GpHypers& h, Eigen::VectorXd* grad = nullptr);

struct GpModel {
    GpKernel kernel = GpKernel::Matern52;
    GpHypers hypers;
    Eigen::VectorXd train_x;   // observation times mapped into [0, 1]
    Eigen::MatrixXd chol_l;    // lower Cholesky factor of K + sigma_n^2 I
    Eigen::VectorXd weights;   // (K + sigma_n^2 I)^{-1} y, on z-scored targets
    double x_scale = 1.0;      // divisor mapping raw time to train_x
    double y_mean = 0.0;       // z-score parameters of the targets
    double y_scale = 1.0;
    double log_marginal = 0.0;
};

// Fits the kernel hyperparameters by gradient ascent on the log marginal
// likelihood (backtracking line search, bounded iterations) from one fixed
// and several seeded random starts, keeping the best optimum. Inputs are the
// sample indices 0..n-1 scaled into [0, 1]; targets are z-scored internally.
GpModel fit_gp(const std::vector<double>& values, GpKernel kernel, std::uint64_t seed);

// Predictive mean and variance at the next `horizon` sample times.
GaussianForecast gp_forecast(const GpModel& model, int horizon);

// ---------------------------------------------------------------------------
// Normal distribution helpers (used for baseline likelihoods and quantiles)
// ---------------------------------------------------------------------------

double normal_pdf(double x, double mean, double variance);
double normal_cdf(double x, double mean, double variance);
// Acklam's rational approximation of the standard normal inverse CDF,
// refined by one Halley step; |error| < 1e-9 on (0, 1).
double normal_quantile(double level, double mean, double variance);

}  // namespace ordcast
