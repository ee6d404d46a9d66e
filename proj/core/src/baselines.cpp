#include "ordcast/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ordcast/errors.hpp"
#include "ordcast/rng.hpp"

namespace ordcast {

namespace {

constexpr double kVarianceFloor = 1e-12;

}  // namespace

// ---------------------------------------------------------------------------
// AR(p)
// ---------------------------------------------------------------------------

double ArModel::one_step_mean(const std::vector<double>& history) const {
    if (static_cast<int>(history.size()) < p)
        throw DataError("AR forecast needs at least p history values");
    double mean = intercept;
    for (int j = 0; j < p; ++j)
        mean += coeffs(j) * history[history.size() - 1 - static_cast<std::size_t>(j)];
    return mean;
}

ArModel fit_ar(const std::vector<double>& values, int p) {
    if (p <= 0) throw ConfigError("AR order must be positive");
    const int n = static_cast<int>(values.size());
    const int rows = n - p;
    if (rows < p + 2)
        throw DataError("series of length " + std::to_string(n) +
                        " too short to fit AR(" + std::to_string(p) + ")");

    Eigen::MatrixXd design(rows, p + 1);
    Eigen::VectorXd target(rows);
    for (int t = 0; t < rows; ++t) {
        design(t, 0) = 1.0;
        for (int j = 0; j < p; ++j)
            design(t, j + 1) = values[static_cast<std::size_t>(p + t - 1 - j)];
        target(t) = values[static_cast<std::size_t>(p + t)];
    }

    ArModel model;
    model.p = p;
    model.coeffs = Eigen::VectorXd::Zero(p);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < p + 1) {
        // constant-ish history: lag columns are collinear with the intercept
        model.intercept_only = true;
        model.intercept = target.mean();
        const double rss = (target.array() - model.intercept).square().sum();
        model.noise_variance = std::max(rss / std::max(rows - 1, 1), kVarianceFloor);
        return model;
    }

    const Eigen::VectorXd beta = qr.solve(target);
    model.intercept = beta(0);
    model.coeffs = beta.tail(p);
    const double rss = (target - design * beta).squaredNorm();
    model.noise_variance = std::max(rss / (rows - p - 1), kVarianceFloor);
    return model;
}

GaussianForecast ar_forecast(const ArModel& model, const std::vector<double>& history,
                             int horizon) {
    if (horizon <= 0) throw ConfigError("AR forecast horizon must be positive");
    if (static_cast<int>(history.size()) < model.p)
        throw DataError("AR forecast needs at least p history values");

    const int p = model.p;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    companion.row(0) = model.coeffs.transpose();
    for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;

    GaussianForecast out;
    out.mean.resize(horizon);
    out.variance.resize(horizon);

    std::vector<double> extended = history;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
    for (int h = 0; h < horizon; ++h) {
        const double mean = model.one_step_mean(extended);
        extended.push_back(mean);
        cov = companion * cov * companion.transpose();
        cov(0, 0) += model.noise_variance;
        out.mean(h) = mean;
        out.variance(h) = std::max(cov(0, 0), kVarianceFloor);
    }
    return out;
}

// ---------------------------------------------------------------------------
// GP regression
// ---------------------------------------------------------------------------

std::string kernel_name(GpKernel k) {
    return k == GpKernel::Matern52 ? "matern52" : "rq";
}

double kernel_eval(GpKernel kernel, const GpHypers& h, double r) {
    r = std::abs(r);
    const double s2 = std::exp(h.log_signal);
    const double ell = std::exp(h.log_length);
    if (kernel == GpKernel::Matern52) {
        const double s = std::sqrt(5.0) * r / ell;
        return s2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    const double a = std::exp(h.log_alpha);
    const double base = 1.0 + r * r / (2.0 * a * ell * ell);
    return s2 * std::pow(base, -a);
}

namespace {

int hyper_count(GpKernel kernel) { return kernel == GpKernel::RationalQuadratic ? 4 : 3; }

GpHypers unpack(GpKernel kernel, const Eigen::VectorXd& theta) {
    GpHypers h;
    h.log_signal = theta(0);
    h.log_length = theta(1);
    h.log_noise = theta(2);
    if (kernel == GpKernel::RationalQuadratic) h.log_alpha = theta(3);
    return h;
}

// dk/d(log param) of the noiseless kernel at distance r; index matches the
// packed theta layout (noise handled separately as it only hits the diagonal).
double kernel_grad(GpKernel kernel, const GpHypers& h, double r, int param) {
    r = std::abs(r);
    const double s2 = std::exp(h.log_signal);
    const double ell = std::exp(h.log_length);
    if (kernel == GpKernel::Matern52) {
        const double s = std::sqrt(5.0) * r / ell;
        if (param == 0) return kernel_eval(kernel, h, r);
        if (param == 1) return s2 * (s * s * (1.0 + s) / 3.0) * std::exp(-s);
        return 0.0;
    }
    const double a = std::exp(h.log_alpha);
    const double base = 1.0 + r * r / (2.0 * a * ell * ell);
    const double k = s2 * std::pow(base, -a);
    if (param == 0) return k;
    if (param == 1) return s2 * std::pow(base, -a - 1.0) * r * r / (ell * ell);
    if (param == 3) return k * (-a * std::log(base) + r * r / (2.0 * ell * ell * base));
    return 0.0;
}

struct LmlEval {
    bool ok = false;
    double lml = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd grad;
    Eigen::MatrixXd chol_l;
    Eigen::VectorXd weights;
};

LmlEval evaluate_lml(GpKernel kernel, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& theta, bool with_grad) {
    const int n = static_cast<int>(x.size());
    const GpHypers h = unpack(kernel, theta);
    const double noise = std::exp(h.log_noise);

    Eigen::MatrixXd gram(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double k = kernel_eval(kernel, h, x(i) - x(j));
            gram(i, j) = k;
            gram(j, i) = k;
        }
        gram(i, i) += noise + 1e-10;
    }

    LmlEval out;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) return out;

    out.weights = llt.solve(y);
    double log_det = 0.0;
    const auto& l = llt.matrixLLT();
    for (int i = 0; i < n; ++i) log_det += std::log(l(i, i));
    out.lml = -0.5 * y.dot(out.weights) - log_det - 0.5 * n * std::log(2.0 * M_PI);
    if (!std::isfinite(out.lml)) return out;
    out.chol_l = llt.matrixL();
    out.ok = true;

    if (with_grad) {
        // dL/dtheta = 0.5 tr((ww^T - K^{-1}) dK/dtheta)
        const Eigen::MatrixXd inner =
            out.weights * out.weights.transpose() -
            llt.solve(Eigen::MatrixXd::Identity(n, n));
        out.grad = Eigen::VectorXd::Zero(theta.size());
        for (int param = 0; param < static_cast<int>(theta.size()); ++param) {
            if (param == 2) {
                out.grad(2) = 0.5 * noise * inner.trace();
                continue;
            }
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    acc += inner(i, j) * kernel_grad(kernel, h, x(i) - x(j), param);
            out.grad(param) = 0.5 * acc;
        }
    }
    return out;
}

Eigen::VectorXd clamp_theta(Eigen::VectorXd theta) {
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        theta(i) = std::clamp(theta(i), -20.0, 20.0);
    return theta;
}

LmlEval ascend(GpKernel kernel, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
               Eigen::VectorXd theta, Eigen::VectorXd& theta_out) {
    theta = clamp_theta(std::move(theta));
    LmlEval cur = evaluate_lml(kernel, x, y, theta, true);
    if (!cur.ok) return cur;

    for (int iter = 0; iter < 200; ++iter) {
        const double gnorm2 = cur.grad.squaredNorm();
        if (gnorm2 < 1e-14) break;
        double step = 1.0;
        bool accepted = false;
        while (step > 1e-12) {
            const Eigen::VectorXd trial = clamp_theta(theta + step * cur.grad);
            LmlEval next = evaluate_lml(kernel, x, y, trial, true);
            if (next.ok && next.lml > cur.lml + 1e-4 * step * gnorm2) {
                theta = trial;
                cur = std::move(next);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    theta_out = theta;
    return cur;
}

}  // namespace

double gp_log_marginal(GpKernel kernel, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const GpHypers& h, Eigen::VectorXd* grad) {
    if (x.size() != y.size() || x.size() == 0)
        throw DataError("gp_log_marginal: x and y must be non-empty and equally sized");
    Eigen::VectorXd theta(hyper_count(kernel));
    theta(0) = h.log_signal;
    theta(1) = h.log_length;
    theta(2) = h.log_noise;
    if (theta.size() == 4) theta(3) = h.log_alpha;
    const LmlEval res = evaluate_lml(kernel, x, y, theta, grad != nullptr);
    if (!res.ok)
        throw NumericalError("gp_log_marginal: covariance not positive definite");
    if (grad) *grad = res.grad;
    return res.lml;
}

GpModel fit_gp(const std::vector<double>& values, GpKernel kernel, std::uint64_t seed) {
    const int n = static_cast<int>(values.size());
    if (n < 4) throw DataError("series too short for GP fit (need >= 4 points)");

    GpModel model;
    model.kernel = kernel;
    model.x_scale = static_cast<double>(n - 1);
    model.train_x.resize(n);
    for (int i = 0; i < n; ++i) model.train_x(i) = static_cast<double>(i) / model.x_scale;

    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = values[static_cast<std::size_t>(i)];
    model.y_mean = y.mean();
    const double var = (y.array() - model.y_mean).square().sum() / (n - 1);
    model.y_scale = std::max(std::sqrt(var), 1e-8 * std::max(1.0, std::abs(model.y_mean)));
    const Eigen::VectorXd z = (y.array() - model.y_mean) / model.y_scale;

    const int dims = hyper_count(kernel);
    std::vector<Eigen::VectorXd> starts;
    {
        Eigen::VectorXd fixed(dims);
        fixed(0) = 0.0;                 // signal variance 1 on z-scored targets
        fixed(1) = std::log(0.2);
        fixed(2) = std::log(0.1);
        if (dims == 4) fixed(3) = 0.0;  // alpha 1
        starts.push_back(fixed);
        Rng rng(derive_seed(seed, "gp-restarts"));
        for (int r = 0; r < 4; ++r) {
            Eigen::VectorXd t(dims);
            t(0) = rng.uniform(-2.0, 2.0);
            t(1) = rng.uniform(std::log(0.02), std::log(1.0));
            t(2) = rng.uniform(std::log(1e-4), std::log(0.5));
            if (dims == 4) t(3) = rng.uniform(-2.0, 2.0);
            starts.push_back(t);
        }
    }

    LmlEval best;
    Eigen::VectorXd best_theta;
    for (const auto& start : starts) {
        Eigen::VectorXd theta_end;
        LmlEval res = ascend(kernel, model.train_x, z, start, theta_end);
        if (res.ok && res.lml > best.lml) {
            best = std::move(res);
            best_theta = theta_end;
        }
    }

    if (!best.ok) {
        // pathological conditioning: pin a generous noise floor and refit once
        Eigen::VectorXd fallback(dims);
        fallback.setZero();
        fallback(1) = std::log(0.2);
        fallback(2) = std::log(0.25);
        LmlEval res = evaluate_lml(kernel, model.train_x, z, fallback, false);
        if (!res.ok) throw NumericalError("GP fit failed: covariance not positive definite");
        best = res;
        best_theta = fallback;
    }

    model.hypers = unpack(kernel, best_theta);
    model.chol_l = best.chol_l;
    model.weights = best.weights;
    model.log_marginal = best.lml;
    return model;
}

GaussianForecast gp_forecast(const GpModel& model, int horizon) {
    if (horizon <= 0) throw ConfigError("GP forecast horizon must be positive");
    const int n = static_cast<int>(model.train_x.size());
    const double noise = std::exp(model.hypers.log_noise);
    const double self = kernel_eval(model.kernel, model.hypers, 0.0);

    GaussianForecast out;
    out.mean.resize(horizon);
    out.variance.resize(horizon);
    const auto lower = model.chol_l.triangularView<Eigen::Lower>();
    for (int h = 0; h < horizon; ++h) {
        const double xstar = static_cast<double>(n + h) / model.x_scale;
        Eigen::VectorXd kstar(n);
        for (int i = 0; i < n; ++i)
            kstar(i) = kernel_eval(model.kernel, model.hypers, xstar - model.train_x(i));
        const double mean_z = kstar.dot(model.weights);
        const Eigen::VectorXd v = lower.solve(kstar);
        const double var_z = std::max(self - v.squaredNorm(), 0.0) + noise;
        out.mean(h) = model.y_mean + model.y_scale * mean_z;
        out.variance(h) =
            std::max(model.y_scale * model.y_scale * var_z, kVarianceFloor);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normal helpers
// ---------------------------------------------------------------------------

double normal_pdf(double x, double mean, double variance) {
    if (!(variance > 0.0)) throw NumericalError("normal_pdf: variance must be positive");
    const double d = x - mean;
    return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * M_PI * variance);
}

double normal_cdf(double x, double mean, double variance) {
    if (!(variance > 0.0)) throw NumericalError("normal_cdf: variance must be positive");
    return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

double normal_quantile(double level, double mean, double variance) {
    if (!(variance > 0.0)) throw NumericalError("normal_quantile: variance must be positive");
    if (!(level > 0.0 && level < 1.0))
        throw ConfigError("normal_quantile: level must lie strictly in (0, 1)");

    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;

    double z;
    if (level < p_low) {
        const double q = std::sqrt(-2.0 * std::log(level));
        z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (level <= 1.0 - p_low) {
        const double q = level - 0.5;
        const double r = q * q;
        z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - level));
        z = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // one Halley step against the exact CDF
    const double err = 0.5 * std::erfc(-z / std::sqrt(2.0)) - level;
    const double u = err * std::sqrt(2.0 * M_PI) * std::exp(0.5 * z * z);
    z = z - u / (1.0 + 0.5 * z * u);

    return mean + std::sqrt(variance) * z;
}

}  // namespace ordcast
