#include <doctest.h>

#include <cmath>

#include "ordcast/baselines.hpp"
#include "ordcast/errors.hpp"
#include "ordcast/rng.hpp"

using namespace ordcast;

namespace {

std::vector<double> ar1_path(double intercept, double phi, double y0, int n) {
    std::vector<double> y{y0};
    for (int i = 1; i < n; ++i) y.push_back(intercept + phi * y.back());
    return y;
}

Eigen::VectorXd fd_lml_grad(GpKernel kernel, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y, const GpHypers& h0) {
    const int dim = kernel == GpKernel::RationalQuadratic ? 4 : 3;
    Eigen::VectorXd g(dim);
    const double step = 1e-6;
    for (int i = 0; i < dim; ++i) {
        GpHypers up = h0, dn = h0;
        double* fields_up[] = {&up.log_signal, &up.log_length, &up.log_noise, &up.log_alpha};
        double* fields_dn[] = {&dn.log_signal, &dn.log_length, &dn.log_noise, &dn.log_alpha};
        *fields_up[i] += step;
        *fields_dn[i] -= step;
        g(i) = (gp_log_marginal(kernel, x, y, up) - gp_log_marginal(kernel, x, y, dn)) /
               (2.0 * step);
    }
    return g;
}

}  // namespace

TEST_CASE("conditional least squares recovers a noiseless AR(1) exactly") {
    auto y = ar1_path(0.8, 0.5, 10.0, 40);
    ArModel m = fit_ar(y, 1);
    CHECK(!m.intercept_only);
    CHECK(m.coeffs(0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(m.intercept == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(m.noise_variance <= 1e-10);
    CHECK(m.one_step_mean({3.0}) == doctest::Approx(0.8 + 0.5 * 3.0).epsilon(1e-9));
}

TEST_CASE("conditional least squares recovers a noiseless AR(2) exactly") {
    std::vector<double> y = {2.0, 1.0};
    for (int i = 2; i < 50; ++i)
        y.push_back(1.0 + 0.6 * y[i - 1] - 0.3 * y[i - 2]);
    ArModel m = fit_ar(y, 2);
    CHECK(m.coeffs(0) == doctest::Approx(0.6).epsilon(1e-8));
    CHECK(m.coeffs(1) == doctest::Approx(-0.3).epsilon(1e-8));
    CHECK(m.intercept == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("constant history degrades to the intercept-only model") {
    std::vector<double> flat(30, 5.0);
    ArModel m = fit_ar(flat, 3);
    CHECK(m.intercept_only);
    CHECK(m.intercept == doctest::Approx(5.0).epsilon(1e-12));
    GaussianForecast f = ar_forecast(m, flat, 4);
    for (int h = 0; h < 4; ++h) {
        CHECK(f.mean(h) == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(f.variance(h) >= 0.0);
    }
}

TEST_CASE("multi-step AR means follow the recursion") {
    ArModel m;
    m.p = 2;
    m.intercept = 0.3;
    m.coeffs.resize(2);
    m.coeffs << 0.5, 0.2;
    m.noise_variance = 2.0;

    GaussianForecast f = ar_forecast(m, {1.0, 2.0}, 3);  // newest value last
    CHECK(f.mean(0) == doctest::Approx(0.3 + 0.5 * 2.0 + 0.2 * 1.0).epsilon(1e-12));
    CHECK(f.mean(1) == doctest::Approx(0.3 + 0.5 * 1.5 + 0.2 * 2.0).epsilon(1e-12));
    CHECK(f.mean(2) == doctest::Approx(0.3 + 0.5 * 1.45 + 0.2 * 1.5).epsilon(1e-12));
}

TEST_CASE("multi-step AR variance equals the impulse-response sum") {
    // Var(h) = sigma^2 * sum_{j<h} psi_j^2 with psi_0 = 1,
    // psi_j = phi_1 psi_{j-1} + phi_2 psi_{j-2}
    ArModel m;
    m.p = 2;
    m.intercept = 0.0;
    m.coeffs.resize(2);
    m.coeffs << 0.5, 0.2;
    m.noise_variance = 2.0;

    GaussianForecast f = ar_forecast(m, {0.0, 0.0}, 4);
    CHECK(f.variance(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.variance(1) == doctest::Approx(2.0 * (1.0 + 0.25)).epsilon(1e-12));
    CHECK(f.variance(2) == doctest::Approx(2.0 * (1.0 + 0.25 + 0.2025)).epsilon(1e-12));
    CHECK(f.variance(3) ==
          doctest::Approx(2.0 * (1.0 + 0.25 + 0.2025 + 0.105625)).epsilon(1e-12));
}

TEST_CASE("AR input validation") {
    CHECK_THROWS_AS(fit_ar({1, 2, 3}, 0), ConfigError);
    CHECK_THROWS_WITH_AS(fit_ar({1, 2, 3}, 3), doctest::Contains("too short"), DataError);
    ArModel m = fit_ar(ar1_path(0.0, 0.5, 1.0, 20), 1);
    CHECK_THROWS_AS(ar_forecast(m, {}, 3), DataError);
    CHECK_THROWS_AS(ar_forecast(m, {1.0}, 0), ConfigError);
}

TEST_CASE("kernel values at hand-checked points") {
    GpHypers unit;  // all logs zero: sigma^2 = l = sigma_n^2 = alpha = 1

    CHECK(kernel_eval(GpKernel::Matern52, unit, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    // (1 + sqrt5 + 5/3) exp(-sqrt5)
    CHECK(std::abs(kernel_eval(GpKernel::Matern52, unit, 1.0) - 0.52399) < 1e-5);

    // rational quadratic at alpha=1, l=1, r=1: (1 + 1/2)^-1
    CHECK(kernel_eval(GpKernel::RationalQuadratic, unit, 1.0) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(kernel_eval(GpKernel::RationalQuadratic, unit, 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));

    GpHypers scaled;
    scaled.log_signal = std::log(4.0);
    CHECK(kernel_eval(GpKernel::Matern52, scaled, 0.0) == doctest::Approx(4.0).epsilon(1e-12));

    CHECK(kernel_name(GpKernel::Matern52) == "matern52");
    CHECK(kernel_name(GpKernel::RationalQuadratic) == "rq");
}

TEST_CASE("log marginal likelihood gradients match finite differences") {
    const int n = 12;
    Eigen::VectorXd x(n), y(n);
    Rng rng(404);
    for (int i = 0; i < n; ++i) {
        x(i) = i / double(n - 1);
        y(i) = std::sin(5.0 * x(i)) + 0.1 * rng.normal();
    }

    std::vector<GpHypers> points(2);
    points[0].log_signal = 0.2;
    points[0].log_length = -0.5;
    points[0].log_noise = -1.5;
    points[0].log_alpha = 0.3;
    points[1].log_signal = -0.3;
    points[1].log_length = 0.1;
    points[1].log_noise = -2.0;
    points[1].log_alpha = -0.5;

    for (GpKernel kernel : {GpKernel::Matern52, GpKernel::RationalQuadratic}) {
        for (const GpHypers& h : points) {
            Eigen::VectorXd analytic;
            gp_log_marginal(kernel, x, y, h, &analytic);
            Eigen::VectorXd fd = fd_lml_grad(kernel, x, y, h);
            REQUIRE(analytic.size() == fd.size());
            for (int i = 0; i < fd.size(); ++i) {
                const double rel = std::abs(analytic(i) - fd(i)) /
                                   std::max({1e-6, std::abs(analytic(i)), std::abs(fd(i))});
                INFO("kernel ", kernel_name(kernel), " component ", i);
                CHECK(rel < 1e-4);
            }
        }
    }
}

TEST_CASE("gp fit and forecast behave on easy data") {
    std::vector<double> vals;
    Rng rng(11);
    for (int i = 0; i < 40; ++i) vals.push_back(std::sin(0.4 * i) + 0.05 * rng.normal());

    GpModel m = fit_gp(vals, GpKernel::Matern52, 1);
    CHECK(std::isfinite(m.log_marginal));

    GaussianForecast f = gp_forecast(m, 5);
    REQUIRE(f.horizon() == 5);
    for (int h = 0; h < 5; ++h) {
        CHECK(std::isfinite(f.mean(h)));
        CHECK(f.variance(h) > 0.0);
    }

    CHECK_THROWS_AS(fit_gp({1.0, 2.0, 3.0}, GpKernel::Matern52, 1), DataError);
    CHECK_THROWS_AS(gp_forecast(m, 0), ConfigError);
}

TEST_CASE("gp predictions are equivariant under affine target transforms") {
    std::vector<double> base;
    Rng rng(17);
    for (int i = 0; i < 30; ++i) base.push_back(std::sin(0.5 * i) + 0.1 * rng.normal());
    std::vector<double> moved;
    for (double v : base) moved.push_back(1000.0 * v - 250.0);

    // z-scoring makes the fit identical, so predictions must map exactly
    GaussianForecast f1 = gp_forecast(fit_gp(base, GpKernel::RationalQuadratic, 5), 4);
    GaussianForecast f2 = gp_forecast(fit_gp(moved, GpKernel::RationalQuadratic, 5), 4);
    for (int h = 0; h < 4; ++h) {
        CHECK(f2.mean(h) == doctest::Approx(1000.0 * f1.mean(h) - 250.0).epsilon(1e-9));
        CHECK(f2.variance(h) == doctest::Approx(1e6 * f1.variance(h)).epsilon(1e-9));
    }
}

TEST_CASE("normal distribution helpers") {
    CHECK(normal_pdf(0.0, 0.0, 1.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
    CHECK(normal_cdf(0.0, 0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(normal_cdf(1.959963984540054, 0.0, 1.0) == doctest::Approx(0.975).epsilon(1e-10));

    CHECK(std::abs(normal_quantile(0.975, 0.0, 1.0) - 1.959963984540054) < 1e-8);
    CHECK(normal_quantile(0.5, 0.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));

    // location-scale: q(p; mu, s^2) = mu + s q(p; 0, 1)
    const double q30 = normal_quantile(0.3, 0.0, 1.0);
    CHECK(normal_quantile(0.3, 2.0, 4.0) == doctest::Approx(2.0 + 2.0 * q30).epsilon(1e-10));

    for (double p : {1e-6, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-6}) {
        CHECK(normal_cdf(normal_quantile(p, 0.0, 1.0), 0.0, 1.0) ==
              doctest::Approx(p).epsilon(1e-9));
    }

    CHECK_THROWS_AS(normal_quantile(0.0, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(normal_quantile(1.0, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(normal_pdf(0.0, 0.0, 0.0), NumericalError);
    CHECK_THROWS_AS(normal_cdf(0.0, 0.0, -1.0), NumericalError);
}
