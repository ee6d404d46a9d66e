#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ordcast/baselines.hpp"
#include "ordcast/forecast.hpp"

namespace ordcast {

// Uniform view of a per-step predictive distribution, so the scoring code
// does not care whether a forecast came from sampled categorical rows or a
// Gaussian baseline.
class StepwisePredictive {
public:
    virtual ~StepwisePredictive() = default;
    virtual int horizon() const = 0;
    virtual double density(int step, double x) const = 0;
    virtual double cdf(int step, double x) const = 0;
    virtual double mean(int step) const = 0;
    virtual double quantile(int step, double level) const = 0;
};

// Piecewise-uniform densities from averaged categorical rows. Ground truth
// outside the quantizer range is scored with the boundary bin's density
// (clamped evaluation) rather than zero, so likelihoods stay finite and the
// penalty for escaping the range shows up through the bin's low mass.
class OrdinalPredictive : public StepwisePredictive {
public:
    explicit OrdinalPredictive(Forecast forecast);

    int horizon() const override { return forecast_.horizon(); }
    double density(int step, double x) const override;
    double cdf(int step, double x) const override;
    double mean(int step) const override;
    double quantile(int step, double level) const override;

    const Forecast& forecast() const { return forecast_; }

private:
    Forecast forecast_;
};

class GaussianPredictive : public StepwisePredictive {
public:
    explicit GaussianPredictive(GaussianForecast forecast);

    int horizon() const override { return forecast_.horizon(); }
    double density(int step, double x) const override;
    double cdf(int step, double x) const override;
    double mean(int step) const override;
    double quantile(int step, double level) const override;

private:
    GaussianForecast forecast_;
};

// Mean negative log predictive density over the horizon; densities are
// floored at 1e-12 before the log.
double nll(const StepwisePredictive& pred, const std::vector<double>& truth);

// Root mean squared error of the per-step predictive means.
double rmse(const StepwisePredictive& pred, const std::vector<double>& truth);

// Calibration distance: for each level q in {0.01, ..., 0.99}, the empirical
// coverage is the fraction of steps whose PIT value cdf(step, truth) lies at
// or below q; the distance is the mean absolute gap |coverage - q|.
double qq_distance(const StepwisePredictive& pred, const std::vector<double>& truth);

enum class Metric { Nll, Rmse, Qq };
std::string metric_name(Metric m);
inline constexpr Metric kAllMetrics[] = {Metric::Nll, Metric::Rmse, Metric::Qq};

// One scored (series, model) pair. `family` is the collapsing key: variants
// of one method (GP kernels, AR orders) share a family and only the best
// variant per series and metric represents it in rank tables.
struct MetricRecord {
    std::string series_id;
    std::string model;   // concrete variant, e.g. "ar-3", "gp-rq"
    std::string family;  // e.g. "ar", "gp", "gum"
    double nll = 0.0;
    double rmse = 0.0;
    double qq = 0.0;
};

double metric_value(const MetricRecord& r, Metric m);

MetricRecord score(const std::string& series_id, const std::string& model,
                   const std::string& family, const StepwisePredictive& pred,
                   const std::vector<double>& truth);

// Mean fractional rank (1 = best, ties averaged) of each family under each
// metric, after per-series collapsing. A family absent from a series does not
// enter that series' ranking and its mean divides by its own series count.
struct RankTable {
    std::vector<std::string> families;  // row labels, first-seen order
    Eigen::MatrixXd mean_rank;          // families x kAllMetrics
    Eigen::VectorXi series_counts;      // per family
};

RankTable rank_table(const std::vector<MetricRecord>& records);

// Share of series (in [0, 1]) where model `a` strictly beats model `b` under
// `m`, over series scored by both; compares concrete variants, not families.
double outperformance(const std::vector<MetricRecord>& records, const std::string& a,
                      const std::string& b, Metric m);

// Fixed-width text rendering of a rank table.
std::string format_rank_table(const RankTable& table);

}  // namespace ordcast
