#include "ordcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "ordcast/errors.hpp"

namespace ordcast {

namespace {

constexpr double kDensityFloor = 1e-12;

void check_truth(const StepwisePredictive& pred, const std::vector<double>& truth) {
    if (static_cast<int>(truth.size()) != pred.horizon())
        throw DataError("truth length " + std::to_string(truth.size()) +
                        " does not match forecast horizon " +
                        std::to_string(pred.horizon()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Adapters
// ---------------------------------------------------------------------------

OrdinalPredictive::OrdinalPredictive(Forecast forecast) : forecast_(std::move(forecast)) {}

double OrdinalPredictive::density(int step, double x) const {
    const auto& q = forecast_.quantizer;
    const double clamped = std::clamp(x, q.lo(), q.hi());
    return q.decode_density(forecast_.step(step), clamped);
}

double OrdinalPredictive::cdf(int step, double x) const {
    return predictive_cdf(forecast_.step(step), forecast_.quantizer, x);
}

double OrdinalPredictive::mean(int step) const {
    return predictive_mean(forecast_.step(step), forecast_.quantizer);
}

double OrdinalPredictive::quantile(int step, double level) const {
    return predictive_quantile(forecast_.step(step), forecast_.quantizer, level);
}

GaussianPredictive::GaussianPredictive(GaussianForecast forecast)
    : forecast_(std::move(forecast)) {}

double GaussianPredictive::density(int step, double x) const {
    return normal_pdf(x, forecast_.mean(step), forecast_.variance(step));
}

double GaussianPredictive::cdf(int step, double x) const {
    return normal_cdf(x, forecast_.mean(step), forecast_.variance(step));
}

double GaussianPredictive::mean(int step) const { return forecast_.mean(step); }

double GaussianPredictive::quantile(int step, double level) const {
    return normal_quantile(level, forecast_.mean(step), forecast_.variance(step));
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

double nll(const StepwisePredictive& pred, const std::vector<double>& truth) {
    check_truth(pred, truth);
    double acc = 0.0;
    for (int t = 0; t < pred.horizon(); ++t) {
        const double d = std::max(pred.density(t, truth[static_cast<std::size_t>(t)]),
                                  kDensityFloor);
        acc -= std::log(d);
    }
    return acc / pred.horizon();
}

double rmse(const StepwisePredictive& pred, const std::vector<double>& truth) {
    check_truth(pred, truth);
    double acc = 0.0;
    for (int t = 0; t < pred.horizon(); ++t) {
        const double e = pred.mean(t) - truth[static_cast<std::size_t>(t)];
        acc += e * e;
    }
    return std::sqrt(acc / pred.horizon());
}

double qq_distance(const StepwisePredictive& pred, const std::vector<double>& truth) {
    check_truth(pred, truth);
    std::vector<double> pit(truth.size());
    for (int t = 0; t < pred.horizon(); ++t)
        pit[static_cast<std::size_t>(t)] = pred.cdf(t, truth[static_cast<std::size_t>(t)]);

    double acc = 0.0;
    for (int i = 1; i <= 99; ++i) {
        const double level = i / 100.0;
        int covered = 0;
        for (double u : pit)
            if (u <= level) ++covered;
        acc += std::abs(static_cast<double>(covered) / static_cast<double>(pit.size()) - level);
    }
    return acc / 99.0;
}

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::Nll: return "nll";
        case Metric::Rmse: return "rmse";
        case Metric::Qq: return "qq";
    }
    return "?";
}

double metric_value(const MetricRecord& r, Metric m) {
    switch (m) {
        case Metric::Nll: return r.nll;
        case Metric::Rmse: return r.rmse;
        case Metric::Qq: return r.qq;
    }
    return 0.0;
}

MetricRecord score(const std::string& series_id, const std::string& model,
                   const std::string& family, const StepwisePredictive& pred,
                   const std::vector<double>& truth) {
    MetricRecord r;
    r.series_id = series_id;
    r.model = model;
    r.family = family;
    r.nll = nll(pred, truth);
    r.rmse = rmse(pred, truth);
    r.qq = qq_distance(pred, truth);
    return r;
}

// ---------------------------------------------------------------------------
// Rank aggregation
// ---------------------------------------------------------------------------

namespace {

// fractional ranks of `values`, ascending, ties averaged
std::vector<double> fractional_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;  // mean of 1-based positions
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

RankTable rank_table(const std::vector<MetricRecord>& records) {
    if (records.empty()) throw DataError("rank_table: no records");

    std::vector<std::string> families;
    std::vector<std::string> series;
    auto index_of = [](std::vector<std::string>& v, const std::string& s) {
        const auto it = std::find(v.begin(), v.end(), s);
        if (it != v.end()) return static_cast<int>(it - v.begin());
        v.push_back(s);
        return static_cast<int>(v.size()) - 1;
    };
    for (const auto& r : records) {
        index_of(families, r.family);
        index_of(series, r.series_id);
    }

    const int n_fam = static_cast<int>(families.size());
    const int n_metrics = static_cast<int>(std::size(kAllMetrics));

    RankTable table;
    table.families = families;
    table.mean_rank = Eigen::MatrixXd::Zero(n_fam, n_metrics);
    table.series_counts = Eigen::VectorXi::Zero(n_fam);
    Eigen::MatrixXi participation = Eigen::MatrixXi::Zero(n_fam, n_metrics);

    for (int si = 0; si < static_cast<int>(series.size()); ++si) {
        // collapse: best variant value per family, per metric
        for (int mi = 0; mi < n_metrics; ++mi) {
            std::vector<double> value;
            std::vector<int> fam;
            for (int fi = 0; fi < n_fam; ++fi) {
                double best = std::numeric_limits<double>::infinity();
                bool seen = false;
                for (const auto& r : records) {
                    if (r.series_id != series[static_cast<std::size_t>(si)] ||
                        r.family != families[static_cast<std::size_t>(fi)])
                        continue;
                    best = std::min(best, metric_value(r, kAllMetrics[mi]));
                    seen = true;
                }
                if (seen) {
                    value.push_back(best);
                    fam.push_back(fi);
                }
            }
            const std::vector<double> ranks = fractional_ranks(value);
            for (std::size_t k = 0; k < fam.size(); ++k) {
                table.mean_rank(fam[k], mi) += ranks[k];
                participation(fam[k], mi) += 1;
            }
        }
    }

    for (int fi = 0; fi < n_fam; ++fi) {
        for (int mi = 0; mi < n_metrics; ++mi) {
            if (participation(fi, mi) > 0) table.mean_rank(fi, mi) /= participation(fi, mi);
        }
        table.series_counts(fi) = participation(fi, 0);
    }
    return table;
}

double outperformance(const std::vector<MetricRecord>& records, const std::string& a,
                      const std::string& b, Metric m) {
    std::map<std::string, double> va, vb;
    for (const auto& r : records) {
        if (r.model == a) va[r.series_id] = metric_value(r, m);
        if (r.model == b) vb[r.series_id] = metric_value(r, m);
    }
    int common = 0;
    int wins = 0;
    for (const auto& [sid, value] : va) {
        const auto it = vb.find(sid);
        if (it == vb.end()) continue;
        ++common;
        if (value < it->second) ++wins;
    }
    if (common == 0) throw DataError("outperformance: no common series for " + a + " vs " + b);
    return static_cast<double>(wins) / static_cast<double>(common);
}

std::string format_rank_table(const RankTable& table) {
    std::size_t width = 8;
    for (const auto& f : table.families) width = std::max(width, f.size() + 2);

    std::ostringstream out;
    out << std::string(width, ' ');
    char buf[32];
    for (Metric m : kAllMetrics) {
        std::snprintf(buf, sizeof(buf), "%10s", metric_name(m).c_str());
        out << buf;
    }
    out << "   series\n";
    for (std::size_t fi = 0; fi < table.families.size(); ++fi) {
        const std::string& f = table.families[fi];
        out << f << std::string(width - f.size(), ' ');
        for (int mi = 0; mi < table.mean_rank.cols(); ++mi) {
            std::snprintf(buf, sizeof(buf), "%10.2f", table.mean_rank(static_cast<int>(fi), mi));
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), "%9d", table.series_counts(static_cast<int>(fi)));
        out << buf << "\n";
    }
    return out.str();
}

}  // namespace ordcast
