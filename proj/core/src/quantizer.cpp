#include "ordcast/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ordcast/errors.hpp"

namespace ordcast {

OrdinalQuantizer::OrdinalQuantizer(int m, double lo, double hi, std::string id)
    : m_(m), lo_(lo), hi_(hi), id_(std::move(id)) {
    if (m <= 0) throw std::invalid_argument("quantizer: bin count must be positive");
    if (!std::isfinite(lo) || !std::isfinite(hi))
        throw std::invalid_argument("quantizer: non-finite range");
    if (!(hi > lo)) throw std::invalid_argument("quantizer: hi must exceed lo");
    edges_.resize(static_cast<std::size_t>(m) + 1);
    const double span = hi - lo;
    for (int i = 0; i <= m; ++i) {
        edges_[static_cast<std::size_t>(i)] = lo + span * static_cast<double>(i) / m;
    }
    edges_.front() = lo;
    edges_.back() = hi;
}

int OrdinalQuantizer::encode(double value) const {
    if (!std::isfinite(value)) throw std::invalid_argument("encode: non-finite value");
    if (value < lo_) return 0;
    if (value >= hi_) return m_ - 1;
    int k = static_cast<int>(std::floor((value - lo_) / (hi_ - lo_) * m_));
    k = std::clamp(k, 0, m_ - 1);
    // rounding in the division can land one bin off; fix against stored edges
    while (k > 0 && value < edges_[static_cast<std::size_t>(k)]) --k;
    while (k < m_ - 1 && value >= edges_[static_cast<std::size_t>(k) + 1]) ++k;
    return k;
}

std::vector<int> OrdinalQuantizer::encode(const std::vector<double>& values) const {
    std::vector<int> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(encode(v));
    return out;
}

double OrdinalQuantizer::decode_density(const std::vector<double>& probs, double x) const {
    if (probs.size() != static_cast<std::size_t>(m_))
        throw std::invalid_argument("decode_density: probs size mismatch");
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0 || !std::isfinite(p))
            throw std::invalid_argument("decode_density: invalid probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("decode_density: probs do not sum to 1");
    if (x < lo_ || x > hi_) return 0.0;
    const int k = encode(x);
    return probs[static_cast<std::size_t>(k)] / width(k);
}

std::pair<double, double> extend_range(double observed_min, double observed_max,
                                       double delta_max, int horizon) {
    if (observed_max < observed_min)
        throw std::invalid_argument("extend_range: max below min");
    if (delta_max < 0.0 || !std::isfinite(delta_max))
        throw std::invalid_argument("extend_range: delta_max must be >= 0");
    if (horizon <= 0) throw std::invalid_argument("extend_range: horizon must be positive");
    const double slack = static_cast<double>(horizon) * delta_max;
    return {observed_min - slack, observed_max + slack};
}

double max_abs_first_difference(const std::vector<double>& values) {
    if (values.size() < 2)
        throw std::invalid_argument("max_abs_first_difference: need >= 2 values");
    double d = 0.0;
    for (std::size_t t = 0; t + 1 < values.size(); ++t) {
        d = std::max(d, std::abs(values[t + 1] - values[t]));
    }
    return d;
}

OrdinalQuantizer build_quantizer(const TimeSeries& series, int m, int horizon,
                                 bool extend) {
    if (series.size() < 2)
        throw DataError("build_quantizer: series '" + series.id + "' has fewer than 2 observations");
    for (std::size_t t = 0; t < series.values.size(); ++t) {
        if (!std::isfinite(series.values[t]))
            throw DataError("build_quantizer: non-finite value at position " +
                            std::to_string(t) + " in series '" + series.id + "'");
    }
    double lo = series.values[0];
    double hi = series.values[0];
    for (double v : series.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (extend) {
        if (horizon <= 0)
            throw std::invalid_argument("build_quantizer: extension requires positive horizon");
        double delta = max_abs_first_difference(series.values);
        if (delta == 0.0) {
            // constant series: floor the slack so the range has width
            delta = 1e-6 * std::max(1.0, std::abs(series.values[0]));
        }
        auto [elo, ehi] = extend_range(lo, hi, delta, horizon);
        lo = elo;
        hi = ehi;
    } else if (!(hi > lo)) {
        throw DataError("build_quantizer: constant series '" + series.id +
                        "' needs range extension");
    }
    return OrdinalQuantizer(m, lo, hi, series.id);
}

OrdinalSequence encode_series(const OrdinalQuantizer& q, const TimeSeries& series) {
    return OrdinalSequence{q.encode(series.values), q.id()};
}

}  // namespace ordcast
