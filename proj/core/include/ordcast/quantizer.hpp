#pragma once

#include <string>
#include <vector>

#include "ordcast/series.hpp"

namespace ordcast {

// Equal-width ordinal binning over a (possibly heuristic-extended) range.
// Bins are left-closed/right-open; the final bin is closed on both sides.
// Out-of-range values clamp to the boundary bins: evaluation data may exceed
// even an extended range and clamping keeps likelihoods finite.
//
// Immutable after construction; all member operations are const and safe for
// concurrent reads.
class OrdinalQuantizer {
public:
    OrdinalQuantizer(int m, double lo, double hi, std::string id = "");

    int bins() const { return m_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::string& id() const { return id_; }
    const std::vector<double>& edges() const { return edges_; }

    double width(int k) const { return edges_[k + 1] - edges_[k]; }
    double midpoint(int k) const { return 0.5 * (edges_[k] + edges_[k + 1]); }

    // Bin index k with edges[k] <= value < edges[k+1]; clamps outside the range.
    int encode(double value) const;

    std::vector<int> encode(const std::vector<double>& values) const;

    // Piecewise-uniform density at x for a categorical over the bins.
    // probs must be non-negative and sum to 1 within 1e-9. Zero outside the
    // supported range.
    double decode_density(const std::vector<double>& probs, double x) const;

private:
    int m_;
    double lo_;
    double hi_;
    std::vector<double> edges_;
    std::string id_;
};

// Ordinal codes plus the id of the quantizer that produced them.
struct OrdinalSequence {
    std::vector<int> indices;
    std::string quantizer_id;

    std::size_t size() const { return indices.size(); }
};

// Range-extension heuristic: widen (observed_min, observed_max) by
// horizon * delta_max on each side, where delta_max is the largest absolute
// first difference of the series.
std::pair<double, double> extend_range(double observed_min, double observed_max,
                                       double delta_max, int horizon);

// Largest absolute first-order finite difference. Requires >= 2 values.
double max_abs_first_difference(const std::vector<double>& values);

// Builds an m-bin quantizer over the series' observed range, optionally
// extended by the heuristic above (horizon must then be positive). Constant
// series are rejected unless extension is enabled, in which case delta_max is
// floored at 1e-6 * max(1, |value|) to avoid a zero-width range.
OrdinalQuantizer build_quantizer(const TimeSeries& series, int m, int horizon,
                                 bool extend);

OrdinalSequence encode_series(const OrdinalQuantizer& q, const TimeSeries& series);

}  // namespace ordcast
