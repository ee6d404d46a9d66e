#pragma once

#include <string>
#include <vector>

namespace ordcast {

// A named, uniformly sampled sequence of real values.
struct TimeSeries {
    std::string id;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

}  // namespace ordcast
