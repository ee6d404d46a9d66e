#include "ordcast/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "ordcast/rng.hpp"

namespace ordcast {

namespace {
constexpr double kTwoPi = 6.283185307179586;
}

const char* family_name(SyntheticFamily f) {
    switch (f) {
        case SyntheticFamily::Sine: return "sine";
        case SyntheticFamily::Sawtooth: return "sawtooth";
        case SyntheticFamily::Ar2: return "ar2";
        case SyntheticFamily::TrendSeasonal: return "trend_seasonal";
    }
    return "unknown";
}

SyntheticFamily family_from_name(const std::string& name) {
    if (name == "sine") return SyntheticFamily::Sine;
    if (name == "sawtooth") return SyntheticFamily::Sawtooth;
    if (name == "ar2") return SyntheticFamily::Ar2;
    if (name == "trend_seasonal") return SyntheticFamily::TrendSeasonal;
    throw std::invalid_argument("unknown synthetic family: " + name);
}

TimeSeries generate_series(SyntheticFamily family, std::size_t length,
                           std::uint64_t seed, const std::string& id) {
    Rng rng(seed);
    TimeSeries s;
    s.id = id;
    s.values.resize(length);

    // Per-series scale and offset; quantization is scale-invariant per series,
    // so these exercise the cross-scale embedding.
    const double amp = rng.uniform(0.5, 20.0);
    const double offset = rng.uniform(-50.0, 50.0);
    const double noise = amp * rng.uniform(0.01, 0.04);
    const double period = rng.uniform(8.0, 18.0);
    const double phase = rng.uniform(0.0, kTwoPi);

    switch (family) {
        case SyntheticFamily::Sine: {
            for (std::size_t t = 0; t < length; ++t) {
                s.values[t] = offset + amp * std::sin(kTwoPi * t / period + phase) +
                              noise * rng.normal();
            }
            break;
        }
        case SyntheticFamily::Sawtooth: {
            for (std::size_t t = 0; t < length; ++t) {
                const double frac = std::fmod(t / period + phase / kTwoPi, 1.0);
                s.values[t] = offset + amp * (2.0 * frac - 1.0) + noise * rng.normal();
            }
            break;
        }
        case SyntheticFamily::Ar2: {
            // damped oscillation: roots r*exp(+-i*2pi/period)
            const double r = rng.uniform(0.90, 0.98);
            const double omega = kTwoPi / period;
            const double phi1 = 2.0 * r * std::cos(omega);
            const double phi2 = -r * r;
            const double innov = amp * 0.25;
            double x1 = 0.0, x2 = 0.0;
            for (std::size_t t = 0; t < length; ++t) {
                const double x = phi1 * x1 + phi2 * x2 + innov * rng.normal();
                s.values[t] = offset + x;
                x2 = x1;
                x1 = x;
            }
            break;
        }
        case SyntheticFamily::TrendSeasonal: {
            const double slope = rng.uniform(-1.0, 1.0) * amp / period;
            for (std::size_t t = 0; t < length; ++t) {
                s.values[t] = offset + slope * static_cast<double>(t) +
                              amp * std::sin(kTwoPi * t / period + phase) +
                              noise * rng.normal();
            }
            break;
        }
    }
    return s;
}

std::vector<TimeSeries> generate_corpus(std::size_t count, std::size_t length,
                                        std::uint64_t seed, const std::string& id_prefix) {
    static const SyntheticFamily kFamilies[] = {
        SyntheticFamily::Sine, SyntheticFamily::Sawtooth, SyntheticFamily::Ar2,
        SyntheticFamily::TrendSeasonal};
    std::vector<TimeSeries> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const SyntheticFamily fam = kFamilies[i % 4];
        const std::string id = id_prefix + std::to_string(i) + "_" + family_name(fam);
        out.push_back(generate_series(fam, length, derive_seed(seed, id), id));
    }
    return out;
}

}  // namespace ordcast
