#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordcast/series.hpp"

namespace ordcast {

// Synthetic series families for desk-scale experiments and tests. Parameters
// (period, amplitude, offset, noise) are drawn per series from the given seed,
// so a (family, seed) pair is fully reproducible.
enum class SyntheticFamily { Sine, Sawtooth, Ar2, TrendSeasonal };

const char* family_name(SyntheticFamily f);
SyntheticFamily family_from_name(const std::string& name);

TimeSeries generate_series(SyntheticFamily family, std::size_t length,
                           std::uint64_t seed, const std::string& id);

// Round-robin over all four families.
std::vector<TimeSeries> generate_corpus(std::size_t count, std::size_t length,
                                        std::uint64_t seed, const std::string& id_prefix);

}  // namespace ordcast
