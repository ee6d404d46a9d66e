#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordcast/errors.hpp"
#include "ordcast/seq2seq.hpp"
#include "ordcast/series.hpp"

namespace ordcast {

// Parses one-value-per-row delimited text. A single non-numeric first line is
// treated as a header; non-finite entries are rejected with their row number.
TimeSeries load_series(const std::string& path);
TimeSeries load_series(const std::string& path, const std::string& id);

void save_series(const TimeSeries& series, const std::string& path);

// Sliding (context, target) windows in chronological order.
// Window count follows (len - context_len - target_len) / stride + 1.
// target_len may be zero for encoder-only windows.
std::vector<OrdinalWindow> make_windows(const std::vector<int>& indices, int context_len,
                                        int target_len, int stride);

// Chronological split reserving the final fraction for validation (at least
// one window on each side).
struct WindowSplit {
    std::vector<OrdinalWindow> train;
    std::vector<OrdinalWindow> validation;
};
WindowSplit split_windows(const std::vector<OrdinalWindow>& windows,
                          double validation_fraction = 0.2);

enum class SeriesRole { Auxiliary, Evaluation };

struct ManifestEntry {
    std::string id;
    std::string path;
    SeriesRole role;
    std::string note;  // free-form sampling note
};

// Corpus description: which series exist, where they live, and what they are
// for. Loaded from JSON; ids must be unique and every file must exist.
struct DatasetManifest {
    int m = 150;  // bin count shared by the whole corpus
    std::uint64_t seed = 1;
    std::vector<ManifestEntry> series;

    std::vector<ManifestEntry> with_role(SeriesRole role) const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

}  // namespace ordcast
