#include "ordcast/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ordcast {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n,");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n,");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& token, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(token, &pos);
        return pos == token.size();
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

TimeSeries load_series(const std::string& path) {
    return load_series(path, std::filesystem::path(path).stem().string());
}

TimeSeries load_series(const std::string& path, const std::string& id) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open series file: " + path);

    TimeSeries s;
    s.id = id;
    std::string line;
    std::size_t row = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++row;
        const std::string token = trim(line);
        if (token.empty()) continue;
        double v = 0.0;
        if (!parse_double(token, v)) {
            if (first_data_line) {
                first_data_line = false;  // header line
                continue;
            }
            throw DataError(path + ": row " + std::to_string(row) +
                            ": cannot parse '" + token + "'");
        }
        first_data_line = false;
        if (!std::isfinite(v)) {
            throw DataError(path + ": row " + std::to_string(row) +
                            ": non-finite value '" + token + "'");
        }
        s.values.push_back(v);
    }
    if (s.values.empty()) throw DataError(path + ": no observations");
    return s;
}

void save_series(const TimeSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write series file: " + path);
    char buf[64];
    for (double v : series.values) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", v);
        out << buf;
    }
}

std::vector<OrdinalWindow> make_windows(const std::vector<int>& indices, int context_len,
                                        int target_len, int stride) {
    if (context_len <= 0) throw std::invalid_argument("make_windows: context_len must be positive");
    if (target_len < 0) throw std::invalid_argument("make_windows: target_len must be >= 0");
    if (stride <= 0) throw std::invalid_argument("make_windows: stride must be positive");
    const std::size_t need = static_cast<std::size_t>(context_len) + static_cast<std::size_t>(target_len);
    if (indices.size() < need)
        throw DataError("make_windows: series of length " + std::to_string(indices.size()) +
                        " too short for window length " + std::to_string(need));

    std::vector<OrdinalWindow> out;
    for (std::size_t start = 0; start + need <= indices.size();
         start += static_cast<std::size_t>(stride)) {
        OrdinalWindow w;
        w.context.assign(indices.begin() + static_cast<long>(start),
                         indices.begin() + static_cast<long>(start) + context_len);
        w.target.assign(indices.begin() + static_cast<long>(start) + context_len,
                        indices.begin() + static_cast<long>(start + need));
        out.push_back(std::move(w));
    }
    return out;
}

WindowSplit split_windows(const std::vector<OrdinalWindow>& windows,
                          double validation_fraction) {
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
        throw std::invalid_argument("split_windows: fraction must lie in (0, 1)");
    if (windows.size() < 2)
        throw DataError("split_windows: need at least 2 windows to split");
    std::size_t n_val = static_cast<std::size_t>(
        std::floor(validation_fraction * static_cast<double>(windows.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, windows.size() - 1);
    WindowSplit split;
    split.train.assign(windows.begin(), windows.end() - static_cast<long>(n_val));
    split.validation.assign(windows.end() - static_cast<long>(n_val), windows.end());
    return split;
}

std::vector<ManifestEntry> DatasetManifest::with_role(SeriesRole role) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : series) {
        if (e.role == role) out.push_back(e);
    }
    return out;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest parse error in " + path + ": " + e.what());
    }

    DatasetManifest man;
    try {
        man.m = j.value("m", 150);
        man.seed = j.value("seed", std::uint64_t{1});
        const auto base = std::filesystem::path(path).parent_path();
        std::set<std::string> ids;
        for (const auto& e : j.at("series")) {
            ManifestEntry entry;
            entry.id = e.at("id").get<std::string>();
            entry.path = e.at("path").get<std::string>();
            const std::string role = e.at("role").get<std::string>();
            if (role == "auxiliary") {
                entry.role = SeriesRole::Auxiliary;
            } else if (role == "evaluation") {
                entry.role = SeriesRole::Evaluation;
            } else {
                throw DataError("manifest: unknown role '" + role + "' for series " + entry.id);
            }
            entry.note = e.value("note", "");
            if (!ids.insert(entry.id).second)
                throw DataError("manifest: duplicate series id '" + entry.id + "'");
            // paths are relative to the manifest file
            if (!std::filesystem::path(entry.path).is_absolute()) {
                entry.path = (base / entry.path).string();
            }
            if (!std::filesystem::exists(entry.path))
                throw DataError("manifest: series file missing: " + entry.path);
            man.series.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest schema error in " + path + ": " + e.what());
    }
    if (man.m <= 0) throw DataError("manifest: m must be positive");
    return man;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    nlohmann::json j;
    j["m"] = manifest.m;
    j["seed"] = manifest.seed;
    j["series"] = nlohmann::json::array();
    const auto base = std::filesystem::path(path).parent_path();
    for (const auto& e : manifest.series) {
        nlohmann::json je;
        je["id"] = e.id;
        je["path"] = std::filesystem::relative(e.path, base).string();
        je["role"] = (e.role == SeriesRole::Auxiliary) ? "auxiliary" : "evaluation";
        if (!e.note.empty()) je["note"] = e.note;
        j["series"].push_back(je);
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace ordcast
