#pragma once

// Shared helpers for the unit and acceptance suites: independent oracles
// (finite differences, definitional Ward, definitional silhouette) and small
// utilities. Everything here deliberately avoids the library's own shortcuts
// so the two sides of each comparison stay independent.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ordcast/embedding.hpp"
#include "ordcast/seq2seq.hpp"

namespace testsupport {

inline std::filesystem::path fresh_dir(const std::string& stem) {
    auto dir = std::filesystem::temp_directory_path() / (stem + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --------------------------------------------------------------------------
// Finite-difference gradient check
// --------------------------------------------------------------------------

struct FdReport {
    double max_rel = 0.0;
    std::string worst_tensor;
    Eigen::Index worst_index = 0;
};

// Central differences through teacher_forced_loss with the same fixed masks,
// compared elementwise against the analytic BPTT gradient. The relative error
// denominator is floored so that components near zero are judged on absolute
// agreement instead of amplified rounding noise.
inline FdReport fd_gradient_check(ordcast::Seq2SeqModel& model,
                                  const std::vector<ordcast::OrdinalWindow>& windows,
                                  const std::vector<ordcast::DropoutMasks>* masks,
                                  double l2_lambda, double h = 1e-5) {
    using namespace ordcast;
    Seq2SeqGradients grads = Seq2SeqGradients::zeros_like(model);
    teacher_forced_loss_and_grad(model, windows, masks, l2_lambda, grads);

    FdReport rep;
    auto params = model.tensor_refs();
    auto analytic = grads.tensor_refs();
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (Eigen::Index i = 0; i < params[t].size(); ++i) {
            const double saved = params[t].data[i];
            params[t].data[i] = saved + h;
            const double up = teacher_forced_loss(model, windows, masks, l2_lambda);
            params[t].data[i] = saved - h;
            const double dn = teacher_forced_loss(model, windows, masks, l2_lambda);
            params[t].data[i] = saved;

            const double fd = (up - dn) / (2.0 * h);
            const double an = analytic[t].data[i];
            const double rel =
                std::abs(fd - an) / std::max({1e-6, std::abs(fd), std::abs(an)});
            if (rel > rep.max_rel) {
                rep.max_rel = rel;
                rep.worst_tensor = params[t].name;
                rep.worst_index = i;
            }
        }
    }
    return rep;
}

// --------------------------------------------------------------------------
// Definitional Ward agglomeration (oracle)
// --------------------------------------------------------------------------

// Sum of squared distances to the cluster mean, straight from the definition.
inline double cluster_sse(const std::vector<Eigen::VectorXd>& points,
                          const std::vector<int>& members) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(points[0].size());
    for (int i : members) mu += points[i];
    mu /= static_cast<double>(members.size());
    double sse = 0.0;
    for (int i : members) sse += (points[i] - mu).squaredNorm();
    return sse;
}

struct BruteMerge {
    int a = 0, b = 0;
    double cost = 0.0;
};

struct BruteWard {
    std::vector<BruteMerge> merges;                  // n-1 merges
    std::vector<std::vector<std::vector<int>>> levels;  // clusters after 0,1,... merges
};

// Greedy minimum-SSE-increase agglomeration computed from scratch at every
// step: cost(A,B) = SSE(A u B) - SSE(A) - SSE(B). Ties take the first pair in
// scan order over the active list, and the merged cluster replaces position a,
// matching the convention under test.
inline BruteWard brute_ward(const std::vector<Eigen::VectorXd>& points) {
    const int n = static_cast<int>(points.size());
    std::vector<std::vector<int>> active(n);
    for (int i = 0; i < n; ++i) active[i] = {i};

    BruteWard out;
    out.levels.push_back(active);
    while (active.size() > 1) {
        BruteMerge best;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int a = 0; a < static_cast<int>(active.size()); ++a) {
            for (int b = a + 1; b < static_cast<int>(active.size()); ++b) {
                std::vector<int> merged = active[a];
                merged.insert(merged.end(), active[b].begin(), active[b].end());
                const double cost = cluster_sse(points, merged) -
                                    cluster_sse(points, active[a]) -
                                    cluster_sse(points, active[b]);
                if (cost < best_cost) {
                    best_cost = cost;
                    best = {a, b, cost};
                }
            }
        }
        active[best.a].insert(active[best.a].end(), active[best.b].begin(),
                              active[best.b].end());
        active.erase(active.begin() + best.b);
        out.merges.push_back(best);
        out.levels.push_back(active);
    }
    return out;
}

// Canonical partition signature: clusters as sorted member lists, sorted by
// their smallest member. Label-independent equality.
inline std::vector<std::vector<int>> canonical_partition(const std::vector<int>& assignments) {
    std::map<int, std::vector<int>> by_label;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        by_label[assignments[i]].push_back(static_cast<int>(i));
    std::vector<std::vector<int>> out;
    for (auto& [label, members] : by_label) {
        std::sort(members.begin(), members.end());
        out.push_back(members);
    }
    std::sort(out.begin(), out.end(),
              [](const auto& x, const auto& y) { return x.front() < y.front(); });
    return out;
}

inline std::vector<std::vector<int>> sorted_level(std::vector<std::vector<int>> level) {
    for (auto& c : level) std::sort(c.begin(), c.end());
    std::sort(level.begin(), level.end(),
              [](const auto& x, const auto& y) { return x.front() < y.front(); });
    return level;
}

// --------------------------------------------------------------------------
// Definitional silhouette (oracle)
// --------------------------------------------------------------------------

inline double brute_silhouette(const std::vector<Eigen::VectorXd>& points,
                               const std::vector<int>& assignments) {
    const int n = static_cast<int>(points.size());
    std::set<int> labels(assignments.begin(), assignments.end());
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        std::map<int, double> dist_sum;
        std::map<int, int> count;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            dist_sum[assignments[j]] += (points[i] - points[j]).norm();
            count[assignments[j]] += 1;
        }
        const int own = assignments[i];
        const int own_others = count.count(own) ? count[own] : 0;
        if (own_others == 0) continue;  // singleton contributes 0
        const double a = dist_sum[own] / own_others;
        double b = std::numeric_limits<double>::infinity();
        for (int label : labels) {
            if (label == own || count[label] == 0) continue;
            b = std::min(b, dist_sum[label] / count[label]);
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;  // 0/0 contributes 0
    }
    return total / n;
}

inline std::vector<ordcast::EmbeddingVector> as_embedding_vectors(
    const std::vector<Eigen::VectorXd>& points) {
    std::vector<ordcast::EmbeddingVector> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        out[i].vector = points[i];
        out[i].source_id = "p" + std::to_string(i);
        out[i].offset = static_cast<int>(i);
    }
    return out;
}

}  // namespace testsupport
