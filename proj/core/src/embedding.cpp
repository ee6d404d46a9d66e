#include "ordcast/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "ordcast/errors.hpp"

namespace ordcast {

std::vector<Excerpt> sample_excerpts(const OrdinalSequence& sequence, const std::string& id,
                                     SeriesRole group, int window_len, int count, Rng& rng) {
    if (window_len <= 0) throw ConfigError("sample_excerpts: window length must be positive");
    if (count <= 0) throw ConfigError("sample_excerpts: count must be positive");
    const int len = static_cast<int>(sequence.size());
    if (len < window_len)
        throw DataError("sample_excerpts: sequence shorter than the window length");

    std::vector<int> offsets(static_cast<std::size_t>(len - window_len + 1));
    std::iota(offsets.begin(), offsets.end(), 0);
    if (static_cast<int>(offsets.size()) > count) {
        rng.shuffle(offsets);
        offsets.resize(static_cast<std::size_t>(count));
        std::sort(offsets.begin(), offsets.end());
    }

    std::vector<Excerpt> out;
    out.reserve(offsets.size());
    for (int off : offsets) {
        Excerpt e;
        e.sequence.indices.assign(sequence.indices.begin() + off,
                                  sequence.indices.begin() + off + window_len);
        e.sequence.quantizer_id = sequence.quantizer_id;
        e.source_id = id;
        e.offset = off;
        e.group = group;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<EmbeddingVector> extract_embeddings(const Seq2SeqModel& model,
                                                const std::vector<Excerpt>& excerpts) {
    std::vector<EmbeddingVector> out;
    out.reserve(excerpts.size());
    for (const auto& e : excerpts) {
        if (e.sequence.indices.empty()) throw DataError("extract_embeddings: empty excerpt");
        const LstmState state = encoder_forward(model, e.sequence, nullptr);
        EmbeddingVector v;
        v.vector = state.h;
        v.source_id = e.source_id;
        v.offset = e.offset;
        v.group = e.group;
        v.last_bin = e.sequence.indices.back();
        if (!v.vector.allFinite())
            throw NumericalError("extract_embeddings: non-finite activation for " + v.label());
        out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ward clustering
// ---------------------------------------------------------------------------

namespace {

struct WardState {
    std::vector<std::vector<int>> members;   // active clusters, index order
    std::vector<Eigen::VectorXd> centroids;  // parallel to members

    double merge_cost(int a, int b) const {
        const double na = static_cast<double>(members[static_cast<std::size_t>(a)].size());
        const double nb = static_cast<double>(members[static_cast<std::size_t>(b)].size());
        const double d2 = (centroids[static_cast<std::size_t>(a)] -
                           centroids[static_cast<std::size_t>(b)])
                              .squaredNorm();
        return na * nb / (na + nb) * d2;
    }
};

// Runs the agglomeration all the way down to one cluster, recording every
// merge. Cutting the sequence after n-k steps reproduces ward_cluster(k).
std::vector<std::tuple<int, int, double>> full_merge_sequence(
    const std::vector<EmbeddingVector>& vectors) {
    const int n = static_cast<int>(vectors.size());
    WardState state;
    state.members.reserve(static_cast<std::size_t>(n));
    state.centroids.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        state.members.push_back({i});
        state.centroids.push_back(vectors[static_cast<std::size_t>(i)].vector);
    }

    std::vector<std::tuple<int, int, double>> merges;
    merges.reserve(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
    while (state.members.size() > 1) {
        const int active = static_cast<int>(state.members.size());
        int best_a = 0, best_b = 1;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int a = 0; a < active; ++a) {
            for (int b = a + 1; b < active; ++b) {
                const double cost = state.merge_cost(a, b);
                if (cost < best_cost) {  // strict: first minimal pair wins ties
                    best_cost = cost;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        const double na = static_cast<double>(state.members[static_cast<std::size_t>(best_a)].size());
        const double nb = static_cast<double>(state.members[static_cast<std::size_t>(best_b)].size());
        state.centroids[static_cast<std::size_t>(best_a)] =
            (na * state.centroids[static_cast<std::size_t>(best_a)] +
             nb * state.centroids[static_cast<std::size_t>(best_b)]) /
            (na + nb);
        auto& ma = state.members[static_cast<std::size_t>(best_a)];
        auto& mb = state.members[static_cast<std::size_t>(best_b)];
        ma.insert(ma.end(), mb.begin(), mb.end());
        state.members.erase(state.members.begin() + best_b);
        state.centroids.erase(state.centroids.begin() + best_b);
        merges.emplace_back(best_a, best_b, best_cost);
    }
    return merges;
}

// Replays the first n-k merges and labels points by final cluster position.
std::vector<int> cut_assignments(const std::vector<std::tuple<int, int, double>>& merges,
                                 int n, int k) {
    std::vector<std::vector<int>> members;
    members.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) members.push_back({i});
    for (int step = 0; step < n - k; ++step) {
        const auto& [a, b, cost] = merges[static_cast<std::size_t>(step)];
        (void)cost;
        auto& ma = members[static_cast<std::size_t>(a)];
        auto& mb = members[static_cast<std::size_t>(b)];
        ma.insert(ma.end(), mb.begin(), mb.end());
        members.erase(members.begin() + b);
    }
    std::vector<int> assignments(static_cast<std::size_t>(n), -1);
    for (int c = 0; c < static_cast<int>(members.size()); ++c)
        for (int idx : members[static_cast<std::size_t>(c)])
            assignments[static_cast<std::size_t>(idx)] = c;
    return assignments;
}

void check_vectors(const std::vector<EmbeddingVector>& vectors) {
    if (vectors.empty()) throw DataError("no embedding vectors");
    const Eigen::Index dim = vectors.front().vector.size();
    for (const auto& v : vectors)
        if (v.vector.size() != dim)
            throw DataError("embedding vectors disagree on dimension");
}

}  // namespace

ClusterModel ward_cluster(const std::vector<EmbeddingVector>& vectors, int k) {
    check_vectors(vectors);
    const int n = static_cast<int>(vectors.size());
    if (k < 1) throw ConfigError("ward_cluster: k must be at least 1");
    if (k > n)
        throw ConfigError("ward_cluster: k=" + std::to_string(k) + " exceeds " +
                          std::to_string(n) + " vectors");

    const auto merges = full_merge_sequence(vectors);
    ClusterModel model;
    model.k = k;
    model.merge_history.assign(merges.begin(), merges.begin() + (n - k));
    model.assignments = cut_assignments(merges, n, k);
    return model;
}

double silhouette(const std::vector<EmbeddingVector>& vectors,
                  const std::vector<int>& assignments) {
    check_vectors(vectors);
    const int n = static_cast<int>(vectors.size());
    if (static_cast<int>(assignments.size()) != n)
        throw DataError("silhouette: assignment count mismatch");

    int k = 0;
    for (int a : assignments) {
        if (a < 0) throw DataError("silhouette: negative cluster id");
        k = std::max(k, a + 1);
    }
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
    int non_empty = 0;
    for (int s : sizes)
        if (s > 0) ++non_empty;
    if (non_empty < 2) throw DataError("silhouette needs at least 2 clusters");

    Eigen::MatrixXd dist(n, n);
    for (int i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (int j = 0; j < i; ++j) {
            const double d = (vectors[static_cast<std::size_t>(i)].vector -
                              vectors[static_cast<std::size_t>(j)].vector)
                                 .norm();
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }

    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const int ci = assignments[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(ci)] == 1) continue;  // singleton: contributes 0

        std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
        for (int j = 0; j < n; ++j)
            sum[static_cast<std::size_t>(assignments[static_cast<std::size_t>(j)])] += dist(i, j);

        const double a = sum[static_cast<std::size_t>(ci)] /
                         static_cast<double>(sizes[static_cast<std::size_t>(ci)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == ci || sizes[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, sum[static_cast<std::size_t>(c)] /
                                static_cast<double>(sizes[static_cast<std::size_t>(c)]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;  // 0/0 -> 0
    }
    return total / n;
}

std::pair<int, ClusterModel> select_k(const std::vector<EmbeddingVector>& vectors, int k_min,
                                      int k_max) {
    check_vectors(vectors);
    const int n = static_cast<int>(vectors.size());
    if (k_min < 2) throw ConfigError("select_k: k_min must be at least 2");
    if (k_max < k_min) throw ConfigError("select_k: k_max must be >= k_min");
    if (k_max > n)
        throw ConfigError("select_k: k_max=" + std::to_string(k_max) + " exceeds " +
                          std::to_string(n) + " vectors");

    const auto merges = full_merge_sequence(vectors);
    int best_k = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        const double s = silhouette(vectors, cut_assignments(merges, n, k));
        if (s > best_score) {  // strict: smallest k wins ties
            best_score = s;
            best_k = k;
        }
    }

    ClusterModel model;
    model.k = best_k;
    model.merge_history.assign(merges.begin(), merges.begin() + (n - best_k));
    model.assignments = cut_assignments(merges, n, best_k);
    return {best_k, std::move(model)};
}

Eigen::MatrixXd project_2d(const std::vector<EmbeddingVector>& vectors) {
    check_vectors(vectors);
    const int n = static_cast<int>(vectors.size());
    if (n < 2) throw DataError("project_2d needs at least 2 vectors");
    const int d = static_cast<int>(vectors.front().vector.size());

    Eigen::MatrixXd data(n, d);
    for (int i = 0; i < n; ++i) data.row(i) = vectors[static_cast<std::size_t>(i)].vector;
    data.rowwise() -= data.colwise().mean();

    const Eigen::MatrixXd cov = data.transpose() * data / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("project_2d: eigensolver failed");

    Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, 2);
    for (int pc = 0; pc < 2 && pc < d; ++pc) {
        // eigenvalues ascend in Eigen's solver; take from the top
        const int col = d - 1 - pc;
        if (eig.eigenvalues()(col) <= 1e-300) continue;  // flat direction stays zero
        Eigen::VectorXd dir = eig.eigenvectors().col(col);
        Eigen::Index peak = 0;
        dir.cwiseAbs().maxCoeff(&peak);
        if (dir(peak) < 0.0) dir = -dir;
        coords.col(pc) = data * dir;
    }
    return coords;
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

namespace {

const char* group_name(SeriesRole role) {
    return role == SeriesRole::Auxiliary ? "auxiliary" : "evaluation";
}

}  // namespace

void write_vectors_csv(const std::string& path, const std::vector<EmbeddingVector>& vectors) {
    check_vectors(vectors);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    const Eigen::Index dim = vectors.front().vector.size();
    out << "id,group";
    for (Eigen::Index j = 0; j < dim; ++j) out << ",v" << j;
    out << "\n";
    char buf[40];
    for (const auto& v : vectors) {
        out << v.label() << "," << group_name(v.group);
        for (Eigen::Index j = 0; j < dim; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v.vector(j));
            out << buf;
        }
        out << "\n";
    }
}

void write_clusters_csv(const std::string& path, const std::vector<EmbeddingVector>& vectors,
                        const ClusterModel& clusters, const Eigen::MatrixXd& coords) {
    check_vectors(vectors);
    const int n = static_cast<int>(vectors.size());
    if (static_cast<int>(clusters.assignments.size()) != n || coords.rows() != n)
        throw DataError("write_clusters_csv: size mismatch");

    // colour key: mean last-context-bin over the cluster's members
    std::vector<double> bin_sum(static_cast<std::size_t>(clusters.k), 0.0);
    std::vector<int> count(static_cast<std::size_t>(clusters.k), 0);
    for (int i = 0; i < n; ++i) {
        const int c = clusters.assignments[static_cast<std::size_t>(i)];
        bin_sum[static_cast<std::size_t>(c)] += vectors[static_cast<std::size_t>(i)].last_bin;
        count[static_cast<std::size_t>(c)] += 1;
    }

    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "id,cluster,x,y,colour\n";
    char buf[128];
    for (int i = 0; i < n; ++i) {
        const int c = clusters.assignments[static_cast<std::size_t>(i)];
        std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%.17g,%.6f\n",
                      vectors[static_cast<std::size_t>(i)].label().c_str(), c, coords(i, 0),
                      coords(i, 1),
                      bin_sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)]);
        out << buf;
    }
}

}  // namespace ordcast
