#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "ordcast/dataset.hpp"
#include "ordcast/seq2seq.hpp"

namespace ordcast {

// A context window destined for embedding, with enough provenance to label
// the exports.
struct Excerpt {
    OrdinalSequence sequence;
    std::string source_id;
    int offset = 0;  // window start in the source series
    SeriesRole group = SeriesRole::Auxiliary;
};

// The encoder's final hidden state for one excerpt.
struct EmbeddingVector {
    Eigen::VectorXd vector;  // length n_h
    std::string source_id;
    int offset = 0;
    SeriesRole group = SeriesRole::Auxiliary;
    int last_bin = 0;  // last context symbol; cluster exports colour by its mean

    std::string label() const { return source_id + ":" + std::to_string(offset); }
};

// Draws up to `count` distinct window offsets (stride 1) from the sequence,
// in ascending offset order; fewer windows than `count` means all of them.
std::vector<Excerpt> sample_excerpts(const OrdinalSequence& sequence, const std::string& id,
                                     SeriesRole group, int window_len, int count, Rng& rng);

// Deterministic (dropout-off) encoder pass per excerpt; returns h only.
std::vector<EmbeddingVector> extract_embeddings(const Seq2SeqModel& model,
                                                const std::vector<Excerpt>& excerpts);

struct ClusterModel {
    int k = 0;
    std::vector<int> assignments;  // cluster id in [0, k) per vector
    // (a, b, cost): positions in the active cluster list at merge time, a < b;
    // costs are non-decreasing (Ward monotonicity).
    std::vector<std::tuple<int, int, double>> merge_history;
};

// Agglomerative merging under Ward's variance-increase criterion
// n_a*n_b/(n_a+n_b) * |mu_a - mu_b|^2, ties broken by lowest pair position,
// until k clusters remain.
ClusterModel ward_cluster(const std::vector<EmbeddingVector>& vectors, int k);

// Mean silhouette width under Euclidean distance; points in singleton
// clusters contribute 0, as do 0/0 cases (all distances equal).
double silhouette(const std::vector<EmbeddingVector>& vectors,
                  const std::vector<int>& assignments);

// Sweeps k over [k_min, k_max] on one shared merge tree and returns the k
// with the largest silhouette (smallest k on ties) plus its clustering.
std::pair<int, ClusterModel> select_k(const std::vector<EmbeddingVector>& vectors,
                                      int k_min = 5, int k_max = 50);

// Centered projection onto the top-2 principal directions. Deterministic:
// each direction is oriented so its largest-magnitude component is positive.
// Degenerate data (zero variance, or width 1) yields zero columns.
Eigen::MatrixXd project_2d(const std::vector<EmbeddingVector>& vectors);

// id, group, v0..v{n_h-1} as comma-separated text.
void write_vectors_csv(const std::string& path, const std::vector<EmbeddingVector>& vectors);

// id, cluster, x, y, colour — colour is the cluster's mean last-context-bin.
void write_clusters_csv(const std::string& path, const std::vector<EmbeddingVector>& vectors,
                        const ClusterModel& clusters, const Eigen::MatrixXd& coords);

}  // namespace ordcast
