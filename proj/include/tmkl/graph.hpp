#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmkl/types.hpp"

namespace tmkl {

struct WeightedEdge {
    std::int32_t src = 0;
    std::int32_t dst = 0;
    double weight = 0.0;  // cumulative retweet count, >= 1
};

// Directed weighted retweet graph at one 12-hour tick.
struct SnapshotGraph {
    Timestamp tick_ts = 0;
    std::vector<std::string> nodes;  // sorted, unique; every edge endpoint
    std::vector<WeightedEdge> edges;

    std::optional<std::int32_t> node_index(const std::string& id) const;
};

// Cumulative graphs on a fixed tick grid: ticks every `tick_hours` from the
// first midnight at/before the earliest event, extending until every event
// is covered. Each snapshot aggregates all retweets with ts <= tick_ts.
std::vector<SnapshotGraph> build_snapshots(const Dataset& ds, int tick_hours = 12);

// Same tick grid but each snapshot only aggregates retweets in
// (tick_ts - window_days, tick_ts].
std::vector<SnapshotGraph> build_snapshots_sliding(const Dataset& ds, int tick_hours,
                                                   int window_days);

struct NodeEmbedding {
    Timestamp tick_ts = 0;
    std::size_t dim = 0;
    std::vector<std::string> users;
    std::vector<double> vertex;   // users.size() * dim
    std::vector<double> context;  // users.size() * dim
    std::vector<double> probe_losses;  // filled when LineOptions.loss_probes > 0

    std::span<const double> vertex_vec(std::size_t i) const { return {vertex.data() + i * dim, dim}; }
    std::optional<std::size_t> index_of(const std::string& id) const;
};

struct LineOptions {
    int dim = 50;
    std::int64_t total_samples = 0;  // 0 -> 200 * edge count
    int negatives = 5;
    double lr_initial = 0.025;
    double lr_final = 0.0001;
    std::uint64_t seed = 1;
    int loss_probes = 0;  // sampled-edge NLL checkpoints to record
};

// Second-order proximity embedding trained by SGD over edges sampled
// proportionally to weight, with negative nodes drawn ~ out-degree^0.75.
// Single-threaded and deterministic given the seed.
NodeEmbedding train_embedding(const SnapshotGraph& g, const LineOptions& opts);

// s(u) = d(median_YES, L_u) - d(median_NO, L_u), Euclidean distance to the
// coordinate-wise class medians of the embedded training users. Users absent
// from the embedding are first assigned the mean of all embedded vectors.
std::map<std::string, double> class_median_transform(const NodeEmbedding& emb,
                                                     const LabelMap& train_labels,
                                                     std::span<const std::string> users);

// Embedding plus per-user scores for one tick. Ticks that carry no usable
// signal yet (no edges, or a class without embedded training users) yield
// no embedding and all-zero scores.
struct TickEmbedding {
    std::optional<NodeEmbedding> embedding;
    std::vector<double> scores;  // aligned with the `users` argument
};

TickEmbedding embed_and_score_tick(const SnapshotGraph& g, const LabelMap& train_labels,
                                   std::span<const std::string> users, const LineOptions& line);

struct NetworkSeriesOptions {
    LineOptions line;
    int jobs = 1;
};

// One 1-dimensional item per tick per user: the class-median score at that
// tick, timestamped by the tick. Embeddings are retrained per tick with a
// seed derived from (seed, tick index).
std::map<std::string, ItemSeries> network_item_series(std::span<const SnapshotGraph> ticks,
                                                      const LabelMap& train_labels,
                                                      std::span<const std::string> users,
                                                      const NetworkSeriesOptions& opts);

enum class PolarityMode { Cumulative, Sliding };

struct PolarityOptions {
    PolarityMode mode = PolarityMode::Cumulative;
    int tick_hours = 12;
    int window_days = 7;
    LineOptions line;
    int jobs = 1;
};

struct PolaritySeries {
    std::vector<Timestamp> ticks;
    std::vector<double> yes;  // class-mean scores, shifted so yes[0] == 0
    std::vector<double> no;   // shifted so no[0] == 0
};

// Mean over test users per class of cos(u, avg_YES) - cos(u, avg_NO), where
// the class averages are over training users; both series shifted to start
// at zero.
PolaritySeries polarity_timeseries(const Dataset& ds, const LabelMap& train_labels,
                                   const LabelMap& test_labels, const PolarityOptions& opts);

}  // namespace tmkl
