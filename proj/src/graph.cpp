#include "tmkl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "tmkl/parallel.hpp"
#include "tmkl/util.hpp"

namespace tmkl {
namespace {

double sigmoid(double x) {
    if (x > 30.0) return 1.0;
    if (x < -30.0) return 0.0;
    return 1.0 / (1.0 + std::exp(-x));
}

struct TickGrid {
    Timestamp start = 0;  // first tick
    Timestamp step = 0;
    std::size_t count = 0;
};

// Ticks every tick_hours from the first midnight at/before the earliest
// event; the last tick is the first grid point covering the latest event.
std::optional<TickGrid> make_grid(const Dataset& ds, int tick_hours) {
    if (tick_hours <= 0) throw ValidationError("tick_hours must be > 0");
    Timestamp lo = std::numeric_limits<Timestamp>::max();
    Timestamp hi = std::numeric_limits<Timestamp>::min();
    for (const auto& t : ds.tweets) {
        lo = std::min(lo, t.ts);
        hi = std::max(hi, t.ts);
    }
    for (const auto& r : ds.retweets) {
        lo = std::min(lo, r.ts);
        hi = std::max(hi, r.ts);
    }
    if (lo > hi) return std::nullopt;
    const Timestamp t0 = midnight_floor(lo, ds.utc_offset_hours);
    const Timestamp step = static_cast<Timestamp>(tick_hours) * 3600;
    const std::size_t count = static_cast<std::size_t>((hi - t0 + step - 1) / step);
    return TickGrid{t0 + step, step, std::max<std::size_t>(count, 1)};
}

SnapshotGraph snapshot_from_events(std::span<const RetweetEvent> events, Timestamp tick_ts) {
    SnapshotGraph g;
    g.tick_ts = tick_ts;
    std::map<std::pair<std::string, std::string>, double> counts;
    for (const auto& e : events) counts[{e.src, e.dst}] += 1.0;
    std::vector<std::string> nodes;
    for (const auto& [key, w] : counts) {
        (void)w;
        nodes.push_back(key.first);
        nodes.push_back(key.second);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    g.nodes = std::move(nodes);
    std::map<std::string, std::int32_t> index;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        index[g.nodes[i]] = static_cast<std::int32_t>(i);
    g.edges.reserve(counts.size());
    for (const auto& [key, w] : counts)
        g.edges.push_back({index[key.first], index[key.second], w});
    return g;
}

double cosine(std::span<const double> x, std::span<const double> y) {
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xy += x[i] * y[i];
        xx += x[i] * x[i];
        yy += y[i] * y[i];
    }
    if (xx <= 0.0 || yy <= 0.0) return 0.0;
    return xy / (std::sqrt(xx) * std::sqrt(yy));
}

double euclidean(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

TickEmbedding embed_and_score_tick(const SnapshotGraph& g, const LabelMap& train_labels,
                                   std::span<const std::string> users, const LineOptions& line) {
    TickEmbedding out;
    out.scores.assign(users.size(), 0.0);
    if (g.edges.empty()) return out;
    bool has_yes = false, has_no = false;
    for (const auto& node : g.nodes) {
        auto it = train_labels.find(node);
        if (it == train_labels.end()) continue;
        (it->second == Stance::Yes ? has_yes : has_no) = true;
        if (has_yes && has_no) break;
    }
    if (!has_yes || !has_no) return out;
    out.embedding = train_embedding(g, line);
    const auto scored = class_median_transform(*out.embedding, train_labels, users);
    for (std::size_t i = 0; i < users.size(); ++i) out.scores[i] = scored.at(users[i]);
    return out;
}

std::optional<std::int32_t> SnapshotGraph::node_index(const std::string& id) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
    if (it == nodes.end() || *it != id) return std::nullopt;
    return static_cast<std::int32_t>(it - nodes.begin());
}

std::vector<SnapshotGraph> build_snapshots(const Dataset& ds, int tick_hours) {
    const auto grid = make_grid(ds, tick_hours);
    if (!grid) return {};
    std::vector<RetweetEvent> events = ds.retweets;
    std::stable_sort(events.begin(), events.end(),
                     [](const RetweetEvent& a, const RetweetEvent& b) { return a.ts < b.ts; });
    std::vector<SnapshotGraph> out;
    out.reserve(grid->count);
    std::size_t upto = 0;
    for (std::size_t k = 0; k < grid->count; ++k) {
        const Timestamp tick = grid->start + static_cast<Timestamp>(k) * grid->step;
        while (upto < events.size() && events[upto].ts <= tick) ++upto;
        out.push_back(snapshot_from_events({events.data(), upto}, tick));
    }
    return out;
}

std::vector<SnapshotGraph> build_snapshots_sliding(const Dataset& ds, int tick_hours,
                                                   int window_days) {
    if (window_days <= 0) throw ValidationError("window_days must be > 0");
    const auto grid = make_grid(ds, tick_hours);
    if (!grid) return {};
    std::vector<RetweetEvent> events = ds.retweets;
    std::stable_sort(events.begin(), events.end(),
                     [](const RetweetEvent& a, const RetweetEvent& b) { return a.ts < b.ts; });
    const Timestamp window = static_cast<Timestamp>(window_days) * 86400;
    std::vector<SnapshotGraph> out;
    out.reserve(grid->count);
    std::size_t lo = 0, hi = 0;
    for (std::size_t k = 0; k < grid->count; ++k) {
        const Timestamp tick = grid->start + static_cast<Timestamp>(k) * grid->step;
        while (hi < events.size() && events[hi].ts <= tick) ++hi;
        while (lo < hi && events[lo].ts <= tick - window) ++lo;
        out.push_back(snapshot_from_events({events.data() + lo, hi - lo}, tick));
    }
    return out;
}

std::optional<std::size_t> NodeEmbedding::index_of(const std::string& id) const {
    const auto it = std::lower_bound(users.begin(), users.end(), id);
    if (it == users.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - users.begin());
}

NodeEmbedding train_embedding(const SnapshotGraph& g, const LineOptions& opts) {
    if (g.edges.empty()) throw ValidationError("train_embedding: graph has no edges");
    if (opts.dim <= 0) throw ValidationError("train_embedding: dim must be > 0");
    const std::size_t n = g.nodes.size();
    const std::size_t dim = static_cast<std::size_t>(opts.dim);

    std::vector<double> edge_weights;
    edge_weights.reserve(g.edges.size());
    std::vector<double> out_degree(n, 0.0);
    for (const auto& e : g.edges) {
        edge_weights.push_back(e.weight);
        out_degree[static_cast<std::size_t>(e.src)] += e.weight;
    }
    const AliasTable edge_table(edge_weights);
    std::vector<double> noise(n);
    for (std::size_t i = 0; i < n; ++i) noise[i] = std::pow(out_degree[i], 0.75);
    const AliasTable noise_table(noise);

    NodeEmbedding emb;
    emb.tick_ts = g.tick_ts;
    emb.dim = dim;
    emb.users = g.nodes;
    emb.vertex.resize(n * dim);
    emb.context.resize(n * dim);

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(dim),
                                                0.5 / static_cast<double>(dim));
    for (auto& v : emb.vertex) v = init(rng);
    for (auto& v : emb.context) v = init(rng);

    const std::int64_t total =
        opts.total_samples > 0 ? opts.total_samples
                               : 200 * static_cast<std::int64_t>(g.edges.size());

    // Fixed probe batch for the loss trace; drawn from an independent stream
    // so enabling it does not perturb training.
    struct Probe {
        std::size_t u, v;
        std::vector<std::size_t> negs;
    };
    std::vector<Probe> probes;
    std::vector<std::int64_t> checkpoints;
    if (opts.loss_probes > 0) {
        std::mt19937_64 prng(derive_seed(opts.seed, 0x70726f6265ull));
        for (int i = 0; i < 64; ++i) {
            const auto& e = g.edges[edge_table.sample(prng)];
            Probe p{static_cast<std::size_t>(e.src), static_cast<std::size_t>(e.dst), {}};
            for (int k = 0; k < opts.negatives; ++k) p.negs.push_back(noise_table.sample(prng));
            probes.push_back(std::move(p));
        }
        for (int q = 1; q <= opts.loss_probes; ++q)
            checkpoints.push_back(total * q / opts.loss_probes);
    }
    const auto probe_loss = [&]() {
        double acc = 0.0;
        for (const auto& p : probes) {
            const double* vu = emb.vertex.data() + p.u * dim;
            const double* cv = emb.context.data() + p.v * dim;
            double x = 0.0;
            for (std::size_t d = 0; d < dim; ++d) x += vu[d] * cv[d];
            acc -= std::log(std::max(sigmoid(x), 1e-12));
            for (std::size_t k : p.negs) {
                const double* ck = emb.context.data() + k * dim;
                double xn = 0.0;
                for (std::size_t d = 0; d < dim; ++d) xn += vu[d] * ck[d];
                acc -= std::log(std::max(sigmoid(-xn), 1e-12));
            }
        }
        return acc / static_cast<double>(probes.size());
    };

    std::vector<double> err(dim);
    std::size_t next_checkpoint = 0;
    for (std::int64_t s = 0; s < total; ++s) {
        const double progress = static_cast<double>(s) / static_cast<double>(total);
        const double lr = opts.lr_initial + (opts.lr_final - opts.lr_initial) * progress;

        const auto& e = g.edges[edge_table.sample(rng)];
        double* vu = emb.vertex.data() + static_cast<std::size_t>(e.src) * dim;
        std::fill(err.begin(), err.end(), 0.0);
        for (int d = 0; d <= opts.negatives; ++d) {
            const std::size_t target =
                d == 0 ? static_cast<std::size_t>(e.dst) : noise_table.sample(rng);
            const double label = d == 0 ? 1.0 : 0.0;
            double* ct = emb.context.data() + target * dim;
            double x = 0.0;
            for (std::size_t k = 0; k < dim; ++k) x += vu[k] * ct[k];
            const double grad = (label - sigmoid(x)) * lr;
            for (std::size_t k = 0; k < dim; ++k) err[k] += grad * ct[k];
            for (std::size_t k = 0; k < dim; ++k) ct[k] += grad * vu[k];
        }
        for (std::size_t k = 0; k < dim; ++k) vu[k] += err[k];

        if (next_checkpoint < checkpoints.size() && s + 1 == checkpoints[next_checkpoint]) {
            emb.probe_losses.push_back(probe_loss());
            ++next_checkpoint;
        }
    }
    return emb;
}

std::map<std::string, double> class_median_transform(const NodeEmbedding& emb,
                                                     const LabelMap& train_labels,
                                                     std::span<const std::string> users) {
    std::vector<std::size_t> yes_idx, no_idx;
    for (std::size_t i = 0; i < emb.users.size(); ++i) {
        auto it = train_labels.find(emb.users[i]);
        if (it == train_labels.end()) continue;
        (it->second == Stance::Yes ? yes_idx : no_idx).push_back(i);
    }
    if (yes_idx.empty() || no_idx.empty())
        throw ValidationError("class_median_transform: a class has no embedded training users");

    const auto coord_median = [&](const std::vector<std::size_t>& idx) {
        std::vector<double> median(emb.dim);
        std::vector<double> column(idx.size());
        for (std::size_t d = 0; d < emb.dim; ++d) {
            for (std::size_t k = 0; k < idx.size(); ++k)
                column[k] = emb.vertex[idx[k] * emb.dim + d];
            std::sort(column.begin(), column.end());
            const std::size_t m = column.size();
            median[d] = m % 2 == 1 ? column[m / 2] : 0.5 * (column[m / 2 - 1] + column[m / 2]);
        }
        return median;
    };
    const std::vector<double> median_yes = coord_median(yes_idx);
    const std::vector<double> median_no = coord_median(no_idx);

    std::vector<double> mean(emb.dim, 0.0);
    for (std::size_t i = 0; i < emb.users.size(); ++i)
        for (std::size_t d = 0; d < emb.dim; ++d) mean[d] += emb.vertex[i * emb.dim + d];
    for (auto& x : mean) x /= static_cast<double>(emb.users.size());

    std::map<std::string, double> out;
    for (const auto& u : users) {
        const auto idx = emb.index_of(u);
        const std::span<const double> vec = idx ? emb.vertex_vec(*idx) : std::span<const double>(mean);
        out[u] = euclidean(median_yes, vec) - euclidean(median_no, vec);
    }
    return out;
}

std::map<std::string, ItemSeries> network_item_series(std::span<const SnapshotGraph> ticks,
                                                      const LabelMap& train_labels,
                                                      std::span<const std::string> users,
                                                      const NetworkSeriesOptions& opts) {
    if (ticks.empty()) throw ValidationError("network_item_series: no ticks");
    std::vector<std::vector<double>> per_tick(ticks.size());
    parallel_for(opts.jobs, ticks.size(), [&](std::size_t t) {
        LineOptions line = opts.line;
        line.seed = derive_seed(opts.line.seed, t);
        per_tick[t] = embed_and_score_tick(ticks[t], train_labels, users, line).scores;
    });
    std::map<std::string, ItemSeries> out;
    for (std::size_t u = 0; u < users.size(); ++u) {
        ItemSeries s;
        s.user_id = users[u];
        s.dim = 1;
        for (std::size_t t = 0; t < ticks.size(); ++t) {
            const double v = per_tick[t][u];
            s.push(std::span<const double>(&v, 1), ticks[t].tick_ts);
        }
        out[users[u]] = std::move(s);
    }
    return out;
}

PolaritySeries polarity_timeseries(const Dataset& ds, const LabelMap& train_labels,
                                   const LabelMap& test_labels, const PolarityOptions& opts) {
    bool yes_present = false, no_present = false;
    for (const auto& [id, s] : test_labels) {
        (void)id;
        (s == Stance::Yes ? yes_present : no_present) = true;
    }
    if (!yes_present || !no_present)
        throw ValidationError("polarity_timeseries: both test classes must be present");

    const std::vector<SnapshotGraph> ticks =
        opts.mode == PolarityMode::Cumulative
            ? build_snapshots(ds, opts.tick_hours)
            : build_snapshots_sliding(ds, opts.tick_hours, opts.window_days);
    if (ticks.empty()) throw ValidationError("polarity_timeseries: dataset has no events");

    PolaritySeries out;
    out.ticks.resize(ticks.size());
    out.yes.assign(ticks.size(), 0.0);
    out.no.assign(ticks.size(), 0.0);

    std::vector<double> yes_scores(ticks.size(), 0.0), no_scores(ticks.size(), 0.0);
    parallel_for(opts.jobs, ticks.size(), [&](std::size_t t) {
        const SnapshotGraph& g = ticks[t];
        out.ticks[t] = g.tick_ts;
        if (g.edges.empty()) return;  // no signal yet: scores stay zero
        LineOptions line = opts.line;
        line.seed = derive_seed(opts.line.seed, t);
        const NodeEmbedding emb = train_embedding(g, line);

        std::vector<double> mean(emb.dim, 0.0);
        for (std::size_t i = 0; i < emb.users.size(); ++i)
            for (std::size_t d = 0; d < emb.dim; ++d) mean[d] += emb.vertex[i * emb.dim + d];
        for (auto& x : mean) x /= static_cast<double>(emb.users.size());
        const auto user_vec = [&](const std::string& id) -> std::span<const double> {
            const auto idx = emb.index_of(id);
            return idx ? emb.vertex_vec(*idx) : std::span<const double>(mean);
        };

        std::vector<double> avg_yes(emb.dim, 0.0), avg_no(emb.dim, 0.0);
        std::size_t n_yes = 0, n_no = 0;
        for (const auto& [id, stance] : train_labels) {
            const auto v = user_vec(id);
            auto& acc = stance == Stance::Yes ? avg_yes : avg_no;
            for (std::size_t d = 0; d < emb.dim; ++d) acc[d] += v[d];
            (stance == Stance::Yes ? n_yes : n_no)++;
        }
        if (n_yes == 0 || n_no == 0) return;
        for (auto& x : avg_yes) x /= static_cast<double>(n_yes);
        for (auto& x : avg_no) x /= static_cast<double>(n_no);

        double sum_yes = 0.0, sum_no = 0.0;
        std::size_t cnt_yes = 0, cnt_no = 0;
        for (const auto& [id, stance] : test_labels) {
            const auto v = user_vec(id);
            const double score = cosine(v, avg_yes) - cosine(v, avg_no);
            if (stance == Stance::Yes) {
                sum_yes += score;
                ++cnt_yes;
            } else {
                sum_no += score;
                ++cnt_no;
            }
        }
        yes_scores[t] = cnt_yes ? sum_yes / static_cast<double>(cnt_yes) : 0.0;
        no_scores[t] = cnt_no ? sum_no / static_cast<double>(cnt_no) : 0.0;
    });

    for (std::size_t t = 0; t < ticks.size(); ++t) {
        out.yes[t] = yes_scores[t] - yes_scores[0];
        out.no[t] = no_scores[t] - no_scores[0];
    }
    return out;
}

}  // namespace tmkl
