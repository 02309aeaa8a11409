#include "tmkl/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include <json.hpp>

#include "tmkl/parallel.hpp"
#include "tmkl/text.hpp"
#include "tmkl/util.hpp"

namespace tmkl {
namespace {

namespace fs = std::filesystem;

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::uint64_t gamma_bits(double g) { return std::bit_cast<std::uint64_t>(g); }

}  // namespace

F1Result macro_f1(std::span<const Stance> pred, std::span<const Stance> truth) {
    if (pred.size() != truth.size())
        throw ValidationError("macro_f1: prediction/truth length mismatch");
    if (pred.empty()) throw ValidationError("macro_f1: empty inputs");
    std::size_t tp_yes = 0, fp_yes = 0, fn_yes = 0;
    std::size_t tp_no = 0, fp_no = 0, fn_no = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == Stance::Yes;
        const bool t = truth[i] == Stance::Yes;
        if (p && t) ++tp_yes;
        if (p && !t) ++fp_yes;
        if (!p && t) ++fn_yes;
        if (!p && !t) ++tp_no;
        if (!p && t) ++fp_no;
        if (p && !t) ++fn_no;
    }
    F1Result r;
    r.precision_yes = safe_div(static_cast<double>(tp_yes), static_cast<double>(tp_yes + fp_yes));
    r.recall_yes = safe_div(static_cast<double>(tp_yes), static_cast<double>(tp_yes + fn_yes));
    r.f1_yes = safe_div(2.0 * r.precision_yes * r.recall_yes, r.precision_yes + r.recall_yes);
    r.precision_no = safe_div(static_cast<double>(tp_no), static_cast<double>(tp_no + fp_no));
    r.recall_no = safe_div(static_cast<double>(tp_no), static_cast<double>(tp_no + fn_no));
    r.f1_no = safe_div(2.0 * r.precision_no * r.recall_no, r.precision_no + r.recall_no);
    r.macro_f1 = 0.5 * (r.f1_yes + r.f1_no);
    return r;
}

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::SvmW: return "svm_w";
        case ModelKind::SvmWt: return "svm_wt";
        case ModelKind::SvmN: return "svm_n";
        case ModelKind::SvmNt: return "svm_nt";
        case ModelKind::SvmSum: return "svm_sum";
        case ModelKind::Mckl: return "mckl";
        case ModelKind::BaselineLr: return "baseline_lr";
        case ModelKind::BaselineSvm: return "baseline_svm";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    static const std::map<std::string, ModelKind> table = {
        {"svm_w", ModelKind::SvmW},         {"svm_wt", ModelKind::SvmWt},
        {"svm_n", ModelKind::SvmN},         {"svm_nt", ModelKind::SvmNt},
        {"svm_sum", ModelKind::SvmSum},     {"mckl", ModelKind::Mckl},
        {"baseline_lr", ModelKind::BaselineLr}, {"baseline_svm", ModelKind::BaselineSvm}};
    const auto it = table.find(s);
    if (it == table.end()) throw ValidationError("unknown model '" + s + "'");
    return it->second;
}

GridSpec GridSpec::decades() {
    GridSpec g;
    g.c_values = {1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3};
    g.time_gammas = g.c_values;
    g.feature_gammas = g.c_values;
    g.lambdas = g.c_values;
    return g;
}

std::vector<int> stratified_folds(std::span<const Stance> y, int folds, std::uint64_t seed) {
    if (folds < 2) throw ValidationError("stratified_folds: need at least 2 folds");
    std::vector<std::size_t> yes_idx, no_idx;
    for (std::size_t i = 0; i < y.size(); ++i)
        (y[i] == Stance::Yes ? yes_idx : no_idx).push_back(i);
    if (yes_idx.size() < 2 || no_idx.size() < 2)
        throw ValidationError("stratified_folds: a class has fewer than 2 members");
    std::mt19937_64 rng(seed);
    std::shuffle(yes_idx.begin(), yes_idx.end(), rng);
    std::shuffle(no_idx.begin(), no_idx.end(), rng);
    std::vector<int> assign(y.size(), -1);
    for (std::size_t k = 0; k < yes_idx.size(); ++k)
        assign[yes_idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    for (std::size_t k = 0; k < no_idx.size(); ++k)
        assign[no_idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    return assign;
}

double RunReport::mean_macro_f1() const {
    double acc = 0.0;
    for (const auto& d : days) acc += d.f1.macro_f1;
    return days.empty() ? 0.0 : acc / static_cast<double>(days.size());
}

std::string RunReport::to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["mode"] = mode;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["mean_macro_f1"] = mean_macro_f1();
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : days) {
        nlohmann::json dj;
        dj["day"] = d.day;
        dj["n_train"] = d.n_train;
        dj["n_test"] = d.n_test;
        dj["macro_f1"] = d.f1.macro_f1;
        dj["f1_yes"] = d.f1.f1_yes;
        dj["f1_no"] = d.f1.f1_no;
        dj["precision_yes"] = d.f1.precision_yes;
        dj["recall_yes"] = d.f1.recall_yes;
        dj["precision_no"] = d.f1.precision_no;
        dj["recall_no"] = d.f1.recall_no;
        dj["hyperparameters"] = d.hyperparameters;
        if (!d.kernel_weights.empty()) dj["kernel_weights"] = d.kernel_weights;
        arr.push_back(std::move(dj));
    }
    j["days"] = std::move(arr);
    return j.dump(2) + "\n";
}

std::string RunReport::to_csv() const {
    std::string out = "day,n_test,macro_f1,f1_yes,f1_no\n";
    char buf[128];
    for (const auto& d : days) {
        std::snprintf(buf, sizeof buf, "%d,%zu,%.6f,%.6f,%.6f\n", d.day, d.n_test, d.f1.macro_f1,
                      d.f1.f1_yes, d.f1.f1_no);
        out += buf;
    }
    return out;
}

std::string RunReport::timing_csv() const {
    std::string out = "day,wall_ms\n";
    char buf[64];
    for (const auto& d : days) {
        std::snprintf(buf, sizeof buf, "%d,%.1f\n", d.day, d.wall_ms);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------

struct RollingRunner::Impl {
    Dataset ds;
    HarnessOptions opts;
    TimeScale scale;

    std::vector<std::string> train_ids_all;  // sorted label keys
    std::vector<std::string> test_ids_all;
    std::vector<std::string> all_ids;  // train then test
    std::map<std::string, std::size_t> all_index;

    std::map<std::string, ItemSeries> full_text;
    std::vector<SnapshotGraph> snapshots;
    std::vector<std::optional<NodeEmbedding>> tick_embeddings;
    Matrix tick_score;  // all_ids x ticks

    using Key = std::pair<int, std::uint64_t>;
    struct DayCtx {
        bool ready = false;
        Timestamp boundary = 0;
        std::uint64_t day_seed = 0;
        std::vector<std::string> train_ids;
        std::vector<Stance> train_y;
        std::vector<std::string> eligible_test;
        std::vector<Stance> test_y;
        std::vector<ItemSeries> text_train, text_test;
        std::vector<ItemSeries> net_train, net_test;
        std::size_t n_ticks = 0;
        std::vector<int> fold_of;  // per train index
        std::vector<std::vector<int>> fold_train, fold_val;
        std::map<Key, KernelMatrix> train_k;
        std::map<Key, std::vector<double>> raw_diag;
        std::map<Key, KernelBlock> cross_k;
        std::map<int, std::map<std::string, double>> chosen;  // key: kind*4+mode
        std::map<int, Matrix> feat_train, feat_test;          // key: (int)mode
        std::uint64_t text_hash = 0, net_hash = 0;
    };
    std::vector<DayCtx> days;
    std::size_t cache_hits = 0;

    Impl(Dataset dataset, HarnessOptions options) : ds(std::move(dataset)), opts(std::move(options)) {
        validate_dataset(ds);
        scale.origin = ds.announcement_ts;
        for (const auto& [id, s] : ds.labels) {
            (void)s;
            train_ids_all.push_back(id);
        }
        for (const auto& [id, s] : ds.test_labels) {
            (void)s;
            test_ids_all.push_back(id);
        }
        all_ids = train_ids_all;
        all_ids.insert(all_ids.end(), test_ids_all.begin(), test_ids_all.end());
        for (std::size_t i = 0; i < all_ids.size(); ++i) all_index[all_ids[i]] = i;

        for (const auto& t : ds.tweets) {
            if (!train_ids_all.empty() || !test_ids_all.empty()) {
                if (!ds.labels.count(t.user) && !ds.test_labels.count(t.user)) continue;
            }
            if (t.vec.empty())
                throw ValidationError("tweet by '" + t.user +
                                      "' has no vector; supply an embedding table at load time");
            auto& series = full_text[t.user];
            series.user_id = t.user;
            series.push(t.vec, t.ts);
        }

        snapshots = build_snapshots(ds, opts.tick_hours);
        tick_embeddings.resize(snapshots.size());
        tick_score = Matrix(all_ids.size(), snapshots.size());
        const std::uint64_t line_seed = derive_seed(opts.seed, 0x11eull);
        parallel_for(opts.jobs, snapshots.size(), [&](std::size_t t) {
            LineOptions line = opts.line;
            line.seed = derive_seed(line_seed, t);
            TickEmbedding te = embed_and_score_tick(snapshots[t], ds.labels, all_ids, line);
            tick_embeddings[t] = std::move(te.embedding);
            for (std::size_t u = 0; u < all_ids.size(); ++u) tick_score.at(u, t) = te.scores[u];
        });

        days.resize(static_cast<std::size_t>(ds.horizon_days));
    }

    DayCtx& ensure_day(int day) {
        DayCtx& d = days.at(static_cast<std::size_t>(day));
        if (d.ready) return d;
        d.boundary = day_boundary(ds, day);
        d.day_seed = derive_seed(opts.seed, 0xda70000ull + static_cast<std::uint64_t>(day));

        const auto prefix_series = [&](const ItemSeries& s) {
            ItemSeries out;
            out.user_id = s.user_id;
            out.dim = s.dim;
            const auto it = std::upper_bound(s.ts.begin(), s.ts.end(), d.boundary);
            const std::size_t m = static_cast<std::size_t>(it - s.ts.begin());
            out.ts.assign(s.ts.begin(), s.ts.begin() + static_cast<std::ptrdiff_t>(m));
            out.values.assign(s.values.begin(),
                              s.values.begin() + static_cast<std::ptrdiff_t>(m * s.dim));
            return out;
        };

        for (const auto& id : train_ids_all) {
            const auto it = full_text.find(id);
            if (it == full_text.end()) continue;
            ItemSeries s = prefix_series(it->second);
            if (s.empty()) continue;  // not yet active; excluded for this day
            d.train_ids.push_back(id);
            d.train_y.push_back(ds.labels.at(id));
            d.text_train.push_back(std::move(s));
        }
        for (const auto& id : test_ids_all) {
            const auto it = full_text.find(id);
            if (it == full_text.end()) continue;
            ItemSeries s = prefix_series(it->second);
            if (s.empty()) continue;
            d.eligible_test.push_back(id);
            d.test_y.push_back(ds.test_labels.at(id));
            d.text_test.push_back(std::move(s));
        }
        if (d.train_ids.empty()) throw ValidationError("no active training users at day " +
                                                       std::to_string(day));

        d.n_ticks = 0;
        while (d.n_ticks < snapshots.size() && snapshots[d.n_ticks].tick_ts <= d.boundary)
            ++d.n_ticks;
        const auto net_series = [&](const std::string& id) {
            ItemSeries s;
            s.user_id = id;
            s.dim = 1;
            const std::size_t uid = all_index.at(id);
            for (std::size_t t = 0; t < d.n_ticks; ++t) {
                const double v = tick_score.at(uid, t);
                s.push(std::span<const double>(&v, 1), snapshots[t].tick_ts);
            }
            return s;
        };
        if (d.n_ticks > 0) {
            for (const auto& id : d.train_ids) d.net_train.push_back(net_series(id));
            for (const auto& id : d.eligible_test) d.net_test.push_back(net_series(id));
        }

        d.fold_of = stratified_folds(d.train_y, opts.folds, derive_seed(d.day_seed, 901));
        d.fold_train.assign(static_cast<std::size_t>(opts.folds), {});
        d.fold_val.assign(static_cast<std::size_t>(opts.folds), {});
        for (std::size_t i = 0; i < d.fold_of.size(); ++i)
            for (int f = 0; f < opts.folds; ++f)
                (d.fold_of[i] == f ? d.fold_val : d.fold_train)[static_cast<std::size_t>(f)]
                    .push_back(static_cast<int>(i));

        Fnv1a th;
        for (const auto& s : d.text_train) hash_series(th, s);
        for (const auto& s : d.text_test) hash_series(th, s);
        d.text_hash = th.digest();
        Fnv1a nh;
        for (const auto& s : d.net_train) hash_series(nh, s);
        for (const auto& s : d.net_test) hash_series(nh, s);
        d.net_hash = nh.digest();

        d.ready = true;
        return d;
    }

    static void hash_series(Fnv1a& h, const ItemSeries& s) {
        h.update(s.user_id);
        h.update(s.ts.data(), s.ts.size() * sizeof(Timestamp));
        h.update_f64s(s.values);
    }

    // ---- kernel assembly -------------------------------------------------

    GramOptions gram_opts() const {
        GramOptions g;
        g.jobs = opts.jobs;
        g.time_scale = scale;
        return g;
    }

    std::string cache_path(std::uint64_t key_hash) const {
        return (fs::path(opts.cache_dir) / ("tmkl-" + hex64(key_hash) + ".ckrn")).string();
    }

    KernelMatrix cached_raw(std::uint64_t content_hash, KernelTag tag,
                            std::span<const ItemSeries> series,
                            const std::function<KernelMatrix()>& compute) {
        if (opts.cache_dir.empty()) return compute();
        fs::create_directories(opts.cache_dir);
        const std::string path = cache_path(content_hash);
        if (fs::exists(path)) {
            KernelMatrix K = read_kernel_cache(path);
            bool match = K.n() == series.size();
            for (std::size_t i = 0; match && i < series.size(); ++i)
                match = K.user_index[i] == series[i].user_id;
            if (match) {
                K.tag = tag;
                ++cache_hits;
                return K;
            }
        }
        KernelMatrix K = compute();
        write_kernel_cache(path, K);
        return K;
    }

    std::uint64_t kernel_hash(const DayCtx& d, KernelTag tag, double gamma) const {
        Fnv1a h;
        h.update("gram");
        h.update(to_string(tag));
        h.update_u64(gamma_bits(gamma));
        h.update_u64(static_cast<std::uint64_t>(scale.origin));
        h.update_u64(tag == KernelTag::N || tag == KernelTag::NT ? d.net_hash : d.text_hash);
        return h.digest();
    }

    const KernelMatrix& train_kernel(DayCtx& d, KernelTag tag, double gamma) {
        const Key key{static_cast<int>(tag), gamma_bits(gamma)};
        const auto it = d.train_k.find(key);
        if (it != d.train_k.end()) return it->second;

        KernelMatrix raw;
        switch (tag) {
            case KernelTag::W:
                raw = cached_raw(kernel_hash(d, tag, 0.0), tag, d.text_train, [&] {
                    return gram(d.text_train, SubKernelSpec::linear(), std::nullopt, tag,
                                gram_opts());
                });
                break;
            case KernelTag::N:
                if (d.net_train.empty())
                    throw ValidationError("no network ticks before this day's boundary");
                raw = cached_raw(kernel_hash(d, tag, 0.0), tag, d.net_train, [&] {
                    return gram(d.net_train, SubKernelSpec::linear(), std::nullopt, tag,
                                gram_opts());
                });
                break;
            case KernelTag::WT: {
                // One pass over item pairs fills the whole configured grid.
                std::vector<double> missing;
                for (double g : opts.grid.time_gammas) {
                    const Key k2{static_cast<int>(tag), gamma_bits(g)};
                    if (d.train_k.count(k2)) continue;
                    if (!opts.cache_dir.empty() && fs::exists(cache_path(kernel_hash(d, tag, g))))
                        continue;
                    missing.push_back(g);
                }
                const bool in_grid =
                    std::find(opts.grid.time_gammas.begin(), opts.grid.time_gammas.end(), gamma) !=
                    opts.grid.time_gammas.end();
                if (!in_grid) missing.push_back(gamma);
                if (!missing.empty()) {
                    auto grams = gram_time_grid(d.text_train, SubKernelSpec::linear(), missing,
                                                tag, gram_opts());
                    for (std::size_t k = 0; k < missing.size(); ++k) {
                        if (!opts.cache_dir.empty()) {
                            fs::create_directories(opts.cache_dir);
                            write_kernel_cache(cache_path(kernel_hash(d, tag, missing[k])),
                                               grams[k]);
                        }
                        store_kernel(d, tag, missing[k], std::move(grams[k]));
                    }
                }
                for (double g : opts.grid.time_gammas) {
                    const Key k2{static_cast<int>(tag), gamma_bits(g)};
                    if (d.train_k.count(k2)) continue;
                    KernelMatrix loaded = cached_raw(kernel_hash(d, tag, g), tag, d.text_train, [&] {
                        auto one = gram_time_grid(d.text_train, SubKernelSpec::linear(),
                                                  std::vector<double>{g}, tag, gram_opts());
                        return std::move(one[0]);
                    });
                    store_kernel(d, tag, g, std::move(loaded));
                }
                return d.train_k.at(key);
            }
            case KernelTag::NT:
                if (d.net_train.empty())
                    throw ValidationError("no network ticks before this day's boundary");
                raw = cached_raw(kernel_hash(d, tag, gamma), tag, d.net_train, [&] {
                    return gram_shared_time(d.net_train, SubKernelSpec::rbf(gamma), tag,
                                            gram_opts());
                });
                break;
            case KernelTag::Sum: {
                std::vector<KernelMatrix> parts;
                parts.push_back(train_kernel(d, KernelTag::W, 0.0));
                parts.push_back(train_kernel(d, KernelTag::WT, gamma));
                parts.push_back(train_kernel(d, KernelTag::N, 0.0));
                parts.push_back(train_kernel(d, KernelTag::NT, gamma));
                KernelMatrix sum = sum_kernels(parts);
                d.raw_diag[key] = {};
                return d.train_k.emplace(key, std::move(sum)).first->second;
            }
            case KernelTag::Noise:
                throw ValidationError("noise kernels are built per run, not cached");
        }
        store_kernel(d, tag, gamma, std::move(raw));
        return d.train_k.at(key);
    }

    void store_kernel(DayCtx& d, KernelTag tag, double gamma, KernelMatrix raw) {
        const Key key{static_cast<int>(tag), gamma_bits(gamma)};
        std::vector<double> diag(raw.n());
        for (std::size_t i = 0; i < raw.n(); ++i) diag[i] = raw.at(i, i);
        d.raw_diag[key] = std::move(diag);
        d.train_k.emplace(key, opts.normalize_kernels ? normalize(raw) : std::move(raw));
    }

    const KernelBlock& cross_kernel(DayCtx& d, KernelTag tag, double gamma) {
        const Key key{static_cast<int>(tag), gamma_bits(gamma)};
        const auto it = d.cross_k.find(key);
        if (it != d.cross_k.end()) return it->second;
        if (d.text_test.empty()) throw ValidationError("no eligible test users for this day");

        KernelBlock raw;
        std::vector<double> row_self;
        std::optional<SubKernelSpec> time_spec;
        switch (tag) {
            case KernelTag::W:
                raw = cross_block(d.text_test, d.text_train, SubKernelSpec::linear(), std::nullopt,
                                  gram_opts());
                row_self = self_kernels(d.text_test, SubKernelSpec::linear(), std::nullopt,
                                        gram_opts());
                break;
            case KernelTag::WT:
                time_spec = SubKernelSpec::rbf(gamma);
                raw = cross_block(d.text_test, d.text_train, SubKernelSpec::linear(), time_spec,
                                  gram_opts());
                row_self =
                    self_kernels(d.text_test, SubKernelSpec::linear(), time_spec, gram_opts());
                break;
            case KernelTag::N:
                raw = cross_block(d.net_test, d.net_train, SubKernelSpec::linear(), std::nullopt,
                                  gram_opts());
                row_self =
                    self_kernels(d.net_test, SubKernelSpec::linear(), std::nullopt, gram_opts());
                break;
            case KernelTag::NT:
                raw = cross_shared_time(d.net_test, d.net_train, SubKernelSpec::rbf(gamma),
                                        gram_opts());
                time_spec = SubKernelSpec::rbf(gamma);
                row_self =
                    self_kernels(d.net_test, SubKernelSpec::linear(), time_spec, gram_opts());
                break;
            case KernelTag::Sum: {
                KernelBlock sum = cross_kernel(d, KernelTag::W, 0.0);
                for (const auto& [t2, g2] :
                     std::initializer_list<std::pair<KernelTag, double>>{
                         {KernelTag::WT, gamma}, {KernelTag::N, 0.0}, {KernelTag::NT, gamma}}) {
                    const KernelBlock& part = cross_kernel(d, t2, g2);
                    for (std::size_t i = 0; i < sum.values.size(); ++i)
                        sum.values[i] += part.values[i];
                }
                return d.cross_k.emplace(key, std::move(sum)).first->second;
            }
            case KernelTag::Noise:
                throw ValidationError("noise kernels are built per run, not cached");
        }
        KernelBlock usable = raw;
        if (opts.normalize_kernels) {
            train_kernel(d, tag, gamma);  // ensure raw diag exists
            usable = normalize_block(raw, row_self, d.raw_diag.at(key));
        }
        return d.cross_k.emplace(key, std::move(usable)).first->second;
    }

    // Plain convolution kernel on a per-user noise block.
    struct NoiseKernels {
        KernelMatrix train;
        KernelBlock cross;
    };
    NoiseKernels noise_kernels(const DayCtx& d,
                               const std::map<std::string, std::vector<double>>& noise) const {
        const auto series_of = [&](const std::vector<std::string>& ids) {
            std::vector<ItemSeries> out;
            out.reserve(ids.size());
            for (const auto& id : ids) {
                const auto it = noise.find(id);
                if (it == noise.end())
                    throw ValidationError("robustness: no noise vector for user '" + id + "'");
                ItemSeries s;
                s.user_id = id;
                s.push(it->second, ds.announcement_ts);
                out.push_back(std::move(s));
            }
            return out;
        };
        const auto train_series = series_of(d.train_ids);
        const auto test_series = series_of(d.eligible_test);
        NoiseKernels out;
        KernelMatrix raw = gram(train_series, SubKernelSpec::linear(), std::nullopt,
                                KernelTag::Noise, gram_opts());
        KernelBlock raw_cross = cross_block(test_series, train_series, SubKernelSpec::linear(),
                                            std::nullopt, gram_opts());
        if (opts.normalize_kernels) {
            std::vector<double> diag(raw.n());
            for (std::size_t i = 0; i < raw.n(); ++i) diag[i] = raw.at(i, i);
            const auto row_self =
                self_kernels(test_series, SubKernelSpec::linear(), std::nullopt, gram_opts());
            out.train = normalize(raw);
            out.cross = normalize_block(raw_cross, row_self, diag);
        } else {
            out.train = std::move(raw);
            out.cross = std::move(raw_cross);
        }
        return out;
    }

    // ---- features ---------------------------------------------------------

    const Matrix& features(DayCtx& d, FeatureMode mode, bool train_side) {
        auto& store = train_side ? d.feat_train : d.feat_test;
        const auto it = store.find(static_cast<int>(mode));
        if (it != store.end()) return it->second;

        const auto& ids = train_side ? d.train_ids : d.eligible_test;
        const auto& text = train_side ? d.text_train : d.text_test;
        std::map<std::string, ItemSeries> text_map;
        for (const auto& s : text) text_map[s.user_id] = s;

        std::map<std::string, NetworkAggregate> net_map;
        if (mode != FeatureMode::Text) {
            if (d.n_ticks == 0)
                throw ValidationError("no network ticks before this day's boundary");
            const std::size_t t = d.n_ticks - 1;
            const auto& net = train_side ? d.net_train : d.net_test;
            const auto& emb = tick_embeddings[t];
            std::vector<double> mean(static_cast<std::size_t>(opts.line.dim), 0.0);
            if (emb) {
                for (std::size_t i = 0; i < emb->users.size(); ++i)
                    for (std::size_t k = 0; k < emb->dim; ++k)
                        mean[k] += emb->vertex[i * emb->dim + k];
                for (auto& x : mean) x /= static_cast<double>(emb->users.size());
            }
            for (std::size_t i = 0; i < ids.size(); ++i) {
                NetworkAggregate agg;
                agg.score = net[i].values.back();
                if (emb) {
                    const auto idx = emb->index_of(ids[i]);
                    const auto v = idx ? emb->vertex_vec(*idx) : std::span<const double>(mean);
                    agg.embedding.assign(v.begin(), v.end());
                } else {
                    agg.embedding.assign(static_cast<std::size_t>(opts.line.dim), 0.0);
                }
                net_map[ids[i]] = std::move(agg);
            }
        }
        Matrix x = aggregate_features(ids, text_map, net_map, mode);
        return store.emplace(static_cast<int>(mode), std::move(x)).first->second;
    }

    // ---- model selection ---------------------------------------------------

    static int chosen_key(ModelKind kind, FeatureMode mode) {
        const bool baseline = kind == ModelKind::BaselineLr || kind == ModelKind::BaselineSvm;
        return static_cast<int>(kind) * 4 + (baseline ? static_cast<int>(mode) : 0);
    }

    std::uint64_t cv_seed(const DayCtx& d, std::size_t variant, std::size_t ci,
                          std::size_t fold) const {
        return derive_seed(derive_seed(d.day_seed, variant * 1000003ull + ci * 101ull), fold);
    }

    double eval_fold_svm(const KernelMatrix& K, const DayCtx& d, int fold, double C,
                         std::uint64_t seed) const {
        const auto& tr = d.fold_train[static_cast<std::size_t>(fold)];
        const auto& va = d.fold_val[static_cast<std::size_t>(fold)];
        std::vector<Stance> y_tr, y_va;
        for (int i : tr) y_tr.push_back(d.train_y[static_cast<std::size_t>(i)]);
        for (int i : va) y_va.push_back(d.train_y[static_cast<std::size_t>(i)]);
        SmoOptions smo = opts.smo;
        smo.seed = seed;
        const SvmModel model = smo_train(K.submatrix(tr), y_tr, C, smo);
        const auto pred = svm_predict(model, K.block(va, tr));
        return macro_f1(pred.stances, y_va).macro_f1;
    }

    std::map<std::string, double> select(DayCtx& d, ModelKind kind, FeatureMode mode) {
        const int ck = chosen_key(kind, mode);
        const auto it = d.chosen.find(ck);
        if (it != d.chosen.end()) return it->second;

        const GridSpec& grid = opts.grid;
        const std::size_t nf = static_cast<std::size_t>(opts.folds);
        std::map<std::string, double> best;

        switch (kind) {
            case ModelKind::SvmW:
            case ModelKind::SvmN: {
                const KernelTag tag = kind == ModelKind::SvmW ? KernelTag::W : KernelTag::N;
                const KernelMatrix& K = train_kernel(d, tag, 0.0);
                std::vector<double> scores(grid.c_values.size() * nf, 0.0);
                parallel_for(opts.jobs, nf, [&](std::size_t f) {
                    for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci)
                        scores[ci * nf + f] = eval_fold_svm(K, d, static_cast<int>(f),
                                                            grid.c_values[ci], cv_seed(d, 0, ci, f));
                });
                double best_score = -1.0;
                for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci) {
                    const double m = mean_of({scores.data() + ci * nf, nf});
                    if (m > best_score) {
                        best_score = m;
                        best = {{"C", grid.c_values[ci]}};
                    }
                }
                break;
            }
            case ModelKind::SvmWt:
            case ModelKind::SvmNt:
            case ModelKind::SvmSum: {
                const KernelTag tag = kind == ModelKind::SvmWt  ? KernelTag::WT
                                      : kind == ModelKind::SvmNt ? KernelTag::NT
                                                                 : KernelTag::Sum;
                for (double g : grid.time_gammas) train_kernel(d, tag, g);
                const std::size_t ng = grid.time_gammas.size();
                std::vector<double> scores(ng * grid.c_values.size() * nf, 0.0);
                parallel_for(opts.jobs, ng * nf, [&](std::size_t task) {
                    const std::size_t gi = task / nf;
                    const std::size_t f = task % nf;
                    const KernelMatrix& K = d.train_k.at(
                        Key{static_cast<int>(tag), gamma_bits(grid.time_gammas[gi])});
                    for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci)
                        scores[(gi * grid.c_values.size() + ci) * nf + f] =
                            eval_fold_svm(K, d, static_cast<int>(f), grid.c_values[ci],
                                          cv_seed(d, gi + 1, ci, f));
                });
                double best_score = -1.0;
                for (std::size_t gi = 0; gi < ng; ++gi)
                    for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci) {
                        const double m = mean_of(
                            {scores.data() + (gi * grid.c_values.size() + ci) * nf, nf});
                        if (m > best_score) {
                            best_score = m;
                            best = {{"C", grid.c_values[ci]},
                                    {"time_gamma", grid.time_gammas[gi]}};
                        }
                    }
                break;
            }
            case ModelKind::Mckl: {
                const double g_wt = select(d, ModelKind::SvmWt, mode).at("time_gamma");
                const double g_nt = select(d, ModelKind::SvmNt, mode).at("time_gamma");
                const std::array<std::pair<KernelTag, double>, 4> parts{
                    {{KernelTag::W, 0.0}, {KernelTag::WT, g_wt}, {KernelTag::N, 0.0},
                     {KernelTag::NT, g_nt}}};
                std::vector<const KernelMatrix*> Ks;
                for (const auto& [tag, g] : parts) Ks.push_back(&train_kernel(d, tag, g));
                std::vector<double> scores(grid.c_values.size() * nf, 0.0);
                parallel_for(opts.jobs, nf, [&](std::size_t f) {
                    const auto& tr = d.fold_train[f];
                    const auto& va = d.fold_val[f];
                    std::vector<Stance> y_tr, y_va;
                    for (int i : tr) y_tr.push_back(d.train_y[static_cast<std::size_t>(i)]);
                    for (int i : va) y_va.push_back(d.train_y[static_cast<std::size_t>(i)]);
                    std::vector<KernelMatrix> subs;
                    std::vector<KernelBlock> blocks;
                    for (const auto* K : Ks) {
                        subs.push_back(K->submatrix(tr));
                        blocks.push_back(K->block(va, tr));
                    }
                    for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci) {
                        SilpOptions silp = opts.silp;
                        silp.smo = opts.smo;
                        silp.smo.seed = cv_seed(d, 99, ci, f);
                        const McklModel m = silp_train(subs, y_tr, grid.c_values[ci], silp);
                        const auto pred = mckl_predict(m, blocks);
                        scores[ci * nf + f] = macro_f1(pred.stances, y_va).macro_f1;
                    }
                });
                double best_score = -1.0;
                for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci) {
                    const double m = mean_of({scores.data() + ci * nf, nf});
                    if (m > best_score) {
                        best_score = m;
                        best = {{"C", grid.c_values[ci]},
                                {"time_gamma_wt", g_wt},
                                {"time_gamma_nt", g_nt}};
                    }
                }
                break;
            }
            case ModelKind::BaselineLr: {
                const Matrix& X = features(d, mode, true);
                std::vector<double> scores(grid.lambdas.size() * nf, 0.0);
                parallel_for(opts.jobs, nf, [&](std::size_t f) {
                    const auto& tr = d.fold_train[f];
                    const auto& va = d.fold_val[f];
                    Matrix x_tr(tr.size(), X.cols), x_va(va.size(), X.cols);
                    std::vector<Stance> y_tr, y_va;
                    for (std::size_t k = 0; k < tr.size(); ++k) {
                        std::copy_n(X.row(static_cast<std::size_t>(tr[k])), X.cols, x_tr.row(k));
                        y_tr.push_back(d.train_y[static_cast<std::size_t>(tr[k])]);
                    }
                    for (std::size_t k = 0; k < va.size(); ++k) {
                        std::copy_n(X.row(static_cast<std::size_t>(va[k])), X.cols, x_va.row(k));
                        y_va.push_back(d.train_y[static_cast<std::size_t>(va[k])]);
                    }
                    for (std::size_t li = 0; li < grid.lambdas.size(); ++li) {
                        LogRegOptions lr = opts.logreg;
                        lr.lambda = grid.lambdas[li];
                        const LinearModel m = logreg_train(x_tr, y_tr, lr);
                        const auto pred = linear_predict(m, x_va);
                        scores[li * nf + f] = macro_f1(pred.stances, y_va).macro_f1;
                    }
                });
                double best_score = -1.0;
                for (std::size_t li = 0; li < grid.lambdas.size(); ++li) {
                    const double m = mean_of({scores.data() + li * nf, nf});
                    if (m > best_score) {
                        best_score = m;
                        best = {{"lambda", grid.lambdas[li]}};
                    }
                }
                break;
            }
            case ModelKind::BaselineSvm: {
                const Matrix& X = features(d, mode, true);
                // Variants: linear, then rbf per feature gamma.
                std::vector<SubKernelSpec> variants{SubKernelSpec::linear()};
                for (double g : grid.feature_gammas) variants.push_back(SubKernelSpec::rbf(g));
                std::vector<KernelMatrix> grams;
                grams.reserve(variants.size());
                for (const auto& v : variants) grams.push_back(feature_gram(X, d.train_ids, v));
                std::vector<double> scores(variants.size() * grid.c_values.size() * nf, 0.0);
                parallel_for(opts.jobs, variants.size() * nf, [&](std::size_t task) {
                    const std::size_t vi = task / nf;
                    const std::size_t f = task % nf;
                    for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci)
                        scores[(vi * grid.c_values.size() + ci) * nf + f] =
                            eval_fold_svm(grams[vi], d, static_cast<int>(f), grid.c_values[ci],
                                          cv_seed(d, 200 + vi, ci, f));
                });
                double best_score = -1.0;
                for (std::size_t vi = 0; vi < variants.size(); ++vi)
                    for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci) {
                        const double m = mean_of(
                            {scores.data() + (vi * grid.c_values.size() + ci) * nf, nf});
                        if (m > best_score) {
                            best_score = m;
                            best = {{"C", grid.c_values[ci]},
                                    {"rbf", vi == 0 ? 0.0 : 1.0},
                                    {"feature_gamma", vi == 0 ? 0.0 : variants[vi].gamma}};
                        }
                    }
                break;
            }
        }
        d.chosen[ck] = best;
        return best;
    }

    // ---- final fit & prediction --------------------------------------------

    struct FitOutcome {
        std::vector<Stance> pred;
        std::map<std::string, double> kernel_weights;
    };

    FitOutcome fit_predict(DayCtx& d, ModelKind kind, FeatureMode mode,
                           const std::map<std::string, double>& hypers,
                           const std::map<std::string, std::vector<double>>* noise) {
        FitOutcome out;
        SmoOptions smo = opts.smo;
        smo.seed = derive_seed(d.day_seed, 0xF17ull);
        switch (kind) {
            case ModelKind::SvmW:
            case ModelKind::SvmN:
            case ModelKind::SvmWt:
            case ModelKind::SvmNt:
            case ModelKind::SvmSum: {
                KernelTag tag = KernelTag::W;
                double g = 0.0;
                if (kind == ModelKind::SvmN) tag = KernelTag::N;
                if (kind == ModelKind::SvmWt) tag = KernelTag::WT;
                if (kind == ModelKind::SvmNt) tag = KernelTag::NT;
                if (kind == ModelKind::SvmSum) tag = KernelTag::Sum;
                if (hypers.count("time_gamma")) g = hypers.at("time_gamma");
                const SvmModel model =
                    smo_train(train_kernel(d, tag, g), d.train_y, hypers.at("C"), smo);
                out.pred = svm_predict(model, cross_kernel(d, tag, g)).stances;
                break;
            }
            case ModelKind::Mckl: {
                const double g_wt = hypers.at("time_gamma_wt");
                const double g_nt = hypers.at("time_gamma_nt");
                std::vector<KernelMatrix> Ks{
                    train_kernel(d, KernelTag::W, 0.0), train_kernel(d, KernelTag::WT, g_wt),
                    train_kernel(d, KernelTag::N, 0.0), train_kernel(d, KernelTag::NT, g_nt)};
                std::vector<KernelBlock> blocks{
                    cross_kernel(d, KernelTag::W, 0.0), cross_kernel(d, KernelTag::WT, g_wt),
                    cross_kernel(d, KernelTag::N, 0.0), cross_kernel(d, KernelTag::NT, g_nt)};
                if (noise && !noise->empty()) {
                    NoiseKernels nk = noise_kernels(d, *noise);
                    Ks.push_back(std::move(nk.train));
                    blocks.push_back(std::move(nk.cross));
                }
                SilpOptions silp = opts.silp;
                silp.smo = smo;
                const McklModel model = silp_train(Ks, d.train_y, hypers.at("C"), silp);
                out.pred = mckl_predict(model, blocks).stances;
                for (std::size_t s = 0; s < model.weights.size(); ++s)
                    out.kernel_weights[to_string(model.tags[s])] = model.weights[s];
                break;
            }
            case ModelKind::BaselineLr: {
                LogRegOptions lr = opts.logreg;
                lr.lambda = hypers.at("lambda");
                const LinearModel model = logreg_train(features(d, mode, true), d.train_y, lr);
                out.pred = linear_predict(model, features(d, mode, false)).stances;
                break;
            }
            case ModelKind::BaselineSvm: {
                Matrix x_tr = features(d, mode, true);
                Matrix x_te = features(d, mode, false);
                if (noise && !noise->empty()) {
                    x_tr = append_noise(x_tr, d.train_ids, *noise);
                    x_te = append_noise(x_te, d.eligible_test, *noise);
                }
                const SubKernelSpec spec = hypers.at("rbf") > 0.5
                                               ? SubKernelSpec::rbf(hypers.at("feature_gamma"))
                                               : SubKernelSpec::linear();
                const SvmModel model =
                    smo_train(feature_gram(x_tr, d.train_ids, spec), d.train_y, hypers.at("C"), smo);
                out.pred = svm_predict(model, feature_cross(x_te, d.eligible_test, x_tr,
                                                            d.train_ids, spec))
                               .stances;
                break;
            }
        }
        return out;
    }

    static Matrix append_noise(const Matrix& x, const std::vector<std::string>& ids,
                               const std::map<std::string, std::vector<double>>& noise) {
        const std::size_t extra = noise.begin()->second.size();
        Matrix out(x.rows, x.cols + extra);
        for (std::size_t i = 0; i < x.rows; ++i) {
            std::copy_n(x.row(i), x.cols, out.row(i));
            const auto it = noise.find(ids[i]);
            if (it == noise.end())
                throw ValidationError("robustness: no noise vector for user '" + ids[i] + "'");
            std::copy(it->second.begin(), it->second.end(), out.row(i) + x.cols);
        }
        return out;
    }

    std::string config_hash(ModelKind kind, FeatureMode mode) const {
        Fnv1a h;
        h.update("tmkl-config");
        h.update(to_string(kind));
        h.update(to_string(mode));
        h.update_u64(opts.seed);
        h.update_u64(static_cast<std::uint64_t>(opts.folds));
        h.update_u64(opts.normalize_kernels ? 1 : 0);
        h.update_u64(static_cast<std::uint64_t>(opts.tick_hours));
        for (const auto* grid : {&opts.grid.c_values, &opts.grid.time_gammas,
                                 &opts.grid.feature_gammas, &opts.grid.lambdas})
            h.update_f64s(*grid);
        h.update_u64(static_cast<std::uint64_t>(opts.line.dim));
        h.update_u64(static_cast<std::uint64_t>(opts.line.total_samples));
        h.update_u64(static_cast<std::uint64_t>(opts.line.negatives));
        h.update_f64(opts.line.lr_initial);
        h.update_f64(opts.line.lr_final);
        h.update_f64(opts.smo.tol);
        h.update_u64(static_cast<std::uint64_t>(opts.smo.max_passes));
        h.update_f64(opts.silp.eps);
        h.update_u64(static_cast<std::uint64_t>(opts.silp.max_iters));
        h.update_f64(opts.logreg.grad_tol);
        h.update_u64(static_cast<std::uint64_t>(ds.tweets.size()));
        h.update_u64(static_cast<std::uint64_t>(ds.retweets.size()));
        h.update_u64(static_cast<std::uint64_t>(ds.announcement_ts));
        h.update_u64(static_cast<std::uint64_t>(ds.horizon_days));
        h.update_u64(static_cast<std::uint64_t>(ds.labels.size()));
        h.update_u64(static_cast<std::uint64_t>(ds.test_labels.size()));
        return hex64(h.digest());
    }
};

RollingRunner::RollingRunner(Dataset ds, HarnessOptions opts)
    : impl_(std::make_unique<Impl>(std::move(ds), std::move(opts))) {}

RollingRunner::~RollingRunner() = default;

const HarnessOptions& RollingRunner::options() const { return impl_->opts; }
std::size_t RollingRunner::kernel_cache_hits() const { return impl_->cache_hits; }

RunReport RollingRunner::run(ModelKind kind, FeatureMode mode) {
    RunReport report;
    report.model = to_string(kind);
    report.mode = to_string(mode);
    report.seed = impl_->opts.seed;
    report.config_hash = impl_->config_hash(kind, mode);
    for (int day = 0; day < impl_->ds.horizon_days; ++day) {
        const auto t0 = std::chrono::steady_clock::now();
        auto& d = impl_->ensure_day(day);
        DayResult res;
        res.day = day;
        res.n_train = d.train_ids.size();
        res.n_test = d.eligible_test.size();
        if (!d.eligible_test.empty()) {
            res.hyperparameters = impl_->select(d, kind, mode);
            auto outcome = impl_->fit_predict(d, kind, mode, res.hyperparameters, nullptr);
            res.f1 = macro_f1(outcome.pred, d.test_y);
            res.kernel_weights = std::move(outcome.kernel_weights);
        }
        res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                t0)
                          .count();
        report.days.push_back(std::move(res));
    }
    return report;
}

double RollingRunner::refit_day(ModelKind kind, FeatureMode mode, int day,
                                const std::map<std::string, double>& hypers,
                                const std::map<std::string, std::vector<double>>& noise) {
    auto& d = impl_->ensure_day(day);
    if (d.eligible_test.empty()) return 0.0;
    const auto outcome = impl_->fit_predict(d, kind, mode, hypers, &noise);
    return macro_f1(outcome.pred, d.test_y).macro_f1;
}

RunReport rolling_nowcast(const Dataset& ds, ModelKind kind, FeatureMode mode,
                          const HarnessOptions& opts) {
    RollingRunner runner(ds, opts);
    return runner.run(kind, mode);
}

std::string RobustnessResult::to_csv() const {
    std::string out = "run,model,delta_f1\n";
    char buf[96];
    for (std::size_t r = 0; r < delta_mckl.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%zu,mckl,%s\n", r, format_double(delta_mckl[r]).c_str());
        out += buf;
        std::snprintf(buf, sizeof buf, "%zu,baseline_svm,%s\n", r,
                      format_double(delta_baseline[r]).c_str());
        out += buf;
    }
    return out;
}

std::string RobustnessResult::to_json() const {
    nlohmann::json j;
    j["clean_mckl"] = clean_mckl;
    j["clean_baseline"] = clean_baseline;
    j["mean_delta_mckl"] = mean_delta_mckl;
    j["std_delta_mckl"] = std_delta_mckl;
    j["mean_delta_baseline"] = mean_delta_baseline;
    j["std_delta_baseline"] = std_delta_baseline;
    j["runs"] = delta_mckl.size();
    return j.dump(2) + "\n";
}

RobustnessResult robustness_experiment(const Dataset& ds, const HarnessOptions& opts,
                                       const RobustnessOptions& robust) {
    if (robust.noise_dim < 0) throw ValidationError("robustness: noise_dim must be >= 0");
    if (robust.runs < 1) throw ValidationError("robustness: runs must be >= 1");
    RollingRunner runner(ds, opts);
    const RunReport clean_mckl = runner.run(ModelKind::Mckl, FeatureMode::Both);
    const RunReport clean_base = runner.run(ModelKind::BaselineSvm, FeatureMode::Both);

    RobustnessResult out;
    out.clean_mckl = clean_mckl.mean_macro_f1();
    out.clean_baseline = clean_base.mean_macro_f1();

    std::vector<std::string> users;
    for (const auto& [id, s] : ds.labels) {
        (void)s;
        users.push_back(id);
    }
    for (const auto& [id, s] : ds.test_labels) {
        (void)s;
        users.push_back(id);
    }

    for (int r = 0; r < robust.runs; ++r) {
        std::map<std::string, std::vector<double>> noise;
        if (robust.noise_dim > 0) {
            std::mt19937_64 rng(derive_seed(robust.seed, static_cast<std::uint64_t>(r)));
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (const auto& id : users) {
                std::vector<double> v(static_cast<std::size_t>(robust.noise_dim));
                for (auto& x : v) x = robust.noise_std * gauss(rng);
                noise[id] = std::move(v);
            }
        }
        double f_mckl = 0.0, f_base = 0.0;
        for (int day = 0; day < ds.horizon_days; ++day) {
            f_mckl += runner.refit_day(ModelKind::Mckl, FeatureMode::Both, day,
                                       clean_mckl.days[static_cast<std::size_t>(day)]
                                           .hyperparameters,
                                       noise);
            f_base += runner.refit_day(ModelKind::BaselineSvm, FeatureMode::Both, day,
                                       clean_base.days[static_cast<std::size_t>(day)]
                                           .hyperparameters,
                                       noise);
        }
        f_mckl /= static_cast<double>(ds.horizon_days);
        f_base /= static_cast<double>(ds.horizon_days);
        out.delta_mckl.push_back(f_mckl - out.clean_mckl);
        out.delta_baseline.push_back(f_base - out.clean_baseline);
    }
    out.mean_delta_mckl = mean_of(out.delta_mckl);
    out.std_delta_mckl = sample_std(out.delta_mckl);
    out.mean_delta_baseline = mean_of(out.delta_baseline);
    out.std_delta_baseline = sample_std(out.delta_baseline);
    return out;
}

}  // namespace tmkl
