#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tmkl/distant.hpp"
#include "tmkl/graph.hpp"
#include "tmkl/harness.hpp"
#include "tmkl/io.hpp"
#include "tmkl/synth.hpp"
#include "tmkl/text.hpp"
#include "tmkl/util.hpp"

namespace fs = std::filesystem;
using namespace tmkl;

namespace {

struct DatasetFlags {
    std::string tweets, retweets, labels, test_labels, seeds, embeddings;
    std::int64_t announcement_ts = 0;
    int horizon_days = 9;
    int utc_offset = 3;
    int d_text = 50;
};

void add_dataset_options(CLI::App* sub, DatasetFlags& f) {
    sub->add_option("--tweets", f.tweets, "tweets.jsonl path");
    sub->add_option("--retweets", f.retweets, "retweets.csv path");
    sub->add_option("--labels", f.labels, "training labels.csv path");
    sub->add_option("--test-labels", f.test_labels, "test_labels.csv path");
    sub->add_option("--seeds", f.seeds, "seeds.csv path");
    sub->add_option("--embeddings", f.embeddings, "embeddings.tsv path");
    sub->add_option("--announcement-ts", f.announcement_ts, "announcement timestamp (s)");
    sub->add_option("--horizon-days", f.horizon_days, "evaluation days");
    sub->add_option("--utc-offset", f.utc_offset, "midnight boundary UTC offset hours");
    sub->add_option("--d-text", f.d_text, "text embedding dimension");
    sub->set_config("--config", "", "flat key=value config file");
}

Dataset load_from_flags(const DatasetFlags& f) {
    LoadPaths paths;
    paths.tweets = f.tweets;
    paths.retweets = f.retweets;
    paths.labels = f.labels;
    paths.test_labels = f.test_labels;
    paths.seeds = f.seeds;
    paths.embeddings = f.embeddings;
    LoadOptions opts;
    opts.d_text = f.d_text;
    opts.announcement_ts = f.announcement_ts;
    opts.horizon_days = f.horizon_days;
    opts.utc_offset_hours = f.utc_offset;
    return load_dataset(paths, opts).dataset;
}

struct CommonFlags {
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string cache_dir;
    std::string out = "out";
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--seed", f.seed, "global random seed");
    sub->add_option("--jobs", f.jobs, "worker parallelism (1 = bit-reproducible default)");
    sub->add_option("--cache-dir", f.cache_dir, "kernel cache directory (TMKL_CACHE_DIR)");
    sub->add_option("--out", f.out, "output directory");
}

std::string resolved_cache_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    const char* env = std::getenv("TMKL_CACHE_DIR");
    return env ? env : "";
}

struct HarnessFlags {
    int folds = 5;
    bool no_normalize = false;
    int tick_hours = 12;
    int line_dim = 50;
    std::int64_t line_samples = 0;
    int smo_max_passes = 200;
    int silp_max_iters = 50;
};

void add_harness(CLI::App* sub, HarnessFlags& f) {
    sub->add_option("--folds", f.folds, "cross-validation folds");
    sub->add_flag("--no-normalize", f.no_normalize, "skip per-kernel normalization");
    sub->add_option("--tick-hours", f.tick_hours, "snapshot tick spacing");
    sub->add_option("--line-dim", f.line_dim, "graph embedding dimension");
    sub->add_option("--line-samples", f.line_samples, "embedding SGD samples (0 = 200x edges)");
    sub->add_option("--smo-max-passes", f.smo_max_passes, "SMO pass budget");
    sub->add_option("--silp-max-iters", f.silp_max_iters, "SILP iteration budget");
}

HarnessOptions make_harness_options(const CommonFlags& common, const HarnessFlags& hf) {
    HarnessOptions opts;
    opts.seed = common.seed;
    opts.jobs = common.jobs;
    opts.folds = hf.folds;
    opts.normalize_kernels = !hf.no_normalize;
    opts.tick_hours = hf.tick_hours;
    opts.line.dim = hf.line_dim;
    opts.line.total_samples = hf.line_samples;
    opts.smo.max_passes = hf.smo_max_passes;
    opts.silp.max_iters = hf.silp_max_iters;
    opts.cache_dir = resolved_cache_dir(common.cache_dir);
    return opts;
}

int cmd_synth(const GenConfig& cfg, const CommonFlags& common) {
    const Dataset ds = generate(cfg);
    const fs::path dir(common.out);
    fs::create_directories(dir);
    write_tweets_jsonl((dir / "tweets.jsonl").string(), ds.tweets);
    write_retweets_csv((dir / "retweets.csv").string(), ds.retweets);
    write_labels_csv((dir / "labels.csv").string(), ds.labels);
    write_labels_csv((dir / "test_labels.csv").string(), ds.test_labels);
    write_labels_csv((dir / "seeds.csv").string(), ds.seeds);
    std::string meta;
    meta += "tweets=" + (dir / "tweets.jsonl").string() + "\n";
    meta += "retweets=" + (dir / "retweets.csv").string() + "\n";
    meta += "labels=" + (dir / "labels.csv").string() + "\n";
    meta += "test-labels=" + (dir / "test_labels.csv").string() + "\n";
    meta += "seeds=" + (dir / "seeds.csv").string() + "\n";
    if (cfg.token_mode) {
        write_embeddings_tsv((dir / "embeddings.tsv").string(), synth_embedding_table(cfg));
        meta += "embeddings=" + (dir / "embeddings.tsv").string() + "\n";
    }
    meta += "announcement-ts=" + std::to_string(ds.announcement_ts) + "\n";
    meta += "horizon-days=" + std::to_string(ds.horizon_days) + "\n";
    meta += "utc-offset=" + std::to_string(ds.utc_offset_hours) + "\n";
    meta += "d-text=" + std::to_string(cfg.d_text) + "\n";
    atomic_write_text((dir / "dataset.cfg").string(), meta);
    std::cout << "wrote dataset to " << dir.string() << " (" << ds.tweets.size() << " tweets, "
              << ds.retweets.size() << " retweets)\n";
    return 0;
}

int cmd_expand(const DatasetFlags& dflags, const CommonFlags& common, double n,
               std::int64_t until_ts) {
    Dataset ds = load_from_flags(dflags);
    if (ds.seeds.empty()) throw ValidationError("expand requires a seeds file");
    const Timestamp until = until_ts != 0 ? until_ts : ds.announcement_ts;
    auto scores = pmi_scores(ds.retweets, ds.seeds, until);
    // Never label held-out users.
    if (!ds.test_labels.empty()) {
        std::vector<SeedScore> kept;
        for (auto& s : scores)
            if (!ds.test_labels.count(s.user_id)) kept.push_back(std::move(s));
        scores = std::move(kept);
    }
    const auto labeled = apply_threshold(scores, n);
    std::map<std::string, double> score_of;
    for (const auto& s : labeled) score_of[s.user_id] = s.score;

    std::vector<std::pair<std::string, Stance>> rows;
    std::vector<double> row_scores;
    const LabelMap expanded = expand_seeds(scores, n, ds.seeds);
    for (const auto& [id, stance] : expanded) {
        rows.push_back({id, stance});
        const auto it = score_of.find(id);
        row_scores.push_back(it == score_of.end() ? 0.0 : it->second);
    }
    const fs::path dir(common.out);
    fs::create_directories(dir);
    const std::string path = (dir / "expanded_labels.csv").string();
    write_scored_labels_csv(path, rows, row_scores);
    std::cout << "expanded " << rows.size() << " labels -> " << path << "\n";
    return 0;
}

int cmd_nowcast(const DatasetFlags& dflags, const CommonFlags& common, const HarnessFlags& hf,
                const std::string& model, const std::string& mode) {
    const Dataset ds = load_from_flags(dflags);
    const HarnessOptions opts = make_harness_options(common, hf);
    const ModelKind kind = model_kind_from_string(model);
    const FeatureMode fmode = feature_mode_from_string(mode);
    const RunReport report = rolling_nowcast(ds, kind, fmode, opts);
    const fs::path dir(common.out);
    fs::create_directories(dir);
    atomic_write_text((dir / "report.json").string(), report.to_json());
    atomic_write_text((dir / "report.csv").string(), report.to_csv());
    atomic_write_text((dir / "timing.csv").string(), report.timing_csv());
    std::cout << "nowcast " << model << ": mean macro-F1 " << report.mean_macro_f1() << " -> "
              << (dir / "report.json").string() << "\n";
    return 0;
}

int cmd_robustness(const DatasetFlags& dflags, const CommonFlags& common, const HarnessFlags& hf,
                   int runs, int noise_dim, double noise_std) {
    const Dataset ds = load_from_flags(dflags);
    const HarnessOptions opts = make_harness_options(common, hf);
    RobustnessOptions robust;
    robust.runs = runs;
    robust.noise_dim = noise_dim;
    robust.noise_std = noise_std;
    robust.seed = common.seed + 7919;
    const RobustnessResult result = robustness_experiment(ds, opts, robust);
    const fs::path dir(common.out);
    fs::create_directories(dir);
    atomic_write_text((dir / "robustness.csv").string(), result.to_csv());
    atomic_write_text((dir / "robustness.json").string(), result.to_json());
    std::cout << "robustness: mckl dF " << result.mean_delta_mckl << " +- "
              << result.std_delta_mckl << ", baseline dF " << result.mean_delta_baseline << " +- "
              << result.std_delta_baseline << "\n";
    return 0;
}

int cmd_analyze(const DatasetFlags& dflags, const CommonFlags& common, bool ngrams, bool polarity,
                const std::string& polarity_mode, int line_dim) {
    const Dataset ds = load_from_flags(dflags);
    const fs::path dir(common.out);
    fs::create_directories(dir);

    if (ngrams) {
        std::map<std::string, std::vector<std::string>> docs;
        for (const auto& t : ds.tweets) {
            if (t.tokens.empty()) continue;
            auto& doc = docs[t.user];
            doc.insert(doc.end(), t.tokens.begin(), t.tokens.end());
        }
        if (docs.empty())
            throw ValidationError("ngram analysis requires token payloads in tweets.jsonl");
        std::vector<std::pair<std::string, std::vector<std::string>>> users;
        for (auto& [id, doc] : docs)
            if (ds.test_labels.count(id)) users.push_back({id, std::move(doc)});
        const auto scores = ngram_polarity_scores(users, ds.test_labels, 3);
        std::string csv = "ngram,score\n";
        for (const auto& s : scores) csv += s.ngram + "," + format_double(s.score) + "\n";
        atomic_write_text((dir / "ngram_scores.csv").string(), csv);
        std::cout << "wrote " << scores.size() << " ngram scores\n";
    }

    if (polarity) {
        const auto run_mode = [&](PolarityMode m, const std::string& name) {
            PolarityOptions popts;
            popts.mode = m;
            popts.line.dim = line_dim;
            popts.line.seed = common.seed;
            popts.jobs = common.jobs;
            const PolaritySeries series = polarity_timeseries(ds, ds.labels, ds.test_labels, popts);
            std::string csv = "tick_ts,class,score\n";
            for (std::size_t t = 0; t < series.ticks.size(); ++t) {
                csv += std::to_string(series.ticks[t]) + ",YES," + format_double(series.yes[t]) +
                       "\n";
                csv += std::to_string(series.ticks[t]) + ",NO," + format_double(series.no[t]) +
                       "\n";
            }
            atomic_write_text((dir / ("polarity_" + name + ".csv")).string(), csv);
            std::cout << "wrote polarity_" << name << ".csv (" << series.ticks.size()
                      << " ticks)\n";
        };
        if (polarity_mode == "cumulative" || polarity_mode == "both")
            run_mode(PolarityMode::Cumulative, "cumulative");
        if (polarity_mode == "sliding" || polarity_mode == "both")
            run_mode(PolarityMode::Sliding, "sliding");
    }
    if (!ngrams && !polarity)
        throw ValidationError("analyze: pass --ngrams and/or --polarity");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"temporal multiple-kernel stance nowcasting"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic polarized dataset");
    GenConfig gen;
    gen.n_train_yes = 182;
    gen.n_train_no = 218;
    gen.n_test_yes = 46;
    gen.n_test_no = 154;
    CommonFlags synth_common;
    synth->add_option("--days", gen.days, "evaluation days");
    synth->add_option("--history-days", gen.history_days, "pre-announcement history days");
    synth->add_option("--seed", gen.seed, "generator seed");
    synth->add_option("--train-yes", gen.n_train_yes, "YES training users");
    synth->add_option("--train-no", gen.n_train_no, "NO training users");
    synth->add_option("--test-yes", gen.n_test_yes, "YES test users");
    synth->add_option("--test-no", gen.n_test_no, "NO test users");
    synth->add_option("--tweets-per-day", gen.tweets_per_day, "tweet rate per user per day");
    synth->add_option("--retweets-per-day", gen.retweets_per_day, "retweet rate per user per day");
    synth->add_option("--d-text", gen.d_text, "text vector dimension");
    synth->add_option("--delta-max", gen.delta_max, "post-announcement text separation");
    synth->add_option("--ramp-days", gen.ramp_days, "text separation ramp length");
    synth->add_option("--p-in-pre", gen.p_in_pre, "within-class retweet probability before");
    synth->add_option("--p-in-post", gen.p_in_post, "within-class retweet probability after");
    synth->add_option("--label-noise", gen.label_noise, "training label flip rate");
    synth->add_flag("--token-mode", gen.token_mode, "emit tokens plus an embedding table");
    synth->set_config("--config", "", "flat key=value config file");
    synth->add_option("--out", synth_common.out, "output directory");

    auto* expand = app.add_subcommand("expand", "distant-supervised label expansion");
    DatasetFlags expand_data;
    CommonFlags expand_common;
    double expand_n = 0.5;
    std::int64_t expand_until = 0;
    add_dataset_options(expand, expand_data);
    add_common(expand, expand_common);
    expand->add_option("--n", expand_n, "threshold fraction of max |score|");
    expand->add_option("--until", expand_until, "count seed retweets before this ts");

    auto* nowcast = app.add_subcommand("nowcast", "rolling daily nowcast");
    DatasetFlags nowcast_data;
    CommonFlags nowcast_common;
    HarnessFlags nowcast_harness;
    std::string model = "mckl", mode = "both";
    add_dataset_options(nowcast, nowcast_data);
    add_common(nowcast, nowcast_common);
    add_harness(nowcast, nowcast_harness);
    nowcast->add_option("--model", model,
                        "svm_w|svm_wt|svm_n|svm_nt|svm_sum|mckl|baseline_lr|baseline_svm");
    nowcast->add_option("--mode", mode, "text|network|both (baselines)");

    auto* robustness = app.add_subcommand("robustness", "noise-kernel robustness experiment");
    DatasetFlags robust_data;
    CommonFlags robust_common;
    HarnessFlags robust_harness;
    int runs = 20, noise_dim = 25;
    double noise_std = 1.0;
    add_dataset_options(robustness, robust_data);
    add_common(robustness, robust_common);
    add_harness(robustness, robust_harness);
    robustness->add_option("--runs", runs, "noise repetitions");
    robustness->add_option("--noise-dim", noise_dim, "noise block dimension");
    robustness->add_option("--noise-std", noise_std, "noise standard deviation");

    auto* analyze = app.add_subcommand("analyze", "ngram polarity and network score series");
    DatasetFlags analyze_data;
    CommonFlags analyze_common;
    bool do_ngrams = false, do_polarity = false;
    std::string polarity_mode = "both";
    int analyze_line_dim = 50;
    add_dataset_options(analyze, analyze_data);
    add_common(analyze, analyze_common);
    analyze->add_flag("--ngrams", do_ngrams, "emit ngram polarity scores");
    analyze->add_flag("--polarity", do_polarity, "emit network polarity time series");
    analyze->add_option("--polarity-mode", polarity_mode, "cumulative|sliding|both");
    analyze->add_option("--line-dim", analyze_line_dim, "embedding dimension for polarity");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand(synth)) return cmd_synth(gen, synth_common);
        if (app.got_subcommand(expand))
            return cmd_expand(expand_data, expand_common, expand_n, expand_until);
        if (app.got_subcommand(nowcast))
            return cmd_nowcast(nowcast_data, nowcast_common, nowcast_harness, model, mode);
        if (app.got_subcommand(robustness))
            return cmd_robustness(robust_data, robust_common, robust_harness, runs, noise_dim,
                                  noise_std);
        if (app.got_subcommand(analyze))
            return cmd_analyze(analyze_data, analyze_common, do_ngrams, do_polarity, polarity_mode,
                               analyze_line_dim);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
