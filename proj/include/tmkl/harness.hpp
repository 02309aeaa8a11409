#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tmkl/baselines.hpp"
#include "tmkl/graph.hpp"
#include "tmkl/kernels.hpp"
#include "tmkl/mckl.hpp"
#include "tmkl/svm.hpp"
#include "tmkl/types.hpp"

namespace tmkl {

struct F1Result {
    double macro_f1 = 0.0;
    double f1_yes = 0.0, f1_no = 0.0;
    double precision_yes = 0.0, recall_yes = 0.0;
    double precision_no = 0.0, recall_no = 0.0;
};

// Unweighted mean of the per-class F1 scores; a class with zero predicted
// and zero actual positives contributes F1 = 0.
F1Result macro_f1(std::span<const Stance> pred, std::span<const Stance> truth);

enum class ModelKind { SvmW, SvmWt, SvmN, SvmNt, SvmSum, Mckl, BaselineLr, BaselineSvm };
const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct GridSpec {
    std::vector<double> c_values;
    std::vector<double> time_gammas;
    std::vector<double> feature_gammas;
    std::vector<double> lambdas;

    static GridSpec decades();  // 10^-3 .. 10^3 everywhere
};

struct HarnessOptions {
    std::uint64_t seed = 1;
    int jobs = 1;
    int folds = 5;
    bool normalize_kernels = true;
    int tick_hours = 12;
    GridSpec grid = GridSpec::decades();
    LineOptions line;
    SmoOptions smo;
    SilpOptions silp;
    LogRegOptions logreg;
    std::string cache_dir;  // empty: kernel cache disabled
};

struct DayResult {
    int day = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    F1Result f1{};
    std::map<std::string, double> hyperparameters;
    std::map<std::string, double> kernel_weights;  // MCKL only, keyed by tag
    double wall_ms = 0.0;  // kept out of the canonical JSON
};

struct RunReport {
    std::string model;
    std::string mode;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<DayResult> days;

    double mean_macro_f1() const;
    std::string to_json() const;  // canonical: excludes wall-clock timing
    std::string to_csv() const;   // day,n_test,macro_f1,f1_yes,f1_no
    std::string timing_csv() const;
};

// Shares the per-day representations and kernel Grams across model runs on
// one dataset. Per-tick graph embeddings are trained once at construction.
class RollingRunner {
  public:
    RollingRunner(Dataset ds, HarnessOptions opts);
    ~RollingRunner();
    RollingRunner(const RollingRunner&) = delete;
    RollingRunner& operator=(const RollingRunner&) = delete;

    RunReport run(ModelKind kind, FeatureMode mode = FeatureMode::Both);

    const HarnessOptions& options() const;
    std::size_t kernel_cache_hits() const;

    // Refits one day at fixed hyperparameters, optionally with an extra
    // noise feature block per user (robustness experiment). Returns the
    // day's macro-F1. noise maps user -> K-dim vector; empty = no noise.
    double refit_day(ModelKind kind, FeatureMode mode, int day,
                     const std::map<std::string, double>& hypers,
                     const std::map<std::string, std::vector<double>>& noise);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

RunReport rolling_nowcast(const Dataset& ds, ModelKind kind, FeatureMode mode,
                          const HarnessOptions& opts);

struct RobustnessOptions {
    int noise_dim = 25;
    int runs = 20;
    double noise_std = 1.0;
    std::uint64_t seed = 99;
};

struct RobustnessResult {
    double clean_mckl = 0.0;      // mean-over-days macro-F1 without noise
    double clean_baseline = 0.0;  // aggregate-SVM (BOTH) counterpart
    std::vector<double> delta_mckl;
    std::vector<double> delta_baseline;
    double mean_delta_mckl = 0.0, std_delta_mckl = 0.0;
    double mean_delta_baseline = 0.0, std_delta_baseline = 0.0;

    std::string to_csv() const;  // run,model,delta_f1
    std::string to_json() const;
};

// Reruns MCKL (extra convolution kernel on the noise block) and the
// aggregate-SVM baseline (extra feature columns) with per-day
// hyperparameters fixed to the clean run's choices.
RobustnessResult robustness_experiment(const Dataset& ds, const HarnessOptions& opts,
                                       const RobustnessOptions& robust);

// Stratified fold assignment: shuffles within each class, then deals
// round-robin. Every user lands in exactly one validation fold.
std::vector<int> stratified_folds(std::span<const Stance> y, int folds, std::uint64_t seed);

}  // namespace tmkl
