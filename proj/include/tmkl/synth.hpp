#pragma once

#include <cstdint>

#include "tmkl/text.hpp"
#include "tmkl/types.hpp"

namespace tmkl {

// Deterministic generator of a polarized two-class network with a
// pre/post-announcement regime shift. Defaults mirror the corpus shape:
// 77/23 NO/YES test imbalance, 1156/965 train imbalance, nine evaluation
// days with the announcement at the day 0 -> 1 boundary.
struct GenConfig {
    std::uint64_t seed = 7;

    int n_train_yes = 182, n_train_no = 218;  // 965:1156 ratio at desk scale
    int n_test_yes = 46, n_test_no = 154;     // 23:77

    int days = 9;          // evaluation days 0..days-1
    int history_days = 8;  // pre-day-0 history (noise-only period)

    double tweets_per_day = 1.0;  // Poisson rate per user per day
    int d_text = 50;

    // Text class-mean separation: 0 before the announcement, then ramping
    // linearly to delta_max over ramp_days.
    double delta_max = 1.6;
    double ramp_days = 4.0;
    double text_noise_sigma = 1.0;

    // User-user retweets; within-class probability p_in ramps from the pre
    // value to the post value over homophily_ramp_days after the announcement
    // (p_out = 1 - p_in). Some homophily exists before the announcement and
    // it sharpens afterwards.
    double retweets_per_day = 0.5;
    double p_in_pre = 0.62;
    double p_in_post = 0.93;
    double homophily_ramp_days = 2.0;

    double label_noise = 0.02;  // train label flip probability

    // Seed accounts and pre-announcement endorsement retweets.
    int seeds_per_class = 8;
    double seed_retweets_per_day = 0.4;
    double seed_fidelity = 0.85;  // P(seed retweet goes to the own-class seed)

    // Fraction of test users who only start tweeting after the announcement.
    double test_late_start_frac = 0.1;

    // Token mode: emit token lists plus an embedding table instead of
    // dense vectors.
    bool token_mode = false;
    int vocab_per_class = 40;
    int vocab_common = 80;
    int tokens_per_tweet = 8;

    Timestamp start_ts = 0;  // 0 -> a fixed midnight in the configured offset
    int utc_offset_hours = 3;

    void validate() const;
    Timestamp resolved_start() const;
    Timestamp announcement() const;
};

Dataset generate(const GenConfig& cfg);

// Token-mode companion table (deterministic for the same config).
EmbeddingTable synth_embedding_table(const GenConfig& cfg);

}  // namespace tmkl
