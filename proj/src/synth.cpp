#include "tmkl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tmkl/util.hpp"

namespace tmkl {
namespace {

constexpr Timestamp kDefaultBase = 1434600000;  // mid-June 2015

std::string padded(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04d", prefix, i);
    return buf;
}

}  // namespace

void GenConfig::validate() const {
    const auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (days < 1) throw ValidationError("synth: days must be >= 1");
    if (history_days < 0) throw ValidationError("synth: history_days must be >= 0");
    if (n_train_yes < 1 || n_train_no < 1 || n_test_yes < 1 || n_test_no < 1)
        throw ValidationError("synth: every class needs at least one user");
    if (d_text < 1) throw ValidationError("synth: d_text must be >= 1");
    if (tweets_per_day < 0.0 || retweets_per_day < 0.0 || seed_retweets_per_day < 0.0)
        throw ValidationError("synth: rates must be >= 0");
    if (delta_max < 0.0 || ramp_days <= 0.0)
        throw ValidationError("synth: separation schedule must be nondecreasing");
    if (!in_unit(p_in_pre) || !in_unit(p_in_post) || !in_unit(label_noise) ||
        !in_unit(seed_fidelity) || !in_unit(test_late_start_frac))
        throw ValidationError("synth: probabilities must lie in [0, 1]");
    if (homophily_ramp_days <= 0.0) throw ValidationError("synth: homophily ramp must be > 0");
    if (seeds_per_class < 1) throw ValidationError("synth: seeds_per_class must be >= 1");
    if (text_noise_sigma < 0.0) throw ValidationError("synth: text_noise_sigma must be >= 0");
}

Timestamp GenConfig::resolved_start() const {
    const Timestamp base = start_ts != 0 ? start_ts : kDefaultBase;
    return midnight_floor(base, utc_offset_hours);
}

Timestamp GenConfig::announcement() const {
    return resolved_start() + static_cast<Timestamp>(history_days + 1) * 86400;
}

EmbeddingTable synth_embedding_table(const GenConfig& cfg) {
    EmbeddingTable table;
    table.dim = static_cast<std::size_t>(cfg.d_text);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x7ab1eull));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> direction(table.dim);
    double norm = 0.0;
    for (auto& v : direction) {
        v = gauss(rng);
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : direction) v /= norm;

    const auto emit = [&](const std::string& token, double shift) {
        std::vector<double> vec(table.dim);
        for (std::size_t d = 0; d < table.dim; ++d)
            vec[d] = shift * direction[d] + 0.5 * gauss(rng);
        table.entries[token] = std::move(vec);
    };
    for (int i = 0; i < cfg.vocab_per_class; ++i) emit(padded("vyes", i), +cfg.delta_max);
    for (int i = 0; i < cfg.vocab_per_class; ++i) emit(padded("vno", i), -cfg.delta_max);
    for (int i = 0; i < cfg.vocab_common; ++i) emit(padded("vcom", i), 0.0);
    return table;
}

Dataset generate(const GenConfig& cfg) {
    cfg.validate();
    const Timestamp start = cfg.resolved_start();
    const Timestamp announcement = cfg.announcement();
    const int total_days = cfg.history_days + cfg.days;

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<Timestamp> day_offset(1, 86399);

    // Class separation direction in text space.
    std::vector<double> direction(static_cast<std::size_t>(cfg.d_text));
    double norm = 0.0;
    for (auto& v : direction) {
        v = gauss(rng);
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : direction) v /= norm;

    struct User {
        std::string id;
        Stance truth;
        bool is_test;
        int activation_day = 0;  // first day with any activity
    };
    std::vector<User> users;
    std::vector<std::size_t> yes_users, no_users;  // indices by true class
    const auto add_users = [&](const char* prefix, int count, Stance truth, bool is_test) {
        for (int i = 0; i < count; ++i) {
            users.push_back({padded(prefix, i), truth, is_test, 0});
            (truth == Stance::Yes ? yes_users : no_users).push_back(users.size() - 1);
        }
    };
    add_users("train_yes_", cfg.n_train_yes, Stance::Yes, false);
    add_users("train_no_", cfg.n_train_no, Stance::No, false);
    add_users("test_yes_", cfg.n_test_yes, Stance::Yes, true);
    add_users("test_no_", cfg.n_test_no, Stance::No, true);

    Dataset ds;
    ds.announcement_ts = announcement;
    ds.horizon_days = cfg.days;
    ds.utc_offset_hours = cfg.utc_offset_hours;

    for (auto& u : users) {
        if (u.is_test) {
            ds.test_labels[u.id] = u.truth;
            if (cfg.days > 1 && unit(rng) < cfg.test_late_start_frac) {
                std::uniform_int_distribution<int> late(cfg.history_days + 1, total_days - 1);
                u.activation_day = late(rng);
            }
        } else {
            const bool flip = unit(rng) < cfg.label_noise;
            ds.labels[u.id] = flip ? flipped(u.truth) : u.truth;
        }
    }
    for (int i = 0; i < cfg.seeds_per_class; ++i) ds.seeds[padded("seed_yes_", i)] = Stance::Yes;
    for (int i = 0; i < cfg.seeds_per_class; ++i) ds.seeds[padded("seed_no_", i)] = Stance::No;

    const auto delta_at = [&](Timestamp ts) {
        if (ts <= announcement || cfg.delta_max == 0.0) return 0.0;
        const double days_since =
            static_cast<double>(ts - announcement) / 86400.0;
        return cfg.delta_max * std::min(1.0, days_since / cfg.ramp_days);
    };
    const auto p_in_at = [&](Timestamp ts) {
        if (ts <= announcement) return cfg.p_in_pre;
        const double days_since = static_cast<double>(ts - announcement) / 86400.0;
        return cfg.p_in_pre +
               (cfg.p_in_post - cfg.p_in_pre) * std::min(1.0, days_since / cfg.homophily_ramp_days);
    };

    std::poisson_distribution<int> tweet_count(cfg.tweets_per_day > 0 ? cfg.tweets_per_day : 1e-12);
    std::poisson_distribution<int> retweet_count(cfg.retweets_per_day > 0 ? cfg.retweets_per_day
                                                                          : 1e-12);
    std::poisson_distribution<int> seed_count(
        cfg.seed_retweets_per_day > 0 ? cfg.seed_retweets_per_day : 1e-12);

    const auto make_tweet = [&](const User& u, Timestamp ts) {
        TweetEvent ev;
        ev.user = u.id;
        ev.ts = ts;
        const double delta = delta_at(ts);
        const double shift = (u.truth == Stance::Yes ? +0.5 : -0.5) * delta;
        if (cfg.token_mode) {
            const double p_class = cfg.delta_max > 0.0 ? 0.5 * delta / cfg.delta_max : 0.0;
            for (int t = 0; t < cfg.tokens_per_tweet; ++t) {
                if (unit(rng) < p_class) {
                    std::uniform_int_distribution<int> pick(0, cfg.vocab_per_class - 1);
                    ev.tokens.push_back(
                        padded(u.truth == Stance::Yes ? "vyes" : "vno", pick(rng)));
                } else {
                    std::uniform_int_distribution<int> pick(0, cfg.vocab_common - 1);
                    ev.tokens.push_back(padded("vcom", pick(rng)));
                }
            }
        } else {
            ev.vec.resize(static_cast<std::size_t>(cfg.d_text));
            for (std::size_t d = 0; d < ev.vec.size(); ++d)
                ev.vec[d] = shift * direction[d] + cfg.text_noise_sigma * gauss(rng);
        }
        return ev;
    };

    for (std::size_t ui = 0; ui < users.size(); ++ui) {
        const User& u = users[ui];
        int pre_tweets = 0;
        for (int day = u.activation_day; day < total_days; ++day) {
            const Timestamp day_start = start + static_cast<Timestamp>(day) * 86400;
            const int k = cfg.tweets_per_day > 0 ? tweet_count(rng) : 0;
            for (int t = 0; t < k; ++t) {
                const Timestamp ts = day_start + day_offset(rng);
                if (ts <= announcement) ++pre_tweets;
                ds.tweets.push_back(make_tweet(u, ts));
            }
        }
        // Training users must be active before the announcement so the
        // training set size stays constant across evaluation days.
        if (!u.is_test && pre_tweets == 0) {
            std::uniform_int_distribution<int> day(0, cfg.history_days);
            const Timestamp ts = start + static_cast<Timestamp>(day(rng)) * 86400 + day_offset(rng);
            ds.tweets.push_back(make_tweet(u, ts));
        }
    }

    // User-user retweets with the homophily schedule.
    for (std::size_t ui = 0; ui < users.size(); ++ui) {
        const User& u = users[ui];
        for (int day = u.activation_day; day < total_days; ++day) {
            const Timestamp day_start = start + static_cast<Timestamp>(day) * 86400;
            const int k = cfg.retweets_per_day > 0 ? retweet_count(rng) : 0;
            for (int t = 0; t < k; ++t) {
                const Timestamp ts = day_start + day_offset(rng);
                bool within = unit(rng) < p_in_at(ts);
                const auto& own = u.truth == Stance::Yes ? yes_users : no_users;
                if (within && own.size() == 1) within = false;  // nobody else in class
                const auto& pool = (within == (u.truth == Stance::Yes)) ? yes_users : no_users;
                std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                std::size_t partner = pool[pick(rng)];
                while (partner == ui) partner = pool[pick(rng)];
                ds.retweets.push_back({ts, u.id, users[partner].id});
            }
        }
    }

    // Pre-announcement seed endorsements.
    for (std::size_t ui = 0; ui < users.size(); ++ui) {
        const User& u = users[ui];
        if (u.activation_day > cfg.history_days) continue;
        for (int day = 0; day <= cfg.history_days; ++day) {
            const Timestamp day_start = start + static_cast<Timestamp>(day) * 86400;
            const int k = cfg.seed_retweets_per_day > 0 ? seed_count(rng) : 0;
            for (int t = 0; t < k; ++t) {
                const Timestamp ts = day_start + day_offset(rng);
                const bool faithful = unit(rng) < cfg.seed_fidelity;
                const Stance side = faithful ? u.truth : flipped(u.truth);
                std::uniform_int_distribution<int> pick(0, cfg.seeds_per_class - 1);
                ds.retweets.push_back(
                    {ts, u.id, padded(side == Stance::Yes ? "seed_yes_" : "seed_no_", pick(rng))});
            }
        }
    }

    std::stable_sort(ds.tweets.begin(), ds.tweets.end(),
                     [](const TweetEvent& a, const TweetEvent& b) { return a.ts < b.ts; });
    std::stable_sort(ds.retweets.begin(), ds.retweets.end(),
                     [](const RetweetEvent& a, const RetweetEvent& b) { return a.ts < b.ts; });
    validate_dataset(ds);
    return ds;
}

}  // namespace tmkl
