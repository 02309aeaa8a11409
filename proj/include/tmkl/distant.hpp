#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tmkl/types.hpp"

namespace tmkl {

struct SeedScore {
    std::string user_id;
    double score = 0.0;  // PMI(u, YES) - PMI(u, NO)
    std::optional<Stance> assigned;
};

// PMI scores from seed-retweet event counts before until_ts. Each retweet of
// a seed account counts once; log base 2, add-epsilon smoothing 1e-9.
// Returned sorted by user id.
std::vector<SeedScore> pmi_scores(std::span<const RetweetEvent> retweets, const LabelMap& seeds,
                                  Timestamp until_ts);

// Threshold rule: tr = n * max|score|; YES if score > tr, NO if score < -tr.
std::vector<SeedScore> apply_threshold(std::vector<SeedScore> scores, double n);

// Labels from apply_threshold plus the seed accounts with their own labels.
LabelMap expand_seeds(std::span<const SeedScore> scores, double n, const LabelMap& seeds);

}  // namespace tmkl
