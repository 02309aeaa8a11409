#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tmkl/types.hpp"

namespace tmkl {

struct EmbeddingTable {
    std::size_t dim = 50;
    std::map<std::string, std::vector<double>> entries;

    const std::vector<double>* lookup(const std::string& token) const {
        auto it = entries.find(token);
        return it == entries.end() ? nullptr : &it->second;
    }
};

// Mean embedding of the tokens found in the table; out-of-vocabulary tokens
// are excluded from the denominator. All tokens missing -> zero vector.
// `missing` (optional) is incremented per unresolved token.
std::vector<double> tweet_vector(std::span<const std::string> tokens, const EmbeddingTable& table,
                                 std::size_t* missing = nullptr);

// Dimension-wise mean over the series' item vectors.
std::vector<double> user_text_aggregate(const ItemSeries& series);

struct NgramScore {
    std::string ngram;
    double score = 0.0;  // positive: YES-associated
};

// PMI(n, YES) - PMI(n, NO) over tf-idf mass, for n-grams of 1..max_n tokens.
// Returned sorted by descending score (ties by ngram for determinism).
std::vector<NgramScore> ngram_polarity_scores(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& user_tokens,
    const LabelMap& labels, int max_n = 3);

}  // namespace tmkl
