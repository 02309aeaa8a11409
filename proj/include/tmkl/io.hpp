#pragma once

#include <string>
#include <vector>

#include "tmkl/text.hpp"
#include "tmkl/types.hpp"

namespace tmkl {

struct LoadPaths {
    std::string tweets;       // tweets.jsonl
    std::string retweets;     // retweets.csv, optional
    std::string labels;       // labels.csv, optional
    std::string test_labels;  // test_labels.csv, optional
    std::string seeds;        // seeds.csv, optional
    std::string embeddings;   // embeddings.tsv, optional
};

struct LoadOptions {
    int d_text = 50;
    Timestamp announcement_ts = 0;
    int horizon_days = 9;
    int utc_offset_hours = 3;
};

struct LoadReport {
    std::size_t tweets = 0;
    std::size_t retweets = 0;
    std::size_t skipped_tokens = 0;  // tokens with no embedding
    std::vector<std::string> users_without_vectors;  // kept, flagged
};

struct LoadResult {
    Dataset dataset;
    LoadReport report;
};

LoadResult load_dataset(const LoadPaths& paths, const LoadOptions& opts);

EmbeddingTable load_embeddings_tsv(const std::string& path, int expected_dim);
LabelMap load_labels_csv(const std::string& path);

void write_tweets_jsonl(const std::string& path, const std::vector<TweetEvent>& tweets);
void write_retweets_csv(const std::string& path, const std::vector<RetweetEvent>& retweets);
void write_labels_csv(const std::string& path, const LabelMap& labels);
// labels.csv layout with an extra `score` column (distant-supervision output).
void write_scored_labels_csv(const std::string& path,
                             const std::vector<std::pair<std::string, Stance>>& labels,
                             const std::vector<double>& scores);
void write_embeddings_tsv(const std::string& path, const EmbeddingTable& table);

// Writes via a temp file in the same directory, then renames into place.
void atomic_write_text(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace tmkl
