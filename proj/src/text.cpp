#include "tmkl/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace tmkl {

std::vector<double> tweet_vector(std::span<const std::string> tokens, const EmbeddingTable& table,
                                 std::size_t* missing) {
    std::vector<double> acc(table.dim, 0.0);
    std::size_t found = 0;
    for (const auto& tok : tokens) {
        if (const auto* v = table.lookup(tok)) {
            for (std::size_t i = 0; i < table.dim; ++i) acc[i] += (*v)[i];
            ++found;
        } else if (missing) {
            ++*missing;
        }
    }
    if (found > 0)
        for (auto& x : acc) x /= static_cast<double>(found);
    return acc;
}

std::vector<double> user_text_aggregate(const ItemSeries& series) {
    if (series.empty())
        throw ValidationError("user_text_aggregate: empty series for user '" + series.user_id +
                              "'");
    std::vector<double> acc(series.dim, 0.0);
    for (std::size_t i = 0; i < series.count(); ++i) {
        const auto v = series.item(i);
        for (std::size_t k = 0; k < series.dim; ++k) acc[k] += v[k];
    }
    for (auto& x : acc) x /= static_cast<double>(series.count());
    return acc;
}

namespace {

constexpr double kPmiEps = 1e-9;

double log2_ratio(double joint, double marg) { return std::log2((joint + kPmiEps) / (marg + kPmiEps)); }

}  // namespace

std::vector<NgramScore> ngram_polarity_scores(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& user_tokens,
    const LabelMap& labels, int max_n) {
    if (max_n < 1) throw ValidationError("ngram_polarity_scores: max_n must be >= 1");

    // Raw term frequency per labeled user document.
    std::map<std::string, std::map<std::string, double>> tf;  // ngram -> user -> count
    std::size_t n_yes = 0, n_no = 0, n_docs = 0;
    for (const auto& [user, tokens] : user_tokens) {
        auto it = labels.find(user);
        if (it == labels.end()) continue;
        ++n_docs;
        (it->second == Stance::Yes ? n_yes : n_no)++;
        for (int n = 1; n <= max_n; ++n) {
            if (tokens.size() < static_cast<std::size_t>(n)) break;
            for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
                std::string g = tokens[i];
                for (int k = 1; k < n; ++k) g += " " + tokens[i + k];
                tf[g][user] += 1.0;
            }
        }
    }
    if (n_yes == 0 || n_no == 0)
        throw ValidationError("ngram_polarity_scores: both classes must be present");

    // tf-idf mass per (ngram, class); PMI over the joint distribution it induces.
    std::map<std::string, std::array<double, 2>> mass;  // [0]=YES, [1]=NO
    double total = 0.0;
    double class_total[2] = {0.0, 0.0};
    for (const auto& [g, users] : tf) {
        const double idf = std::log(static_cast<double>(n_docs) / static_cast<double>(users.size()));
        auto& m = mass[g];
        m = {0.0, 0.0};
        for (const auto& [user, count] : users) {
            const int c = labels.at(user) == Stance::Yes ? 0 : 1;
            m[c] += count * idf;
        }
        total += m[0] + m[1];
        class_total[0] += m[0];
        class_total[1] += m[1];
    }
    if (total <= 0.0) return {};

    std::vector<NgramScore> out;
    out.reserve(mass.size());
    for (const auto& [g, m] : mass) {
        const double p_g = (m[0] + m[1]) / total;
        const double p_yes = class_total[0] / total;
        const double p_no = class_total[1] / total;
        const double pmi_yes = log2_ratio(m[0] / total, p_g * p_yes);
        const double pmi_no = log2_ratio(m[1] / total, p_g * p_no);
        out.push_back({g, pmi_yes - pmi_no});
    }
    std::sort(out.begin(), out.end(), [](const NgramScore& a, const NgramScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.ngram < b.ngram;
    });
    return out;
}

}  // namespace tmkl
