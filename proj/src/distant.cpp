#include "tmkl/distant.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tmkl {
namespace {

constexpr double kEps = 1e-9;

double pmi(double joint, double marg_u, double marg_c) {
    return std::log2((joint + kEps) / (marg_u * marg_c + kEps));
}

}  // namespace

std::vector<SeedScore> pmi_scores(std::span<const RetweetEvent> retweets, const LabelMap& seeds,
                                  Timestamp until_ts) {
    // user -> (yes-seed events, no-seed events)
    std::map<std::string, std::pair<double, double>> counts;
    double total_yes = 0.0, total_no = 0.0;
    for (const auto& r : retweets) {
        if (r.ts >= until_ts) continue;
        const auto it = seeds.find(r.dst);
        if (it == seeds.end()) continue;
        auto& c = counts[r.src];
        if (it->second == Stance::Yes) {
            c.first += 1.0;
            total_yes += 1.0;
        } else {
            c.second += 1.0;
            total_no += 1.0;
        }
    }
    if (total_yes == 0.0 || total_no == 0.0)
        throw ValidationError("pmi_scores: a seed class has no retweets before the cutoff");

    const double total = total_yes + total_no;
    const double p_yes = total_yes / total;
    const double p_no = total_no / total;
    std::vector<SeedScore> out;
    out.reserve(counts.size());
    for (const auto& [user, c] : counts) {
        const double p_u = (c.first + c.second) / total;
        const double score =
            pmi(c.first / total, p_u, p_yes) - pmi(c.second / total, p_u, p_no);
        out.push_back({user, score, std::nullopt});
    }
    return out;
}

std::vector<SeedScore> apply_threshold(std::vector<SeedScore> scores, double n) {
    if (n < 0.0 || n > 1.0) throw ValidationError("threshold fraction n must lie in [0, 1]");
    if (scores.empty()) throw ValidationError("apply_threshold: no scores");
    double max_abs = 0.0;
    for (const auto& s : scores) max_abs = std::max(max_abs, std::fabs(s.score));
    const double tr = n * max_abs;
    for (auto& s : scores) {
        if (s.score > tr)
            s.assigned = Stance::Yes;
        else if (s.score < -tr)
            s.assigned = Stance::No;
        else
            s.assigned.reset();
    }
    return scores;
}

LabelMap expand_seeds(std::span<const SeedScore> scores, double n, const LabelMap& seeds) {
    std::vector<SeedScore> copy(scores.begin(), scores.end());
    copy = apply_threshold(std::move(copy), n);
    LabelMap out;
    for (const auto& s : copy)
        if (s.assigned) out[s.user_id] = *s.assigned;
    for (const auto& [id, stance] : seeds) out[id] = stance;  // seed label wins
    return out;
}

}  // namespace tmkl
