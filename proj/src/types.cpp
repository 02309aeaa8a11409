#include "tmkl/types.hpp"

#include <algorithm>
#include <limits>

namespace tmkl {

Stance stance_from_string(const std::string& s) {
    if (s == "YES") return Stance::Yes;
    if (s == "NO") return Stance::No;
    throw ValidationError("unknown stance label '" + s + "' (expected YES or NO)");
}

const char* to_string(Stance s) { return s == Stance::Yes ? "YES" : "NO"; }

void ItemSeries::push(std::span<const double> v, Timestamp t) {
    if (ts.empty()) {
        dim = v.size();
    } else if (v.size() != dim) {
        throw ValidationError("item dimension mismatch in series for user '" + user_id + "'");
    } else if (t < ts.back()) {
        throw ValidationError("items out of order in series for user '" + user_id + "'");
    }
    values.insert(values.end(), v.begin(), v.end());
    ts.push_back(t);
}

Timestamp midnight_floor(Timestamp ts, int utc_offset_hours) {
    const Timestamp day = 86400;
    const Timestamp shifted = ts + static_cast<Timestamp>(utc_offset_hours) * 3600;
    // Floor-divide so pre-epoch timestamps behave too.
    Timestamp d = shifted / day;
    if (shifted % day < 0) --d;
    return d * day - static_cast<Timestamp>(utc_offset_hours) * 3600;
}

Timestamp day_boundary(const Dataset& ds, int day) {
    if (day < 0 || day >= ds.horizon_days)
        throw ValidationError("day " + std::to_string(day) + " out of range [0, " +
                              std::to_string(ds.horizon_days) + ")");
    const Timestamp day0_end = midnight_floor(ds.announcement_ts, ds.utc_offset_hours);
    return day0_end + static_cast<Timestamp>(day) * 86400;
}

Dataset slice_until(const Dataset& ds, int day) {
    const Timestamp cutoff = day_boundary(ds, day);
    Dataset out;
    out.labels = ds.labels;
    out.test_labels = ds.test_labels;
    out.seeds = ds.seeds;
    out.announcement_ts = ds.announcement_ts;
    out.horizon_days = ds.horizon_days;
    out.utc_offset_hours = ds.utc_offset_hours;
    out.tweets.reserve(ds.tweets.size());
    for (const auto& t : ds.tweets)
        if (t.ts <= cutoff) out.tweets.push_back(t);
    out.retweets.reserve(ds.retweets.size());
    for (const auto& r : ds.retweets)
        if (r.ts <= cutoff) out.retweets.push_back(r);
    return out;
}

void validate_dataset(const Dataset& ds) {
    for (const auto& [id, stance] : ds.labels) {
        (void)stance;
        if (ds.test_labels.count(id))
            throw ValidationError("user '" + id + "' appears in both labels and test_labels");
    }
    if (ds.horizon_days < 1) throw ValidationError("horizon_days must be >= 1");

    Timestamp lo = std::numeric_limits<Timestamp>::max();
    Timestamp hi = std::numeric_limits<Timestamp>::min();
    for (const auto& t : ds.tweets) {
        if (t.ts <= 0) throw ValidationError("tweet timestamp must be strictly positive");
        lo = std::min(lo, t.ts);
        hi = std::max(hi, t.ts);
    }
    for (const auto& r : ds.retweets) {
        if (r.src == r.dst) throw ValidationError("self-retweet by user '" + r.src + "'");
        lo = std::min(lo, r.ts);
        hi = std::max(hi, r.ts);
    }
    if (lo <= hi) {  // only check when any events exist (day granularity)
        const Timestamp first_day = midnight_floor(lo, ds.utc_offset_hours);
        const Timestamp last_day_end = midnight_floor(hi, ds.utc_offset_hours) + 86400;
        if (ds.announcement_ts < first_day || ds.announcement_ts > last_day_end)
            throw ValidationError("announcement_ts lies outside the event time range");
    }
}

}  // namespace tmkl
