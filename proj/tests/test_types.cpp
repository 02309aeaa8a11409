#include <doctest.h>

#include "tmkl/types.hpp"

using namespace tmkl;

namespace {

Dataset tiny_dataset() {
    Dataset ds;
    ds.utc_offset_hours = 0;
    ds.horizon_days = 3;
    ds.announcement_ts = 86400;  // exactly midnight UTC
    for (Timestamp ts : {1000, 86000, 90000, 170000, 200000, 259200}) {
        TweetEvent t;
        t.user = "u";
        t.ts = ts;
        t.vec = {1.0};
        ds.tweets.push_back(t);
    }
    ds.retweets.push_back({5000, "a", "b"});
    ds.retweets.push_back({250000, "b", "a"});
    return ds;
}

}  // namespace

TEST_CASE("stance encoding and parsing") {
    CHECK(stance_sign(Stance::Yes) == 1.0);
    CHECK(stance_sign(Stance::No) == -1.0);
    CHECK(stance_from_string("YES") == Stance::Yes);
    CHECK(stance_from_string("NO") == Stance::No);
    CHECK_THROWS_AS((void)stance_from_string("MAYBE"), ValidationError);
    CHECK(flipped(Stance::Yes) == Stance::No);
}

TEST_CASE("midnight_floor honors the fixed offset") {
    CHECK(midnight_floor(100, 0) == 0);
    CHECK(midnight_floor(86400, 0) == 86400);
    CHECK(midnight_floor(86399, 0) == 0);
    // +3h offset shifts the boundary back by 3h in UTC.
    CHECK(midnight_floor(86400 - 3 * 3600, 3) == 86400 - 3 * 3600);
    CHECK(midnight_floor(86400 - 3 * 3600 - 1, 3) == -3 * 3600);
}

TEST_CASE("slice_until keeps events up to the day boundary") {
    const Dataset ds = tiny_dataset();

    const Dataset full = slice_until(ds, ds.horizon_days - 1);
    CHECK(full.tweets.size() == ds.tweets.size());
    CHECK(full.retweets.size() == ds.retweets.size());

    const Dataset day0 = slice_until(ds, 0);  // boundary = announcement midnight
    CHECK(day0.tweets.size() == 2);  // ts 1000, 86000 (86400 > got 90000? no: <=86400)
    CHECK(day0.retweets.size() == 1);
    CHECK(day0.labels == ds.labels);

    CHECK_THROWS_AS((void)slice_until(ds, 3), ValidationError);
    CHECK_THROWS_AS((void)slice_until(ds, -1), ValidationError);
}

TEST_CASE("slice_until is monotone in the day index") {
    const Dataset ds = tiny_dataset();
    std::size_t prev_tweets = 0, prev_retweets = 0;
    for (int day = 0; day < ds.horizon_days; ++day) {
        const Dataset s = slice_until(ds, day);
        CHECK(s.tweets.size() >= prev_tweets);
        CHECK(s.retweets.size() >= prev_retweets);
        // Subset: every event in day d appears in day d+1's slice by cutoff.
        for (const auto& t : s.tweets) CHECK(t.ts <= day_boundary(ds, day));
        prev_tweets = s.tweets.size();
        prev_retweets = s.retweets.size();
    }
}

TEST_CASE("validate_dataset enforces the structural invariants") {
    Dataset ds = tiny_dataset();
    ds.labels["x"] = Stance::Yes;
    ds.test_labels["x"] = Stance::No;
    CHECK_THROWS_WITH_AS(validate_dataset(ds), doctest::Contains("both labels"), ValidationError);

    Dataset self = tiny_dataset();
    self.retweets.push_back({600, "a", "a"});
    CHECK_THROWS_AS(validate_dataset(self), ValidationError);

    Dataset outside = tiny_dataset();
    outside.announcement_ts = 999999999;  // far beyond the last event day
    CHECK_THROWS_WITH_AS(validate_dataset(outside), doctest::Contains("announcement"),
                         ValidationError);

    Dataset nonpos = tiny_dataset();
    nonpos.tweets[0].ts = 0;
    CHECK_THROWS_AS(validate_dataset(nonpos), ValidationError);
}

TEST_CASE("item series enforce dimension and ordering") {
    ItemSeries s;
    s.user_id = "u";
    const std::vector<double> a{1.0, 2.0};
    s.push(a, 10);
    CHECK(s.dim == 2);
    const std::vector<double> bad{1.0};
    CHECK_THROWS_AS(s.push(bad, 20), ValidationError);
    const std::vector<double> b{3.0, 4.0};
    CHECK_THROWS_AS(s.push(b, 5), ValidationError);
    s.push(b, 20);
    CHECK(s.count() == 2);
    CHECK(s.item(1)[1] == 4.0);
}
