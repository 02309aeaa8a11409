#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmkl {

// Raised for malformed inputs or misuse of a documented contract.
// The CLI maps this to exit code 1; everything else exits 2.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Binary voting stance. Solvers encode YES as +1 and NO as -1 throughout.
enum class Stance : std::int8_t { No = -1, Yes = +1 };

inline constexpr double stance_sign(Stance s) { return s == Stance::Yes ? 1.0 : -1.0; }
inline constexpr Stance flipped(Stance s) { return s == Stance::Yes ? Stance::No : Stance::Yes; }

Stance stance_from_string(const std::string& s);
const char* to_string(Stance s);

// Seconds since the Unix epoch.
using Timestamp = std::int64_t;

using LabelMap = std::map<std::string, Stance>;

struct TweetEvent {
    std::string user;
    Timestamp ts = 0;
    std::vector<std::string> tokens;  // may be empty when vec was given directly
    std::vector<double> vec;          // empty until resolved or loaded
};

struct RetweetEvent {
    Timestamp ts = 0;
    std::string src;  // retweeter
    std::string dst;  // retweeted account
};

struct Dataset {
    std::vector<TweetEvent> tweets;
    std::vector<RetweetEvent> retweets;
    LabelMap labels;       // training users
    LabelMap test_labels;  // held-out users, disjoint from labels
    LabelMap seeds;        // seed accounts for distant supervision
    Timestamp announcement_ts = 0;
    int horizon_days = 9;
    int utc_offset_hours = 3;
};

// One user's ordered (vector, timestamp) items. Vectors are stored
// row-major in `values`; `ts` must be ascending.
struct ItemSeries {
    std::string user_id;
    std::size_t dim = 0;
    std::vector<double> values;
    std::vector<Timestamp> ts;

    std::size_t count() const { return ts.size(); }
    bool empty() const { return ts.empty(); }
    std::span<const double> item(std::size_t i) const { return {values.data() + i * dim, dim}; }
    void push(std::span<const double> v, Timestamp t);
};

// Dense row-major matrix used for feature blocks and score tables.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }
};

// Largest midnight (in the fixed UTC offset) that is <= ts.
Timestamp midnight_floor(Timestamp ts, int utc_offset_hours);

// End-of-day boundary for evaluation day `day` (0-based). Day 0 ends at the
// midnight immediately preceding the announcement, i.e. right before it.
Timestamp day_boundary(const Dataset& ds, int day);

// Events with ts <= day_boundary(day); labels and metadata unchanged.
Dataset slice_until(const Dataset& ds, int day);

// Checks structural invariants; throws ValidationError on violation.
void validate_dataset(const Dataset& ds);

}  // namespace tmkl
