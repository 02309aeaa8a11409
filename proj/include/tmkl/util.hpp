#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tmkl {

// splitmix64 step; used to derive independent sub-seeds so that parallel
// work items get streams that do not depend on scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

// FNV-1a over bytes; stable across runs and platforms.
struct Fnv1a {
    std::uint64_t state = 0xcbf29ce484222325ull;

    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state ^= p[i];
            state *= 0x100000001b3ull;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }
    void update_u64(std::uint64_t v) { update(&v, sizeof v); }
    void update_f64(double v) { update(&v, sizeof v); }
    void update_f64s(std::span<const double> v) { update(v.data(), v.size() * sizeof(double)); }
    std::uint64_t digest() const { return state; }
};

std::string hex64(std::uint64_t v);

// O(1) sampling from a fixed discrete distribution (Walker's alias method).
class AliasTable {
  public:
    AliasTable() = default;
    explicit AliasTable(std::span<const double> weights);

    std::size_t size() const { return prob_.size(); }
    std::size_t sample(std::mt19937_64& rng) const;

  private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

// Formats a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace tmkl
