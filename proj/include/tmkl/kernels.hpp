#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmkl/types.hpp"

namespace tmkl {

enum class KernelTag { W, WT, N, NT, Sum, Noise };
const char* to_string(KernelTag tag);

enum class SubKernelKind { Linear, Rbf };

// An item- or time-level kernel: LINEAR is the dot product, RBF is
// exp(-gamma * ||x - y||^2).
struct SubKernelSpec {
    SubKernelKind kind = SubKernelKind::Linear;
    double gamma = 1.0;  // RBF only, must be > 0

    static SubKernelSpec linear() { return {SubKernelKind::Linear, 1.0}; }
    static SubKernelSpec rbf(double gamma) { return {SubKernelKind::Rbf, gamma}; }
};

// Maps raw integer timestamps to the unit the time kernel operates on
// (fractional days since the announcement by default).
struct TimeScale {
    Timestamp origin = 0;
    double seconds_per_unit = 86400.0;

    double to_units(Timestamp t) const {
        return static_cast<double>(t - origin) / seconds_per_unit;
    }
};

// Rectangular cross-kernel block (rows = prediction users, cols = training users).
struct KernelBlock {
    std::vector<std::string> row_index, col_index;
    std::vector<double> values;  // rows*cols row-major

    std::size_t rows() const { return row_index.size(); }
    std::size_t cols() const { return col_index.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
};

// Symmetric Gram matrix over an ordered user index.
struct KernelMatrix {
    KernelTag tag = KernelTag::W;
    std::vector<std::string> user_index;
    std::vector<double> values;  // n*n row-major

    std::size_t n() const { return user_index.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * n() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * n() + j]; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * n(), n()}; }

    KernelMatrix submatrix(std::span<const int> idx) const;
    KernelBlock block(std::span<const int> row_idx, std::span<const int> col_idx) const;
};

double sub_kernel(const SubKernelSpec& spec, std::span<const double> x, std::span<const double> y);

// Mean of the item sub-kernel over all item pairs of the two series.
// The pair loop is canonically ordered, so conv_kernel(a, b) and
// conv_kernel(b, a) are bitwise identical.
double conv_kernel(const ItemSeries& a, const ItemSeries& b, const SubKernelSpec& spec);

// Mean of item-kernel * time-kernel over all pairs. Timestamps are rescaled
// through `scale` before the time kernel; the time kernel must be RBF.
double temporal_conv_kernel(const ItemSeries& a, const ItemSeries& b,
                            const SubKernelSpec& item_spec, const SubKernelSpec& time_spec,
                            const TimeScale& scale = {});

struct GramOptions {
    int jobs = 1;
    TimeScale time_scale{};
};

// Full Gram matrix; computes the upper triangle and mirrors it. Rows may be
// computed in parallel; each entry uses a fixed summation order, so the
// result is independent of the job count.
KernelMatrix gram(std::span<const ItemSeries> series, const SubKernelSpec& item_spec,
                  const std::optional<SubKernelSpec>& time_spec, KernelTag tag,
                  const GramOptions& opts = {});

// One Gram per time gamma in a single pass over item pairs. Equivalent to
// calling gram() once per gamma with an RBF time kernel.
std::vector<KernelMatrix> gram_time_grid(std::span<const ItemSeries> series,
                                         const SubKernelSpec& item_spec,
                                         std::span<const double> time_gammas, KernelTag tag,
                                         const GramOptions& opts = {});

// Fast path for series that share one timestamp grid and have 1-dimensional
// items (the network score series): K = S T S^T / M^2 with T the pairwise
// time-kernel matrix. Checked against gram() by tests.
KernelMatrix gram_shared_time(std::span<const ItemSeries> series, const SubKernelSpec& time_spec,
                              KernelTag tag, const GramOptions& opts = {});

// Rectangular block of pairwise convolution kernels.
KernelBlock cross_block(std::span<const ItemSeries> rows, std::span<const ItemSeries> cols,
                        const SubKernelSpec& item_spec,
                        const std::optional<SubKernelSpec>& time_spec, const GramOptions& opts = {});

// Shared-grid fast path for cross blocks (see gram_shared_time).
KernelBlock cross_shared_time(std::span<const ItemSeries> rows, std::span<const ItemSeries> cols,
                              const SubKernelSpec& time_spec, const GramOptions& opts = {});

// Self-kernel k(x, x) per series; used to normalize cross blocks.
std::vector<double> self_kernels(std::span<const ItemSeries> series, const SubKernelSpec& item_spec,
                                 const std::optional<SubKernelSpec>& time_spec,
                                 const GramOptions& opts = {});

// Divides entries by sqrt(K(i,i) K(j,j)); the diagonal becomes exactly 1.
KernelMatrix normalize(const KernelMatrix& K);
KernelBlock normalize_block(const KernelBlock& B, std::span<const double> row_self,
                            std::span<const double> col_self);

// Entrywise sum; all inputs must share the user index.
KernelMatrix sum_kernels(std::span<const KernelMatrix> ks);

// Binary cache: "CKRN", u32 n (LE), n length-prefixed UTF-8 ids, n*n LE f64.
void write_kernel_cache(const std::string& path, const KernelMatrix& K);
KernelMatrix read_kernel_cache(const std::string& path);

}  // namespace tmkl
