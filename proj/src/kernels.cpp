#include "tmkl/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "tmkl/parallel.hpp"

namespace tmkl {
namespace {

void check_spec(const SubKernelSpec& spec) {
    if (spec.kind == SubKernelKind::Rbf && !(spec.gamma > 0.0))
        throw ValidationError("RBF sub-kernel requires gamma > 0");
}

void check_series(const ItemSeries& s) {
    if (s.empty())
        throw ValidationError("empty item series for user '" + s.user_id + "'");
}

double dot(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

double sqdist(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

inline double eval_sub(const SubKernelSpec& spec, std::span<const double> x,
                       std::span<const double> y) {
    if (spec.kind == SubKernelKind::Linear) return dot(x, y);
    return std::exp(-spec.gamma * sqdist(x, y));
}

// Fixed pair ordering so that the double loop runs identically for (a, b)
// and (b, a); conv kernels are then bitwise symmetric.
std::pair<const ItemSeries*, const ItemSeries*> canonical(const ItemSeries& a,
                                                          const ItemSeries& b) {
    if (a.count() != b.count())
        return a.count() < b.count() ? std::pair{&a, &b} : std::pair{&b, &a};
    if (a.user_id != b.user_id)
        return a.user_id < b.user_id ? std::pair{&a, &b} : std::pair{&b, &a};
    return {&a, &b};
}

std::vector<double> scaled_times(const ItemSeries& s, const TimeScale& scale) {
    std::vector<double> out(s.count());
    for (std::size_t i = 0; i < s.count(); ++i) out[i] = scale.to_units(s.ts[i]);
    return out;
}

double pair_value(const ItemSeries& a, const ItemSeries& b, const SubKernelSpec& item_spec,
                  const std::optional<SubKernelSpec>& time_spec, const TimeScale& scale) {
    check_series(a);
    check_series(b);
    if (a.dim != b.dim)
        throw ValidationError("item dimension mismatch between users '" + a.user_id + "' and '" +
                              b.user_id + "'");
    check_spec(item_spec);
    const auto [f, s] = canonical(a, b);
    double sum = 0.0;
    if (!time_spec) {
        for (std::size_t i = 0; i < f->count(); ++i) {
            const auto xi = f->item(i);
            for (std::size_t j = 0; j < s->count(); ++j) sum += eval_sub(item_spec, xi, s->item(j));
        }
    } else {
        if (time_spec->kind != SubKernelKind::Rbf)
            throw ValidationError("time kernel must be RBF");
        check_spec(*time_spec);
        const double tg = time_spec->gamma;
        const std::vector<double> tf = scaled_times(*f, scale);
        const std::vector<double> tsec = scaled_times(*s, scale);
        for (std::size_t i = 0; i < f->count(); ++i) {
            const auto xi = f->item(i);
            const double ti = tf[i];
            for (std::size_t j = 0; j < s->count(); ++j) {
                const double dt = ti - tsec[j];
                const double dt2 = dt * dt;
                sum += eval_sub(item_spec, xi, s->item(j)) * std::exp(-tg * dt2);
            }
        }
    }
    return sum / (static_cast<double>(f->count()) * static_cast<double>(s->count()));
}

}  // namespace

const char* to_string(KernelTag tag) {
    switch (tag) {
        case KernelTag::W: return "w";
        case KernelTag::WT: return "wt";
        case KernelTag::N: return "n";
        case KernelTag::NT: return "nt";
        case KernelTag::Sum: return "sum";
        case KernelTag::Noise: return "noise";
    }
    return "?";
}

KernelMatrix KernelMatrix::submatrix(std::span<const int> idx) const {
    KernelMatrix out;
    out.tag = tag;
    out.user_index.reserve(idx.size());
    for (int i : idx) out.user_index.push_back(user_index.at(static_cast<std::size_t>(i)));
    out.values.resize(idx.size() * idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < idx.size(); ++c)
            out.values[r * idx.size() + c] =
                at(static_cast<std::size_t>(idx[r]), static_cast<std::size_t>(idx[c]));
    return out;
}

KernelBlock KernelMatrix::block(std::span<const int> row_idx, std::span<const int> col_idx) const {
    KernelBlock out;
    out.row_index.reserve(row_idx.size());
    out.col_index.reserve(col_idx.size());
    for (int i : row_idx) out.row_index.push_back(user_index.at(static_cast<std::size_t>(i)));
    for (int j : col_idx) out.col_index.push_back(user_index.at(static_cast<std::size_t>(j)));
    out.values.resize(row_idx.size() * col_idx.size());
    for (std::size_t r = 0; r < row_idx.size(); ++r)
        for (std::size_t c = 0; c < col_idx.size(); ++c)
            out.values[r * col_idx.size() + c] =
                at(static_cast<std::size_t>(row_idx[r]), static_cast<std::size_t>(col_idx[c]));
    return out;
}

double sub_kernel(const SubKernelSpec& spec, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw ValidationError("sub_kernel: dimension mismatch (" + std::to_string(x.size()) +
                              " vs " + std::to_string(y.size()) + ")");
    check_spec(spec);
    return eval_sub(spec, x, y);
}

double conv_kernel(const ItemSeries& a, const ItemSeries& b, const SubKernelSpec& spec) {
    return pair_value(a, b, spec, std::nullopt, {});
}

double temporal_conv_kernel(const ItemSeries& a, const ItemSeries& b,
                            const SubKernelSpec& item_spec, const SubKernelSpec& time_spec,
                            const TimeScale& scale) {
    return pair_value(a, b, item_spec, time_spec, scale);
}

KernelMatrix gram(std::span<const ItemSeries> series, const SubKernelSpec& item_spec,
                  const std::optional<SubKernelSpec>& time_spec, KernelTag tag,
                  const GramOptions& opts) {
    const std::size_t n = series.size();
    for (const auto& s : series) check_series(s);
    KernelMatrix K;
    K.tag = tag;
    for (const auto& s : series) K.user_index.push_back(s.user_id);
    K.values.assign(n * n, 0.0);
    parallel_for(opts.jobs, n, [&](std::size_t i) {
        for (std::size_t j = i; j < n; ++j)
            K.values[i * n + j] = pair_value(series[i], series[j], item_spec, time_spec,
                                             opts.time_scale);
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) K.values[i * n + j] = K.values[j * n + i];
    return K;
}

std::vector<KernelMatrix> gram_time_grid(std::span<const ItemSeries> series,
                                         const SubKernelSpec& item_spec,
                                         std::span<const double> time_gammas, KernelTag tag,
                                         const GramOptions& opts) {
    const std::size_t n = series.size();
    const std::size_t g = time_gammas.size();
    for (const auto& s : series) check_series(s);
    check_spec(item_spec);
    for (double tg : time_gammas)
        if (!(tg > 0.0)) throw ValidationError("RBF sub-kernel requires gamma > 0");

    std::vector<std::vector<double>> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = scaled_times(series[i], opts.time_scale);

    std::vector<KernelMatrix> out(g);
    for (std::size_t k = 0; k < g; ++k) {
        out[k].tag = tag;
        for (const auto& s : series) out[k].user_index.push_back(s.user_id);
        out[k].values.assign(n * n, 0.0);
    }

    parallel_for(opts.jobs, n, [&](std::size_t i) {
        std::vector<double> acc(g);
        for (std::size_t j = i; j < n; ++j) {
            const auto [f, s] = canonical(series[i], series[j]);
            const auto& tf = f == &series[i] ? times[i] : times[j];
            const auto& tsec = f == &series[i] ? times[j] : times[i];
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t p = 0; p < f->count(); ++p) {
                const auto xp = f->item(p);
                const double tp = tf[p];
                for (std::size_t q = 0; q < s->count(); ++q) {
                    const double kz = eval_sub(item_spec, xp, s->item(q));
                    const double dt = tp - tsec[q];
                    const double dt2 = dt * dt;
                    for (std::size_t k = 0; k < g; ++k)
                        acc[k] += kz * std::exp(-time_gammas[k] * dt2);
                }
            }
            const double denom = static_cast<double>(f->count()) * static_cast<double>(s->count());
            for (std::size_t k = 0; k < g; ++k) out[k].values[i * n + j] = acc[k] / denom;
        }
    });
    for (std::size_t k = 0; k < g; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) out[k].values[i * n + j] = out[k].values[j * n + i];
    return out;
}

KernelMatrix gram_shared_time(std::span<const ItemSeries> series, const SubKernelSpec& time_spec,
                              KernelTag tag, const GramOptions& opts) {
    const std::size_t n = series.size();
    if (n == 0) throw ValidationError("gram_shared_time: no series");
    if (time_spec.kind != SubKernelKind::Rbf) throw ValidationError("time kernel must be RBF");
    check_spec(time_spec);
    const ItemSeries& ref = series[0];
    check_series(ref);
    if (ref.dim != 1) throw ValidationError("gram_shared_time requires 1-dimensional items");
    for (const auto& s : series) {
        check_series(s);
        if (s.dim != 1 || s.ts != ref.ts)
            throw ValidationError("gram_shared_time requires a shared timestamp grid (user '" +
                                  s.user_id + "')");
    }
    const std::size_t m = ref.count();
    std::vector<double> tau = scaled_times(ref, opts.time_scale);

    // T_pq = exp(-gamma (tau_p - tau_q)^2)
    std::vector<double> T(m * m);
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = 0; q < m; ++q) {
            const double dt = tau[p] - tau[q];
            T[p * m + q] = std::exp(-time_spec.gamma * dt * dt);
        }

    // B = S * T, K = B * S^T / m^2 with S the n x m score matrix.
    std::vector<double> B(n * m, 0.0);
    parallel_for(opts.jobs, n, [&](std::size_t i) {
        const double* si = series[i].values.data();
        for (std::size_t q = 0; q < m; ++q) {
            double acc = 0.0;
            for (std::size_t p = 0; p < m; ++p) acc += si[p] * T[p * m + q];
            B[i * m + q] = acc;
        }
    });

    KernelMatrix K;
    K.tag = tag;
    for (const auto& s : series) K.user_index.push_back(s.user_id);
    K.values.assign(n * n, 0.0);
    const double inv = 1.0 / (static_cast<double>(m) * static_cast<double>(m));
    parallel_for(opts.jobs, n, [&](std::size_t i) {
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            const double* bi = B.data() + i * m;
            const double* sj = series[j].values.data();
            for (std::size_t q = 0; q < m; ++q) acc += bi[q] * sj[q];
            K.values[i * n + j] = acc * inv;
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) K.values[i * n + j] = K.values[j * n + i];
    return K;
}

KernelBlock cross_shared_time(std::span<const ItemSeries> rows, std::span<const ItemSeries> cols,
                              const SubKernelSpec& time_spec, const GramOptions& opts) {
    if (rows.empty() || cols.empty()) throw ValidationError("cross_shared_time: empty inputs");
    if (time_spec.kind != SubKernelKind::Rbf) throw ValidationError("time kernel must be RBF");
    check_spec(time_spec);
    const ItemSeries& ref = cols[0];
    check_series(ref);
    if (ref.dim != 1) throw ValidationError("cross_shared_time requires 1-dimensional items");
    for (const auto& group : {rows, cols})
        for (const auto& s : group) {
            check_series(s);
            if (s.dim != 1 || s.ts != ref.ts)
                throw ValidationError(
                    "cross_shared_time requires a shared timestamp grid (user '" + s.user_id +
                    "')");
        }
    const std::size_t m = ref.count();
    const std::vector<double> tau = scaled_times(ref, opts.time_scale);
    std::vector<double> T(m * m);
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = 0; q < m; ++q) {
            const double dt = tau[p] - tau[q];
            T[p * m + q] = std::exp(-time_spec.gamma * dt * dt);
        }

    KernelBlock B;
    for (const auto& s : rows) B.row_index.push_back(s.user_id);
    for (const auto& s : cols) B.col_index.push_back(s.user_id);
    B.values.assign(rows.size() * cols.size(), 0.0);
    const double inv = 1.0 / (static_cast<double>(m) * static_cast<double>(m));
    parallel_for(opts.jobs, rows.size(), [&](std::size_t i) {
        std::vector<double> bi(m, 0.0);
        const double* si = rows[i].values.data();
        for (std::size_t q = 0; q < m; ++q) {
            double acc = 0.0;
            for (std::size_t p = 0; p < m; ++p) acc += si[p] * T[p * m + q];
            bi[q] = acc;
        }
        for (std::size_t j = 0; j < cols.size(); ++j) {
            double acc = 0.0;
            const double* sj = cols[j].values.data();
            for (std::size_t q = 0; q < m; ++q) acc += bi[q] * sj[q];
            B.values[i * cols.size() + j] = acc * inv;
        }
    });
    return B;
}

KernelBlock cross_block(std::span<const ItemSeries> rows, std::span<const ItemSeries> cols,
                        const SubKernelSpec& item_spec,
                        const std::optional<SubKernelSpec>& time_spec, const GramOptions& opts) {
    KernelBlock B;
    for (const auto& s : rows) B.row_index.push_back(s.user_id);
    for (const auto& s : cols) B.col_index.push_back(s.user_id);
    B.values.assign(rows.size() * cols.size(), 0.0);
    parallel_for(opts.jobs, rows.size(), [&](std::size_t i) {
        for (std::size_t j = 0; j < cols.size(); ++j)
            B.values[i * cols.size() + j] =
                pair_value(rows[i], cols[j], item_spec, time_spec, opts.time_scale);
    });
    return B;
}

std::vector<double> self_kernels(std::span<const ItemSeries> series, const SubKernelSpec& item_spec,
                                 const std::optional<SubKernelSpec>& time_spec,
                                 const GramOptions& opts) {
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        out[i] = pair_value(series[i], series[i], item_spec, time_spec, opts.time_scale);
    return out;
}

KernelMatrix normalize(const KernelMatrix& K) {
    const std::size_t n = K.n();
    std::vector<double> inv(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = K.at(i, i);
        if (!(d > 0.0))
            throw ValidationError("normalize: nonpositive diagonal at index " + std::to_string(i) +
                                  " (user '" + K.user_index[i] + "')");
        inv[i] = 1.0 / std::sqrt(d);
    }
    KernelMatrix out;
    out.tag = K.tag;
    out.user_index = K.user_index;
    out.values.resize(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.values[i * n + j] = K.values[i * n + j] * inv[i] * inv[j];
    return out;
}

KernelBlock normalize_block(const KernelBlock& B, std::span<const double> row_self,
                            std::span<const double> col_self) {
    if (row_self.size() != B.rows() || col_self.size() != B.cols())
        throw ValidationError("normalize_block: self-kernel size mismatch");
    std::vector<double> rinv(B.rows()), cinv(B.cols());
    for (std::size_t i = 0; i < B.rows(); ++i) {
        if (!(row_self[i] > 0.0))
            throw ValidationError("normalize_block: nonpositive self-kernel at row " +
                                  std::to_string(i) + " (user '" + B.row_index[i] + "')");
        rinv[i] = 1.0 / std::sqrt(row_self[i]);
    }
    for (std::size_t j = 0; j < B.cols(); ++j) {
        if (!(col_self[j] > 0.0))
            throw ValidationError("normalize_block: nonpositive self-kernel at column " +
                                  std::to_string(j) + " (user '" + B.col_index[j] + "')");
        cinv[j] = 1.0 / std::sqrt(col_self[j]);
    }
    KernelBlock out = B;
    for (std::size_t i = 0; i < B.rows(); ++i)
        for (std::size_t j = 0; j < B.cols(); ++j) out.at(i, j) = B.at(i, j) * rinv[i] * cinv[j];
    return out;
}

KernelMatrix sum_kernels(std::span<const KernelMatrix> ks) {
    if (ks.empty()) throw ValidationError("sum_kernels: no inputs");
    KernelMatrix out = ks[0];
    out.tag = KernelTag::Sum;
    for (std::size_t k = 1; k < ks.size(); ++k) {
        if (ks[k].user_index != out.user_index)
            throw ValidationError("sum_kernels: user index mismatch at kernel " +
                                  std::to_string(k));
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += ks[k].values[i];
    }
    return out;
}

void write_kernel_cache(const std::string& path, const KernelMatrix& K) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f.write("CKRN", 4);
    const std::uint32_t n = static_cast<std::uint32_t>(K.n());
    f.write(reinterpret_cast<const char*>(&n), 4);
    for (const auto& id : K.user_index) {
        const std::uint32_t len = static_cast<std::uint32_t>(id.size());
        f.write(reinterpret_cast<const char*>(&len), 4);
        f.write(id.data(), static_cast<std::streamsize>(len));
    }
    f.write(reinterpret_cast<const char*>(K.values.data()),
            static_cast<std::streamsize>(K.values.size() * sizeof(double)));
    if (!f) throw std::runtime_error("short write to '" + path + "'");
}

KernelMatrix read_kernel_cache(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open kernel cache '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "CKRN", 4) != 0)
        throw ValidationError("'" + path + "' is not a kernel cache file");
    std::uint32_t n = 0;
    f.read(reinterpret_cast<char*>(&n), 4);
    KernelMatrix K;
    K.user_index.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t len = 0;
        f.read(reinterpret_cast<char*>(&len), 4);
        if (!f) throw ValidationError("truncated kernel cache '" + path + "'");
        K.user_index[i].resize(len);
        f.read(K.user_index[i].data(), len);
    }
    K.values.resize(static_cast<std::size_t>(n) * n);
    f.read(reinterpret_cast<char*>(K.values.data()),
           static_cast<std::streamsize>(K.values.size() * sizeof(double)));
    if (!f) throw ValidationError("truncated kernel cache '" + path + "'");
    return K;
}

}  // namespace tmkl
