#pragma once

// Test-only oracles, kept independent of the library's computation paths:
// plain double-loop kernel sums, a cyclic Jacobi eigensolver and a
// projected-gradient QP solver for the SVM dual.

#include <cmath>
#include <random>
#include <vector>

#include "tmkl/kernels.hpp"
#include "tmkl/types.hpp"

namespace tmkl::oracle {

inline double sub_eval(const SubKernelSpec& spec, std::span<const double> x,
                       std::span<const double> y) {
    if (spec.kind == SubKernelKind::Linear) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
        return acc;
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
    return std::exp(-spec.gamma * d2);
}

// Straight double loop in argument order; no canonicalization, no reuse.
inline double conv(const ItemSeries& a, const ItemSeries& b, const SubKernelSpec& item_spec,
                   const SubKernelSpec* time_spec = nullptr, const TimeScale& scale = {}) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.count(); ++i)
        for (std::size_t j = 0; j < b.count(); ++j) {
            double v = sub_eval(item_spec, a.item(i), b.item(j));
            if (time_spec) {
                const double dt = scale.to_units(a.ts[i]) - scale.to_units(b.ts[j]);
                v *= std::exp(-time_spec->gamma * dt * dt);
            }
            sum += v;
        }
    return sum / (static_cast<double>(a.count()) * static_cast<double>(b.count()));
}

// Cyclic Jacobi; good enough for the desk-size PSD checks.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, std::size_t n,
                                              int max_sweeps = 60) {
    auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-22) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i);
    return eig;
}

inline double min_eigenvalue(const KernelMatrix& K) {
    const auto eig = jacobi_eigenvalues(K.values, K.n());
    double m = eig.empty() ? 0.0 : eig[0];
    for (double e : eig) m = std::min(m, e);
    return m;
}

// Projected gradient ascent on the SVM dual with exact projection onto
// {0 <= a <= C, y.a = 0} (bisection on the hyperplane multiplier).
inline std::vector<double> qp_dual(const KernelMatrix& K, const std::vector<double>& y, double C,
                                   int iters = 200000) {
    const std::size_t n = K.n();
    const auto project = [&](std::vector<double> v) {
        double lo = -1e9, hi = 1e9;
        const auto g = [&](double lam) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double ai = std::clamp(v[i] - lam * y[i], 0.0, C);
                acc += y[i] * ai;
            }
            return acc;
        };
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) > 0.0 ? lo : hi) = mid;
        }
        const double lam = 0.5 * (lo + hi);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(v[i] - lam * y[i], 0.0, C);
        return v;
    };

    double lip = 0.0;  // Gershgorin bound on Q = (y y^T) .* K
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += std::fabs(K.at(i, j));
        lip = std::max(lip, row);
    }
    const double step = 1.0 / std::max(lip, 1e-9);

    std::vector<double> alpha(n, 0.0);
    alpha = project(std::move(alpha));
    std::vector<double> grad(n);
    for (int it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double qa = 0.0;
            for (std::size_t j = 0; j < n; ++j) qa += y[i] * y[j] * K.at(i, j) * alpha[j];
            grad[i] = 1.0 - qa;
        }
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) next[i] = alpha[i] + step * grad[i];
        next = project(std::move(next));
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) delta = std::max(delta, std::fabs(next[i] - alpha[i]));
        alpha = std::move(next);
        if (delta < 1e-13) break;
    }
    return alpha;
}

inline ItemSeries random_series(std::mt19937_64& rng, const std::string& id, std::size_t count,
                                std::size_t dim, Timestamp t0 = 0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<Timestamp> gap(1, 86400);
    ItemSeries s;
    s.user_id = id;
    Timestamp t = t0;
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> v(dim);
        for (auto& x : v) x = gauss(rng);
        t += gap(rng);
        s.push(v, t);
    }
    return s;
}

}  // namespace tmkl::oracle
