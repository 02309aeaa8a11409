#include "tmkl/mckl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>

#include "tmkl/util.hpp"

namespace tmkl {
namespace detail {
namespace {

constexpr double kPivotTol = 1e-9;

struct Tableau {
    std::size_t rows = 0, cols = 0;  // cols includes rhs
    std::vector<double> t;
    std::vector<int> basis;

    double& at(std::size_t i, std::size_t j) { return t[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return t[i * cols + j]; }

    void pivot(std::size_t pr, std::size_t pc) {
        const double p = at(pr, pc);
        for (std::size_t j = 0; j < cols; ++j) at(pr, j) /= p;
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == pr) continue;
            const double factor = at(i, pc);
            if (factor == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) at(i, j) -= factor * at(pr, j);
        }
        basis[pr] = static_cast<int>(pc);
    }
};

// Minimizes d.x over the tableau's constraint rows with Bland's rule.
// obj holds reduced costs; returns the objective value.
double run_simplex(Tableau& tab, std::vector<double>& obj, double obj_value,
                   const std::vector<bool>& banned) {
    const std::size_t ncols = tab.cols - 1;
    while (true) {
        std::size_t enter = ncols;
        for (std::size_t j = 0; j < ncols; ++j) {
            if (banned[j]) continue;
            if (obj[j] < -kPivotTol) {
                enter = j;
                break;  // Bland: smallest index
            }
        }
        if (enter == ncols) return obj_value;

        std::size_t leave = tab.rows;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < tab.rows; ++i) {
            const double a = tab.at(i, enter);
            if (a <= kPivotTol) continue;
            const double ratio = tab.at(i, tab.cols - 1) / a;
            if (ratio < best_ratio - kPivotTol ||
                (ratio < best_ratio + kPivotTol && leave < tab.rows &&
                 tab.basis[i] < tab.basis[leave])) {
                best_ratio = ratio;
                leave = i;
            }
        }
        if (leave == tab.rows) throw std::runtime_error("simplex: unbounded program");

        const double coef = obj[enter];
        tab.pivot(leave, enter);
        for (std::size_t j = 0; j < ncols; ++j) obj[j] -= coef * tab.at(leave, j);
        obj_value -= coef * tab.at(leave, tab.cols - 1);
    }
}

}  // namespace

LpResult solve_lp_max(const std::vector<double>& c, const std::vector<std::vector<double>>& a_ub,
                      const std::vector<double>& b_ub, const std::vector<std::vector<double>>& a_eq,
                      const std::vector<double>& b_eq) {
    const std::size_t nv = c.size();
    const std::size_t m_ub = a_ub.size();
    const std::size_t m_eq = a_eq.size();
    const std::size_t rows = m_ub + m_eq;
    const std::size_t n_slack = m_ub;

    // Artificials only where the slack cannot start basic: equality rows and
    // <= rows with a negative right-hand side.
    std::vector<bool> needs_art(rows, false);
    std::size_t n_art = 0;
    for (std::size_t i = 0; i < m_ub; ++i)
        if (b_ub[i] < 0.0) {
            needs_art[i] = true;
            ++n_art;
        }
    for (std::size_t e = 0; e < m_eq; ++e) {
        needs_art[m_ub + e] = true;
        ++n_art;
    }
    const std::size_t ncols = nv + n_slack + n_art;

    Tableau tab;
    tab.rows = rows;
    tab.cols = ncols + 1;
    tab.t.assign(tab.rows * tab.cols, 0.0);
    tab.basis.assign(rows, -1);

    for (std::size_t i = 0; i < m_ub; ++i) {
        double rhs = b_ub[i];
        double sign = 1.0;
        if (rhs < 0.0) sign = -1.0, rhs = -rhs;
        for (std::size_t j = 0; j < nv; ++j) tab.at(i, j) = sign * a_ub[i][j];
        tab.at(i, nv + i) = sign;  // slack (surplus when the row was flipped)
        tab.at(i, tab.cols - 1) = rhs;
        if (!needs_art[i]) tab.basis[i] = static_cast<int>(nv + i);
    }
    for (std::size_t e = 0; e < m_eq; ++e) {
        const std::size_t i = m_ub + e;
        double rhs = b_eq[e];
        double sign = 1.0;
        if (rhs < 0.0) sign = -1.0, rhs = -rhs;
        for (std::size_t j = 0; j < nv; ++j) tab.at(i, j) = sign * a_eq[e][j];
        tab.at(i, tab.cols - 1) = rhs;
    }
    std::size_t art = nv + n_slack;
    for (std::size_t i = 0; i < rows; ++i) {
        if (!needs_art[i]) continue;
        tab.at(i, art) = 1.0;
        tab.basis[i] = static_cast<int>(art);
        ++art;
    }

    std::vector<bool> banned(ncols, false);
    std::vector<double> obj(ncols, 0.0);
    double obj_value = 0.0;
    if (n_art > 0) {
        // Phase 1: minimize the artificial sum.
        for (std::size_t j = nv + n_slack; j < ncols; ++j) obj[j] = 1.0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (!needs_art[i]) continue;  // reduced costs over the artificial basis
            for (std::size_t j = 0; j < ncols; ++j) obj[j] -= tab.at(i, j);
            obj_value -= tab.at(i, tab.cols - 1);
        }
        const double phase1 = run_simplex(tab, obj, obj_value, banned);
        if (phase1 < -1e-7) throw std::runtime_error("simplex: infeasible restricted program");
    }

    // Pivot lingering artificials out of the basis where possible.
    for (std::size_t i = 0; i < rows; ++i) {
        if (tab.basis[i] < static_cast<int>(nv + n_slack)) continue;
        for (std::size_t j = 0; j < nv + n_slack; ++j) {
            if (std::fabs(tab.at(i, j)) > kPivotTol) {
                tab.pivot(i, j);
                break;
            }
        }
    }
    for (std::size_t j = nv + n_slack; j < ncols; ++j) banned[j] = true;

    // Phase 2: minimize -c.
    std::fill(obj.begin(), obj.end(), 0.0);
    obj_value = 0.0;
    for (std::size_t j = 0; j < nv; ++j) obj[j] = -c[j];
    for (std::size_t i = 0; i < rows; ++i) {
        const int bi = tab.basis[i];
        if (bi < 0 || bi >= static_cast<int>(nv)) continue;
        const double d = -c[static_cast<std::size_t>(bi)];
        if (d == 0.0) continue;
        for (std::size_t j = 0; j < ncols; ++j) obj[j] -= d * tab.at(i, j);
        obj_value -= d * tab.at(i, tab.cols - 1);
    }
    // run_simplex tracks the negated min of d = -c, i.e. the max of c.
    const double phase2 = run_simplex(tab, obj, obj_value, banned);

    LpResult out;
    out.x.assign(nv, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        const int bi = tab.basis[i];
        if (bi >= 0 && bi < static_cast<int>(nv))
            out.x[static_cast<std::size_t>(bi)] = tab.at(i, tab.cols - 1);
    }
    out.value = phase2;
    return out;
}

}  // namespace detail

namespace {

// Restricted master: max theta s.t. sum_s w_s S[r][s] >= theta, w on the
// simplex. theta is split into positive parts; S is globally rescaled for
// conditioning (exact: the optimal w is unchanged, theta scales back).
std::pair<double, std::vector<double>> solve_master(const std::vector<std::vector<double>>& S) {
    const std::size_t n_kernels = S.front().size();
    double scale = 0.0;
    for (const auto& row : S)
        for (double v : row) scale = std::max(scale, std::fabs(v));
    if (scale <= 0.0) scale = 1.0;

    const std::size_t nv = n_kernels + 2;  // w..., theta+, theta-
    std::vector<double> c(nv, 0.0);
    c[n_kernels] = 1.0;
    c[n_kernels + 1] = -1.0;

    std::vector<std::vector<double>> a_ub;
    std::vector<double> b_ub;
    for (const auto& row : S) {
        std::vector<double> r(nv, 0.0);
        for (std::size_t s = 0; s < n_kernels; ++s) r[s] = -row[s] / scale;
        r[n_kernels] = 1.0;
        r[n_kernels + 1] = -1.0;
        a_ub.push_back(std::move(r));
        b_ub.push_back(0.0);
    }
    std::vector<std::vector<double>> a_eq(1, std::vector<double>(nv, 0.0));
    for (std::size_t s = 0; s < n_kernels; ++s) a_eq[0][s] = 1.0;
    std::vector<double> b_eq{1.0};

    detail::LpResult lp;
    try {
        lp = detail::solve_lp_max(c, a_ub, b_ub, a_eq, b_eq);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "LP failure: %s; S rows:\n", e.what());
        for (const auto& row : S) {
            for (double v : row) std::fprintf(stderr, " %.17g,", v);
            std::fprintf(stderr, "\n");
        }
        throw;
    }
    std::vector<double> w(lp.x.begin(), lp.x.begin() + static_cast<std::ptrdiff_t>(n_kernels));
    return {lp.value * scale, std::move(w)};
}

KernelMatrix weighted_sum(std::span<const KernelMatrix> kernels, std::span<const double> w) {
    KernelMatrix out = kernels[0];
    out.tag = KernelTag::Sum;
    for (auto& v : out.values) v *= w[0];
    for (std::size_t s = 1; s < kernels.size(); ++s)
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] += w[s] * kernels[s].values[i];
    return out;
}

}  // namespace

McklModel silp_train(std::span<const KernelMatrix> kernels, std::span<const Stance> y, double C,
                     const SilpOptions& opts) {
    if (kernels.empty()) throw ValidationError("silp_train: no kernels");
    const std::size_t n_kernels = kernels.size();
    for (std::size_t s = 1; s < n_kernels; ++s)
        if (kernels[s].user_index != kernels[0].user_index)
            throw ValidationError("silp_train: kernel user indices differ");

    McklModel model;
    for (const auto& k : kernels) model.tags.push_back(k.tag);
    std::vector<double> w(n_kernels, 1.0 / static_cast<double>(n_kernels));

    std::vector<std::vector<double>> constraints;
    double theta_prev = 0.0;
    model.converged = false;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        const KernelMatrix combined = weighted_sum(kernels, w);
        SmoOptions smo = opts.smo;
        smo.seed = derive_seed(opts.smo.seed, static_cast<std::uint64_t>(iter) + 1);
        const SvmModel svm = smo_train(combined, y, C, smo);

        double alpha_sum = 0.0;
        for (double a : svm.alphas) alpha_sum += a;
        std::vector<double> row(n_kernels);
        for (std::size_t s = 0; s < n_kernels; ++s)
            row[s] = 0.5 * quad_form(kernels[s], svm.y, svm.alphas) - alpha_sum;
        constraints.push_back(std::move(row));

        auto [theta, w_new] = solve_master(constraints);
        model.trace.push_back({theta, w_new});
        w = std::move(w_new);
        if (iter >= 1 && std::fabs(theta - theta_prev) <= opts.eps * std::max(1.0, std::fabs(theta_prev))) {
            model.converged = true;
            break;
        }
        theta_prev = theta;
    }

    // Strict positivity relaxed to a tiny floor; renormalize onto the simplex.
    double total = 0.0;
    for (auto& v : w) {
        v = std::max(v, 1e-9);
        total += v;
    }
    for (auto& v : w) v /= total;
    model.weights = w;
    model.svm = smo_train(weighted_sum(kernels, w), y, C, opts.smo);
    return model;
}

SvmPrediction mckl_predict(const McklModel& model, std::span<const KernelBlock> blocks) {
    if (blocks.size() != model.weights.size())
        throw ValidationError("mckl_predict: block count does not match weight count");
    KernelBlock combined = blocks[0];
    for (auto& v : combined.values) v *= model.weights[0];
    for (std::size_t s = 1; s < blocks.size(); ++s) {
        if (blocks[s].values.size() != combined.values.size())
            throw ValidationError("mckl_predict: block shapes differ");
        for (std::size_t i = 0; i < combined.values.size(); ++i)
            combined.values[i] += model.weights[s] * blocks[s].values[i];
    }
    return svm_predict(model.svm, combined);
}

}  // namespace tmkl
