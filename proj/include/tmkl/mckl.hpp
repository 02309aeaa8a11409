#pragma once

#include <span>
#include <vector>

#include "tmkl/kernels.hpp"
#include "tmkl/svm.hpp"
#include "tmkl/types.hpp"

namespace tmkl {

namespace detail {

// max c.x s.t. A_ub x <= b_ub, A_eq x = b_eq, x >= 0 (dense two-phase
// simplex with Bland's rule; sized for the tiny restricted SILP master).
struct LpResult {
    std::vector<double> x;
    double value = 0.0;
};
LpResult solve_lp_max(const std::vector<double>& c, const std::vector<std::vector<double>>& a_ub,
                      const std::vector<double>& b_ub, const std::vector<std::vector<double>>& a_eq,
                      const std::vector<double>& b_eq);

}  // namespace detail

struct McklIterate {
    double theta = 0.0;  // restricted master objective; non-increasing
    std::vector<double> weights;
};

struct McklModel {
    std::vector<double> weights;  // on the simplex, floored at 1e-9
    std::vector<KernelTag> tags;
    SvmModel svm;  // trained on the weighted kernel sum
    std::vector<McklIterate> trace;
    bool converged = true;
};

struct SilpOptions {
    double eps = 1e-3;  // relative change of the master objective
    int max_iters = 50;
    SmoOptions smo;
};

// Multiple kernel learning via the semi-infinite LP: alternate an SVM solve
// on the weighted kernel sum with a restricted LP over (theta, weights),
// where each SVM iterate contributes one constraint
//   sum_s w_s [ 1/2 sum_ij a_i a_j y_i y_j K_s(i,j) - sum_i a_i ] >= theta.
McklModel silp_train(std::span<const KernelMatrix> kernels, std::span<const Stance> y, double C,
                     const SilpOptions& opts = {});

// Weighted cross-kernel decision; block order must match model.weights.
SvmPrediction mckl_predict(const McklModel& model, std::span<const KernelBlock> blocks);

}  // namespace tmkl
