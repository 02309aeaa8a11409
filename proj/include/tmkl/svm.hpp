#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tmkl/kernels.hpp"
#include "tmkl/types.hpp"

namespace tmkl {

struct SvmModel {
    std::vector<double> alphas;      // 0 <= alpha_i <= C
    std::vector<double> y;           // +1 / -1 per training user
    double bias = 0.0;
    double C = 1.0;
    std::vector<int> support_indices;  // alpha_i > 1e-8
    std::vector<std::string> user_index;
    bool converged = true;

    std::string to_json() const;
    static SvmModel from_json(const std::string& text);
};

struct SmoOptions {
    double tol = 1e-3;    // KKT tolerance
    int max_passes = 200; // total full passes before giving up
    std::uint64_t seed = 1;
};

// Dual soft-margin SVM on a precomputed kernel, solved by SMO with a
// seeded random second-choice heuristic. Terminates when a full pass makes
// no update (all KKT conditions hold within tol); if the pass budget runs
// out first, the best iterate is returned with converged = false.
SvmModel smo_train(const KernelMatrix& K, std::span<const Stance> y, double C,
                   const SmoOptions& opts = {});

struct SvmPrediction {
    std::vector<Stance> stances;
    std::vector<double> margins;
};

// sign(sum_i alpha_i y_i K(x, x_i) + b); a zero margin maps to NO.
SvmPrediction svm_predict(const SvmModel& model, const KernelBlock& cross);

// Dual objective sum(alpha) - 0.5 * sum_ij alpha_i alpha_j y_i y_j K_ij.
double dual_objective(const KernelMatrix& K, std::span<const double> y,
                      std::span<const double> alphas);

// sum_ij alpha_i alpha_j y_i y_j K_ij, skipping zero alphas.
double quad_form(const KernelMatrix& K, std::span<const double> y, std::span<const double> alphas);

}  // namespace tmkl
