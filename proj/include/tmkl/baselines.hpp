#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tmkl/kernels.hpp"
#include "tmkl/types.hpp"

namespace tmkl {

enum class FeatureMode { Text, Network, Both };
const char* to_string(FeatureMode mode);
FeatureMode feature_mode_from_string(const std::string& s);

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    bool converged = true;
};

struct LogRegOptions {
    double lambda = 1.0;   // L2 strength
    double grad_tol = 1e-6;
    int max_iters = 3000;
};

// L2-regularized logistic regression (bias unpenalized), full-batch gradient
// descent with backtracking until the gradient norm drops below grad_tol.
LinearModel logreg_train(const Matrix& x, std::span<const Stance> y, const LogRegOptions& opts);

// Loss and gradient of the objective at (w, b); used by training and by the
// finite-difference checks.
double logreg_loss(const Matrix& x, std::span<const Stance> y, std::span<const double> w, double b,
                   double lambda, std::vector<double>* grad_w = nullptr, double* grad_b = nullptr);

struct LinearPrediction {
    std::vector<Stance> stances;
    std::vector<double> margins;
};
LinearPrediction linear_predict(const LinearModel& model, const Matrix& x);

// Per-user network aggregate at the latest tick.
struct NetworkAggregate {
    double score = 0.0;               // class-median scalar
    std::vector<double> embedding;    // raw embedding (mean-filled if absent)
};

// TEXT: mean tweet vector; NETWORK: [score, embedding]; BOTH: concatenation.
Matrix aggregate_features(std::span<const std::string> users,
                          const std::map<std::string, ItemSeries>& text_series,
                          const std::map<std::string, NetworkAggregate>& network,
                          FeatureMode mode);

// Gram matrix / cross block of a standard kernel on feature rows.
KernelMatrix feature_gram(const Matrix& x, std::span<const std::string> users,
                          const SubKernelSpec& spec);
KernelBlock feature_cross(const Matrix& rows, std::span<const std::string> row_users,
                          const Matrix& cols, std::span<const std::string> col_users,
                          const SubKernelSpec& spec);

}  // namespace tmkl
