#include "tmkl/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "tmkl/text.hpp"

namespace tmkl {
namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double sigmoid(double z) {
    if (z > 30.0) return 1.0;
    if (z < -30.0) return 0.0;
    return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace

const char* to_string(FeatureMode mode) {
    switch (mode) {
        case FeatureMode::Text: return "text";
        case FeatureMode::Network: return "network";
        case FeatureMode::Both: return "both";
    }
    return "?";
}

FeatureMode feature_mode_from_string(const std::string& s) {
    if (s == "text") return FeatureMode::Text;
    if (s == "network") return FeatureMode::Network;
    if (s == "both") return FeatureMode::Both;
    throw ValidationError("unknown feature mode '" + s + "' (expected text|network|both)");
}

double logreg_loss(const Matrix& x, std::span<const Stance> y, std::span<const double> w, double b,
                   double lambda, std::vector<double>* grad_w, double* grad_b) {
    const std::size_t n = x.rows, d = x.cols;
    if (grad_w) grad_w->assign(d, 0.0);
    if (grad_b) *grad_b = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double f = b;
        for (std::size_t k = 0; k < d; ++k) f += w[k] * xi[k];
        const double yi = stance_sign(y[i]);
        loss += softplus(-yi * f);
        if (grad_w || grad_b) {
            const double g = -yi * sigmoid(-yi * f);  // d softplus(-yf)/df
            if (grad_w)
                for (std::size_t k = 0; k < d; ++k) (*grad_w)[k] += g * xi[k];
            if (grad_b) *grad_b += g;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    if (grad_w)
        for (std::size_t k = 0; k < d; ++k) (*grad_w)[k] = (*grad_w)[k] * inv_n + lambda * w[k];
    if (grad_b) *grad_b *= inv_n;
    for (std::size_t k = 0; k < d; ++k) loss += 0.5 * lambda * w[k] * w[k];
    return loss;
}

LinearModel logreg_train(const Matrix& x, std::span<const Stance> y, const LogRegOptions& opts) {
    if (x.rows == 0 || x.rows != y.size())
        throw ValidationError("logreg_train: feature/label size mismatch");
    bool has_yes = false, has_no = false;
    for (Stance s : y) (s == Stance::Yes ? has_yes : has_no) = true;
    if (!has_yes || !has_no) throw ValidationError("logreg_train: both classes must be present");

    LinearModel model;
    model.weights.assign(x.cols, 0.0);
    double b = 0.0;
    std::vector<double> gw;
    double gb = 0.0;
    double step = 1.0;
    model.converged = false;
    double loss = logreg_loss(x, y, model.weights, b, opts.lambda, &gw, &gb);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        double gnorm2 = gb * gb;
        for (double g : gw) gnorm2 += g * g;
        if (std::sqrt(gnorm2) < opts.grad_tol) {
            model.converged = true;
            break;
        }
        // Backtracking line search (Armijo).
        step = std::min(step * 2.0, 1e4);
        std::vector<double> w_try(x.cols);
        double b_try = 0.0, loss_try = 0.0;
        while (true) {
            for (std::size_t k = 0; k < x.cols; ++k) w_try[k] = model.weights[k] - step * gw[k];
            b_try = b - step * gb;
            loss_try = logreg_loss(x, y, w_try, b_try, opts.lambda, nullptr, nullptr);
            if (loss_try <= loss - 0.5 * step * gnorm2 || step < 1e-14) break;
            step *= 0.5;
        }
        model.weights = std::move(w_try);
        b = b_try;
        loss = logreg_loss(x, y, model.weights, b, opts.lambda, &gw, &gb);
    }
    model.bias = b;
    return model;
}

LinearPrediction linear_predict(const LinearModel& model, const Matrix& x) {
    if (x.cols != model.weights.size())
        throw ValidationError("linear_predict: feature dimension mismatch");
    LinearPrediction out;
    out.margins.resize(x.rows);
    out.stances.resize(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double f = model.bias;
        const double* xi = x.row(i);
        for (std::size_t k = 0; k < x.cols; ++k) f += model.weights[k] * xi[k];
        out.margins[i] = f;
        out.stances[i] = f > 0.0 ? Stance::Yes : Stance::No;
    }
    return out;
}

Matrix aggregate_features(std::span<const std::string> users,
                          const std::map<std::string, ItemSeries>& text_series,
                          const std::map<std::string, NetworkAggregate>& network,
                          FeatureMode mode) {
    std::size_t text_dim = 0, net_dim = 0;
    if (mode != FeatureMode::Network) {
        if (text_series.empty()) throw ValidationError("aggregate_features: no text series");
        text_dim = text_series.begin()->second.dim;
    }
    if (mode != FeatureMode::Text) {
        if (network.empty()) throw ValidationError("aggregate_features: no network aggregates");
        net_dim = 1 + network.begin()->second.embedding.size();
    }
    Matrix x(users.size(), text_dim + net_dim);
    for (std::size_t i = 0; i < users.size(); ++i) {
        double* row = x.row(i);
        std::size_t off = 0;
        if (mode != FeatureMode::Network) {
            const auto it = text_series.find(users[i]);
            if (it == text_series.end())
                throw ValidationError("aggregate_features: no text series for user '" +
                                      std::string(users[i]) + "'");
            const auto mean = user_text_aggregate(it->second);
            std::copy(mean.begin(), mean.end(), row);
            off = text_dim;
        }
        if (mode != FeatureMode::Text) {
            const auto it = network.find(users[i]);
            if (it == network.end())
                throw ValidationError("aggregate_features: no network aggregate for user '" +
                                      std::string(users[i]) + "'");
            row[off] = it->second.score;
            std::copy(it->second.embedding.begin(), it->second.embedding.end(), row + off + 1);
        }
    }
    return x;
}

KernelMatrix feature_gram(const Matrix& x, std::span<const std::string> users,
                          const SubKernelSpec& spec) {
    if (x.rows != users.size()) throw ValidationError("feature_gram: user count mismatch");
    KernelMatrix K;
    K.tag = KernelTag::Sum;  // not a convolution kernel; tag is informational
    K.user_index.assign(users.begin(), users.end());
    const std::size_t n = x.rows;
    K.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            K.values[i * n + j] = sub_kernel(spec, x.row_span(i), x.row_span(j));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) K.values[i * n + j] = K.values[j * n + i];
    return K;
}

KernelBlock feature_cross(const Matrix& rows, std::span<const std::string> row_users,
                          const Matrix& cols, std::span<const std::string> col_users,
                          const SubKernelSpec& spec) {
    if (rows.rows != row_users.size() || cols.rows != col_users.size())
        throw ValidationError("feature_cross: user count mismatch");
    KernelBlock B;
    B.row_index.assign(row_users.begin(), row_users.end());
    B.col_index.assign(col_users.begin(), col_users.end());
    B.values.assign(rows.rows * cols.rows, 0.0);
    for (std::size_t i = 0; i < rows.rows; ++i)
        for (std::size_t j = 0; j < cols.rows; ++j)
            B.values[i * cols.rows + j] = sub_kernel(spec, rows.row_span(i), cols.row_span(j));
    return B;
}

}  // namespace tmkl
