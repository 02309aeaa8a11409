#include "tmkl/svm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

namespace tmkl {

SvmModel smo_train(const KernelMatrix& K, std::span<const Stance> y, double C,
                   const SmoOptions& opts) {
    const std::size_t n = K.n();
    if (y.size() != n) throw ValidationError("smo_train: label count does not match kernel size");
    if (!(C > 0.0)) throw ValidationError("smo_train: C must be > 0");
    bool has_yes = false, has_no = false;
    for (Stance s : y) (s == Stance::Yes ? has_yes : has_no) = true;
    if (!has_yes || !has_no) throw ValidationError("smo_train: both classes must be present");

    SvmModel model;
    model.C = C;
    model.user_index = K.user_index;
    model.alphas.assign(n, 0.0);
    model.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) model.y[i] = stance_sign(y[i]);

    std::vector<double>& alpha = model.alphas;
    const std::vector<double>& ys = model.y;
    double b = 0.0;
    std::vector<double> f(n, 0.0);  // f_i = sum_j alpha_j y_j K_ij (bias excluded)

    std::mt19937_64 rng(opts.seed);
    model.converged = false;
    for (int pass = 0; pass < opts.max_passes; ++pass) {
        bool violation = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double Ei = f[i] + b - ys[i];
            const double r = ys[i] * Ei;
            if (!((r < -opts.tol && alpha[i] < C) || (r > opts.tol && alpha[i] > 0.0))) continue;
            violation = true;

            std::uniform_int_distribution<std::size_t> pick(0, n - 2);
            std::size_t j = pick(rng);
            if (j >= i) ++j;
            const double Ej = f[j] + b - ys[j];

            const double ai_old = alpha[i], aj_old = alpha[j];
            double L, H;
            if (ys[i] != ys[j]) {
                L = std::max(0.0, aj_old - ai_old);
                H = std::min(C, C + aj_old - ai_old);
            } else {
                L = std::max(0.0, ai_old + aj_old - C);
                H = std::min(C, ai_old + aj_old);
            }
            if (L >= H) continue;
            const double eta = 2.0 * K.at(i, j) - K.at(i, i) - K.at(j, j);
            if (eta >= -1e-12) continue;

            double aj = aj_old - ys[j] * (Ei - Ej) / eta;
            aj = std::clamp(aj, L, H);
            if (std::fabs(aj - aj_old) < 1e-8) continue;
            const double ai = std::clamp(ai_old + ys[i] * ys[j] * (aj_old - aj), 0.0, C);

            const double di = ai - ai_old, dj = aj - aj_old;
            const double b1 = b - Ei - ys[i] * di * K.at(i, i) - ys[j] * dj * K.at(i, j);
            const double b2 = b - Ej - ys[i] * di * K.at(i, j) - ys[j] * dj * K.at(j, j);
            if (ai > 0.0 && ai < C)
                b = b1;
            else if (aj > 0.0 && aj < C)
                b = b2;
            else
                b = 0.5 * (b1 + b2);

            alpha[i] = ai;
            alpha[j] = aj;
            const double* Ki = K.values.data() + i * n;
            const double* Kj = K.values.data() + j * n;
            const double wi = ys[i] * di, wj = ys[j] * dj;
            for (std::size_t k = 0; k < n; ++k) f[k] += wi * Ki[k] + wj * Kj[k];
        }
        if (!violation) {  // all KKT conditions hold within tol
            model.converged = true;
            break;
        }
    }

    model.bias = b;
    for (std::size_t i = 0; i < n; ++i)
        if (alpha[i] > 1e-8) model.support_indices.push_back(static_cast<int>(i));
    return model;
}

SvmPrediction svm_predict(const SvmModel& model, const KernelBlock& cross) {
    if (cross.col_index != model.user_index)
        throw ValidationError("svm_predict: cross block columns do not match training user index");
    SvmPrediction out;
    out.margins.resize(cross.rows());
    out.stances.resize(cross.rows());
    for (std::size_t t = 0; t < cross.rows(); ++t) {
        double m = model.bias;
        const double* row = cross.values.data() + t * cross.cols();
        for (int i : model.support_indices)
            m += model.alphas[static_cast<std::size_t>(i)] * model.y[static_cast<std::size_t>(i)] *
                 row[i];
        out.margins[t] = m;
        out.stances[t] = m > 0.0 ? Stance::Yes : Stance::No;
    }
    return out;
}

double quad_form(const KernelMatrix& K, std::span<const double> y, std::span<const double> alphas) {
    const std::size_t n = K.n();
    std::vector<std::size_t> nz;
    for (std::size_t i = 0; i < n; ++i)
        if (alphas[i] != 0.0) nz.push_back(i);
    double acc = 0.0;
    for (std::size_t a : nz) {
        const double* row = K.values.data() + a * n;
        double inner = 0.0;
        for (std::size_t bi : nz) inner += alphas[bi] * y[bi] * row[bi];
        acc += alphas[a] * y[a] * inner;
    }
    return acc;
}

double dual_objective(const KernelMatrix& K, std::span<const double> y,
                      std::span<const double> alphas) {
    double lin = 0.0;
    for (double a : alphas) lin += a;
    return lin - 0.5 * quad_form(K, y, alphas);
}

std::string SvmModel::to_json() const {
    nlohmann::json j;
    j["alphas"] = alphas;
    j["bias"] = bias;
    j["C"] = C;
    j["user_index"] = user_index;
    j["y"] = y;
    j["converged"] = converged;
    return j.dump(2);
}

SvmModel SvmModel::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SvmModel m;
    m.alphas = j.at("alphas").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.C = j.at("C").get<double>();
    m.user_index = j.at("user_index").get<std::vector<std::string>>();
    m.y = j.at("y").get<std::vector<double>>();
    m.converged = j.at("converged").get<bool>();
    for (std::size_t i = 0; i < m.alphas.size(); ++i)
        if (m.alphas[i] > 1e-8) m.support_indices.push_back(static_cast<int>(i));
    return m;
}

}  // namespace tmkl
