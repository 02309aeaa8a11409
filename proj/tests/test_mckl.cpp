#include <doctest.h>

#include <random>

#include "support/oracles.hpp"
#include "tmkl/mckl.hpp"

using namespace tmkl;

namespace {

KernelMatrix from_points(const std::vector<std::vector<double>>& pts) {
    KernelMatrix K;
    for (std::size_t i = 0; i < pts.size(); ++i) K.user_index.push_back("p" + std::to_string(i));
    const std::size_t n = pts.size();
    K.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t d = 0; d < pts[i].size(); ++d) acc += pts[i][d] * pts[j][d];
            K.at(i, j) = acc;
        }
    return K;
}

KernelMatrix random_noise_kernel(std::mt19937_64& rng, std::size_t n, KernelTag tag) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> pts(n, std::vector<double>(n + 3));
    for (auto& p : pts)
        for (auto& v : p) v = gauss(rng);
    auto K = normalize(from_points(pts));
    K.tag = tag;
    return K;
}

KernelMatrix aligned_kernel(std::span<const Stance> y, KernelTag tag) {
    KernelMatrix K;
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) K.user_index.push_back("p" + std::to_string(i));
    K.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            K.at(i, j) = stance_sign(y[i]) * stance_sign(y[j]);
    K.tag = tag;
    return K;
}

std::vector<Stance> alternating(std::size_t n) {
    std::vector<Stance> y;
    for (std::size_t i = 0; i < n; ++i) y.push_back(i % 2 == 0 ? Stance::Yes : Stance::No);
    return y;
}

KernelBlock full_block(const KernelMatrix& K) {
    std::vector<int> all(K.n());
    for (std::size_t i = 0; i < K.n(); ++i) all[i] = static_cast<int>(i);
    return K.block(all, all);
}

}  // namespace

TEST_CASE("internal simplex solves small known programs") {
    // max 2x + y s.t. x <= 2, x + y = 3
    const auto r1 = detail::solve_lp_max({2.0, 1.0}, {{1.0, 0.0}}, {2.0}, {{1.0, 1.0}}, {3.0});
    CHECK(r1.value == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(r1.x[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(r1.x[1] == doctest::Approx(1.0).epsilon(1e-9));

    // max x + y s.t. x + 2y <= 4, 3x + y <= 6: optimum (1.6, 1.2)
    const auto r2 =
        detail::solve_lp_max({1.0, 1.0}, {{1.0, 2.0}, {3.0, 1.0}}, {4.0, 6.0}, {}, {});
    CHECK(r2.value == doctest::Approx(2.8).epsilon(1e-9));
    CHECK(r2.x[0] == doctest::Approx(1.6).epsilon(1e-9));

    // degenerate: max theta s.t. theta <= -5 (via split variables)
    const auto r3 = detail::solve_lp_max({1.0, -1.0}, {{1.0, -1.0}}, {-5.0}, {}, {});
    CHECK(r3.value == doctest::Approx(-5.0).epsilon(1e-9));

    // restricted-master shape that once broke the pivoting: all-negative
    // constraint values, three stored iterates, theta split in two parts
    const std::vector<std::vector<double>> S{{-2.97028, -2.96506, -1.9718, -2.4689},
                                             {-2.54864, -2.54724, -2.06, -2.19585},
                                             {-2.54941, -2.54725, -2.06, -2.23306}};
    std::vector<double> c4(6, 0.0);
    c4[4] = 1.0;
    c4[5] = -1.0;
    std::vector<std::vector<double>> rows4;
    for (const auto& row : S) {
        std::vector<double> r(6, 0.0);
        for (int s2 = 0; s2 < 4; ++s2) r[static_cast<std::size_t>(s2)] = -row[static_cast<std::size_t>(s2)];
        r[4] = 1.0;
        r[5] = -1.0;
        rows4.push_back(std::move(r));
    }
    std::vector<std::vector<double>> eq4(1, std::vector<double>(6, 0.0));
    for (int s2 = 0; s2 < 4; ++s2) eq4[0][static_cast<std::size_t>(s2)] = 1.0;
    const auto r4 = detail::solve_lp_max(c4, rows4, {0.0, 0.0, 0.0}, eq4, {1.0});
    // optimum puts all weight on kernel 3: theta = min_r S[r][2] = -2.06
    CHECK(r4.value == doctest::Approx(-2.06).epsilon(1e-9));
    CHECK(r4.x[2] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("single-kernel MKL reduces to the plain SVM") {
    std::mt19937_64 rng(7);
    const auto y = alternating(12);
    auto K = random_noise_kernel(rng, 12, KernelTag::W);
    const auto mkl = silp_train({&K, 1}, y, 1.0, {});
    CHECK(mkl.weights.size() == 1);
    CHECK(mkl.weights[0] == doctest::Approx(1.0).epsilon(1e-9));

    SmoOptions smo;
    const auto svm = smo_train(K, y, 1.0, smo);
    const auto block = full_block(K);
    const auto a = mckl_predict(mkl, {&block, 1});
    const auto b = svm_predict(svm, block);
    for (std::size_t i = 0; i < a.stances.size(); ++i) CHECK(a.stances[i] == b.stances[i]);
}

TEST_CASE("duplicated kernel leaves the decision unchanged") {
    std::mt19937_64 rng(11);
    const auto y = alternating(10);
    auto K = aligned_kernel(y, KernelTag::W);
    // perturb slightly so the problem is not perfectly degenerate
    auto P = random_noise_kernel(rng, 10, KernelTag::W);
    for (std::size_t i = 0; i < K.values.size(); ++i) K.values[i] = 0.9 * K.values[i] + 0.1 * P.values[i];

    std::vector<KernelMatrix> twice{K, K};
    SilpOptions tight;
    tight.smo.tol = 1e-8;
    tight.smo.max_passes = 50000;
    const auto dup = silp_train(twice, y, 1.0, tight);
    const auto single = silp_train({&K, 1}, y, 1.0, tight);
    CHECK(dup.weights[0] + dup.weights[1] == doctest::Approx(1.0).epsilon(1e-6));

    const auto block = full_block(K);
    std::vector<KernelBlock> blocks{block, block};
    const auto pa = mckl_predict(dup, blocks);
    const auto pb = mckl_predict(single, {&block, 1});
    for (std::size_t i = 0; i < pa.margins.size(); ++i)
        CHECK(pa.margins[i] == doctest::Approx(pb.margins[i]).epsilon(1e-6));
}

TEST_CASE("label-aligned kernel dominates a pure-noise kernel") {
    std::mt19937_64 rng(13);
    const auto y = alternating(10);
    std::vector<KernelMatrix> Ks{aligned_kernel(y, KernelTag::W),
                                 random_noise_kernel(rng, 10, KernelTag::N)};
    const auto model = silp_train(Ks, y, 1.0, {});
    CHECK(model.weights[0] >= 0.9);
    CHECK(model.weights[0] + model.weights[1] == doctest::Approx(1.0).epsilon(1e-6));

    // theta trace is non-increasing.
    for (std::size_t t = 1; t < model.trace.size(); ++t)
        CHECK(model.trace[t].theta <= model.trace[t - 1].theta + 1e-8);
}

TEST_CASE("final objective matches a brute-force sweep over the weight simplex") {
    std::mt19937_64 rng(17);
    const auto y = alternating(10);
    std::vector<KernelMatrix> Ks{random_noise_kernel(rng, 10, KernelTag::W),
                                 random_noise_kernel(rng, 10, KernelTag::N)};
    // blend one kernel toward the labels so the optimum is interiorish
    const auto A = aligned_kernel(y, KernelTag::W);
    for (std::size_t i = 0; i < Ks[0].values.size(); ++i)
        Ks[0].values[i] = 0.5 * Ks[0].values[i] + 0.5 * A.values[i];

    const double C = 1.0;
    std::vector<double> ys;
    for (Stance s : y) ys.push_back(stance_sign(s));
    const auto dual_value = [&](double w0) {
        KernelMatrix K = Ks[0];
        for (std::size_t i = 0; i < K.values.size(); ++i)
            K.values[i] = w0 * Ks[0].values[i] + (1.0 - w0) * Ks[1].values[i];
        const auto alpha = oracle::qp_dual(K, ys, C, 60000);
        return dual_objective(K, ys, alpha);
    };

    double best_grid = 1e300;
    double worst_step = 0.0;
    double prev = 0.0;
    for (int k = 0; k <= 20; ++k) {
        const double v = dual_value(0.05 * k);
        if (k > 0) worst_step = std::max(worst_step, std::fabs(v - prev));
        prev = v;
        best_grid = std::min(best_grid, v);
    }

    SilpOptions opts;
    opts.eps = 1e-5;
    opts.max_iters = 200;
    const auto model = silp_train(Ks, y, C, opts);
    const double silp_value = dual_value(model.weights[0]);
    CHECK(silp_value <= best_grid + 2.0 * worst_step + 1e-9);
}

TEST_CASE("mckl_predict composes blocks by weight") {
    std::mt19937_64 rng(19);
    const auto y = alternating(8);
    std::vector<KernelMatrix> Ks{random_noise_kernel(rng, 8, KernelTag::W),
                                 random_noise_kernel(rng, 8, KernelTag::N)};
    const auto model = silp_train(Ks, y, 2.0, {});
    std::vector<KernelBlock> blocks{full_block(Ks[0]), full_block(Ks[1])};
    const auto composed = mckl_predict(model, blocks);

    // Oracle: evaluate the weighted-sum kernel block through svm_predict.
    KernelBlock mixed = blocks[0];
    for (std::size_t i = 0; i < mixed.values.size(); ++i)
        mixed.values[i] = model.weights[0] * blocks[0].values[i] +
                          model.weights[1] * blocks[1].values[i];
    const auto direct = svm_predict(model.svm, mixed);
    for (std::size_t i = 0; i < composed.margins.size(); ++i)
        CHECK(composed.margins[i] == doctest::Approx(direct.margins[i]).epsilon(1e-10));

    // weights (1, 0) equals plain svm_predict on the first block
    McklModel manual = model;
    manual.weights = {1.0, 0.0};
    const auto first_only = mckl_predict(manual, blocks);
    const auto expect = svm_predict(model.svm, blocks[0]);
    for (std::size_t i = 0; i < first_only.margins.size(); ++i)
        CHECK(first_only.margins[i] == doctest::Approx(expect.margins[i]).epsilon(1e-12));

    // all-zero blocks fall back to the bias sign
    KernelBlock zero = blocks[0];
    std::fill(zero.values.begin(), zero.values.end(), 0.0);
    std::vector<KernelBlock> zeros{zero, zero};
    const auto p = mckl_predict(model, zeros);
    for (std::size_t i = 0; i < p.stances.size(); ++i)
        CHECK(p.stances[i] == (model.svm.bias > 0.0 ? Stance::Yes : Stance::No));

    std::vector<KernelBlock> wrong{zero};
    CHECK_THROWS_AS((void)mckl_predict(model, wrong), ValidationError);
}

TEST_CASE("weights stay on the simplex with the positivity floor") {
    std::mt19937_64 rng(23);
    const auto y = alternating(10);
    std::vector<KernelMatrix> Ks{aligned_kernel(y, KernelTag::W),
                                 random_noise_kernel(rng, 10, KernelTag::N),
                                 random_noise_kernel(rng, 10, KernelTag::NT)};
    const auto model = silp_train(Ks, y, 1.0, {});
    double sum = 0.0;
    for (double w : model.weights) {
        CHECK(w >= 1e-9 / 2.0);
        sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

    // Scaling a kernel before normalization must not change decisions when
    // normalization is applied, because normalize() cancels the scale.
    KernelMatrix scaled = Ks[1];
    for (auto& v : scaled.values) v *= 17.0;
    const auto renorm = normalize(scaled);
    for (std::size_t i = 0; i < renorm.values.size(); ++i)
        CHECK(renorm.values[i] == doctest::Approx(Ks[1].values[i]).epsilon(1e-12));

    CHECK_THROWS_AS((void)silp_train({}, y, 1.0, {}), ValidationError);
}
