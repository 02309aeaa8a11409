#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "tmkl/baselines.hpp"
#include "tmkl/svm.hpp"
#include "tmkl/text.hpp"

using namespace tmkl;

TEST_CASE("logreg learns the separation direction on 1-D data") {
    Matrix x(6, 1);
    std::vector<Stance> y(6);
    for (int i = 0; i < 3; ++i) {
        x.at(static_cast<std::size_t>(i), 0) = 1.0 + i * 0.1;
        y[static_cast<std::size_t>(i)] = Stance::Yes;
        x.at(static_cast<std::size_t>(3 + i), 0) = -1.0 - i * 0.1;
        y[static_cast<std::size_t>(3 + i)] = Stance::No;
    }
    LogRegOptions opts;
    opts.lambda = 0.1;
    const auto model = logreg_train(x, y, opts);
    CHECK(model.converged);
    CHECK(model.weights[0] > 0.0);
    const auto pred = linear_predict(model, x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(pred.stances[i] == y[i]);
}

TEST_CASE("L2 ties duplicated feature columns together") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix x(20, 2);
    std::vector<Stance> y;
    for (std::size_t i = 0; i < 20; ++i) {
        const double v = gauss(rng) + (i < 10 ? 1.0 : -1.0);
        x.at(i, 0) = v;
        x.at(i, 1) = v;  // exact duplicate
        y.push_back(i < 10 ? Stance::Yes : Stance::No);
    }
    LogRegOptions opts;
    opts.lambda = 0.5;
    const auto model = logreg_train(x, y, opts);
    CHECK(std::fabs(model.weights[0] - model.weights[1]) < 1e-4);
}

TEST_CASE("gradient at the optimum vanishes against a finite-difference oracle") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix x(10, 3);
    std::vector<Stance> y;
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t d = 0; d < 3; ++d) x.at(i, d) = gauss(rng);
        y.push_back(i % 2 == 0 ? Stance::Yes : Stance::No);
    }
    LogRegOptions opts;
    opts.lambda = 0.3;
    opts.grad_tol = 1e-8;
    opts.max_iters = 20000;
    const auto model = logreg_train(x, y, opts);
    REQUIRE(model.converged);

    // central finite differences of the loss at the trained optimum
    const double h = 1e-6;
    double fd_norm2 = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
        auto wp = model.weights, wm = model.weights;
        wp[d] += h;
        wm[d] -= h;
        const double g = (logreg_loss(x, y, wp, model.bias, opts.lambda) -
                          logreg_loss(x, y, wm, model.bias, opts.lambda)) /
                         (2.0 * h);
        fd_norm2 += g * g;
    }
    const double gb = (logreg_loss(x, y, model.weights, model.bias + h, opts.lambda) -
                       logreg_loss(x, y, model.weights, model.bias - h, opts.lambda)) /
                      (2.0 * h);
    fd_norm2 += gb * gb;
    CHECK(std::sqrt(fd_norm2) < 1e-6);

    // and the analytic gradient agrees with finite differences at a random point
    std::vector<double> w{0.3, -0.2, 0.7};
    std::vector<double> grad;
    double grad_b = 0.0;
    (void)logreg_loss(x, y, w, 0.1, opts.lambda, &grad, &grad_b);
    for (std::size_t d = 0; d < 3; ++d) {
        auto wp = w, wm = w;
        wp[d] += h;
        wm[d] -= h;
        const double fd = (logreg_loss(x, y, wp, 0.1, opts.lambda) -
                           logreg_loss(x, y, wm, 0.1, opts.lambda)) /
                          (2.0 * h);
        CHECK(grad[d] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("aggregate_features shapes per mode") {
    std::map<std::string, ItemSeries> text;
    ItemSeries s;
    s.user_id = "u";
    const std::vector<double> v{1.0, 2.0, 3.0};
    s.push(v, 10);
    text["u"] = s;
    std::map<std::string, NetworkAggregate> net;
    net["u"] = {0.5, {9.0, 8.0}};
    const std::vector<std::string> users{"u"};

    const auto xt = aggregate_features(users, text, net, FeatureMode::Text);
    CHECK(xt.cols == 3);
    CHECK(xt.at(0, 0) == 1.0);  // single tweet: the tweet vector verbatim
    CHECK(xt.at(0, 2) == 3.0);

    const auto xn = aggregate_features(users, text, net, FeatureMode::Network);
    CHECK(xn.cols == 3);  // scalar + embedding dims
    CHECK(xn.at(0, 0) == 0.5);
    CHECK(xn.at(0, 1) == 9.0);

    const auto xb = aggregate_features(users, text, net, FeatureMode::Both);
    CHECK(xb.cols == xt.cols + xn.cols);
}

TEST_CASE("aggregate linear SVM coincides with the conv-kernel linear SVM") {
    std::mt19937_64 rng(11);
    std::vector<ItemSeries> series;
    std::vector<Stance> y;
    std::vector<std::string> users;
    for (int i = 0; i < 14; ++i) {
        auto s = oracle::random_series(rng, "u" + std::to_string(i), 4 + i % 3, 5);
        // inject class signal into the mean
        const double shift = i % 2 == 0 ? 0.8 : -0.8;
        for (auto& v : s.values) v += shift / 5.0;
        series.push_back(std::move(s));
        users.push_back("u" + std::to_string(i));
        y.push_back(i % 2 == 0 ? Stance::Yes : Stance::No);
    }
    const auto K_conv = gram(series, SubKernelSpec::linear(), std::nullopt, KernelTag::W);

    Matrix x(series.size(), 5);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto mean = user_text_aggregate(series[i]);
        std::copy(mean.begin(), mean.end(), x.row(i));
    }
    const auto K_feat = feature_gram(x, users, SubKernelSpec::linear());
    for (std::size_t i = 0; i < K_conv.values.size(); ++i)
        CHECK(K_conv.values[i] == doctest::Approx(K_feat.values[i]).epsilon(1e-10));

    SmoOptions smo;
    smo.seed = 99;
    smo.tol = 1e-8;
    smo.max_passes = 50000;
    const auto m1 = smo_train(K_conv, y, 1.0, smo);
    const auto m2 = smo_train(K_feat, y, 1.0, smo);
    std::vector<int> all(series.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    const auto p1 = svm_predict(m1, K_conv.block(all, all));
    const auto p2 = svm_predict(m2, K_feat.block(all, all));
    for (std::size_t i = 0; i < p1.margins.size(); ++i) {
        CHECK(p1.margins[i] == doctest::Approx(p2.margins[i]).epsilon(1e-6));
        CHECK(p1.stances[i] == p2.stances[i]);
    }
}

TEST_CASE("logreg rejects degenerate inputs") {
    Matrix x(2, 1);
    x.at(0, 0) = 1.0;
    x.at(1, 0) = 2.0;
    const std::vector<Stance> same{Stance::Yes, Stance::Yes};
    CHECK_THROWS_AS((void)logreg_train(x, same, {}), ValidationError);
    const std::vector<Stance> ok{Stance::Yes, Stance::No};
    Matrix empty;
    CHECK_THROWS_AS((void)logreg_train(empty, ok, {}), ValidationError);
}
