#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "support/oracles.hpp"
#include "tmkl/kernels.hpp"
#include "tmkl/text.hpp"

using namespace tmkl;

namespace {

ItemSeries make_series(const std::string& id, std::vector<std::vector<double>> items,
                       std::vector<Timestamp> ts) {
    ItemSeries s;
    s.user_id = id;
    for (std::size_t i = 0; i < items.size(); ++i) s.push(items[i], ts[i]);
    return s;
}

}  // namespace

TEST_CASE("sub_kernel basics") {
    const std::vector<double> x{1.0, 0.0}, y{0.0, 1.0};
    CHECK(sub_kernel(SubKernelSpec::linear(), x, y) == 0.0);
    CHECK(sub_kernel(SubKernelSpec::rbf(2.5), x, x) == 1.0);
    const std::vector<double> a{0.0}, b{1.0};
    CHECK(sub_kernel(SubKernelSpec::rbf(1.0), a, b) == doctest::Approx(0.36787944117144233).epsilon(1e-12));
    CHECK_THROWS_AS((void)sub_kernel(SubKernelSpec::linear(), x, a), ValidationError);
    CHECK_THROWS_AS((void)sub_kernel(SubKernelSpec::rbf(0.0), x, y), ValidationError);
}

TEST_CASE("conv_kernel hand examples") {
    const auto unit = make_series("a", {{1.0}}, {10});
    CHECK(conv_kernel(unit, unit, SubKernelSpec::linear()) == 1.0);

    const auto a = make_series("a", {{1.0, 0.0}, {0.0, 1.0}}, {10, 20});
    const auto b = make_series("b", {{1.0, 1.0}}, {15});
    CHECK(conv_kernel(a, b, SubKernelSpec::linear()) == doctest::Approx(1.0).epsilon(1e-15));

    ItemSeries empty;
    empty.user_id = "nobody";
    CHECK_THROWS_WITH_AS((void)conv_kernel(empty, a, SubKernelSpec::linear()),
                         doctest::Contains("nobody"), ValidationError);
}

TEST_CASE("conv_kernel matches the double-sum oracle on random series") {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 40; ++rep) {
        const auto a = oracle::random_series(rng, "a", 5, 4);
        const auto b = oracle::random_series(rng, "b", 7, 4);
        for (const auto spec : {SubKernelSpec::linear(), SubKernelSpec::rbf(0.7)}) {
            CHECK(conv_kernel(a, b, spec) ==
                  doctest::Approx(oracle::conv(a, b, spec)).epsilon(1e-12));
        }
    }
}

TEST_CASE("conv_kernel is bitwise symmetric") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = oracle::random_series(rng, "u1", 6, 3);
        const auto b = oracle::random_series(rng, "u2", 4, 3);
        CHECK(conv_kernel(a, b, SubKernelSpec::rbf(1.3)) ==
              conv_kernel(b, a, SubKernelSpec::rbf(1.3)));
    }
}

TEST_CASE("linear conv kernel equals the aggregate dot product") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = oracle::random_series(rng, "a", 9, 5);
        const auto b = oracle::random_series(rng, "b", 3, 5);
        const auto ma = user_text_aggregate(a);
        const auto mb = user_text_aggregate(b);
        double dot = 0.0;
        for (std::size_t i = 0; i < ma.size(); ++i) dot += ma[i] * mb[i];
        CHECK(conv_kernel(a, b, SubKernelSpec::linear()) == doctest::Approx(dot).epsilon(1e-10));
    }
}

TEST_CASE("temporal_conv_kernel hand examples") {
    const auto same = make_series("a", {{2.0}}, {86400});
    CHECK(temporal_conv_kernel(same, same, SubKernelSpec::linear(), SubKernelSpec::rbf(3.0)) ==
          conv_kernel(same, same, SubKernelSpec::linear()));

    const auto a = make_series("a", {{1.0}, {1.0}}, {0, 86400});
    const auto b = make_series("b", {{1.0}}, {0});
    const double got =
        temporal_conv_kernel(a, b, SubKernelSpec::linear(), SubKernelSpec::rbf(1.0));
    CHECK(got == doctest::Approx(0.5 * (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(got == doctest::Approx(0.6839397205).epsilon(1e-9));

    CHECK_THROWS_AS((void)temporal_conv_kernel(a, b, SubKernelSpec::linear(),
                                               SubKernelSpec::linear()),
                    ValidationError);
}

TEST_CASE("temporal_conv_kernel matches the oracle and degrades to conv as gamma -> 0") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 40; ++rep) {
        const auto a = oracle::random_series(rng, "a", 6, 3);
        const auto b = oracle::random_series(rng, "b", 8, 3);
        const auto ts = SubKernelSpec::rbf(0.9);
        const auto item = SubKernelSpec::linear();
        CHECK(temporal_conv_kernel(a, b, item, ts) ==
              doctest::Approx(oracle::conv(a, b, item, &ts)).epsilon(1e-12));
        const double tiny =
            temporal_conv_kernel(a, b, item, SubKernelSpec::rbf(1e-12));
        CHECK(std::fabs(tiny - conv_kernel(a, b, item)) < 1e-8);
    }
}

TEST_CASE("gram matches pairwise calls, is symmetric, and ignores job count") {
    std::mt19937_64 rng(5);
    std::vector<ItemSeries> series;
    for (int i = 0; i < 3; ++i)
        series.push_back(oracle::random_series(rng, "u" + std::to_string(i), 4 + i, 3));

    const auto one_user = gram({series.data(), 1}, SubKernelSpec::linear(), std::nullopt,
                               KernelTag::W);
    CHECK(one_user.n() == 1);

    const auto K = gram(series, SubKernelSpec::linear(), SubKernelSpec::rbf(0.5), KernelTag::WT);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(K.at(i, j) == temporal_conv_kernel(series[i], series[j], SubKernelSpec::linear(),
                                                     SubKernelSpec::rbf(0.5)));
            CHECK(K.at(i, j) == K.at(j, i));
        }

    GramOptions two_jobs;
    two_jobs.jobs = 2;
    const auto K2 = gram(series, SubKernelSpec::linear(), SubKernelSpec::rbf(0.5), KernelTag::WT,
                         two_jobs);
    CHECK(K.values == K2.values);

    // Permuting users conjugates the matrix by the permutation.
    std::vector<ItemSeries> perm{series[2], series[0], series[1]};
    const auto Kp = gram(perm, SubKernelSpec::linear(), SubKernelSpec::rbf(0.5), KernelTag::WT);
    const int p[3] = {2, 0, 1};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(Kp.at(i, j) == K.at(p[i], p[j]));
}

TEST_CASE("gram names the offending user for empty series") {
    std::mt19937_64 rng(3);
    std::vector<ItemSeries> series{oracle::random_series(rng, "ok", 3, 2)};
    ItemSeries bad;
    bad.user_id = "ghost";
    series.push_back(bad);
    CHECK_THROWS_WITH_AS(
        (void)gram(series, SubKernelSpec::linear(), std::nullopt, KernelTag::W),
        doctest::Contains("ghost"), ValidationError);
}

TEST_CASE("gram_time_grid is bitwise identical to per-gamma gram") {
    std::mt19937_64 rng(17);
    std::vector<ItemSeries> series;
    for (int i = 0; i < 5; ++i)
        series.push_back(oracle::random_series(rng, "u" + std::to_string(i), 5, 4));
    const std::vector<double> gammas{1e-3, 0.1, 1.0, 50.0};
    const auto grids = gram_time_grid(series, SubKernelSpec::linear(), gammas, KernelTag::WT);
    REQUIRE(grids.size() == gammas.size());
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        const auto single = gram(series, SubKernelSpec::linear(), SubKernelSpec::rbf(gammas[k]),
                                 KernelTag::WT);
        CHECK(grids[k].values == single.values);
    }
}

TEST_CASE("gram_shared_time agrees with the generic path on a shared grid") {
    std::mt19937_64 rng(19);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Timestamp> ticks{1000, 44200, 87400, 130600, 173800};
    std::vector<ItemSeries> series;
    for (int u = 0; u < 6; ++u) {
        ItemSeries s;
        s.user_id = "u" + std::to_string(u);
        for (Timestamp t : ticks) {
            const double v = gauss(rng);
            s.push(std::span<const double>(&v, 1), t);
        }
        series.push_back(std::move(s));
    }
    const auto fast = gram_shared_time(series, SubKernelSpec::rbf(2.0), KernelTag::NT);
    const auto slow = gram(series, SubKernelSpec::linear(), SubKernelSpec::rbf(2.0), KernelTag::NT);
    for (std::size_t i = 0; i < fast.values.size(); ++i)
        CHECK(fast.values[i] == doctest::Approx(slow.values[i]).epsilon(1e-10));

    const auto fast_cross = cross_shared_time({series.data(), 2}, {series.data() + 2, 4},
                                              SubKernelSpec::rbf(2.0));
    const auto slow_cross = cross_block({series.data(), 2}, {series.data() + 2, 4},
                                        SubKernelSpec::linear(), SubKernelSpec::rbf(2.0));
    for (std::size_t i = 0; i < fast_cross.values.size(); ++i)
        CHECK(fast_cross.values[i] == doctest::Approx(slow_cross.values[i]).epsilon(1e-10));
}

TEST_CASE("normalize fixes the diagonal and is idempotent") {
    KernelMatrix K;
    K.user_index = {"a", "b"};
    K.values = {4.0, 2.0, 2.0, 1.0};
    const auto N = normalize(K);
    CHECK(N.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(N.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(N.at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(N.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));

    const auto NN = normalize(N);
    for (std::size_t i = 0; i < N.values.size(); ++i)
        CHECK(NN.values[i] == doctest::Approx(N.values[i]).epsilon(1e-12));

    std::mt19937_64 rng(23);
    std::vector<ItemSeries> series;
    for (int i = 0; i < 8; ++i)
        series.push_back(oracle::random_series(rng, "u" + std::to_string(i), 4, 3));
    const auto G = normalize(gram(series, SubKernelSpec::rbf(0.5), std::nullopt, KernelTag::W));
    for (std::size_t i = 0; i < G.n(); ++i) CHECK(G.at(i, i) == doctest::Approx(1.0).epsilon(1e-9));

    KernelMatrix bad;
    bad.user_index = {"a", "b"};
    bad.values = {1.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_WITH_AS((void)normalize(bad), doctest::Contains("index 1"), ValidationError);
}

TEST_CASE("sum_kernels adds entrywise and keeps PSD") {
    KernelMatrix A;
    A.user_index = {"a", "b"};
    A.values = {1.0, 1.0, 1.0, 1.0};
    const auto S1 = sum_kernels({&A, 1});
    CHECK(S1.values == A.values);

    std::vector<KernelMatrix> two{A, A};
    const auto S2 = sum_kernels(two);
    for (double v : S2.values) CHECK(v == 2.0);
    CHECK(S2.tag == KernelTag::Sum);

    std::mt19937_64 rng(29);
    std::vector<ItemSeries> series;
    for (int i = 0; i < 10; ++i)
        series.push_back(oracle::random_series(rng, "u" + std::to_string(i), 3, 4));
    std::vector<KernelMatrix> parts;
    parts.push_back(normalize(gram(series, SubKernelSpec::linear(), std::nullopt, KernelTag::W)));
    parts.push_back(normalize(
        gram(series, SubKernelSpec::linear(), SubKernelSpec::rbf(0.4), KernelTag::WT)));
    parts.push_back(normalize(gram(series, SubKernelSpec::rbf(0.2), std::nullopt, KernelTag::N)));
    parts.push_back(normalize(
        gram(series, SubKernelSpec::rbf(0.2), SubKernelSpec::rbf(1.1), KernelTag::NT)));
    CHECK(oracle::min_eigenvalue(sum_kernels(parts)) >= -1e-7);

    KernelMatrix other = A;
    other.user_index = {"a", "zz"};
    std::vector<KernelMatrix> bad{A, other};
    CHECK_THROWS_AS((void)sum_kernels(bad), ValidationError);
}

TEST_CASE("produced gram matrices are PSD at desk sizes") {
    std::mt19937_64 rng(31);
    std::vector<ItemSeries> series;
    for (int i = 0; i < 40; ++i)
        series.push_back(oracle::random_series(rng, "u" + std::to_string(i), 6, 5));
    for (const auto& K :
         {gram(series, SubKernelSpec::linear(), std::nullopt, KernelTag::W),
          gram(series, SubKernelSpec::linear(), SubKernelSpec::rbf(0.8), KernelTag::WT),
          gram(series, SubKernelSpec::rbf(0.3), SubKernelSpec::rbf(2.0), KernelTag::NT)}) {
        CHECK(oracle::min_eigenvalue(K) >= -1e-7);
        CHECK(oracle::min_eigenvalue(normalize(K)) >= -1e-7);
    }
}

TEST_CASE("cross blocks normalized against self-kernels match the joint normalized gram") {
    std::mt19937_64 rng(37);
    std::vector<ItemSeries> all;
    for (int i = 0; i < 7; ++i)
        all.push_back(oracle::random_series(rng, "u" + std::to_string(i), 4, 3));
    const std::span<const ItemSeries> rows{all.data(), 3};
    const std::span<const ItemSeries> cols{all.data() + 3, 4};

    const auto joint =
        normalize(gram(all, SubKernelSpec::linear(), SubKernelSpec::rbf(0.6), KernelTag::WT));
    const auto raw = cross_block(rows, cols, SubKernelSpec::linear(), SubKernelSpec::rbf(0.6));
    const auto row_self = self_kernels(rows, SubKernelSpec::linear(), SubKernelSpec::rbf(0.6));
    const auto col_self = self_kernels(cols, SubKernelSpec::linear(), SubKernelSpec::rbf(0.6));
    const auto B = normalize_block(raw, row_self, col_self);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(B.at(i, j) == doctest::Approx(joint.at(i, 3 + j)).epsilon(1e-12));
}

TEST_CASE("kernel cache file round-trips") {
    std::mt19937_64 rng(41);
    std::vector<ItemSeries> series;
    for (int i = 0; i < 4; ++i)
        series.push_back(oracle::random_series(rng, "user-" + std::to_string(i), 3, 2));
    const auto K = gram(series, SubKernelSpec::linear(), std::nullopt, KernelTag::W);

    const auto path = std::filesystem::temp_directory_path() / "tmkl_kernel_cache_test.ckrn";
    write_kernel_cache(path.string(), K);
    const auto L = read_kernel_cache(path.string());
    CHECK(L.user_index == K.user_index);
    CHECK(L.values == K.values);

    // Header check: not a cache file.
    const auto junk = std::filesystem::temp_directory_path() / "tmkl_kernel_cache_junk.bin";
    {
        std::FILE* f = std::fopen(junk.string().c_str(), "wb");
        std::fputs("NOPE", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS((void)read_kernel_cache(junk.string()), ValidationError);
    std::filesystem::remove(path);
    std::filesystem::remove(junk);
}
