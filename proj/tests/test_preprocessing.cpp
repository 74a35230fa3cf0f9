#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "ttm/preprocessing.hpp"

using namespace ttm;
using ttm_test::random_tensor;

TEST_CASE("normalize handles a constant channel via eps") {
    Tensor X({1, 1, 4}, {5, 5, 5, 5});
    auto [Xn, stats] = normalize(X);
    for (auto v : Xn.data()) CHECK(v == real(0));
    CHECK(stats.center(0, 0) == real(5));
    CHECK(stats.stddev[0] == real(0));
}

TEST_CASE("normalize matches the hand formula on [1,3]") {
    Tensor X({1, 1, 2}, {1, 3});
    auto [Xn, stats] = normalize(X);
    CHECK(stats.center(0, 0) == doctest::Approx(2.0));
    CHECK(stats.stddev[0] == doctest::Approx(1.0)); // population std
    CHECK(Xn.data()[0] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(Xn.data()[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("normalize output is zero-mean unit-std per channel") {
    std::mt19937_64 rng(1);
    auto X = random_tensor({3, 2, 32}, rng, -5.0, 9.0);
    auto [Xn, stats] = normalize(X);
    for (std::int64_t b = 0; b < 3; ++b)
        for (std::int64_t c = 0; c < 2; ++c) {
            double mean = 0, var = 0;
            for (int t = 0; t < 32; ++t)
                mean += Xn.data()[static_cast<std::size_t>((b * 2 + c) * 32 + t)];
            mean /= 32;
            for (int t = 0; t < 32; ++t) {
                const double d =
                    Xn.data()[static_cast<std::size_t>((b * 2 + c) * 32 + t)] - mean;
                var += d * d;
            }
            var /= 32;
            CHECK(std::abs(mean) < 1e-9);
            CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-4);
        }
}

TEST_CASE("normalize rejects sl < 2") {
    Tensor X({1, 1, 1}, {3});
    CHECK_THROWS_AS(normalize(X), ContractError);
}

TEST_CASE("denormalize inverts normalize within 1e-9") {
    std::mt19937_64 rng(2);
    auto X = random_tensor({2, 3, 16}, rng, -100.0, 100.0);
    auto [Xn, stats] = normalize(X);
    auto back = denormalize(Xn, stats, {0, 1, 2});
    for (std::size_t i = 0; i < back.data().size(); ++i)
        CHECK(std::abs(back.data()[i] - X.data()[i]) < 1e-9);
}

TEST_CASE("denormalize edge values") {
    Tensor X({1, 2, 4}, {1, 2, 3, 4, 10, 20, 30, 40});
    auto [Xn, stats] = normalize(X);
    Tensor zeros({1, 2, 3});
    auto mean_out = denormalize(zeros, stats, {0, 1});
    CHECK(mean_out.data()[0] == doctest::Approx(stats.center(0, 0)));
    CHECK(mean_out.data()[3] == doctest::Approx(stats.center(0, 1)));

    Tensor ones({1, 2, 3}, real(1));
    auto shifted = denormalize(ones, stats, {0, 1});
    CHECK(shifted.data()[0] == doctest::Approx(stats.center(0, 0) + stats.scale(0, 0)));
}

TEST_CASE("denormalize selects stats rows by source channel") {
    Tensor X({1, 2, 4}, {0, 0, 0, 0, 100, 100, 102, 102});
    auto [Xn, stats] = normalize(X);
    Tensor y({1, 1, 2}, {0, 0});
    auto only_second = denormalize(y, stats, {1});
    CHECK(only_second.data()[0] == doctest::Approx(101.0));
}

TEST_CASE("normalization strips affine transforms") {
    std::mt19937_64 rng(3);
    // large scale keeps the eps-in-the-denominator effect far below the
    // tolerance (the mismatch shrinks like eps/std)
    auto X = random_tensor({1, 1, 64}, rng, -300.0, 300.0);
    auto Xa = Tensor({1, 1, 64});
    const double a = 3.0, b = -7.0;
    for (std::size_t i = 0; i < Xa.data().size(); ++i)
        Xa.data()[i] = static_cast<real>(a) * X.data()[i] + static_cast<real>(b);
    auto [Xn, s1] = normalize(X);
    auto [Xan, s2] = normalize(Xa);
    for (std::size_t i = 0; i < Xn.data().size(); ++i)
        CHECK(std::abs(Xn.data()[i] - Xan.data()[i]) < 1e-6);
}

TEST_CASE("patch and unpatch are exact inverses") {
    std::mt19937_64 rng(4);
    auto X = random_tensor({2, 3, 24}, rng);
    auto Xp = patch(X, 4);
    CHECK(Xp.shape() == Shape{2, 3, 6, 4});
    auto back = unpatch(Xp);
    CHECK(back.data() == X.data());
}

TEST_CASE("patch counts at reference configurations") {
    std::mt19937_64 rng(5);
    CHECK(patch(random_tensor({1, 1, 512}, rng), 64).dim(2) == 8);
    CHECK(patch(random_tensor({1, 1, 1024}, rng), 128).dim(2) == 8);
    auto single = patch(random_tensor({1, 1, 16}, rng), 16);
    CHECK(single.dim(2) == 1);
    CHECK(single.dim(3) == 16);
}

TEST_CASE("patch rejects indivisible context length") {
    std::mt19937_64 rng(6);
    CHECK_THROWS_AS(patch(random_tensor({1, 1, 10}, rng), 4), ShapeError);
}

TEST_CASE("patch lays values out contiguously") {
    Tensor X({1, 1, 6}, {0, 1, 2, 3, 4, 5});
    auto Xp = patch(X, 3);
    CHECK(Xp.data() == std::vector<real>{0, 1, 2, 3, 4, 5});
    CHECK(Xp.shape() == Shape{1, 1, 2, 3});
}

TEST_CASE("normalize_with applies context stats to futures") {
    Tensor X({1, 1, 4}, {0, 2, 0, 2}); // mean 1, pop std 1
    auto [Xn, stats] = normalize(X);
    Tensor Y({1, 1, 2}, {3, 1});
    auto Yn = normalize_with(Y, stats);
    CHECK(Yn.data()[0] == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(Yn.data()[1] == doctest::Approx(0.0).epsilon(1e-4));
}
