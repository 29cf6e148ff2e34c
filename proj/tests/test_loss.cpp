#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "wavebeat/loss.hpp"

using namespace wavebeat;

TEST_SUITE("loss") {

TEST_CASE("bce hand-computed values") {
    SUBCASE("perfect prediction is ~0") {
        TensorT<double> y({1, 4}, {1, 0, 1, 0});
        auto p = y;
        CHECK(bce(p, y) <= -std::log(1.0 - kProbClamp) + 1e-12);
    }
    SUBCASE("y=1 p=0.5 gives ln 2") {
        TensorT<double> p({1, 1}, {0.5});
        TensorT<double> y({1, 1}, {1.0});
        CHECK(bce(p, y) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("y=0 p=0.9 gives -ln 0.1") {
        TensorT<double> p({1, 1}, {0.9});
        TensorT<double> y({1, 1}, {0.0});
        CHECK(bce(p, y) == doctest::Approx(-std::log(0.1)).epsilon(1e-9));
    }
    SUBCASE("shape mismatch throws") {
        TensorT<double> p({1, 2});
        TensorT<double> y({1, 3});
        CHECK_THROWS_AS(bce(p, y), std::invalid_argument);
    }
}

TEST_CASE("mfe hand-computed values") {
    SUBCASE("perfect prediction is ~0") {
        TensorT<double> y({1, 4}, {1, 0, 0, 0});
        auto p = y;
        const auto parts = mfe(p, y);
        CHECK(parts.total < 1e-6);
    }
    SUBCASE("single row worked example") {
        TensorT<double> y({1, 4}, {1, 0, 0, 0});
        TensorT<double> p({1, 4}, {0.8, 0.1, 0.1, 0.1});
        const auto parts = mfe(p, y);
        CHECK(parts.fne == doctest::Approx(-std::log(0.8)).epsilon(1e-9));
        CHECK(parts.fpe == doctest::Approx(-std::log(0.9)).epsilon(1e-9));
        CHECK(parts.total == doctest::Approx(0.3285).epsilon(1e-3));
        CHECK(parts.total == parts.fpe + parts.fne);
    }
    SUBCASE("majority-class collapse is penalized far harder than bce") {
        TensorT<double> y({1, 4}, {1, 0, 0, 0});
        TensorT<double> p = TensorT<double>::full({1, 4}, 0.01);
        const auto parts = mfe(p, y);
        CHECK(parts.fne == doctest::Approx(-std::log(0.01)).epsilon(1e-9));
        CHECK(parts.total == doctest::Approx(4.615).epsilon(1e-3));
        const double plain = bce(p, y);
        CHECK(plain == doctest::Approx(1.159).epsilon(1e-3));
        CHECK(parts.total > 3.0 * plain);
    }
    SUBCASE("rows with no positives contribute zero fne") {
        TensorT<double> y({1, 3}, {0, 0, 0});
        TensorT<double> p = TensorT<double>::full({1, 3}, 0.2);
        const auto parts = mfe(p, y);
        CHECK(parts.fne == 0.0);
        CHECK(parts.total == parts.fpe);
        CHECK(std::isfinite(parts.total));
    }
    SUBCASE("rows with no negatives contribute zero fpe") {
        TensorT<double> y({1, 3}, {1, 1, 1});
        TensorT<double> p = TensorT<double>::full({1, 3}, 0.8);
        const auto parts = mfe(p, y);
        CHECK(parts.fpe == 0.0);
        CHECK(std::isfinite(parts.total));
    }
}

TEST_CASE("mfe total equals fpe plus fne on random matrices") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.uniform_int(32);
        TensorT<double> p({2, n}), y({2, n});
        for (std::size_t i = 0; i < p.numel(); ++i) {
            p[i] = rng.uniform(0.01, 0.99);
            y[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
        }
        const auto parts = mfe(p, y);
        CHECK(parts.total == parts.fpe + parts.fne);
        CHECK(parts.total >= 0.0);
        CHECK(bce(p, y) >= 0.0);
    }
}

TEST_CASE("losses decrease as predictions approach targets") {
    TensorT<double> y({1, 4}, {1, 0, 1, 0});
    TensorT<double> far({1, 4}, {0.6, 0.4, 0.6, 0.4});
    TensorT<double> near({1, 4}, {0.9, 0.1, 0.9, 0.1});
    CHECK(bce(near, y) < bce(far, y));
    CHECK(mfe(near, y).total < mfe(far, y).total);
}

TEST_CASE("loss values are invariant under joint frame permutation") {
    Rng rng(37);
    const std::size_t n = 16;
    TensorT<double> p({2, n}), y({2, n});
    for (std::size_t i = 0; i < p.numel(); ++i) {
        p[i] = rng.uniform(0.05, 0.95);
        y[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
    }
    // One fixed permutation applied to both rows of both matrices.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
    TensorT<double> p2({2, n}), y2({2, n});
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t i = 0; i < n; ++i) {
            p2[r * n + perm[i]] = p[r * n + i];
            y2[r * n + perm[i]] = y[r * n + i];
        }
    CHECK(bce(p2, y2) == doctest::Approx(bce(p, y)).epsilon(1e-12));
    CHECK(mfe(p2, y2).total == doctest::Approx(mfe(p, y).total).epsilon(1e-12));
}

TEST_CASE("loss gradients pass finite-difference checks") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(12);
        TensorT<double> p({2, n}), y({2, n});
        for (std::size_t i = 0; i < p.numel(); ++i) {
            p[i] = rng.uniform(0.05, 0.95);
            y[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
        }
        auto bce_loss = [&] { return bce(p, y); };
        CHECK(gradcheck::max_error(p, bce_grad(p, y), bce_loss, rng) < gradcheck::kTolerance);
        auto mfe_loss = [&] { return mfe(p, y).total; };
        CHECK(gradcheck::max_error(p, mfe_grad(p, y), mfe_loss, rng) < gradcheck::kTolerance);
    }
}

} // TEST_SUITE
