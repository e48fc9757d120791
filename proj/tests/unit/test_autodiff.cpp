#include <doctest.h>

#include <cmath>

#include "aecnn/autodiff.hpp"
#include "grad_cases.hpp"
#include "oracles.hpp"

using namespace aecnn;
using ad::Tensor;

TEST_SUITE("autodiff") {

TEST_CASE("linear examples") {
    const auto x = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
    const auto eye = Tensor::constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const auto y = ad::linear(x, eye, Tensor::zeros({3}));
    CHECK(std::vector<double>(y.values().begin(), y.values().end()) == std::vector<double>{1, 2, 3, 4, 5, 6});
    const auto b = ad::linear(x, Tensor::zeros({3, 2}), Tensor::constant({2}, {7, -1}));
    CHECK(std::vector<double>(b.values().begin(), b.values().end()) == std::vector<double>{7, -1, 7, -1});
    CHECK_THROWS_AS(ad::linear(x, Tensor::zeros({2, 2}), Tensor::zeros({2})), std::invalid_argument);
    CHECK_THROWS_AS(ad::linear(x, eye, Tensor::zeros({2})), std::invalid_argument);
}

TEST_CASE("linear matches a hand-written matrix product") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = oracle::dim(rng, 1, 9), in = oracle::dim(rng, 1, 9), out = oracle::dim(rng, 1, 9);
        const auto xv = oracle::random_values(n * in, rng), wv = oracle::random_values(in * out, rng),
                   bv = oracle::random_values(out, rng);
        const auto y = ad::linear(Tensor::constant({n, in}, xv), Tensor::constant({in, out}, wv), Tensor::constant({out}, bv));
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < out; ++c) {
                double acc = bv[c];
                for (std::size_t i = 0; i < in; ++i) acc += xv[r * in + i] * wv[i * out + c];
                CHECK(y.at(r, c) == doctest::Approx(acc).epsilon(1e-13));
            }
    }
}

TEST_CASE("relu examples") {
    const auto neg = ad::relu(Tensor::constant({3}, {-1, -2, -0.5}));
    for (double v : neg.values()) CHECK(v == 0.0);
    const auto pos = ad::relu(Tensor::constant({3}, {1, 2, 0.5}));
    CHECK(std::vector<double>(pos.values().begin(), pos.values().end()) == std::vector<double>{1, 2, 0.5});
    auto x = Tensor::parameter({4}, {-1, 2, -3, 4});
    ad::backward(ad::sum(ad::relu(x)));
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{0, 1, 0, 1});
}

TEST_CASE("max_pool_set") {
    const auto one = ad::max_pool_set(Tensor::constant({1, 3}, {4, 5, 6}));
    CHECK(one.shape() == ad::Shape{3});
    CHECK(std::vector<double>(one.values().begin(), one.values().end()) == std::vector<double>{4, 5, 6});
    CHECK_THROWS_AS(ad::max_pool_set(Tensor::zeros({0, 3})), std::invalid_argument);

    Rng rng(2);
    const auto v = oracle::random_values(7 * 4, rng);
    const auto base = ad::max_pool_set(Tensor::constant({7, 4}, v));
    std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    std::vector<double> pv;
    for (auto r : perm) pv.insert(pv.end(), v.begin() + r * 4, v.begin() + r * 4 + 4);
    const auto permuted = ad::max_pool_set(Tensor::constant({7, 4}, pv));
    for (std::size_t c = 0; c < 4; ++c) CHECK(base.values()[c] == permuted.values()[c]);

    // Ties route the gradient to the lowest index.
    auto tie = Tensor::parameter({3, 1}, {2, 2, 1});
    ad::backward(ad::sum(ad::max_pool_set(tie)));
    CHECK(std::vector<double>(tie.grad().begin(), tie.grad().end()) == std::vector<double>{1, 0, 0});
}

TEST_CASE("concat") {
    const auto a = Tensor::constant({2, 1}, {1, 2});
    const auto single = ad::concat_cols({a});
    CHECK(single.shape() == a.shape());
    CHECK(single.values()[1] == 2.0);
    const auto ab = ad::concat_cols({a, Tensor::constant({2, 2}, {3, 4, 5, 6})});
    CHECK(ab.shape() == ad::Shape{2, 3});
    CHECK(std::vector<double>(ab.values().begin(), ab.values().end()) == std::vector<double>{1, 3, 4, 2, 5, 6});
    CHECK_THROWS_AS(ad::concat_cols({a, Tensor::zeros({3, 1})}), std::invalid_argument);
}

TEST_CASE("cross entropy") {
    CHECK(ad::cross_entropy(Tensor::constant({4}, {0.3, 0.3, 0.3, 0.3}), 2).item() == doctest::Approx(std::log(4.0)));
    CHECK(ad::cross_entropy(Tensor::constant({3}, {0, 800, 0}), 1).item() == doctest::Approx(0.0));
    CHECK(std::isfinite(ad::cross_entropy(Tensor::constant({3}, {0, 800, 0}), 0).item()));
    CHECK_THROWS_AS(ad::cross_entropy(Tensor::constant({3}, {0, 0, 0}), 3), std::out_of_range);
    auto logits = Tensor::parameter({3}, {0.5, -1.0, 2.0});
    ad::backward(ad::cross_entropy(logits, 0));
    const double z = std::exp(0.5) + std::exp(-1.0) + std::exp(2.0);
    CHECK(logits.grad()[0] == doctest::Approx(std::exp(0.5) / z - 1.0));
    CHECK(logits.grad()[1] == doctest::Approx(std::exp(-1.0) / z));
    CHECK(logits.grad()[2] == doctest::Approx(std::exp(2.0) / z));
}

TEST_CASE("backward basics") {
    auto x = Tensor::parameter({2, 3}, {1, 2, 3, 4, 5, 6});
    ad::backward(ad::sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
    // Leaf gradients accumulate until cleared.
    ad::backward(ad::sum(x));
    for (double g : x.grad()) CHECK(g == 2.0);
    x.zero_grad();
    for (double g : x.grad()) CHECK(g == 0.0);
    CHECK_THROWS_AS(ad::backward(x), std::invalid_argument);
}

TEST_CASE("chain of two linears matches the product rule") {
    Rng rng(3);
    auto x = Tensor::parameter({1, 3}, oracle::random_values(3, rng));
    const auto w1v = oracle::random_values(6, rng), w2v = oracle::random_values(2, rng);
    const auto w1 = Tensor::constant({3, 2}, w1v), w2 = Tensor::constant({2, 1}, w2v);
    ad::backward(ad::sum(ad::linear(ad::linear(x, w1, Tensor::zeros({2})), w2, Tensor::zeros({1}))));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(x.grad()[i] == doctest::Approx(w1v[i * 2] * w2v[0] + w1v[i * 2 + 1] * w2v[1]).epsilon(1e-14));
    }
}

TEST_CASE("every op passes a finite-difference check") {
    Rng rng(4);
    for (const auto& op : oracle::op_cases()) {
        for (int shape = 0; shape < 10; ++shape) {
            const auto r = op.run(rng);
            INFO(op.name << " shape draw " << shape << " ratio " << r.worst_ratio);
            CHECK(r.worst_ratio <= 1.0);
        }
    }
}

TEST_CASE("op examples") {
    const auto x = Tensor::constant({3, 2}, {1, 2, 3, 4, 5, 6});
    const std::vector<std::size_t> idx{2, 0, 2};
    const auto g = ad::gather_rows(x, idx);
    CHECK(std::vector<double>(g.values().begin(), g.values().end()) == std::vector<double>{5, 6, 1, 2, 5, 6});
    const auto gm = ad::group_max(Tensor::constant({4, 1}, {1, 3, 2, 0}), 2);
    CHECK(std::vector<double>(gm.values().begin(), gm.values().end()) == std::vector<double>{3, 2});
    CHECK_THROWS_AS(ad::group_max(Tensor::zeros({3, 1}), 2), std::invalid_argument);
    const auto bm = ad::batched_matvec(Tensor::constant({1, 4}, {0, 1, 1, 0}), Tensor::constant({1, 2}, {7, 9}));
    CHECK(std::vector<double>(bm.values().begin(), bm.values().end()) == std::vector<double>{9, 7});
    const std::vector<std::size_t> wi{0, 2};
    const std::vector<double> ww{0.25, 0.75};
    const auto ws = ad::weighted_row_sum(x, wi, ww, 2);
    CHECK(ws.values()[0] == doctest::Approx(0.25 * 1 + 0.75 * 5));
    CHECK(ad::orthogonality_penalty(Tensor::constant({2, 4}, {1, 0, 0, 1, 0, 1, -1, 0})).item() == 0.0);
    CHECK(ad::orthogonality_penalty(Tensor::constant({1, 4}, {2, 0, 0, 2})).item() == doctest::Approx(18.0));
    const auto st = ad::standardize(Tensor::constant({2, 1}, {1, 3}), Tensor::constant({1}, {1}), Tensor::constant({1}, {0}));
    CHECK(st.values()[0] == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)));
    CHECK(ad::reshape(x, {6}).shape() == ad::Shape{6});
    CHECK_THROWS_AS(ad::reshape(x, {4}), std::invalid_argument);
    CHECK(ad::scale(x, -2.0).at(2, 1) == -12.0);
    CHECK(ad::sub(x, x).at(1, 1) == 0.0);
    CHECK_THROWS_AS(ad::add(x, Tensor::zeros({2, 3})), std::invalid_argument);
}

TEST_CASE("forward results must be finite") {
    const auto big = Tensor::constant({1, 1}, {1e300});
    CHECK_THROWS_AS(ad::linear(big, Tensor::constant({1, 1}, {1e300}), Tensor::zeros({1})), std::domain_error);
    CHECK_THROWS_AS(Tensor::constant({2}, {1.0}), std::invalid_argument);
}

TEST_CASE("forward and backward are bitwise deterministic") {
    auto run = [] {
        Rng rng(5);
        auto w = Tensor::parameter({8, 4}, oracle::random_values(32, rng));
        const auto x = Tensor::constant({16, 8}, oracle::random_values(128, rng));
        const auto y = ad::max_pool_set(ad::relu(ad::linear(x, w, Tensor::zeros({4}))));
        ad::backward(ad::cross_entropy(y, 1));
        std::vector<double> out(y.values().begin(), y.values().end());
        out.insert(out.end(), w.grad().begin(), w.grad().end());
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("FlopScope counts multiply-adds twice") {
    const auto x = Tensor::zeros({5, 3});
    {
        ad::FlopScope scope;
        (void)ad::linear(x, Tensor::zeros({3, 4}), Tensor::zeros({4}));
        CHECK(scope.flops() == 2u * 5 * 3 * 4);
        (void)ad::batched_matvec(Tensor::zeros({2, 9}), Tensor::zeros({2, 3}));
        CHECK(scope.flops() == 2u * 5 * 3 * 4 + 2u * 2 * 9);
    }
    ad::FlopScope fresh;
    CHECK(fresh.flops() == 0);
}

}  // TEST_SUITE

TEST_SUITE("autodiff") {

TEST_CASE("products do not depend on buffer placement") {
    Rng rng(6);
    const auto xv = oracle::random_values(3 * 37, rng);
    const auto wv = oracle::random_values(37 * 19, rng);
    const auto mv = oracle::random_values(3 * 49, rng);
    const auto first = ad::linear(Tensor::constant({3, 37}, xv), Tensor::constant({37, 19}, wv), Tensor::zeros({19}));
    const auto first_row = ad::linear(Tensor::constant({1, 37}, {xv.begin(), xv.begin() + 37}),
                                      Tensor::constant({37, 19}, wv), Tensor::zeros({19}));
    const auto first_mv = ad::batched_matvec(Tensor::constant({3, 49}, mv), Tensor::constant({3, 7}, {xv.begin(), xv.begin() + 21}));
    std::vector<std::vector<double>> padding;
    for (std::size_t shift = 1; shift < 24; ++shift) {
        padding.emplace_back(shift);
        const auto y = ad::linear(Tensor::constant({3, 37}, xv), Tensor::constant({37, 19}, wv), Tensor::zeros({19}));
        CHECK(std::equal(y.values().begin(), y.values().end(), first.values().begin()));
        const auto row = ad::linear(Tensor::constant({1, 37}, {xv.begin(), xv.begin() + 37}),
                                    Tensor::constant({37, 19}, wv), Tensor::zeros({19}));
        CHECK(std::equal(row.values().begin(), row.values().end(), first_row.values().begin()));
        // A single row gives the same values as that row inside a batch.
        CHECK(std::equal(row.values().begin(), row.values().end(), first.values().begin()));
        const auto bm = ad::batched_matvec(Tensor::constant({3, 49}, mv), Tensor::constant({3, 7}, {xv.begin(), xv.begin() + 21}));
        CHECK(std::equal(bm.values().begin(), bm.values().end(), first_mv.values().begin()));
    }
}

}  // TEST_SUITE
