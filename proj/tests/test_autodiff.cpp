#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "cpm/autodiff.hpp"
#include "cpm/checkpoint.hpp"
#include "cpm/errors.hpp"
#include "cpm/optim.hpp"
#include "cpm/rng.hpp"
#include "support/oracles.hpp"

using namespace cpm;
using namespace cpm::ad;

namespace {

Array random_array(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    Array a(std::move(shape));
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] = scale * rng.normal();
    return a;
}

}  // namespace

TEST_CASE("relu forward") {
    Tape t;
    Tensor x = t.constant(Array::from({3}, {-1.0, 0.0, 2.0}));
    const Array& y = relu(x).value();
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);
}

TEST_CASE("softmax of equal logits is uniform") {
    Tape t;
    Tensor x = t.constant(Array::from({1, 2}, {0.0, 0.0}));
    const Array& y = softmax(x).value();
    CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(11);
    Array a = random_array({2, 3}, rng);
    Array b = random_array({3, 4}, rng);
    Tape t;
    const Array& c = matmul(t.constant(a), t.constant(b)).value();
    std::vector<double> av(a.data(), a.data() + a.numel());
    std::vector<double> bv(b.data(), b.data() + b.numel());
    auto want = testing::naive_matmul(av, bv, 2, 3, 4);
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(std::abs(c[i] - want[i]) < 1e-12);
}

TEST_CASE("matmul rejects mismatched inner dims") {
    Tape t;
    Tensor a = t.constant(Array({2, 3}, 1.0));
    Tensor b = t.constant(Array({4, 2}, 1.0));
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(2,3)"), ShapeMismatchError);
}

TEST_CASE("square loss gradient at x=3 is 6") {
    Tape t;
    Tensor x = t.leaf(Array::scalar(3.0), true);
    Tensor loss = multiply(x, x);
    t.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward requires a scalar loss") {
    Tape t;
    Tensor x = t.leaf(Array({2, 2}, 1.0), true);
    CHECK_THROWS_AS(t.backward(relu(x)), NotScalarError);
}

TEST_CASE("disconnected parameter gets a zero gradient") {
    Tape t;
    Tensor used = t.leaf(Array::scalar(2.0), true);
    Tensor unused = t.leaf(Array({3, 3}, 1.0), true);
    t.backward(multiply(used, used));
    const Array& g = unused.grad();
    for (std::size_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("sum of W*x gradient checks against finite differences") {
    Rng rng(21);
    Array w = random_array({4, 3}, rng);
    Array x = random_array({3, 2}, rng);
    auto f = [&x](Tape& tape, Tensor wt) {
        Tensor xt = tape.constant(x);
        return mean_all(matmul(wt, xt));
    };
    CHECK(finite_diff_check(f, w) < 1e-6);
}

TEST_CASE("finite_diff_check edge behaviors") {
    Rng rng(22);
    Array x = random_array({5}, rng);
    auto linear_f = [](Tape& tape, Tensor xt) { return mean_all(scale(xt, 3.0)); };
    CHECK(finite_diff_check(linear_f, x) < 1e-9);
    auto const_f = [](Tape& tape, Tensor xt) {
        (void)xt;
        return tape.constant(Array::scalar(4.0));
    };
    CHECK(finite_diff_check(const_f, x) == 0.0);
}

TEST_CASE("huber loss branch values") {
    Tape t;
    SUBCASE("zero residual") {
        Tensor p = t.constant(Array::from({2}, {1.0, -2.0}));
        CHECK(huber_loss(p, Array::from({2}, {1.0, -2.0}), 1.0).value().item() == 0.0);
    }
    SUBCASE("quadratic branch") {
        Tensor p = t.constant(Array::from({1}, {0.5}));
        CHECK(huber_loss(p, Array::from({1}, {0.0}), 1.0).value().item() ==
              doctest::Approx(0.125).epsilon(1e-15));
    }
    SUBCASE("linear branch") {
        Tensor p = t.constant(Array::from({1}, {2.0}));
        CHECK(huber_loss(p, Array::from({1}, {0.0}), 1.0).value().item() ==
              doctest::Approx(1.5).epsilon(1e-15));
    }
}

TEST_CASE("full op mix passes the gradient harness") {
    Rng rng(33);
    Array x = random_array({6, 8}, rng, 0.5);
    Array wq = random_array({8, 8}, rng, 0.3);
    Array wk = random_array({8, 8}, rng, 0.3);
    Array wv = random_array({8, 8}, rng, 0.3);
    Array wo = random_array({8, 8}, rng, 0.3);
    Array gain = random_array({8}, rng, 0.2);
    Array bias = random_array({8}, rng, 0.2);
    Array w2 = random_array({8, 4}, rng, 0.3);
    Array target({6, 4}, 0.1);

    auto f = [&](Tape& tape, Tensor xt) {
        Tensor att = multi_head_attention(xt, tape.constant(wq), tape.constant(wk),
                                          tape.constant(wv), tape.constant(wo), 2);
        Tensor normed = layer_norm(add(xt, att), tape.constant(gain), tape.constant(bias));
        Tensor h = relu(matmul(normed, tape.constant(w2)));
        Tensor pooled = reduce_max(h, 0);
        Tensor mixed = concat({h, multiply(h, h)}, 1);
        Tensor joined = matmul(reduce_mean(mixed, 1), pooled);
        return huber_loss(sub(h, softmax(joined)), target, 1.0);
    };
    CHECK(finite_diff_check(f, x) < 1e-6);
}

TEST_CASE("adam leaves parameters alone on zero gradients") {
    ParamMap params{{"w", Array({2, 2}, 1.5)}};
    ParamMap grads{{"w", Array({2, 2}, 0.0)}};
    AdamState opt;
    opt.step(params, grads);
    for (std::size_t i = 0; i < 4; ++i) CHECK(params["w"][i] == 1.5);
}

TEST_CASE("first adam step moves each coordinate by about lr") {
    Rng rng(44);
    ParamMap params{{"w", Array({4}, 0.0)}};
    Array g = random_array({4}, rng, 0.1);
    double norm = global_norm({{"w", g}});
    CHECK(norm <= 1.0);
    ParamMap grads{{"w", g}};
    AdamState opt;
    opt.step(params, grads);
    for (std::size_t i = 0; i < 4; ++i) {
        double expected = -1e-4 * g[i] / (std::abs(g[i]) + 1e-8);
        CHECK(params["w"][i] == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("large gradients are clipped to unit global norm") {
    Array g({3}, 0.0);
    g[0] = 6.0;
    g[1] = 8.0;  // norm 10
    CHECK(global_norm({{"w", g}}) == doctest::Approx(10.0));

    ParamMap p1{{"w", Array({3}, 0.25)}};
    ParamMap p2{{"w", Array({3}, 0.25)}};
    Array unit = g;
    for (std::size_t i = 0; i < 3; ++i) unit[i] /= 10.0;
    AdamState a1, a2;
    a1.step(p1, {{"w", g}});
    a2.step(p2, {{"w", unit}});
    for (std::size_t i = 0; i < 3; ++i) CHECK(p1["w"][i] == p2["w"][i]);
}

TEST_CASE("adam rejects mismatched gradient shapes") {
    ParamMap params{{"w", Array({2, 2}, 1.0)}};
    ParamMap grads{{"w", Array({3}, 1.0)}};
    AdamState opt;
    CHECK_THROWS_AS(opt.step(params, grads), ShapeMismatchError);
}

TEST_CASE("checkpoint round-trip is bit identical") {
    Rng rng(55);
    ParamMap params;
    params.emplace("layer.w", random_array({7, 5}, rng));
    params.emplace("layer.b", random_array({5}, rng));
    params.emplace("scalarish", random_array({1}, rng));
    nlohmann::json meta = {{"relation", "align"}, {"seed", 123}};

    auto path = std::filesystem::temp_directory_path() / "cpm_test_ckpt.bin";
    save_checkpoint(path.string(), params, meta);
    Checkpoint ck = load_checkpoint(path.string());
    std::filesystem::remove(path);

    CHECK(ck.meta.at("relation") == "align");
    REQUIRE(ck.params.size() == params.size());
    for (const auto& [name, arr] : params) {
        const Array& got = ck.params.at(name);
        REQUIRE(got.same_shape(arr));
        for (std::size_t i = 0; i < arr.numel(); ++i) CHECK(got[i] == arr[i]);
    }
}

TEST_CASE("rng streams are reproducible and substreams independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(derive_seed(1, "x", 0) != derive_seed(1, "x", 1));
    CHECK(derive_seed(1, "x", 0) != derive_seed(2, "x", 0));
    CHECK(derive_seed(1, "x", 0) != derive_seed(1, "y", 0));

    // Box-Muller moments sanity.
    Rng c(7);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double z = c.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}
