#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "logora/checkpoint.hpp"
#include "logora/errors.hpp"
#include "logora/ops.hpp"
#include "logora/optim.hpp"
#include "logora/parameters.hpp"
#include "test_support.hpp"

using namespace logora;
using logora::testing::check_gradients;
using logora::testing::random_tensor;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a logora::Error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("matmul hand values and shape errors") {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor same = matmul(eye, a);
  CHECK(std::vector<double>(same.data().begin(), same.data().end()) == std::vector<double>{1, 2, 3, 4});

  Tensor col = Tensor::from({2, 1}, {5, 6});
  Tensor r = matmul(a, col);
  CHECK(r.shape() == Shape{2, 1});
  CHECK(r.at(0) == 17.0);
  CHECK(r.at(1) == 39.0);

  CHECK(code_of([] { matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("batched matmul matches per-sample products") {
  Rng rng(1);
  Tensor a = random_tensor({3, 4, 5}, rng);
  Tensor b = random_tensor({3, 5, 2}, rng);
  Tensor c = matmul(a, b);
  REQUIRE(c.shape() == Shape{3, 4, 2});
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 5; ++k) acc += a.at(n * 20 + i * 5 + k) * b.at(n * 10 + k * 2 + j);
        CHECK(c.at(n * 8 + i * 2 + j) == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("conv1d valid examples") {
  Tensor x = Tensor::from({4, 1}, {1, 2, 3, 4});
  Tensor w = Tensor::from({2, 1, 1}, {1, 1});
  Tensor y = conv1d_valid(x, w);
  REQUIRE(y.shape() == Shape{3, 1});
  CHECK(y.at(0) == 3.0);
  CHECK(y.at(1) == 5.0);
  CHECK(y.at(2) == 7.0);

  Tensor ident = conv1d_valid(x, Tensor::from({1, 1, 1}, {1}));
  CHECK(logora::testing::max_abs_diff(ident.data(), x.data()) == 0.0);

  CHECK(conv1d_valid(Tensor::zeros({128, 2}), Tensor::zeros({8, 2, 3})).dim(0) == 121);
  CHECK(code_of([] { conv1d_valid(Tensor::zeros({4, 2}), Tensor::zeros({5, 2, 1})); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("conv1d stride-1 and strided paths agree with a direct sum") {
  Rng rng(2);
  Tensor x = random_tensor({2, 11, 3}, rng);
  Tensor w = random_tensor({4, 3, 5}, rng);
  for (std::size_t stride : {1u, 2u, 3u}) {
    Tensor y = conv1d_valid(x, w, stride);
    const std::size_t out_len = (11 - 4) / stride + 1;
    REQUIRE(y.shape() == Shape{2, out_len, 5});
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 0; t < out_len; ++t)
        for (std::size_t o = 0; o < 5; ++o) {
          double acc = 0.0;
          for (std::size_t j = 0; j < 4; ++j)
            for (std::size_t c = 0; c < 3; ++c) acc += x.at((b * 11 + t * stride + j) * 3 + c) * w.at((j * 3 + c) * 5 + o);
          CHECK(y.at((b * out_len + t) * 5 + o) == doctest::Approx(acc).epsilon(1e-12));
        }
  }
}

TEST_CASE("softmax examples") {
  Tensor u = softmax_lastdim(Tensor::zeros({3}));
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Tensor peaked = softmax_lastdim(Tensor::from({3}, {10, 0, 0}));
  CHECK(peaked.at(0) > 0.9999);
  Rng rng(3);
  Tensor rows = softmax_lastdim(random_tensor({5, 7}, rng, -30, 30));
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 7; ++j) s += rows.at(r * 7 + j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("backward basics") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  backward(sum(square(x)));
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);

  // Leaf gradients accumulate across backward calls.
  backward(sum(square(x)));
  CHECK(x.grad()[0] == 4.0);
  x.zero_grad();

  Tensor y = Tensor::from({2}, {3, 4}, true);
  Tensor c = add_scalar(sum(scale(y, 0.0)), 5.0);
  backward(c);
  for (double g : y.grad()) CHECK(g == 0.0);

  CHECK(code_of([&] { backward(square(x)); }) == ErrorCode::kNotScalar);
  CHECK(code_of([] { Tensor::zeros({0, 3}); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("detach cuts the graph") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor d = square(x).detach();
  CHECK_FALSE(d.requires_grad());
  Tensor loss = sum(mul(square(x), d));
  backward(loss);
  // d/dx sum(x^2 * c) with c = x^2 held constant = 2 x c.
  CHECK(x.grad()[0] == doctest::Approx(2.0 * 1.0 * 1.0));
  CHECK(x.grad()[1] == doctest::Approx(2.0 * 2.0 * 4.0));
}

TEST_CASE("broadcast add/mul reduce gradients over leading axes") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor b = Tensor::from({3}, {10, 20, 30}, true);
  backward(sum(mul(add(a, b), b)));
  // d/db_j sum_i (a_ij + b_j) b_j = sum_i (a_ij + 2 b_j)
  CHECK(b.grad()[0] == doctest::Approx(1 + 4 + 40));
  CHECK(b.grad()[2] == doctest::Approx(3 + 6 + 120));
  CHECK(a.grad()[4] == doctest::Approx(20));
  CHECK(code_of([&] { add(b, a); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("finite-difference gradients of every primitive") {
  Rng rng(11);
  logora::testing::GradCheckOptions opt;
  opt.max_coordinates = 12;

  Tensor a = random_tensor({2, 3, 4}, rng, -1, 1, true);
  Tensor b = random_tensor({4, 5}, rng, -1, 1, true);
  Tensor c = random_tensor({2, 3, 4}, rng, 0.2, 1.5, true);
  Tensor g = random_tensor({4}, rng, 0.5, 1.5, true);
  Tensor beta = random_tensor({4}, rng, -0.5, 0.5, true);
  Tensor w = random_tensor({2, 4, 3}, rng, -1, 1, true);
  Tensor probe = random_tensor({2, 3, 5}, rng);

  SUBCASE("matmul") {
    auto r = check_gradients([&] { return sum(mul(matmul(a, b), probe)); }, {a, b}, opt);
    CHECK(r.worst_relative < 1e-4);
  }
  SUBCASE("batched matmul with transpose") {
    auto r = check_gradients([&] { return sum(square(matmul(a, transpose_last2(c)))); }, {a, c}, opt);
    CHECK(r.worst_relative < 1e-4);
  }
  SUBCASE("element-wise smooth ops") {
    auto r = check_gradients(
        [&] {
          Tensor t = add(mul(gelu(a), sigmoid(c)), exp(scale(a, 0.3)));
          t = sub(t, log(c));
          return sum(mul(t, add_scalar(c, 0.5)));
        },
        {a, c}, opt);
    CHECK(r.worst_relative < 1e-4);
  }
  SUBCASE("relu and clamp away from kinks") {
    auto r = check_gradients([&] { return sum(mul(relu(a), clamp(c, 0.4, 1.2))); }, {a, c}, opt);
    CHECK(r.worst_relative < 1e-4);
  }
  SUBCASE("softmax and log-softmax") {
    auto r = check_gradients(
        [&] { return add(sum(mul(softmax_lastdim(a), c)), sum(mul(log_softmax_lastdim(c), a))); }, {a, c}, opt);
    CHECK(r.worst_relative < 1e-4);
  }
  SUBCASE("layer norm") {
    auto r = check_gradients([&] { return sum(mul(layer_norm(a, g, beta), c)); }, {a, g, beta}, opt);
    CHECK(r.worst_relative < 1e-4);
  }
  SUBCASE("batch norm in training mode") {
    BatchNormStats stats{Tensor::zeros({4}), Tensor::full({4}, 1.0)};
    auto r = check_gradients([&] { return sum(mul(batch_norm(a, g, beta, stats, true), c)); }, {a, g, beta}, opt);
    CHECK(r.worst_relative < 1e-4);
  }
  SUBCASE("conv1d") {
    Tensor x = random_tensor({2, 7, 4}, rng, -1, 1, true);
    Tensor p = random_tensor({2, 6, 3}, rng);
    auto r = check_gradients([&] { return sum(mul(conv1d_valid(x, w), p)); }, {x, w}, opt);
    CHECK(r.worst_relative < 1e-4);
    Tensor p2 = random_tensor({2, 3, 3}, rng);
    auto r2 = check_gradients([&] { return sum(mul(conv1d_valid(x, w, 2), p2)); }, {x, w}, opt);
    CHECK(r2.worst_relative < 1e-4);
  }
  SUBCASE("reductions and shape ops") {
    const std::size_t idx[] = {1, 0, 1};
    auto r = check_gradients(
        [&] {
          Tensor t = permute(a, {2, 0, 1});
          t = reshape(t, {4, 6});
          Tensor s = concat({sum_axis(a, 1), mean_axis(c, 1)}, 1);  // [2, 8]
          Tensor picked = index_select(s, idx);
          return add(sum(square(t)), add(sum(square(picked)), mean(c)));
        },
        {a, c}, opt);
    CHECK(r.worst_relative < 1e-4);
  }
  SUBCASE("euclidean rows") {
    Tensor x = random_tensor({3, 4}, rng, -1, 1, true);
    Tensor y = random_tensor({3, 4}, rng, -1, 1, true);
    auto r = check_gradients([&] { return sum(square(euclidean_rows(x, y))); }, {x, y}, opt);
    CHECK(r.worst_relative < 1e-4);
  }
}

TEST_CASE("random three-layer composition matches finite differences") {
  Rng rng(5);
  Tensor x = random_tensor({6, 4}, rng);
  Tensor w1 = random_tensor({4, 8}, rng, -0.5, 0.5, true);
  Tensor w2 = random_tensor({8, 8}, rng, -0.5, 0.5, true);
  Tensor w3 = random_tensor({8, 3}, rng, -0.5, 0.5, true);
  auto loss = [&] { return mean(square(matmul(gelu(matmul(gelu(matmul(x, w1)), w2)), w3))); };
  auto r = check_gradients(loss, {w1, w2, w3}, {.max_coordinates = 20});
  CHECK(r.checked >= 15);
  CHECK(r.worst_relative < 1e-4);
}

TEST_CASE("zero-distance euclidean gradient is zero") {
  Tensor x = Tensor::from({1, 2}, {1, 2}, true);
  Tensor y = Tensor::from({1, 2}, {1, 2}, true);
  backward(sum(euclidean_rows(x, y)));
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("batch norm running statistics") {
  Tensor x = Tensor::from({4, 1}, {1, 2, 3, 4});
  BatchNormStats stats{Tensor::zeros({1}), Tensor::full({1}, 1.0)};
  Tensor gamma = Tensor::full({1}, 1.0), beta = Tensor::zeros({1});
  batch_norm(x, gamma, beta, stats, true);
  // Mean 2.5, unbiased variance 5/3, momentum 0.1.
  CHECK(stats.running_mean.at(0) == doctest::Approx(0.25));
  CHECK(stats.running_var.at(0) == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0));
  Tensor inf = batch_norm(x, gamma, beta, stats, false);
  CHECK(inf.at(0) == doctest::Approx((1.0 - 0.25) / std::sqrt(stats.running_var.at(0) + 1e-5)));
}

TEST_CASE("adam examples") {
  Tensor p = Tensor::from({3}, {1, -2, 3}, true);
  std::vector<Tensor> params{p};
  AdamState st;
  st.learning_rate = 0.01;
  std::vector<double> zero(3, 0.0);
  std::vector<std::span<const double>> grads{zero};
  adam_step(params, grads, st);
  CHECK(p.at(0) == 1.0);
  CHECK(p.at(1) == -2.0);
  REQUIRE(st.first_moment.size() == 1);
  CHECK(st.first_moment[0].size() == 3);
  CHECK(st.second_moment[0].size() == 3);

  AdamState fresh;
  fresh.learning_rate = 0.01;
  Tensor q = Tensor::from({3}, {1, -2, 3}, true);
  std::vector<Tensor> qs{q};
  std::vector<double> g{0.5, -3.0, 1e-3};
  std::vector<std::span<const double>> gs{g};
  adam_step(qs, gs, fresh);
  // t = 1: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps).
  CHECK(q.at(0) == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(q.at(1) == doctest::Approx(-2.0 + 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
  CHECK(q.at(2) == doctest::Approx(3.0 - 0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip and errors") {
  Rng rng(9);
  ParameterSet a;
  a.add_uniform("w", {3, 4}, 3, rng);
  a.add_constant("buf", {2}, 7.0, false);
  const auto dir = logora::testing::scratch_dir("ckpt");
  write_checkpoint(dir / "a.lgra", "{\"k\":1}", a);
  Checkpoint ck = read_checkpoint(dir / "a.lgra");
  CHECK(ck.metadata_json == "{\"k\":1}");
  REQUIRE(ck.records.size() == 2);

  ParameterSet b;
  b.add_zeros("w", {3, 4});
  b.add_constant("buf", {2}, 0.0, false);
  load_parameters(ck, b);
  CHECK(logora::testing::max_abs_diff(b.find("w")->tensor.data(), a.find("w")->tensor.data()) == 0.0);
  CHECK(b.find("buf")->tensor.at(1) == 7.0);

  ParameterSet wrong;
  wrong.add_zeros("w", {4, 3});
  CHECK(code_of([&] { load_parameters(ck, wrong); }) == ErrorCode::kFormatError);
  CHECK(code_of([&] { read_checkpoint(dir / "missing.lgra"); }) == ErrorCode::kIoError);
}
