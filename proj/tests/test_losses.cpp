#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "logora/errors.hpp"
#include "logora/losses.hpp"
#include "logora/ops.hpp"
#include "test_support.hpp"

using namespace logora;
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

TEST_CASE("classification loss examples") {
  const int label[] = {2};
  CHECK(classification_loss(Tensor::zeros({1, 6}), label).item() == doctest::Approx(std::log(6.0)).epsilon(1e-12));

  std::vector<double> onehot(6, 0.0);
  onehot[2] = 1e6;
  CHECK(classification_loss(Tensor::from({1, 6}, onehot), label).item() < 1e-9);

  Tensor two = Tensor::from({2, 3}, {0.1, 0.7, -0.4, 1.2, 0.0, 0.3});
  const int labels[] = {1, 0};
  const int l0[] = {1}, l1[] = {0};
  const std::size_t r0[] = {0}, r1[] = {1};
  const double a = classification_loss(index_select(two, r0), l0).item();
  const double b = classification_loss(index_select(two, r1), l1).item();
  CHECK(classification_loss(two, labels).item() == doctest::Approx((a + b) / 2).epsilon(1e-14));

  const int bad[] = {7};
  CHECK(code_of([&] { classification_loss(Tensor::zeros({1, 6}), bad); }) == ErrorCode::kLabelOutOfRange);
}

TEST_CASE("domain loss examples") {
  Tensor half = Tensor::full({4}, 0.5);
  CHECK(domain_loss(half, half).item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(domain_loss(Tensor::full({3}, 1.0), Tensor::full({3}, 0.0)).item() < 1e-6);
  CHECK(domain_loss(Tensor::full({1}, std::exp(-1.0)), std::nullopt).item() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(code_of([] { domain_loss(Tensor::full({1}, 1.5), std::nullopt); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([] { domain_loss(Tensor::full({1}, std::nan("")), std::nullopt); }) == ErrorCode::kOutOfRange);
  // Saturated probabilities stay finite through the clamp.
  CHECK(std::isfinite(domain_loss(Tensor::full({2}, 0.0), Tensor::full({2}, 1.0)).item()));
}

TEST_CASE("triplet hinge examples") {
  CHECK(triplet_hinge(Tensor::from({1}, {0.1}), Tensor::from({1}, {0.9}), 0.5).item() == 0.0);
  CHECK(triplet_hinge(Tensor::from({1}, {0.9}), Tensor::from({1}, {0.1}), 0.5).item() ==
        doctest::Approx(1.3).epsilon(1e-15));
  CHECK(triplet_hinge(Tensor::from({2}, {0.1, 0.9}), Tensor::from({2}, {0.9, 0.1}), 0.5).item() ==
        doctest::Approx(1.3).epsilon(1e-15));
}

TEST_CASE("margin triplet examples") {
  const int labels[] = {0, 0, 1};
  Triplets t{{0}, {1}, {2}};
  // a = p, |a - n| = 2, beta = 1 -> 0
  Tensor f1 = Tensor::from({3, 2}, {0, 0, 0, 0, 2, 0});
  CHECK(margin_triplet_loss(f1, t, labels, 1.0).item() == 0.0);
  // |a - p| = 2, |a - n| = 0.5 -> 2.5
  Tensor f2 = Tensor::from({3, 2}, {0, 0, 0, 2, 0.5, 0});
  CHECK(margin_triplet_loss(f2, t, labels, 1.0).item() == doctest::Approx(2.5).epsilon(1e-15));
  // a = p = n -> beta
  Tensor f3 = Tensor::full({3, 2}, 0.3);
  CHECK(margin_triplet_loss(f3, t, labels, 1.0).item() == doctest::Approx(1.0).epsilon(1e-15));

  Triplets wrong{{0}, {2}, {1}};
  CHECK(code_of([&] { margin_triplet_loss(f1, wrong, labels, 1.0); }) == ErrorCode::kClassMismatch);
}

TEST_CASE("dtw triplet loss uses sequence distances") {
  const int labels[] = {0, 0, 1};
  Triplets t{{0}, {1}, {2}};
  // Anchor and positive differ only by a time shift; the negative is far.
  Tensor z = Tensor::from({3, 4, 1}, {0, 1, 2, 2, 0, 0, 1, 2, 5, 5, 5, 5});
  CHECK(dtw_triplet_loss(z, t, labels, 1.0).item() == 0.0);
  Tensor swapped = Tensor::from({3, 4, 1}, {0, 1, 2, 2, 5, 5, 5, 5, 0, 0, 1, 2});
  // Every anchor step is matched against 5: 5 + 4 + 3 + 3.
  const double dp = 15.0, dn = 0.0;
  CHECK(dtw_triplet_loss(swapped, t, labels, 1.0).item() == doctest::Approx(dp - dn + 1.0));
}

TEST_CASE("sampled triplets respect the labels") {
  Rng rng(3);
  const int labels[] = {0, 1, 0, 2, 1, 1, 2, 0, 3};
  const Triplets t = sample_triplets(labels, rng);
  // The single class-3 sample has no positive and is skipped.
  CHECK(t.size() == 8);
  check_triplets(t, labels);
  for (std::size_t n = 0; n < t.size(); ++n) CHECK(t.anchors[n] != t.positives[n]);
}

TEST_CASE("prototype bank maintenance") {
  PrototypeBank bank(3, 2, 0.9);
  CHECK_FALSE(bank.any_initialized());
  const int first[] = {1, 1};
  bank.update(Tensor::from({2, 2}, {1, 2, 3, 4}), first);
  CHECK(bank.initialized(1));
  CHECK(bank.prototype(1)[0] == 2.0);
  CHECK(bank.prototype(1)[1] == 3.0);
  CHECK_FALSE(bank.initialized(0));

  PrototypeBank ema(2, 2, 0.9);
  const double zero[] = {0, 0};
  ema.set_prototype(0, zero);
  const int lbl[] = {0};
  ema.update(Tensor::from({1, 2}, {1, 1}), lbl);
  CHECK(ema.prototype(0)[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(ema.prototype(0)[1] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK_FALSE(ema.initialized(1));

  const int other[] = {1};
  ema.update(Tensor::from({1, 2}, {5, 5}), other);
  CHECK(ema.prototype(0)[0] == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("center loss examples") {
  PrototypeBank bank(2, 2);
  const double c1[] = {0, 0}, c2[] = {3, 4};
  bank.set_prototype(0, c1);
  bank.set_prototype(1, c2);
  CHECK(center_loss(Tensor::from({1, 2}, {3, 4}), bank).item() == 0.0);
  CHECK(center_loss(Tensor::from({1, 2}, {1, 0}), bank).item() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(center_loss(Tensor::from({2, 2}, {3, 4, 1, 0}), bank).item() == doctest::Approx(1.0).epsilon(1e-15));

  PrototypeBank empty(2, 2);
  CHECK(code_of([&] { center_loss(Tensor::zeros({1, 2}), empty); }) == ErrorCode::kNoPrototypes);

  // Gradient is 2 (z - nearest prototype).
  Tensor z = Tensor::from({2, 2}, {1, 0.5, 2.5, 3.0}, true);
  backward(center_loss(z, bank));
  CHECK(z.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(z.grad()[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(z.grad()[2] == doctest::Approx(2.0 * (2.5 - 3.0)).epsilon(1e-12));
  CHECK(z.grad()[3] == doctest::Approx(2.0 * (3.0 - 4.0)).epsilon(1e-12));
}

TEST_CASE("nearest prototype is unchanged by a shared orthogonal offset") {
  PrototypeBank bank(3, 3);
  const double a[] = {0, 0, 0}, b[] = {2, 1, 0}, c[] = {-1, 3, 0};
  bank.set_prototype(0, a);
  bank.set_prototype(1, b);
  bank.set_prototype(2, c);
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const double z[] = {rng.uniform(-3, 3), rng.uniform(-3, 3), 0.0};
    const double shifted[] = {z[0], z[1], rng.uniform(-10, 10)};
    CHECK(bank.nearest(z) == bank.nearest(shifted));
  }
}

TEST_CASE("total loss arithmetic") {
  LossParts p{Tensor::scalar(1), Tensor::scalar(2), Tensor::scalar(3), Tensor::scalar(4), Tensor::scalar(5)};
  LossWeights all_one;
  CHECK(total_loss(p, all_one).item() == 11.0);
  LossWeights zero{0, 0, 0, 0};
  CHECK(total_loss(p, zero).item() == 1.0);
  LossWeights half_domain{0.5, 0, 0, 0};
  LossParts q{Tensor::scalar(1), Tensor::scalar(2), Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(0)};
  CHECK(total_loss(q, half_domain).item() == 0.0);
  LossWeights negative;
  negative.lambda_dtw = -1.0;
  CHECK(code_of([&] { negative.validate(); }) == ErrorCode::kBadConfig);
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(9);
  const int labels[] = {0, 1, 0, 1, 2, 2};
  Tensor logits = random_tensor({6, 3}, rng, -2, 2, true);
  auto rc = logora::testing::check_gradients([&] { return classification_loss(logits, labels); }, {logits});
  CHECK(rc.worst_relative < 1e-4);

  Tensor ps = random_tensor({4}, rng, 0.1, 0.9, true);
  Tensor pt = random_tensor({4}, rng, 0.1, 0.9, true);
  auto rd = logora::testing::check_gradients([&] { return domain_loss(ps, pt); }, {ps, pt});
  CHECK(rd.worst_relative < 1e-4);

  Triplets t{{0, 1, 4}, {2, 3, 5}, {1, 4, 0}};
  Tensor fused = random_tensor({6, 4}, rng, -1, 1, true);
  auto rm = logora::testing::check_gradients([&] { return margin_triplet_loss(fused, t, labels, 1.5); }, {fused},
                                             {.relative_tolerance = 1e-3});
  CHECK(rm.worst_relative < 1e-3);

  Tensor zg = random_tensor({6, 4, 3}, rng, -1, 1, true);
  auto rt = logora::testing::check_gradients([&] { return dtw_triplet_loss(zg, t, labels, 3.0); }, {zg},
                                             {.relative_tolerance = 1e-3});
  CHECK(rt.worst_relative < 1e-3);

  PrototypeBank bank(3, 4);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto v = random_tensor({4}, rng);
    bank.set_prototype(j, v.data());
  }
  Tensor ft = random_tensor({5, 4}, rng, -1, 1, true);
  auto rn = logora::testing::check_gradients([&] { return center_loss(ft, bank); }, {ft});
  CHECK(rn.worst_relative < 1e-4);
}
