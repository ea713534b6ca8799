#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "logora/dtw.hpp"
#include "logora/errors.hpp"
#include "logora/ops.hpp"
#include "test_support.hpp"

using namespace logora;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool is_monotone_path(const WarpingPath& path, std::size_t la, std::size_t lb) {
  if (path.empty() || path.front() != std::pair<std::size_t, std::size_t>{0, 0}) return false;
  if (path.back() != std::pair<std::size_t, std::size_t>{la - 1, lb - 1}) return false;
  for (std::size_t k = 1; k < path.size(); ++k) {
    const auto di = path[k].first - path[k - 1].first;
    const auto dj = path[k].second - path[k - 1].second;
    if (di > 1 || dj > 1 || di + dj == 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("hand examples") {
  const std::vector<double> a{0, 1, 2}, b{0, 1, 1, 2};
  CHECK(dtw_distance(SequenceView(a), SequenceView(b)).distance == 0.0);
  const std::vector<double> z{0, 0}, o{1, 1};
  CHECK(dtw_distance(SequenceView(z), SequenceView(o)).distance == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(dtw_brute_force(SequenceView(z), SequenceView(o)).distance == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("identical sequences give zero distance on the diagonal") {
  Rng rng(1);
  const auto v = random_values(rng, 5 * 3);
  SequenceView s(v, 5, 3);
  const auto r = dtw_distance(s, s);
  CHECK(r.distance == 0.0);
  REQUIRE(r.path.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(r.path[i] == std::pair<std::size_t, std::size_t>{i, i});
  CHECK(dtw_brute_force(s, s).distance == 0.0);
}

TEST_CASE("single elements reduce to the euclidean distance") {
  const std::vector<double> a{1, 2, 3}, b{4, 6, 3};
  SequenceView sa(a, 1, 3), sb(b, 1, 3);
  CHECK(dtw_distance(sa, sb).distance == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(dtw_brute_force(sa, sb).distance == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("dynamic programme agrees with the brute-force oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t la = 1 + rng.index(6), lb = 1 + rng.index(6);
    const auto va = random_values(rng, la * 3), vb = random_values(rng, lb * 3);
    SequenceView a(va, la, 3), b(vb, lb, 3);
    const auto dp = dtw_distance(a, b);
    const auto bf = dtw_brute_force(a, b);
    CHECK(std::abs(dp.distance - bf.distance) < 1e-9);
    CHECK(is_monotone_path(dp.path, la, lb));
    CHECK(std::abs(path_cost(a, b, dp.path) - dp.distance) < 1e-12);
    CHECK(std::abs(path_cost(a, b, bf.path) - bf.distance) < 1e-12);
  }
}

TEST_CASE("properties") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t la = 1 + rng.index(8), lb = 1 + rng.index(8);
    const auto va = random_values(rng, la * 2), vb = random_values(rng, lb * 2);
    SequenceView a(va, la, 2), b(vb, lb, 2);
    const double ab = dtw_distance(a, b).distance;
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(dtw_distance(b, a).distance).epsilon(1e-12));
    if (la == lb) {
      double diag = 0.0;
      for (std::size_t i = 0; i < la; ++i) diag += euclidean(a.row(i), b.row(i));
      CHECK(ab <= diag + 1e-12);
    }
    // Repeating an element never changes the distance to the original.
    std::vector<double> dup(va.begin(), va.end());
    const std::size_t at = rng.index(la);
    dup.insert(dup.begin() + static_cast<std::ptrdiff_t>(at * 2), va.begin() + static_cast<std::ptrdiff_t>(at * 2),
               va.begin() + static_cast<std::ptrdiff_t>(at * 2 + 2));
    CHECK(dtw_distance(a, SequenceView(dup, la + 1, 2)).distance == 0.0);
  }
}

TEST_CASE("errors") {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 2, 3};
  CHECK_THROWS_AS(dtw_distance(SequenceView(a, 2, 2), SequenceView(b, 1, 3)), Error);
  CHECK_THROWS_AS(dtw_distance(SequenceView(std::span<const double>{}, 0, 2), SequenceView(a, 2, 2)), Error);
  std::vector<double> long_a(7, 0.0), long_b(6, 0.0);
  try {
    dtw_brute_force(SequenceView(long_a), SequenceView(long_b));
    FAIL("expected TooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooLarge);
  }
}

TEST_CASE("gradient examples") {
  const std::vector<double> a{0}, b{1};
  const auto g = dtw_loss_value_and_grad(SequenceView(a), SequenceView(b));
  CHECK(g.result.distance == 1.0);
  CHECK(g.grad_a[0] == -1.0);
  CHECK(g.grad_b[0] == 1.0);

  Rng rng(4);
  const auto v = random_values(rng, 12);
  const auto same = dtw_loss_value_and_grad(SequenceView(v, 4, 3), SequenceView(v, 4, 3));
  for (double x : same.grad_a) CHECK(x == 0.0);
  for (double x : same.grad_b) CHECK(x == 0.0);
}

TEST_CASE("tensor dtw gradients match finite differences away from path ties") {
  Rng rng(5);
  Tensor a = logora::testing::random_tensor({5, 3}, rng, -1, 1, true);
  Tensor b = logora::testing::random_tensor({4, 3}, rng, -1, 1, true);
  auto r = logora::testing::check_gradients([&] { return dtw(a, b); }, {a, b}, {.relative_tolerance = 1e-3});
  CHECK(r.checked >= 15);
  CHECK(r.worst_relative < 1e-3);

  Tensor z = logora::testing::random_tensor({4, 5, 2}, rng, -1, 1, true);
  const std::size_t lhs[] = {0, 1, 2}, rhs[] = {3, 3, 0};
  Tensor w = Tensor::from({3}, {0.5, -1.0, 2.0});
  auto rp = logora::testing::check_gradients([&] { return sum(mul(dtw_pairs(z, lhs, rhs), w)); }, {z});
  CHECK(rp.worst_relative < 1e-3);
  Tensor d = dtw_pairs(z, lhs, rhs);
  CHECK(d.shape() == Shape{3});
  CHECK(d.at(1) == doctest::Approx(dtw_distance(SequenceView(z.data().subspan(10, 10), 5, 2),
                                                SequenceView(z.data().subspan(30, 10), 5, 2))
                                       .distance));
}
