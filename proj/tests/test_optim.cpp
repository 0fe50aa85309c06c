#include <doctest.h>

#include <cmath>
#include <limits>

#include "anchoralign/error.hpp"
#include "anchoralign/optim.hpp"

using namespace anchoralign;

namespace {

ScheduleConfig sched(std::size_t total) {
  ScheduleConfig s;
  s.total_steps = total;
  return s;
}

void step(std::vector<double>& p, std::vector<double>& g, AdamWState& st, double lr, const AdamWHyper& h) {
  std::vector<std::span<double>> ps{std::span<double>(p)};
  std::vector<std::span<double>> gs{std::span<double>(g)};
  adamw_step(ps, gs, st, lr, h);
}

}  // namespace

TEST_CASE("schedule shape") {
  const auto s = sched(250);
  CHECK(lr_at(0, s) == doctest::Approx(3e-4 / 50));
  CHECK(lr_at(49, s) == 3e-4);
  CHECK(lr_at(50, s) == 3e-4);
  CHECK(lr_at(250, s) == 0.0);
  CHECK(lr_at(150, s) == doctest::Approx(1.5e-4).epsilon(1e-14));
  for (std::size_t t = 0; t <= 250; ++t) CHECK(lr_at(t, s) >= 0.0);
  // Piecewise linear: constant second differences away from the kink.
  for (std::size_t t = 51; t < 249; ++t)
    CHECK(std::abs(lr_at(t + 1, s) - 2 * lr_at(t, s) + lr_at(t - 1, s)) < 1e-18);
  for (std::size_t t = 1; t < 48; ++t)
    CHECK(std::abs(lr_at(t + 1, s) - 2 * lr_at(t, s) + lr_at(t - 1, s)) < 1e-18);
  CHECK_THROWS_AS(lr_at(251, s), Error);
  ScheduleConfig bad = sched(10);
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("zero gradients") {
  AdamWHyper h;
  h.weight_decay = 0.0;
  std::vector<double> p{1.0, -2.0, 3.5}, g(3, 0.0);
  AdamWState st;
  step(p, g, st, 0.1, h);
  CHECK(p == std::vector<double>{1.0, -2.0, 3.5});

  h.weight_decay = 0.01;
  std::vector<double> q{1.0, -2.0, 3.5};
  AdamWState st2;
  step(q, g, st2, 0.1, h);
  for (std::size_t i = 0; i < 3; ++i) CHECK(q[i] == std::vector<double>{1.0, -2.0, 3.5}[i] * (1.0 - 0.1 * 0.01));
  CHECK(q[0] == 0.999);
}

TEST_CASE("scalar recurrence over ten steps") {
  AdamWHyper h;
  std::vector<double> p{0.7}, g{1.0};
  AdamWState st;
  double x = 0.7, m = 0, v = 0;
  for (int t = 1; t <= 10; ++t) {
    const double lr = 0.01 * t;
    step(p, g, st, lr, h);
    m = 0.9 * m + 0.1 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    x = x - lr * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * x);
    CHECK(std::abs(p[0] - x) < 1e-12);
  }
  CHECK(st.t == 10);
}

TEST_CASE("lr of zero only advances moments") {
  std::vector<double> p{0.3, -0.4}, g{0.5, 2.0};
  AdamWState st;
  step(p, g, st, 0.0, AdamWHyper{});
  CHECK(p == std::vector<double>{0.3, -0.4});
  CHECK(st.t == 1);
  CHECK(st.m[0][0] == doctest::Approx(0.05));
  CHECK(st.v[0][1] == doctest::Approx(0.004));
}

TEST_CASE("update magnitude bound") {
  AdamWHyper h;
  h.weight_decay = 0.0;
  std::vector<double> p{0.0, 0.0, 0.0};
  AdamWState st;
  const std::vector<std::vector<double>> grads{{1, -3, 0.01}, {-2, 5, 0}, {0.5, 0.5, 0.5}, {9, -9, 1e-6}};
  for (std::size_t t = 0; t < grads.size(); ++t) {
    auto before = p;
    auto g = grads[t];
    step(p, g, st, 0.05, h);
    const double c1 = 1 - std::pow(0.9, double(t + 1));
    const double c2 = 1 - std::pow(0.999, double(t + 1));
    for (std::size_t i = 0; i < 3; ++i) {
      const double mh = st.m[0][i] / c1;
      const double vh = st.v[0][i] / c2;
      CHECK(std::abs(p[i] - before[i]) <= 0.05 * std::abs(mh) / (std::sqrt(vh) + 1e-8) * (1 + 1e-12));
      CHECK(st.v[0][i] >= 0.0);
    }
  }
}

TEST_CASE("invalid inputs") {
  std::vector<double> p{1.0}, g{std::numeric_limits<double>::quiet_NaN()};
  AdamWState st;
  std::vector<std::span<double>> ps{std::span<double>(p)};
  std::vector<std::span<double>> gs{std::span<double>(g)};
  const std::vector<std::string> names{"layer0.weight"};
  try {
    adamw_step(ps, gs, st, 0.1, AdamWHyper{}, names);
    FAIL("non-finite gradient accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
    CHECK(std::string(e.what()).find("layer0.weight") != std::string::npos);
  }
  CHECK(p[0] == 1.0);
  CHECK(st.t == 0);

  std::vector<double> g2{1.0, 2.0};
  std::vector<std::span<double>> gs2{std::span<double>(g2)};
  CHECK_THROWS_AS(adamw_step(ps, gs2, st, 0.1), Error);
}
