#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "test_support.hpp"

using namespace mehlerlab;
using namespace mltest;

TEST_CASE("zero generator gives the identity") {
  auto prop = make_prop(2, [](double) { return Mat::Zero(2, 2); });
  CHECK((prop->propagate(0.0, 0.0) - Mat::Identity(2, 2)).norm() == 0.0);
  CHECK((prop->propagate(0.0, 2.0) - Mat::Identity(2, 2)).norm() == 0.0);
  CHECK(prop->cocycle_defect(0.0, 0.5, 1.0) == 0.0);
}

TEST_CASE("scalar exponential") {
  auto prop = scalar_prop(-1.0);
  CHECK(prop->propagate(0.0, 1.0)(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
}

TEST_CASE("commuting diagonal sinusoid matches the integrated exponential") {
  auto gen = [](double t) {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = -1.0;
    a(1, 1) = -(1.5 + std::sin(2.0 * M_PI * t));
    return a;
  };
  auto prop = make_prop(2, gen);
  const Mat u = prop->propagate(0.0, 1.0);
  CHECK(std::abs(u(0, 0) - std::exp(-1.0)) < 1e-6);
  CHECK(std::abs(u(1, 1) - std::exp(-1.5)) < 1e-6);
  CHECK(std::abs(u(0, 1)) < 1e-12);
}

TEST_CASE("commuting family equals exp of the generator integral") {
  // A(t) = (1 + 0.5 sin 2 pi t) B with a fixed non-diagonal B
  Mat b(2, 2);
  b << -1.0, 0.5, 0.5, -2.0;
  auto gen = [b](double t) { return Mat((1.0 + 0.5 * std::sin(2.0 * M_PI * t)) * b); };
  auto prop = make_prop(2, gen);
  const double s = 0.0, t = 0.75;
  const double scale =
      simpson([](double r) { return 1.0 + 0.5 * std::sin(2.0 * M_PI * r); }, s, t, 2048);
  const Mat expected = (scale * b).exp();
  CHECK((prop->propagate(s, t) - expected).norm() < 1e-6);
}

TEST_CASE("adjoint action") {
  auto prop = scalar_prop(-1.0);
  Vec xi = Vec::Constant(1, 2.0);
  CHECK(prop->adjoint_apply(0.0, 1.0, xi)(0) ==
        doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-8));

  auto prop2 = make_prop(2, [](double) { return Mat::Zero(2, 2); });
  Vec xi2(2);
  xi2 << 1.0, -3.0;
  CHECK((prop2->adjoint_apply(0.0, 1.0, xi2) - xi2).norm() == 0.0);
  CHECK(prop2->adjoint_apply(0.0, 1.0, Vec::Zero(2)).norm() == 0.0);

  // adjoint of a non-symmetric flow really is the transpose
  Mat a(2, 2);
  a << -1.0, 1.0, 0.0, -2.0;
  auto prop3 = make_prop(2, [a](double) { return a; });
  Vec v(2);
  v << 0.3, -0.7;
  CHECK((prop3->adjoint_apply(0.0, 0.5, v) - prop3->propagate(0.0, 0.5).transpose() * v).norm() ==
        0.0);
}

TEST_CASE("cocycle identities") {
  auto prop = scalar_prop(-1.0);
  CHECK(prop->cocycle_defect(0.0, 0.5, 1.0) < 1e-10);
  CHECK(prop->cocycle_defect(0.0, 0.0, 1.0) == 0.0);  // r = s

  Mat a(2, 2);
  a << -1.0, 0.8, -0.3, -1.5;
  auto prop2 =
      make_prop(2, [a](double t) { return Mat(a + 0.2 * std::sin(t) * Mat::Identity(2, 2)); });
  for (double r : {0.25, 0.5, 1.25}) {
    const double defect = prop2->cocycle_defect(0.0, r, 2.0);
    CHECK(defect <= 1e-8 * (1.0 + prop2->propagate(0.0, 2.0).norm()));
  }
}

TEST_CASE("fourth-order convergence on the scalar exponential") {
  const double exact = std::exp(-1.0);
  auto err = [&](double h) {
    auto prop = scalar_prop(-1.0, h);
    return std::abs(prop->propagate(0.0, 1.0)(0, 0) - exact);
  };
  const double e1 = err(1.0 / 8.0);
  const double e2 = err(1.0 / 16.0);
  CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("ordering and alignment errors") {
  auto prop = scalar_prop(-1.0);
  CHECK_THROWS_AS(prop->propagate(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(prop->propagate(0.0, 0.3701), DomainError);
  CHECK_THROWS_AS(prop->cocycle_defect(0.0, 1.0, 0.5), DomainError);
}

TEST_CASE("numerical blowup is detected") {
  auto prop = scalar_prop(1e4, 1.0 / 4.0);
  CHECK_THROWS_AS(prop->propagate(0.0, 4.0), NumericalError);
}

TEST_CASE("structure tag spot-checks") {
  FamilyTags tags;
  tags.constant = true;
  CHECK_THROWS_AS(OperatorFamily(1, [](double t) { return Mat::Constant(1, 1, t); }, tags),
                  ConfigError);
  FamilyTags per;
  per.period = 1.0;
  CHECK_THROWS_AS(
      OperatorFamily(1, [](double t) { return Mat::Constant(1, 1, -1.0 + 0.1 * t); }, per),
      ConfigError);
  CHECK_NOTHROW(OperatorFamily(
      1, [](double t) { return Mat::Constant(1, 1, -1.5 - std::sin(2 * M_PI * t)); }, per));
}

TEST_CASE("warm-up freezes the cache") {
  auto prop = scalar_prop(-1.0, 1.0 / 8.0);
  prop->warm_up(0.0, 1.0);
  CHECK(prop->frozen());
  CHECK_NOTHROW(prop->propagate(0.0, 1.0));
  CHECK_THROWS_AS(prop->propagate(0.0, 2.0), NumericalError);
}

TEST_CASE("quadrature walkers agree with direct propagation") {
  Mat a(2, 2);
  a << -1.0, 0.4, 0.0, -2.0;
  auto prop = make_prop(2, [a](double) { return a; }, 1.0 / 64.0);
  std::vector<std::pair<double, Mat>> backward, forward;
  const Mat u1 = walk_nodes_backward(*prop, 0.0, 0.5,
                                     [&](double r, const Mat& u) { backward.push_back({r, u}); });
  const Mat u2 = walk_nodes_forward(*prop, 0.0, 0.5,
                                    [&](double r, const Mat& u) { forward.push_back({r, u}); });
  CHECK((u1 - prop->propagate(0.0, 0.5)).norm() < 1e-14);
  CHECK((u2 - prop->propagate(0.0, 0.5)).norm() < 1e-14);
  REQUIRE(backward.size() == forward.size());
  // U(t, r) U(r, s) = U(t, s) node by node
  for (std::size_t i = 0; i < backward.size(); ++i) {
    const auto& [rb, utr] = backward[backward.size() - 1 - i];
    const auto& [rf, urs] = forward[i];
    CHECK(rb == doctest::Approx(rf));
    CHECK((utr * urs - u1).norm() < 1e-13);
  }
}
