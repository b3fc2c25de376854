#include "doctest.h"

#include <cmath>

#include "egd/errors.hpp"
#include "egd/types.hpp"
#include "test_support.hpp"

using namespace egd;

TEST_CASE("ScatterMatrix validates symmetry and positive definiteness") {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  CHECK_NOTHROW(ScatterMatrix{m});
  Matrix asym = m;
  asym(0, 1) = 1.1;
  CHECK_THROWS_AS(ScatterMatrix{asym}, DomainError);
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(ScatterMatrix{indefinite}, DomainError);
  Matrix nan = m;
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(ScatterMatrix{nan}, DomainError);
  CHECK_THROWS_AS(ScatterMatrix{Matrix(2, 3)}, DomainError);
}

TEST_CASE("ScatterMatrix tolerates rounding-level asymmetry and stores it symmetric") {
  Matrix m = testing::random_spd(4, 3);
  m(0, 1) += 1e-15;
  const ScatterMatrix s(m);
  CHECK((s.matrix() - s.matrix().transpose()).norm() == 0.0);
}

TEST_CASE("quad_form matches the explicit 2x2 inverse") {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  const ScatterMatrix s(m);
  // inverse of [[2,1],[1,2]] is [[2,-1],[-1,2]] / 3
  Vector x(2);
  x << 1, 1;
  CHECK(s.quad_form(x) == doctest::Approx((2 - 1 - 1 + 2) / 3.0).epsilon(1e-15));
  x << 0.3, -1.7;
  const double expected = (2 * 0.09 - 2 * 0.3 * -1.7 + 2 * 2.89) / 3.0;
  CHECK(s.quad_form(x) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(s.log_det() == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("quad_form special cases") {
  Vector x(2);
  x << 3, 4;
  CHECK(ScatterMatrix::identity(2).quad_form(x) == doctest::Approx(25.0));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 1;
  x << 2, 0;
  CHECK(ScatterMatrix(d).quad_form(x) == doctest::Approx(1.0));
}

TEST_CASE("EgdParams rejects nonpositive shape and scale") {
  const auto s = ScatterMatrix::identity(3);
  CHECK_THROWS_AS(EgdParams(s, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(EgdParams(s, 1.0, -1.0), DomainError);
  CHECK(EgdParams(s, 1.5, 1.0).concave());
  CHECK_FALSE(EgdParams(s, 1.49, 1.0).concave());
}

TEST_CASE("Dataset validation") {
  Matrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  CHECK_NOTHROW(Dataset{x});
  Matrix zero_row = x;
  zero_row.row(1).setZero();
  CHECK_THROWS_AS(Dataset{zero_row}, DataError);
  Matrix inf = x;
  inf(2, 1) = INFINITY;
  CHECK_THROWS_AS(Dataset{inf}, DataError);
  CHECK_THROWS_AS(Dataset(Matrix(0, 2)), DataError);
  CHECK_THROWS_AS(Dataset(x, Vector::Ones(2)), DataError);
  Vector neg = Vector::Ones(3);
  neg(0) = -1;
  CHECK_THROWS_AS(Dataset(x, neg), DataError);
  CHECK_THROWS_AS(Dataset(x, Vector::Zero(3)), DataError);
}

TEST_CASE("Dataset weighted second moment") {
  Matrix x(2, 2);
  x << 1, 0, 0, 2;
  Vector w(2);
  w << 3, 1;
  const Dataset d(x, w);
  CHECK(d.total_weight() == 4.0);
  const Matrix m = d.second_moment();
  CHECK(m(0, 0) == doctest::Approx(0.75));
  CHECK(m(1, 1) == doctest::Approx(1.0));
  CHECK(m(0, 1) == doctest::Approx(0.0));
  const Dataset unit = d.with_weights(Vector::Ones(2));
  CHECK(unit.second_moment()(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("MixtureModel checks probabilities and dimensions") {
  const EgdParams p2(ScatterMatrix::identity(2), 1.0, 2.0);
  const EgdParams p3(ScatterMatrix::identity(3), 1.0, 2.0);
  Vector half(2);
  half << 0.5, 0.5;
  CHECK_NOTHROW(MixtureModel({p2, p2}, half));
  Vector bad(2);
  bad << 0.5, 0.6;
  CHECK_THROWS_AS(MixtureModel({p2, p2}, bad), DomainError);
  CHECK_THROWS_AS(MixtureModel({p2, p3}, half), DomainError);
  Vector neg(2);
  neg << 1.5, -0.5;
  CHECK_THROWS_AS(MixtureModel({p2, p2}, neg), DomainError);
  CHECK_THROWS_AS(MixtureModel({}, Vector(0)), DomainError);
}
