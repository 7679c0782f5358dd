#include <doctest.h>

#include <numbers>

#include "csk/group.hpp"
#include "helpers.hpp"

using namespace csk;
using csk::testing::kTestSignatures;
using csk::testing::max_abs;
using csk::testing::random_mv;

TEST_SUITE("group") {
  TEST_CASE("generators preserve the metric") {
    const Signature e(3, 0), m(1, 2);
    CHECK(metric_defect(e, givens(e, 0, 2, 0.7).matrix) < 1e-14);
    CHECK(metric_defect(m, givens(m, 1, 2, -1.3).matrix) < 1e-14);
    CHECK(metric_defect(m, boost(m, 0, 2, 1.9).matrix) < 1e-12);
    CHECK(metric_defect(m, reflection(m, 1).matrix) == 0.0);
    CHECK_THROWS_AS(givens(m, 0, 1, 0.3), Error);  // mixed signs
    CHECK_THROWS_AS(boost(e, 0, 1, 0.3), Error);
  }

  TEST_CASE("boost has cosh/sinh entries") {
    const Signature sig(1, 1);
    const GroupElement b = boost(sig, 0, 1, 0.8);
    CHECK(b.matrix(0, 0) == doctest::Approx(std::cosh(0.8)));
    CHECK(b.matrix(1, 1) == doctest::Approx(std::cosh(0.8)));
    CHECK(b.matrix(0, 1) == doctest::Approx(std::sinh(0.8)));
    CHECK(b.matrix(1, 0) == doctest::Approx(std::sinh(0.8)));
  }

  TEST_CASE("matrix exponential") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
    CHECK((matrix_exp(z) - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);
    Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(2, 2);
    gen(0, 1) = -1.2;
    gen(1, 0) = 1.2;
    const Eigen::MatrixXd r = matrix_exp(gen);
    CHECK(r(0, 0) == doctest::Approx(std::cos(1.2)).epsilon(1e-14));
    CHECK(r(1, 0) == doctest::Approx(std::sin(1.2)).epsilon(1e-14));
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(2, 2);
    big(0, 1) = big(1, 0) = 6.0;
    CHECK(matrix_exp(big)(0, 0) == doctest::Approx(std::cosh(6.0)).epsilon(1e-13));
  }

  TEST_CASE("make_group_element rejects non-isometries") {
    const Signature sig(2, 0);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
    m(0, 0) = 2.0;
    CHECK_THROWS_AS(make_group_element(sig, m), Error);
    CHECK_THROWS_AS(make_group_element(sig, Eigen::MatrixXd::Identity(3, 3)), Error);
    CHECK_NOTHROW(make_group_element(sig, Eigen::MatrixXd::Identity(2, 2)));
  }

  TEST_CASE("inverse and composition") {
    Rng rng(7);
    for (const Signature& sig : kTestSignatures) {
      for (int s = 0; s < 20; ++s) {
        const GroupElement g = sample_group_element(sig, rng);
        CHECK(metric_defect(sig, g.matrix) < 1e-9 * g.matrix.squaredNorm());
        const GroupElement e = compose(g, inverse(g));
        CHECK((e.matrix - Eigen::MatrixXd::Identity(sig.dim(), sig.dim())).norm() <
              1e-10 * g.matrix.squaredNorm());
      }
    }
  }

  TEST_CASE("sampled boosts reach the rapidity range") {
    Rng rng(8);
    const Signature sig(1, 1);
    double largest = 0.0;
    for (int s = 0; s < 200; ++s) {
      largest = std::max(largest, std::abs(sample_boost(sig, 2.0, rng).matrix(0, 1)));
    }
    CHECK(largest > std::sinh(1.5));
    CHECK(largest <= std::sinh(2.0) + 1e-12);
  }

  TEST_CASE("rho_cl restricted to vectors is g") {
    Rng rng(9);
    for (const Signature& sig : kTestSignatures) {
      const GroupElement g = sample_group_element(sig, rng);
      const CliffordRep rep = rho_cl_matrix(g);
      for (int i = 0; i < sig.dim(); ++i) {
        const Multivector gi = apply(rep, Multivector::blade(sig, BladeMask{1} << i));
        for (int j = 0; j < sig.dim(); ++j) {
          CHECK(gi[BladeMask{1} << j] == doctest::Approx(g.matrix(j, i)));
        }
      }
      CHECK(rep.matrix(0, 0) == doctest::Approx(1.0));
    }
  }

  TEST_CASE("rho_cl is a multiplicative homomorphism") {
    Rng rng(10);
    for (const Signature& sig : kTestSignatures) {
      const GroupElement g1 = sample_group_element(sig, rng), g2 = sample_group_element(sig, rng);
      const Eigen::MatrixXd lhs = rho_cl_matrix(compose(g2, g1)).matrix;
      const Eigen::MatrixXd rhs = rho_cl_matrix(g2).matrix * rho_cl_matrix(g1).matrix;
      CHECK((lhs - rhs).norm() <= 1e-9 * lhs.norm());
      const CliffordRep r = rho_cl_matrix(g1);
      const Multivector x = random_mv(sig, rng), y = random_mv(sig, rng);
      const Multivector a = apply(r, geometric_product(x, y));
      const Multivector b = geometric_product(apply(r, x), apply(r, y));
      CHECK(max_abs(a, b) <= 1e-9 * r.matrix.squaredNorm() * x.norm_l2() * y.norm_l2());
      // grade preservation
      for (BladeMask A = 0; A < sig.algebra_dim(); ++A) {
        for (BladeMask B = 0; B < sig.algebra_dim(); ++B) {
          if (blade_grade(A) == blade_grade(B)) continue;
          CHECK(std::abs(r.matrix(A, B)) <= 1e-12 * r.matrix.norm());
        }
      }
    }
  }

  TEST_CASE("rho_hom of the identity is the identity map") {
    const Signature sig(1, 1);
    Eigen::MatrixXd op = Eigen::MatrixXd::Random(8, 4);
    CHECK((rho_hom_apply(identity_element(sig), op, 1, 2) - op).norm() == doctest::Approx(0.0));
    CHECK_THROWS_AS(rho_hom_apply(identity_element(sig), op, 2, 2), Error);
  }

  TEST_CASE("group element json round trip") {
    Rng rng(12);
    const GroupElement g = sample_group_element(Signature(1, 2), rng);
    const GroupElement h = group_element_from_json(to_json(g));
    CHECK(h.sig == g.sig);
    CHECK((h.matrix - g.matrix).norm() == 0.0);
  }

  TEST_CASE("act applies the matrix") {
    const Signature sig(2, 0);
    const GroupElement r = givens(sig, 0, 1, std::numbers::pi / 2);
    const Eigen::VectorXd v = act(r, std::vector<double>{1.0, 0.0});
    CHECK(v(0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(v(1)) == doctest::Approx(1.0));
  }
}
