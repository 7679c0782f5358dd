#include <doctest.h>

#include "csk/kernel.hpp"
#include "csk/verify.hpp"
#include "helpers.hpp"

using namespace csk;
using csk::testing::kTestSignatures;

namespace {

KernelConfig small_config(const Signature& sig, HeadMode head = HeadMode::blade) {
  KernelConfig c;
  c.sig = sig;
  c.grid = std::vector<int>(sig.dim(), sig.dim() == 2 ? 5 : 3);
  c.c_in = 2;
  c.c_out = 3;
  c.depth = 3;
  c.width = 4;
  c.head = head;
  c.seed = 21;
  return c;
}

}  // namespace

TEST_SUITE("kernel") {
  TEST_CASE("sampling grid is centered on [-1, 1]") {
    const KernelGrid g = make_kernel_grid(Signature(2, 0), {5, 3});
    CHECK(g.size() == 15);
    CHECK(g.point(0)[0] == -1.0);
    CHECK(g.point(0)[1] == -1.0);
    CHECK(g.point(7)[0] == 0.0);
    CHECK(g.point(7)[1] == 0.0);
    CHECK(g.point(14)[0] == 1.0);
    CHECK(g.point(1)[0] == -1.0);
    CHECK(g.point(1)[1] == 0.0);
    CHECK(g.point(3)[0] == -0.5);
    CHECK_THROWS_AS(make_kernel_grid(Signature(2, 0), {4, 5}), Error);
    CHECK_THROWS_AS(make_kernel_grid(Signature(2, 0), {5}), Error);
  }

  TEST_CASE("scalar orbital shell") {
    const Signature sig(1, 1);
    CHECK(scalar_shell(sig, std::vector<double>{0.0, 0.0}, 0.5) == 0.0);
    CHECK(scalar_shell(sig, std::vector<double>{0.7, 0.7}, 0.5) == 0.0);  // light cone
    CHECK(scalar_shell(sig, std::vector<double>{1.0, 0.0}, 0.5) == doctest::Approx(std::exp(-2.0)));
    CHECK(scalar_shell(sig, std::vector<double>{0.0, 1.0}, 0.5) == doctest::Approx(-std::exp(-2.0)));
  }

  TEST_CASE("head modes parse") {
    CHECK(parse_head_mode("blade") == HeadMode::blade);
    CHECK(parse_head_mode("grade") == HeadMode::grade);
    CHECK(parse_head_mode("fixed_one") == HeadMode::fixed_one);
    CHECK(to_string(HeadMode::fixed_one) == "fixed_one");
    CHECK_THROWS_AS(parse_head_mode("nope"), Error);
  }

  TEST_CASE("expanded head is the Cayley table masked by grade weights") {
    const KernelParams p = init_kernel(small_config(Signature(1, 2)));
    const WeightedCayley W = expand_head(p);
    const auto table = cayley_table(p.config.sig);
    const BladeMask n = static_cast<BladeMask>(p.config.sig.algebra_dim());
    for (int o = 0; o < 3; ++o) {
      for (int i = 0; i < 2; ++i) {
        for (BladeMask c = 0; c < n; ++c) {
          for (BladeMask a = 0; a < n; ++a) {
            for (BladeMask b = 0; b < n; ++b) {
              const double expect =
                  p.head.at(o, i, blade_grade(c), blade_grade(a), blade_grade(b)) * (*table)(c, a, b);
              REQUIRE(W.at(o, i, c, a, b) == expect);
            }
          }
        }
      }
    }
  }

  TEST_CASE("blade and grade head routes agree") {
    for (const Signature& sig : kTestSignatures) {
      KernelParams pb = init_kernel(small_config(sig, HeadMode::blade));
      KernelParams pg = pb;
      pg.config.head = HeadMode::grade;
      const SteerableKernel kb = generate_kernel(pb), kg = generate_kernel(pg);
      double m = 0.0, s = 0.0;
      for (std::size_t i = 0; i < kb.data.size(); ++i) {
        m = std::max(m, std::abs(kb.data[i] - kg.data[i]));
        s = std::max(s, std::abs(kb.data[i]));
      }
      CHECK(s > 0.0);
      CHECK(m <= 1e-14 * s);
    }
  }

  TEST_CASE("fixed_one head has unit weights") {
    const KernelParams p = init_kernel(small_config(Signature(2, 0), HeadMode::fixed_one));
    for (double w : p.head.w) CHECK(w == 1.0);
  }

  TEST_CASE("parallel generation is bitwise equal to serial") {
    for (const Signature& sig : kTestSignatures) {
      const KernelParams p = init_kernel(small_config(sig));
      CHECK(generate_kernel(p).data == generate_kernel_serial(p).data);
    }
  }

  TEST_CASE("grid blocks equal pointwise evaluation, origin block is zero") {
    const KernelParams p = init_kernel(small_config(Signature(2, 0)));
    const SteerableKernel k = generate_kernel(p);
    const KernelGrid grid = make_kernel_grid(p.config.sig, p.config.grid);
    CHECK(k.rows() == 12);
    CHECK(k.cols() == 8);
    for (std::size_t n = 0; n < grid.size(); ++n) {
      CHECK((k.block(n) - evaluate_kernel_at(p, grid.point(n))).norm() == 0.0);
    }
    CHECK(k.block(12).norm() == 0.0);
  }

  TEST_CASE("sampled kernel is steerable under grid-preserving elements") {
    for (const Signature& sig : kTestSignatures) {
      const KernelParams p = init_kernel(small_config(sig));
      const SteerableKernel k = generate_kernel(p);
      const KernelGrid grid = make_kernel_grid(sig, p.config.grid);
      for (const GroupElement& g : grid_linear_parts(sig)) {
        for (std::size_t n = 0; n < grid.size(); ++n) {
          const Eigen::VectorXd gv = act(g, grid.point(n));
          // locate gv on the grid
          std::size_t m = 0;
          for (int a = 0; a < sig.dim(); ++a) {
            const int half = (p.config.grid[a] - 1) / 2;
            m = m * p.config.grid[a] + static_cast<std::size_t>(std::lround(gv(a) * half + half));
          }
          const Eigen::MatrixXd expect = rho_hom_apply(g, k.block(n), 2, 3);
          REQUIRE((k.block(m) - expect).norm() <= 1e-12 * std::max(1.0, expect.norm()));
        }
      }
    }
  }

  TEST_CASE("initialization is seeded") {
    const KernelConfig c = small_config(Signature(1, 1));
    CHECK(generate_kernel(init_kernel(c)).data == generate_kernel(init_kernel(c)).data);
    KernelConfig c2 = c;
    c2.seed = 22;
    CHECK(generate_kernel(init_kernel(c2)).data != generate_kernel(init_kernel(c)).data);
  }

  TEST_CASE("manifest round trip reproduces the kernel") {
    KernelParams p = init_kernel(small_config(Signature(3, 0)));
    p.shell.sigma = 0.77;
    const KernelParams q = kernel_from_manifest(kernel_manifest(p));
    CHECK(q.shell.sigma == 0.77);
    CHECK(generate_kernel(q).data == generate_kernel(p).data);
    auto bad = kernel_manifest(p);
    bad["version"] = 9;
    CHECK_THROWS_AS(kernel_from_manifest(bad), Error);
  }

  TEST_CASE("config validation") {
    KernelConfig c = small_config(Signature(2, 0));
    c.c_in = 0;
    CHECK_THROWS_AS(validate(c), Error);
    c = small_config(Signature(2, 0));
    c.grid = {5, 5, 5};
    CHECK_THROWS_AS(validate(c), Error);
    c = small_config(Signature(2, 0));
    c.depth = 0;
    CHECK_THROWS_AS(validate(c), Error);
    const KernelConfig back = kernel_config_from_json(to_json(small_config(Signature(1, 2))));
    CHECK(back.sig == Signature(1, 2));
    CHECK(back.c_out == 3);
    CHECK(back.seed == 21);
  }

  TEST_CASE("parameter views cover every tensor") {
    KernelParams p = init_kernel(small_config(Signature(2, 0)));
    const auto refs = param_refs(p, "k.");
    bool head = false, sigma = false, mask = false;
    for (const auto& r : refs) {
      head = head || r.name == "k.head.w";
      sigma = sigma || r.name == "k.shell.sigma";
      mask = mask || r.name == "k.shell.mask_sigma";
    }
    CHECK(head);
    CHECK(sigma);
    CHECK(mask);
    KernelParams f = init_kernel(small_config(Signature(2, 0), HeadMode::fixed_one));
    for (const auto& r : param_refs(f, "")) {
      if (r.name == "head.w") CHECK_FALSE(r.trainable);
    }
  }
}
