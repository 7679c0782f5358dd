#include <doctest.h>

#include <numbers>

#include "csk/cgenn.hpp"
#include "helpers.hpp"

using namespace csk;
using csk::testing::kTestSignatures;
using csk::testing::max_abs;
using csk::testing::random_mv;

namespace {

std::vector<Multivector> transform(const CliffordRep& r, const std::vector<Multivector>& xs) {
  std::vector<Multivector> out;
  for (const auto& x : xs) out.push_back(apply(r, x));
  return out;
}

double worst(const std::vector<Multivector>& a, const std::vector<Multivector>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs(a[i], b[i]));
  return m;
}

}  // namespace

TEST_SUITE("cgenn") {
  TEST_CASE("normal cdf and pdf") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
  }

  TEST_CASE("linear layer mixes channels grade-wise") {
    const Signature sig(2, 0);
    LinearLayerParams p{2, 1, 3, std::vector<double>(6, 0.0)};
    p.at(0, 0, 0) = 2.0;  // grade 0 from channel 0
    p.at(1, 0, 1) = 3.0;  // grade 1 from channel 1
    Multivector a(sig), b(sig);
    a[0] = 1.0;
    a[1] = 5.0;
    b[0] = 7.0;
    b[2] = 1.0;
    b[3] = 4.0;
    const auto out = linear_layer(p, std::vector<Multivector>{a, b});
    REQUIRE(out.size() == 1);
    CHECK(out[0][0] == 2.0);
    CHECK(out[0][1] == 0.0);
    CHECK(out[0][2] == 3.0);
    CHECK(out[0][3] == 0.0);
  }

  TEST_CASE("geometric product layer with all-ones weights is the full product") {
    Rng rng(1);
    const Signature sig(1, 2);
    const int g = sig.grades();
    const std::vector<double> w(g * g * g, 1.0);
    const Multivector x = random_mv(sig, rng), y = random_mv(sig, rng);
    CHECK(max_abs(geometric_product_layer(w, x, y), geometric_product(x, y)) < 1e-12);
  }

  TEST_CASE("activation scales by Phi of the scalar part") {
    const Signature sig(2, 0);
    Multivector x(sig);
    x[0] = 0.3;
    x[3] = -2.0;
    const Multivector y = mv_activation(x);
    CHECK(y[0] == doctest::Approx(0.3 * normal_cdf(0.3)));
    CHECK(y[3] == doctest::Approx(-2.0 * normal_cdf(0.3)));
  }

  TEST_CASE("layers and full network are O(p,q)-equivariant") {
    Rng rng(2);
    for (const Signature& sig : kTestSignatures) {
      CAPTURE(sig.str());
      KernelNetConfig cfg{sig, 6, 3, 5};
      const KernelNetParams params = init_kernel_network(cfg, rng);
      for (int s = 0; s < 5; ++s) {
        const GroupElement g = sample_group_element(sig, rng);
        const CliffordRep r = rho_cl_matrix(g);
        const double scale = r.matrix.squaredNorm();
        std::vector<Multivector> xs{random_mv(sig, rng), random_mv(sig, rng)};
        // linear
        LinearLayerParams lp{2, 3, sig.grades(), {}};
        std::normal_distribution<double> n(0.0, 1.0);
        for (int i = 0; i < 3 * 2 * sig.grades(); ++i) lp.w.push_back(n(rng));
        CHECK(worst(linear_layer(lp, transform(r, xs)), transform(r, linear_layer(lp, xs))) <
              1e-9 * scale);
        // product
        const auto& gw = params.products[0].channel(0);
        CHECK(max_abs(geometric_product_layer(gw, apply(r, xs[0]), apply(r, xs[1])),
                      apply(r, geometric_product_layer(gw, xs[0], xs[1]))) < 1e-9 * scale * scale);
        // activation
        CHECK(max_abs(mv_activation(apply(r, xs[0])), apply(r, mv_activation(xs[0]))) < 1e-9 * scale);
        // network
        Multivector x = cl_embed(0.4, std::vector<double>(sig.dim(), 0.3), sig);
        const auto a = kernel_network_forward(params, apply(r, x));
        const auto b = transform(r, kernel_network_forward(params, x));
        double norm = 0.0;
        for (const auto& m : b) norm = std::max(norm, m.norm_l2());
        CHECK(worst(a, b) < 1e-9 * std::max(1.0, norm) * scale);
      }
    }
  }

  TEST_CASE("network shape and parameter views") {
    Rng rng(3);
    KernelNetConfig cfg{Signature(2, 0), 6, 3, 4};
    KernelNetParams params = init_kernel_network(cfg, rng);
    CHECK(params.linear.size() == 3);
    CHECK(params.products.size() == 2);
    const auto out = kernel_network_forward(params, Multivector::scalar(Signature(2, 0), 1.0));
    CHECK(out.size() == 6);
    const auto refs = param_refs(params, "net.");
    std::size_t total = 0;
    for (const auto& r : refs) {
      std::size_t n = 1;
      for (int s : r.shape) n *= s;
      CHECK(n == r.data.size());
      CHECK(r.name.starts_with("net."));
      total += n;
    }
    CHECK(total == 3 * 1 * 4 + 3 * 4 * 4 + 3 * 4 * 6 + 2 * 4 * 27);
    KernelNetConfig bad{Signature(2, 0), 0, 2, 4};
    CHECK_THROWS_AS(validate(bad), Error);
    CHECK_THROWS_AS(kernel_network_forward(params, Multivector::scalar(Signature(3, 0), 1.0)), Error);
  }
}
