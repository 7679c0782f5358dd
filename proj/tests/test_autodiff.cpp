#include <doctest.h>

#include <functional>
#include <random>

#include "csk/autodiff.hpp"
#include "csk/conv.hpp"
#include "csk/verify.hpp"

using namespace csk;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double offset = 0.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = n(rng) + offset;
  return t;
}

using Graph = std::function<Var(Tape&, std::vector<Var>&)>;

double eval(const Graph& g, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  return tape.value(g(tape, vars)).data[0];
}

// Max deviation between reverse-mode and 6th-order central differences,
// relative for entries above 1 and absolute below.
double grad_error(const Graph& g, std::vector<Tensor> inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.parameter(t));
  tape.backward(g(tape, vars));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = tape.grad(vars[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k].data[i];
      const double fd = central_difference(
          [&](double x) {
            inputs[k].data[i] = x0 + x;
            const double v = eval(g, inputs);
            inputs[k].data[i] = x0;
            return v;
          },
          1e-3, 6);
      const double scale = std::max({1.0, std::abs(fd), std::abs(analytic.data[i])});
      worst = std::max(worst, std::abs(fd - analytic.data[i]) / scale);
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("einsum forward: matmul, transpose, broadcast, contraction") {
    const std::vector<double> a{1, 2, 3, 4, 5, 6};  // 2x3
    const std::vector<double> b{1, 0, 2, 1, 0, 3};  // 3x2
    const auto mm = ad::einsum_kernel("ij", a, "jk", b, "ik", {{'i', 2}, {'j', 3}, {'k', 2}});
    CHECK(mm == std::vector<double>{5, 11, 14, 23});
    const auto tr = ad::einsum_kernel("ij", a, "", {1.0}, "ji", {{'i', 2}, {'j', 3}});
    CHECK(tr == std::vector<double>{1, 4, 2, 5, 3, 6});
    const auto bc = ad::einsum_kernel("i", {1.0, 2.0}, "", {1.0}, "ik", {{'i', 2}, {'k', 3}});
    CHECK(bc == std::vector<double>{1, 1, 1, 2, 2, 2});
    const auto full = ad::einsum_kernel("ij", a, "ij", a, "", {{'i', 2}, {'j', 3}});
    CHECK(full == std::vector<double>{91});
  }

  TEST_CASE("einsum spec validation") {
    Tape t;
    const Var a = t.constant(Tensor({2, 3}, std::vector<double>(6, 1.0)));
    const Var b = t.constant(Tensor({3}, std::vector<double>(3, 1.0)));
    CHECK_THROWS(t.einsum("ij,j->ik", a, b));   // unbound output label
    CHECK_THROWS(t.einsum("ijk,j->i", a, b));   // rank mismatch
    CHECK_THROWS(t.einsum("ij,i->i", a, b));    // extent mismatch
    CHECK_THROWS(t.einsum("ii,j->i", a, b));    // repeated label
    CHECK_NOTHROW(t.einsum("ij,j->i", a, b));
    CHECK_THROWS(Tensor({2, 2}, std::vector<double>(3, 0.0)));
  }

  TEST_CASE("elementwise op gradients") {
    std::mt19937_64 rng(1);
    const Tensor x = random_tensor({2, 3}, rng), y = random_tensor({2, 3}, rng);
    const Tensor pos = random_tensor({2, 3}, rng, 3.0);
    CHECK(grad_error([](Tape& t, std::vector<Var>& v) { return t.sum(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1]))); },
                     {x, y}) < 1e-8);
    CHECK(grad_error([](Tape& t, std::vector<Var>& v) { return t.mean(t.exp(t.scale(v[0], 0.5))); }, {x}) < 1e-8);
    CHECK(grad_error([](Tape& t, std::vector<Var>& v) { return t.sum(t.mul(t.abs(v[0]), v[1])); }, {x, y}) < 1e-8);
    CHECK(grad_error([](Tape& t, std::vector<Var>& v) { return t.sum(t.normal_cdf(v[0])); }, {x}) < 1e-8);
    CHECK(grad_error([](Tape& t, std::vector<Var>& v) { return t.sum(t.reciprocal(v[0])); }, {pos}) < 1e-8);
    CHECK(grad_error([](Tape& t, std::vector<Var>& v) { return t.mean(t.square(v[0])); }, {x}) < 1e-8);
    CHECK(grad_error([](Tape& t, std::vector<Var>& v) { return t.sum(t.mul(t.sign(v[0]), v[1])); }, {x, y}) < 1e-8);
  }

  TEST_CASE("einsum, reshape and gather gradients") {
    std::mt19937_64 rng(2);
    const Tensor a = random_tensor({2, 3, 4}, rng), b = random_tensor({4, 3, 5}, rng);
    CHECK(grad_error(
              [](Tape& t, std::vector<Var>& v) {
                const Var c = t.einsum("ijk,kjl->li", v[0], v[1]);
                return t.sum(t.square(c));
              },
              {a, b}) < 1e-8);
    auto index = std::make_shared<const std::vector<std::size_t>>(std::vector<std::size_t>{5, 4, 3, 2, 1, 0, 0});
    const Tensor x = random_tensor({2, 3}, rng);
    CHECK(grad_error(
              [&](Tape& t, std::vector<Var>& v) {
                const Var r = t.reshape(v[0], {3, 2});
                const Var g = t.gather(r, index, {7});
                return t.sum(t.square(g));
              },
              {x}) < 1e-8);
  }

  TEST_CASE("correlate gradients, circular and zero padded") {
    std::mt19937_64 rng(3);
    const std::vector<int> field{5, 4}, kernel{3, 3};
    for (Padding p : {Padding::circular, Padding::zero}) {
      auto taps = std::make_shared<const std::vector<std::ptrdiff_t>>(correlation_taps(field, kernel, p));
      const Tensor in = random_tensor({2, 3, 20}, rng), w = random_tensor({2, 3, 9}, rng);
      CHECK(grad_error(
                [&](Tape& t, std::vector<Var>& v) { return t.mean(t.square(t.correlate(v[0], v[1], taps))); },
                {in, w}) < 1e-8);
    }
  }

  TEST_CASE("correlate forward agrees with the conv primitive") {
    std::mt19937_64 rng(4);
    const std::vector<int> field{6}, kernel{3};
    const auto taps = correlation_taps(field, kernel, Padding::circular);
    const Tensor in = random_tensor({1, 2, 6}, rng), w = random_tensor({3, 2, 3}, rng);
    std::vector<double> out(18);
    correlate(in.data, w.data, out, 2, 3, taps, 6);
    Tape t;
    const Var y = t.correlate(t.constant(in), t.constant(w),
                              std::make_shared<const std::vector<std::ptrdiff_t>>(taps));
    CHECK(t.value(y).data == out);
  }

  TEST_CASE("sign has zero gradient, abs(0) has zero gradient") {
    Tape t;
    const Var x = t.parameter(Tensor({3}, {-1.0, 0.0, 2.0}));
    t.backward(t.sum(t.add(t.sign(x), t.abs(x))));
    CHECK(t.grad(x).data == std::vector<double>{-1.0, 0.0, 1.0});
  }

  TEST_CASE("tape is single use and rejects misuse") {
    Tape t;
    const Var x = t.parameter(Tensor({2}, {1.0, 2.0}));
    const Var c = t.constant(Tensor({2}, {3.0, 4.0}));
    const Var y = t.mul(x, c);
    CHECK_THROWS(t.backward(y));  // not a scalar
    CHECK_THROWS(t.grad(x));      // backward not run
    const Var loss = t.sum(y);
    t.backward(loss);
    CHECK(t.consumed());
    CHECK(t.grad(x).data == std::vector<double>{3.0, 4.0});
    CHECK_THROWS(t.grad(c));
    CHECK_THROWS(t.backward(loss));
    CHECK_THROWS(t.add(x, x));
    CHECK(ad::to_string(ad::Op::einsum) == "einsum");
  }

  TEST_CASE("shared subexpressions accumulate gradients") {
    Tape t;
    const Var x = t.parameter(Tensor::scalar(3.0));
    const Var y = t.mul(x, x);
    t.backward(t.add(t.mul(y, x), y));  // x^3 + x^2
    CHECK(t.grad(x).data[0] == doctest::Approx(27.0 + 6.0));
  }
}
