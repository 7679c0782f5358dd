#include "csk/cgenn.hpp"

#include <cmath>
#include <numbers>

namespace csk {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

void validate(const KernelNetConfig& config) {
  if (config.depth < 1) throw Error("kernel network depth must be >= 1");
  if (config.width < 1) throw Error("kernel network width must be >= 1");
  if (config.out_channels < 1) throw Error("kernel network needs at least one output");
}

KernelNetParams init_kernel_network(const KernelNetConfig& config, Rng& rng) {
  validate(config);
  const int grades = config.sig.grades();
  KernelNetParams params{config, {}, {}};
  int c_in = 1;
  for (int layer = 0; layer < config.depth; ++layer) {
    const bool last = layer + 1 == config.depth;
    const int c_out = last ? config.out_channels : config.width;

    LinearLayerParams lin{c_in, c_out, grades, {}};
    std::normal_distribution<double> lin_init(0.0, 1.0 / std::sqrt(static_cast<double>(c_in)));
    lin.w.resize(static_cast<std::size_t>(grades) * c_out * c_in);
    for (double& w : lin.w) w = lin_init(rng);
    params.linear.push_back(std::move(lin));

    if (!last) {
      GeomLayerParams gp{c_out, grades, {}};
      std::normal_distribution<double> gp_init(0.0,
                                               1.0 / std::sqrt(static_cast<double>(c_out * grades)));
      gp.w.resize(static_cast<std::size_t>(c_out) * grades * grades * grades);
      for (double& w : gp.w) w = gp_init(rng);
      params.products.push_back(std::move(gp));
    }
    c_in = c_out;
  }
  return params;
}

std::vector<Multivector> linear_layer(const LinearLayerParams& params,
                                      std::span<const Multivector> xs) {
  if (static_cast<int>(xs.size()) != params.c_in) {
    throw Error("linear layer expects " + std::to_string(params.c_in) + " inputs, got " +
                std::to_string(xs.size()));
  }
  if (xs.empty()) return {};
  const Signature& sig = xs[0].signature();
  if (sig.grades() != params.grades) throw Error("linear layer grade count mismatch");
  const auto grades = blade_grades(sig);

  std::vector<Multivector> out(params.c_out, Multivector(sig));
  for (int m = 0; m < params.c_out; ++m) {
    for (int n = 0; n < params.c_in; ++n) {
      for (BladeMask a = 0; a < sig.algebra_dim(); ++a) {
        out[m][a] += params.at(grades[a], m, n) * xs[n][a];
      }
    }
  }
  return out;
}

Multivector geometric_product_layer(std::span<const double> w, const Multivector& x1,
                                    const Multivector& x2) {
  const Signature& sig = x1.signature();
  if (!(sig == x2.signature())) throw Error("signature mismatch in geometric product layer");
  const int g = sig.grades();
  if (w.size() != static_cast<std::size_t>(g * g * g)) {
    throw Error("geometric product layer needs (d+1)^3 weights");
  }
  const auto table = cayley_table(sig);
  const std::size_t n = sig.algebra_dim();
  Multivector out(sig);
  for (BladeMask a = 0; a < n; ++a) {
    if (x1[a] == 0.0) continue;
    const int ga = blade_grade(a);
    for (BladeMask b = 0; b < n; ++b) {
      const BladeMask c = a ^ b;
      const double weight = w[(blade_grade(c) * g + ga) * g + blade_grade(b)];
      out[c] += weight * table->product_sign(a, b) * x1[a] * x2[b];
    }
  }
  return out;
}

Multivector mv_activation(const Multivector& x) { return x * normal_cdf(x[0]); }

std::vector<Multivector> kernel_network_forward(const KernelNetParams& params,
                                                const Multivector& x) {
  const auto& config = params.config;
  if (static_cast<int>(params.linear.size()) != config.depth ||
      static_cast<int>(params.products.size()) != config.depth - 1) {
    throw Error("kernel network parameters do not match config depth");
  }
  if (!(x.signature() == config.sig)) throw Error("kernel network input has wrong signature");

  std::vector<Multivector> h{x};
  for (int layer = 0; layer < config.depth; ++layer) {
    h = linear_layer(params.linear[layer], h);
    if (layer + 1 == config.depth) break;
    const auto& gp = params.products[layer];
    for (int c = 0; c < static_cast<int>(h.size()); ++c) {
      h[c] = mv_activation(h[c] + geometric_product_layer(gp.channel(c), h[c], h[c]));
    }
  }
  return h;
}

std::vector<ParamRef> param_refs(KernelNetParams& params, const std::string& prefix) {
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < params.linear.size(); ++i) {
    auto& lin = params.linear[i];
    refs.push_back({prefix + std::to_string(i) + ".linear.w", {lin.grades, lin.c_out, lin.c_in},
                    lin.w});
    if (i < params.products.size()) {
      auto& gp = params.products[i];
      refs.push_back({prefix + std::to_string(i) + ".product.w",
                      {gp.channels, gp.grades, gp.grades, gp.grades},
                      gp.w});
    }
  }
  return refs;
}

}  // namespace csk
