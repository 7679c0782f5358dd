#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csk/algebra.hpp"
#include "csk/group.hpp"

namespace csk {

// Named view of one parameter tensor; used for serialization, optimizers and
// gradient checks.
struct ParamRef {
  std::string name;
  std::vector<int> shape;
  std::span<double> data;
  bool trainable = true;
};

// w[k][m][n]: grade k, output channel m, input channel n.
struct LinearLayerParams {
  int c_in = 0;
  int c_out = 0;
  int grades = 0;
  std::vector<double> w;

  double& at(int k, int m, int n) { return w[(k * c_out + m) * c_in + n]; }
  double at(int k, int m, int n) const { return w[(k * c_out + m) * c_in + n]; }
};

// Per-channel grade weights w[c][k][m][n] of the self product P(h, h).
struct GeomLayerParams {
  int channels = 0;
  int grades = 0;
  std::vector<double> w;

  std::span<const double> channel(int c) const {
    const std::size_t g3 = static_cast<std::size_t>(grades) * grades * grades;
    return std::span<const double>(w).subspan(c * g3, g3);
  }
};

struct KernelNetConfig {
  Signature sig{2, 0};
  int out_channels = 1;  // c_out * c_in of the convolution
  int depth = 2;         // number of linear layers, the last one emits out_channels
  int width = 8;
};

struct KernelNetParams {
  KernelNetConfig config;
  std::vector<LinearLayerParams> linear;    // depth entries
  std::vector<GeomLayerParams> products;    // depth - 1 entries
};

KernelNetParams init_kernel_network(const KernelNetConfig& config, Rng& rng);
void validate(const KernelNetConfig& config);

std::vector<Multivector> linear_layer(const LinearLayerParams& params,
                                      std::span<const Multivector> xs);
// P^{(k)}(x1, x2) = sum_{m,n} w[k][m][n] (x1^{(m)} x2^{(n)})^{(k)}, w of size (d+1)^3.
Multivector geometric_product_layer(std::span<const double> w, const Multivector& x1,
                                    const Multivector& x2);
// x * Phi(x^{(0)})
Multivector mv_activation(const Multivector& x);

std::vector<Multivector> kernel_network_forward(const KernelNetParams& params,
                                                const Multivector& x);

std::vector<ParamRef> param_refs(KernelNetParams& params, const std::string& prefix);

double normal_cdf(double x);
double normal_pdf(double x);

}  // namespace csk
