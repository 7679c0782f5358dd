#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csk/algebra.hpp"
#include "csk/cgenn.hpp"
#include "csk/group.hpp"

namespace csk {

// How the kernel head weights its Cayley table.
//   blade        grade-tied weights expanded to W = Lambda * w, contracted per blade
//   grade        same weights, evaluated as a sum over grade projections
//   fixed_one    all weights 1 (ablation), not trainable
//   unstructured dense random W without the Lambda mask (negative control only)
enum class HeadMode { blade, grade, fixed_one, unstructured };

HeadMode parse_head_mode(const std::string& text);
std::string to_string(HeadMode mode);

// Centered sampling grid; axis i spans [-1, 1] in (sizes[i]-1)/2 steps.
struct KernelGrid {
  Signature sig;
  std::vector<int> sizes;
  std::vector<double> coords;  // N x d, row-major over the grid

  std::size_t size() const { return coords.size() / sig.dim(); }
  std::span<const double> point(std::size_t n) const {
    return std::span<const double>(coords).subspan(n * sig.dim(), sig.dim());
  }
};

KernelGrid make_kernel_grid(const Signature& sig, std::vector<int> sizes);

struct ShellParams {
  double sigma = 0.5;
  std::vector<double> mask_sigma;  // [k][i][o]
};

// Grade-level head weights w[o][i][k_out][k_kernel][k_in].
struct HeadWeights {
  int c_in = 0;
  int c_out = 0;
  int grades = 0;
  std::vector<double> w;

  std::size_t index(int o, int i, int kc, int ka, int kb) const {
    return ((((static_cast<std::size_t>(o) * c_in + i) * grades + kc) * grades + ka) * grades) + kb;
  }
  double at(int o, int i, int kc, int ka, int kb) const { return w[index(o, i, kc, ka, kb)]; }
};

// Blade-level weighted Cayley table W[o][i][C][A][B].
struct WeightedCayley {
  Signature sig;
  int c_in = 0;
  int c_out = 0;
  std::vector<double> W;

  double at(int o, int i, BladeMask c, BladeMask a, BladeMask b) const {
    const std::size_t n = sig.algebra_dim();
    return W[(((static_cast<std::size_t>(o) * c_in + i) * n + c) * n + a) * n + b];
  }
};

struct KernelConfig {
  Signature sig{2, 0};
  std::vector<int> grid{5, 5};
  int c_in = 1;
  int c_out = 1;
  int depth = 2;
  int width = 8;
  HeadMode head = HeadMode::blade;
  bool mask = true;
  std::uint64_t seed = 0;
};

void validate(const KernelConfig& config);

struct KernelParams {
  KernelConfig config;
  KernelNetParams net;
  ShellParams shell;
  HeadWeights head;
  std::vector<double> unstructured;  // only for HeadMode::unstructured
};

KernelParams init_kernel(const KernelConfig& config);

// sgn(eta(v,v)) exp(-|eta(v,v)| / (2 sigma^2)), with sgn(0) = 0.
double scalar_shell(const Signature& sig, std::span<const double> v, double sigma);

WeightedCayley expand_head(const KernelParams& params);

// Kernel network output at v, masked per grade; c_out x c_in multivectors, o-major.
std::vector<Multivector> kernel_matrix_at(const KernelParams& params, std::span<const double> v);

// Operator (c_out*2^d) x (c_in*2^d) of k under the blade-level head.
Eigen::MatrixXd head_operator(const WeightedCayley& W, std::span<const Multivector> k);
// Same operator through the grade-projection route.
Eigen::MatrixXd head_operator_grades(const HeadWeights& w, std::span<const Multivector> k);

// H(k)[f] through the blade-level contraction.
std::vector<Multivector> kernel_head_apply(const WeightedCayley& W,
                                           std::span<const Multivector> k,
                                           std::span<const Multivector> f);
// H(k)[f]_i^{(k)} = sum_{j,m,n} w^k_{mn,ij} (k_ij^{(m)} f_j^{(n)})^{(k)}
std::vector<Multivector> kernel_head_apply_grades(const HeadWeights& w,
                                                  std::span<const Multivector> k,
                                                  std::span<const Multivector> f);

// Full pipeline (shell -> network -> mask -> head) at an arbitrary point.
Eigen::MatrixXd evaluate_kernel_at(const KernelParams& params, std::span<const double> v);

// Dense operator field of shape (c_out*2^d, c_in*2^d, X_1, ..., X_d).
struct SteerableKernel {
  Signature sig{2, 0};
  int c_in = 0;
  int c_out = 0;
  std::vector<int> sizes;
  std::vector<double> data;
  std::string provenance;

  std::size_t points() const;
  std::size_t rows() const { return c_out * sig.algebra_dim(); }
  std::size_t cols() const { return c_in * sig.algebra_dim(); }
  double& at(std::size_t row, std::size_t col, std::size_t n) {
    return data[(row * cols() + col) * points() + n];
  }
  double at(std::size_t row, std::size_t col, std::size_t n) const {
    return data[(row * cols() + col) * points() + n];
  }
  Eigen::MatrixXd block(std::size_t n) const;
  void set_block(std::size_t n, const Eigen::MatrixXd& op);
};

SteerableKernel make_zero_kernel(const Signature& sig, int c_in, int c_out,
                                 std::vector<int> sizes);
// Parallel over grid points; result is byte-identical to the serial version.
SteerableKernel generate_kernel(const KernelParams& params);
SteerableKernel generate_kernel_serial(const KernelParams& params);

std::vector<ParamRef> param_refs(KernelParams& params, const std::string& prefix = "");

nlohmann::json kernel_manifest(const KernelParams& params);
KernelParams kernel_from_manifest(const nlohmann::json& j);
nlohmann::json to_json(const KernelConfig& config);
KernelConfig kernel_config_from_json(const nlohmann::json& j);

}  // namespace csk
