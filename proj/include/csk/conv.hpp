#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "csk/algebra.hpp"
#include "csk/kernel.hpp"

namespace csk {

enum class Padding { zero, circular };

Padding parse_padding(const std::string& text);
std::string to_string(Padding padding);

// Grid of c multivectors per point, stored as (c, Y_1, ..., Y_d, 2^d).
struct MultivectorField {
  Signature sig{2, 0};
  int channels = 0;
  std::vector<int> sizes;
  std::vector<double> data;

  std::size_t points() const;
  std::size_t blades() const { return sig.algebra_dim(); }
  double& at(int c, std::size_t n, BladeMask a) { return data[(c * points() + n) * blades() + a]; }
  double at(int c, std::size_t n, BladeMask a) const {
    return data[(c * points() + n) * blades() + a];
  }
};

MultivectorField make_field(const Signature& sig, int channels, std::vector<int> sizes);
double l2_norm(const MultivectorField& f);
MultivectorField operator+(const MultivectorField& a, const MultivectorField& b);
MultivectorField operator-(const MultivectorField& a, const MultivectorField& b);
MultivectorField operator*(double s, const MultivectorField& a);

// Source index of every (output point, kernel tap) pair of a stride-1 "same"
// correlation; -1 marks a zero-padded tap. Layout [point][tap].
std::vector<std::ptrdiff_t> correlation_taps(std::span<const int> field, std::span<const int> kernel,
                                             Padding padding);

// out[o][u] = sum_i sum_t w[o][i][t] in[i][src(u, t)]
// in: (c_in, P), w: (c_out, c_in, T), out: (c_out, P).
void correlate(std::span<const double> in, std::span<const double> w, std::span<double> out,
               int c_in, int c_out, std::span<const std::ptrdiff_t> taps, std::size_t points);
void correlate_serial(std::span<const double> in, std::span<const double> w,
                      std::span<double> out, int c_in, int c_out,
                      std::span<const std::ptrdiff_t> taps, std::size_t points);

// Kernel with every spatial axis reversed.
SteerableKernel flip(const SteerableKernel& k);

// L(f)(u) = sum_v K(v) f(u - v), stride 1, output on the input grid.
MultivectorField conv_forward(const MultivectorField& f, const SteerableKernel& k,
                              Padding padding = Padding::circular);
MultivectorField conv_forward_serial(const MultivectorField& f, const SteerableKernel& k,
                                     Padding padding = Padding::circular);

// (c, Y..., 2^d) <-> (c*2^d, Y...)
std::vector<double> to_channel_major(const MultivectorField& f);
MultivectorField from_channel_major(const Signature& sig, int channels,
                                    const std::vector<int>& sizes, std::span<const double> data);

// Minimal model: conv / pointwise activation / residual wrapper.
struct ConvLayer {
  SteerableKernel kernel;
  std::vector<double> bias;  // per output channel on the scalar grade; empty = none
  Padding padding = Padding::circular;
};
struct ActivationLayer {};
struct Layer;
struct ResidualBlock {
  std::vector<Layer> body;
};
struct Layer {
  std::variant<ConvLayer, ActivationLayer, ResidualBlock> op;
};

MultivectorField apply_activation(const MultivectorField& f);
MultivectorField model_forward(std::span<const Layer> layers, const MultivectorField& f);

}  // namespace csk
