#pragma once

#include <bit>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace csk {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Metric signature (p, q) of R^{p,q}: the first p axes square to +1, the last q to -1.
struct Signature {
  int p = 0;
  int q = 0;

  Signature() = default;
  Signature(int p_, int q_);

  int dim() const { return p + q; }
  std::size_t algebra_dim() const { return std::size_t{1} << dim(); }
  int grades() const { return dim() + 1; }

  // eta(e_i, e_i), 0-indexed axis.
  double metric(int axis) const { return axis < p ? 1.0 : -1.0; }
  std::vector<double> metric_diag() const;
  double quadratic_form(std::span<const double> v) const;
  double inner(std::span<const double> u, std::span<const double> v) const;

  std::string str() const;
  bool operator==(const Signature&) const = default;
};

// Parse "p,q".
Signature parse_signature(const std::string& text);

// Blade e_A as a bitmask: bit i set <=> e_{i+1} in A.
using BladeMask = std::uint32_t;

inline int blade_grade(BladeMask a) { return std::popcount(a); }

// "1", "e1", "e12", ... with 1-based axis labels.
std::string blade_name(BladeMask a);
std::vector<BladeMask> blades_of_grade(const Signature& sig, int k);
// grade of every blade in ascending mask order
std::vector<int> blade_grades(const Signature& sig);

// Structure constants of the geometric product: e_A e_B = lambda(A, B) e_{A xor B}.
class CayleyTable {
public:
  explicit CayleyTable(const Signature& sig);

  const Signature& signature() const { return sig_; }
  std::size_t size() const { return n_; }

  // Lambda^C_{AB}
  double operator()(BladeMask c, BladeMask a, BladeMask b) const {
    return (a ^ b) == c ? sign_[a * n_ + b] : 0.0;
  }
  // The only nonzero entry for (A, B), located at C = A xor B.
  double product_sign(BladeMask a, BladeMask b) const { return sign_[a * n_ + b]; }
  double blade_norm(BladeMask a) const { return norms_[a]; }
  const std::vector<double>& blade_norms() const { return norms_; }

  // Dense [C][A][B] layout, n^3 entries.
  std::vector<double> dense() const;

private:
  Signature sig_;
  std::size_t n_;
  std::vector<double> sign_;
  std::vector<double> norms_;
};

CayleyTable build_cayley(const Signature& sig);
// Shared immutable table per signature, built on first use.
std::shared_ptr<const CayleyTable> cayley_table(const Signature& sig);

class Multivector {
public:
  Multivector() = default;
  explicit Multivector(const Signature& sig);
  Multivector(const Signature& sig, std::vector<double> coeffs);

  static Multivector scalar(const Signature& sig, double s);
  static Multivector blade(const Signature& sig, BladeMask a, double coeff = 1.0);

  const Signature& signature() const { return sig_; }
  std::size_t size() const { return coeffs_.size(); }
  double operator[](BladeMask a) const { return coeffs_[a]; }
  double& operator[](BladeMask a) { return coeffs_[a]; }
  std::span<const double> coeffs() const { return coeffs_; }
  std::span<double> coeffs() { return coeffs_; }

  Multivector& operator+=(const Multivector& o);
  Multivector& operator-=(const Multivector& o);
  Multivector& operator*=(double s);

  double norm_l2() const;

private:
  Signature sig_;
  std::vector<double> coeffs_;
};

Multivector operator+(Multivector a, const Multivector& b);
Multivector operator-(Multivector a, const Multivector& b);
Multivector operator*(Multivector a, double s);
Multivector operator*(double s, Multivector a);

Multivector geometric_product(const Multivector& x, const Multivector& y);
// out += x y on raw coefficient arrays
void geometric_product_accumulate(const CayleyTable& table, std::span<const double> x,
                                  std::span<const double> y, std::span<double> out);

Multivector grade_projection(const Multivector& x, int k);
double extended_inner_product(const Multivector& x, const Multivector& y);
Multivector cl_embed(double s, std::span<const double> v, const Signature& sig);

nlohmann::json to_json(const Multivector& x);
Multivector multivector_from_json(const nlohmann::json& j);

}  // namespace csk
