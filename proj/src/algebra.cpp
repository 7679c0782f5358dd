#include "csk/algebra.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace csk {

Signature::Signature(int p_, int q_) : p(p_), q(q_) {
  if (p < 0 || q < 0 || p + q < 1) {
    throw Error("invalid signature (" + std::to_string(p) + "," + std::to_string(q) + ")");
  }
  if (p + q > 8) throw Error("signatures with p+q > 8 are not supported");
}

std::vector<double> Signature::metric_diag() const {
  std::vector<double> diag(dim());
  for (int i = 0; i < dim(); ++i) diag[i] = metric(i);
  return diag;
}

double Signature::quadratic_form(std::span<const double> v) const { return inner(v, v); }

double Signature::inner(std::span<const double> u, std::span<const double> v) const {
  if (u.size() != static_cast<std::size_t>(dim()) || v.size() != u.size()) {
    throw Error("vector length does not match signature dimension");
  }
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += metric(i) * u[i] * v[i];
  return s;
}

std::string Signature::str() const { return std::to_string(p) + "," + std::to_string(q); }

Signature parse_signature(const std::string& text) {
  std::istringstream in(text);
  int p = -1, q = -1;
  char comma = 0;
  if (!(in >> p >> comma >> q) || comma != ',' || !in.eof()) {
    throw Error("cannot parse signature '" + text + "', expected p,q");
  }
  return Signature(p, q);
}

std::string blade_name(BladeMask a) {
  if (a == 0) return "1";
  std::string name = "e";
  for (int i = 0; i < 32; ++i) {
    if (a & (BladeMask{1} << i)) name += std::to_string(i + 1);
  }
  return name;
}

std::vector<BladeMask> blades_of_grade(const Signature& sig, int k) {
  std::vector<BladeMask> out;
  for (BladeMask a = 0; a < sig.algebra_dim(); ++a) {
    if (blade_grade(a) == k) out.push_back(a);
  }
  return out;
}

std::vector<int> blade_grades(const Signature& sig) {
  std::vector<int> g(sig.algebra_dim());
  for (BladeMask a = 0; a < g.size(); ++a) g[a] = blade_grade(a);
  return g;
}

namespace {

// Parity of the adjacent swaps needed to sort (A..., B...): each index of B is
// passed by every index of A that is larger than it.
int reorder_swaps(BladeMask a, BladeMask b) {
  int swaps = 0;
  for (BladeMask rest = a >> 1; rest != 0; rest >>= 1) swaps += blade_grade(rest & b);
  return swaps;
}

}  // namespace

CayleyTable::CayleyTable(const Signature& sig)
    : sig_(sig), n_(sig.algebra_dim()), sign_(n_ * n_), norms_(n_) {
  for (BladeMask a = 0; a < n_; ++a) {
    double norm = 1.0;
    for (int i = 0; i < sig.dim(); ++i) {
      if (a & (BladeMask{1} << i)) norm *= sig.metric(i);
    }
    norms_[a] = norm;
  }
  for (BladeMask a = 0; a < n_; ++a) {
    for (BladeMask b = 0; b < n_; ++b) {
      const double s = (reorder_swaps(a, b) % 2 == 0) ? 1.0 : -1.0;
      sign_[a * n_ + b] = s * norms_[a & b];
    }
  }
}

std::vector<double> CayleyTable::dense() const {
  std::vector<double> out(n_ * n_ * n_, 0.0);
  for (BladeMask a = 0; a < n_; ++a) {
    for (BladeMask b = 0; b < n_; ++b) {
      out[((a ^ b) * n_ + a) * n_ + b] = sign_[a * n_ + b];
    }
  }
  return out;
}

CayleyTable build_cayley(const Signature& sig) { return CayleyTable(sig); }

std::shared_ptr<const CayleyTable> cayley_table(const Signature& sig) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const CayleyTable>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{sig.p, sig.q}];
  if (!slot) slot = std::make_shared<const CayleyTable>(sig);
  return slot;
}

Multivector::Multivector(const Signature& sig) : sig_(sig), coeffs_(sig.algebra_dim(), 0.0) {}

Multivector::Multivector(const Signature& sig, std::vector<double> coeffs)
    : sig_(sig), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != sig.algebra_dim()) {
    throw Error("multivector needs " + std::to_string(sig.algebra_dim()) + " coefficients, got " +
                std::to_string(coeffs_.size()));
  }
}

Multivector Multivector::scalar(const Signature& sig, double s) { return blade(sig, 0, s); }

Multivector Multivector::blade(const Signature& sig, BladeMask a, double coeff) {
  Multivector x(sig);
  if (a >= x.size()) throw Error("blade index out of range");
  x.coeffs_[a] = coeff;
  return x;
}

static void check_same(const Signature& a, const Signature& b) {
  if (!(a == b)) throw Error("signature mismatch: (" + a.str() + ") vs (" + b.str() + ")");
}

Multivector& Multivector::operator+=(const Multivector& o) {
  check_same(sig_, o.sig_);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
  return *this;
}

Multivector& Multivector::operator-=(const Multivector& o) {
  check_same(sig_, o.sig_);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
  return *this;
}

Multivector& Multivector::operator*=(double s) {
  for (double& c : coeffs_) c *= s;
  return *this;
}

double Multivector::norm_l2() const {
  double s = 0.0;
  for (double c : coeffs_) s += c * c;
  return std::sqrt(s);
}

Multivector operator+(Multivector a, const Multivector& b) { return a += b; }
Multivector operator-(Multivector a, const Multivector& b) { return a -= b; }
Multivector operator*(Multivector a, double s) { return a *= s; }
Multivector operator*(double s, Multivector a) { return a *= s; }

void geometric_product_accumulate(const CayleyTable& table, std::span<const double> x,
                                  std::span<const double> y, std::span<double> out) {
  const std::size_t n = table.size();
  for (BladeMask a = 0; a < n; ++a) {
    if (x[a] == 0.0) continue;
    for (BladeMask b = 0; b < n; ++b) {
      out[a ^ b] += table.product_sign(a, b) * x[a] * y[b];
    }
  }
}

Multivector geometric_product(const Multivector& x, const Multivector& y) {
  check_same(x.signature(), y.signature());
  Multivector out(x.signature());
  geometric_product_accumulate(*cayley_table(x.signature()), x.coeffs(), y.coeffs(), out.coeffs());
  return out;
}

Multivector grade_projection(const Multivector& x, int k) {
  if (k < 0 || k > x.signature().dim()) {
    throw Error("grade " + std::to_string(k) + " out of range for signature (" +
                x.signature().str() + ")");
  }
  Multivector out(x.signature());
  for (BladeMask a = 0; a < x.size(); ++a) {
    if (blade_grade(a) == k) out[a] = x[a];
  }
  return out;
}

double extended_inner_product(const Multivector& x, const Multivector& y) {
  check_same(x.signature(), y.signature());
  const auto table = cayley_table(x.signature());
  double s = 0.0;
  for (BladeMask a = 0; a < x.size(); ++a) s += table->blade_norm(a) * x[a] * y[a];
  return s;
}

Multivector cl_embed(double s, std::span<const double> v, const Signature& sig) {
  if (v.size() != static_cast<std::size_t>(sig.dim())) {
    throw Error("cl_embed: vector length does not match signature dimension");
  }
  Multivector x(sig);
  x[0] = s;
  for (int i = 0; i < sig.dim(); ++i) x[BladeMask{1} << i] = v[i];
  return x;
}

nlohmann::json to_json(const Multivector& x) {
  return {{"signature", {x.signature().p, x.signature().q}},
          {"coeffs", std::vector<double>(x.coeffs().begin(), x.coeffs().end())}};
}

Multivector multivector_from_json(const nlohmann::json& j) {
  const auto& s = j.at("signature");
  return Multivector(Signature(s.at(0).get<int>(), s.at(1).get<int>()),
                     j.at("coeffs").get<std::vector<double>>());
}

}  // namespace csk
