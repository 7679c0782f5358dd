#include "csk/group.hpp"

#include <cmath>
#include <numbers>

namespace csk {

namespace {

Eigen::MatrixXd metric_matrix(const Signature& sig) {
  Eigen::VectorXd diag(sig.dim());
  for (int i = 0; i < sig.dim(); ++i) diag[i] = sig.metric(i);
  return diag.asDiagonal();
}

void check_axis(const Signature& sig, int i) {
  if (i < 0 || i >= sig.dim()) throw Error("axis " + std::to_string(i) + " out of range");
}

}  // namespace

double metric_defect(const Signature& sig, const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd delta = metric_matrix(sig);
  return (m.transpose() * delta * m - delta).norm();
}

GroupElement make_group_element(const Signature& sig, Eigen::MatrixXd m, double tol) {
  GroupElement g{sig, std::move(m)};
  validate(g, tol);
  return g;
}

void validate(const GroupElement& g, double tol) {
  const int d = g.sig.dim();
  if (g.matrix.rows() != d || g.matrix.cols() != d) {
    throw Error("group element must be a " + std::to_string(d) + "x" + std::to_string(d) +
                " matrix");
  }
  if (!g.matrix.allFinite()) throw Error("group element has non-finite entries");
  const double defect = metric_defect(g.sig, g.matrix);
  if (defect > tol) {
    throw Error("matrix does not preserve the (" + g.sig.str() + ") metric (defect " +
                std::to_string(defect) + ")");
  }
  if (std::abs(std::abs(g.matrix.determinant()) - 1.0) > tol) {
    throw Error("group element must have |det| = 1");
  }
}

GroupElement identity_element(const Signature& sig) {
  return {sig, Eigen::MatrixXd::Identity(sig.dim(), sig.dim())};
}

GroupElement compose(const GroupElement& g2, const GroupElement& g1) {
  if (!(g1.sig == g2.sig)) throw Error("signature mismatch in compose");
  return {g1.sig, g2.matrix * g1.matrix};
}

GroupElement inverse(const GroupElement& g) {
  const Eigen::MatrixXd delta = metric_matrix(g.sig);
  return {g.sig, delta * g.matrix.transpose() * delta};
}

Eigen::VectorXd act(const GroupElement& g, std::span<const double> v) {
  Eigen::Map<const Eigen::VectorXd> vec(v.data(), static_cast<Eigen::Index>(v.size()));
  return g.matrix * vec;
}

GroupElement givens(const Signature& sig, int i, int j, double angle) {
  check_axis(sig, i);
  check_axis(sig, j);
  if (i == j || sig.metric(i) != sig.metric(j)) {
    throw Error("givens rotation needs two distinct axes of equal metric sign");
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(sig.dim(), sig.dim());
  const double c = std::cos(angle), s = std::sin(angle);
  m(i, i) = c;
  m(j, j) = c;
  m(i, j) = -s;
  m(j, i) = s;
  return {sig, m};
}

GroupElement reflection(const Signature& sig, int axis) {
  check_axis(sig, axis);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(sig.dim(), sig.dim());
  m(axis, axis) = -1.0;
  return {sig, m};
}

GroupElement boost(const Signature& sig, int i, int j, double rapidity) {
  check_axis(sig, i);
  check_axis(sig, j);
  if (!(sig.metric(i) > 0 && sig.metric(j) < 0)) {
    throw Error("boost needs a positive axis i and a negative axis j");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(sig.dim(), sig.dim());
  a(i, j) = rapidity;
  a(j, i) = rapidity;
  return {sig, matrix_exp(a)};
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a) {
  const double norm = a.lpNorm<Eigen::Infinity>();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd scaled = a / std::ldexp(1.0, squarings);

  const auto n = a.rows();
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k < 40; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
    if (term.norm() <= 1e-17 * result.norm()) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

GroupElement sample_rotation(const Signature& sig, Rng& rng, bool reflections) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  GroupElement g = identity_element(sig);
  auto rotate_block = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      for (int j = i + 1; j < end; ++j) g = compose(givens(sig, i, j, angle(rng)), g);
    }
  };
  rotate_block(0, sig.p);
  rotate_block(sig.p, sig.dim());
  if (reflections) {
    std::bernoulli_distribution flip(0.5);
    for (int i = 0; i < sig.dim(); ++i) {
      if (flip(rng)) g = compose(reflection(sig, i), g);
    }
  }
  return g;
}

GroupElement sample_boost(const Signature& sig, double max_rapidity, Rng& rng) {
  if (sig.p == 0 || sig.q == 0) {
    throw Error("boosts need p >= 1 and q >= 1, got (" + sig.str() + ")");
  }
  std::uniform_int_distribution<int> pos(0, sig.p - 1);
  std::uniform_int_distribution<int> neg(sig.p, sig.dim() - 1);
  std::uniform_real_distribution<double> rapidity(-max_rapidity, max_rapidity);
  const int i = pos(rng);
  const int j = neg(rng);
  return boost(sig, i, j, rapidity(rng));
}

GroupElement sample_group_element(const Signature& sig, Rng& rng, double max_rapidity) {
  GroupElement g = sample_rotation(sig, rng);
  if (sig.p > 0 && sig.q > 0) {
    g = compose(sample_boost(sig, max_rapidity, rng), g);
    g = compose(sample_rotation(sig, rng, false), g);
  }
  return g;
}

CliffordRep rho_cl_matrix(const GroupElement& g) {
  validate(g);
  const Signature& sig = g.sig;
  const auto table = cayley_table(sig);
  const std::size_t n = sig.algebra_dim();

  std::vector<std::vector<double>> images(sig.dim(), std::vector<double>(n, 0.0));
  for (int i = 0; i < sig.dim(); ++i) {
    for (int r = 0; r < sig.dim(); ++r) images[i][BladeMask{1} << r] = g.matrix(r, i);
  }

  Eigen::MatrixXd rep = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> col(n), next(n);
  for (BladeMask a = 0; a < n; ++a) {
    std::fill(col.begin(), col.end(), 0.0);
    col[0] = 1.0;
    for (int i = 0; i < sig.dim(); ++i) {
      if (!(a & (BladeMask{1} << i))) continue;
      std::fill(next.begin(), next.end(), 0.0);
      geometric_product_accumulate(*table, col, images[i], next);
      col.swap(next);
    }
    for (std::size_t r = 0; r < n; ++r) rep(r, a) = col[r];
  }
  return {sig, rep};
}

Multivector apply(const CliffordRep& rep, const Multivector& x) {
  if (!(rep.sig == x.signature())) throw Error("signature mismatch in rho_cl application");
  Eigen::Map<const Eigen::VectorXd> in(x.coeffs().data(), x.size());
  Eigen::VectorXd out = rep.matrix * in;
  return Multivector(rep.sig, std::vector<double>(out.data(), out.data() + out.size()));
}

Eigen::MatrixXd rho_cl_channels(const CliffordRep& rep, int channels) {
  const auto n = rep.matrix.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * channels, n * channels);
  for (int c = 0; c < channels; ++c) out.block(c * n, c * n, n, n) = rep.matrix;
  return out;
}

Eigen::MatrixXd rho_hom_apply(const GroupElement& g, const Eigen::MatrixXd& op, int c_in,
                              int c_out) {
  const auto n = static_cast<Eigen::Index>(g.sig.algebra_dim());
  if (op.rows() != c_out * n || op.cols() != c_in * n) {
    throw Error("operator shape does not match channel counts");
  }
  const CliffordRep rep = rho_cl_matrix(g);
  const CliffordRep rep_inv = rho_cl_matrix(inverse(g));
  return rho_cl_channels(rep, c_out) * op * rho_cl_channels(rep_inv, c_in);
}

nlohmann::json to_json(const GroupElement& g) {
  std::vector<std::vector<double>> rows(g.matrix.rows());
  for (Eigen::Index r = 0; r < g.matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.matrix.cols(); ++c) rows[r].push_back(g.matrix(r, c));
  }
  return {{"signature", {g.sig.p, g.sig.q}}, {"matrix", rows}};
}

GroupElement group_element_from_json(const nlohmann::json& j) {
  const auto& s = j.at("signature");
  Signature sig(s.at(0).get<int>(), s.at(1).get<int>());
  const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(sig.dim(), sig.dim());
  if (rows.size() != static_cast<std::size_t>(sig.dim())) throw Error("bad matrix shape");
  for (int r = 0; r < sig.dim(); ++r) {
    if (rows[r].size() != static_cast<std::size_t>(sig.dim())) throw Error("bad matrix shape");
    for (int c = 0; c < sig.dim(); ++c) m(r, c) = rows[r][c];
  }
  return make_group_element(sig, std::move(m));
}

}  // namespace csk
