#include "csk/verify.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>

namespace csk {

bool is_grid_preserving(const GroupElement& g) {
  const int d = g.sig.dim();
  const Eigen::MatrixXd& m = g.matrix;
  if (m.rows() != d || m.cols() != d) return false;
  for (int r = 0; r < d; ++r) {
    int nonzero = 0;
    for (int c = 0; c < d; ++c) {
      const double v = m(r, c);
      if (std::abs(v) < 1e-12) continue;
      if (std::abs(std::abs(v) - 1.0) > 1e-12) return false;
      if (g.sig.metric(r) != g.sig.metric(c)) return false;
      ++nonzero;
    }
    if (nonzero != 1) return false;
  }
  return std::abs(std::abs(m.determinant()) - 1.0) < 1e-12;
}

std::vector<GroupElement> grid_linear_parts(const Signature& sig) {
  const int d = sig.dim();
  auto block_parts = [](int offset, int size) {
    std::vector<std::vector<std::pair<int, int>>> out;  // (target axis, sign) per source axis
    std::vector<int> perm(size);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      for (int signs = 0; signs < (1 << size); ++signs) {
        std::vector<std::pair<int, int>> part;
        for (int a = 0; a < size; ++a) {
          part.emplace_back(offset + perm[a], (signs >> a) & 1 ? -1 : 1);
        }
        out.push_back(std::move(part));
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
  };
  const auto pos = block_parts(0, sig.p), neg = block_parts(sig.p, sig.q);
  std::vector<GroupElement> out;
  for (const auto& a : pos) {
    for (const auto& b : neg) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
      for (int i = 0; i < sig.p; ++i) m(a[i].first, i) = a[i].second;
      for (int i = 0; i < sig.q; ++i) m(b[i].first, sig.p + i) = b[i].second;
      out.push_back(make_group_element(sig, m));
    }
  }
  return out;
}

MultivectorField transform_field(const IsometryAction& act, const MultivectorField& f) {
  const Signature& sig = f.sig;
  const int d = sig.dim();
  if (!(act.g.sig == sig)) throw Error("action and field signatures differ");
  if (!is_grid_preserving(act.g)) throw Error("action is not grid preserving");
  if (static_cast<int>(act.t.size()) != d) throw Error("translation rank must equal p+q");

  // g^-1 = g^T for signed permutations within metric blocks
  const Eigen::MatrixXd ginv = act.g.matrix.transpose();
  std::vector<int> src_axis(d), src_sign(d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      if (std::abs(ginv(r, c)) > 0.5) {
        src_axis[r] = c;
        src_sign[r] = ginv(r, c) > 0 ? 1 : -1;
      }
    }
    if (f.sizes[r] != f.sizes[src_axis[r]]) throw Error("action maps axes of different length");
  }

  const Eigen::MatrixXd rho = rho_cl_matrix(act.g).matrix;
  const std::size_t B = f.blades(), P = f.points();
  MultivectorField out = make_field(sig, f.channels, f.sizes);
  std::vector<int> x(d, 0), y(d);
  for (std::size_t p = 0; p < P; ++p) {
    // y = g^-1 (x - t)
    for (int r = 0; r < d; ++r) {
      const int a = src_axis[r];
      const int len = f.sizes[r];
      y[r] = ((src_sign[r] * (x[a] - act.t[a])) % len + len) % len;
    }
    std::size_t src = 0;
    for (int r = 0; r < d; ++r) src = src * f.sizes[r] + y[r];
    for (int c = 0; c < f.channels; ++c) {
      const Eigen::Map<const Eigen::VectorXd> in(f.data.data() + (c * P + src) * B, B);
      Eigen::Map<Eigen::VectorXd>(out.data.data() + (c * P + p) * B, B) = rho * in;
    }
    for (int a = d - 1; a >= 0; --a) {
      if (++x[a] < f.sizes[a]) break;
      x[a] = 0;
    }
  }
  return out;
}

double relative_equivariance_error(const FieldMap& model, const IsometryAction& act,
                                   const MultivectorField& f) {
  const MultivectorField a = model(transform_field(act, f));
  const MultivectorField b = transform_field(act, model(f));
  const double den = l2_norm(a + b);
  if (den == 0.0) {
    std::cerr << "warning: equivariance error undefined, zero denominator\n";
    return std::numeric_limits<double>::quiet_NaN();
  }
  return l2_norm(a - b) / den;
}

double steerability_error(const KernelFn& kernel, const GroupElement& g, int c_in, int c_out,
                          const std::vector<std::vector<double>>& points) {
  validate(g);
  double worst = 0.0;
  for (const auto& v : points) {
    const Eigen::VectorXd gv = act(g, v);
    const Eigen::MatrixXd lhs = kernel(std::span<const double>(gv.data(), gv.size()));
    const Eigen::MatrixXd rhs = rho_hom_apply(g, kernel(v), c_in, c_out);
    const double scale = std::max(lhs.norm(), rhs.norm());
    if (scale == 0.0) continue;
    worst = std::max(worst, (lhs - rhs).norm() / scale);
  }
  return worst;
}

std::vector<double> angular_spectrum(const SteerableKernel& k, int grade_in, int grade_out) {
  if (!(k.sig == Signature(2, 0))) throw Error("angular spectrum needs signature (2,0)");
  const int h0 = (k.sizes[0] - 1) / 2, h1 = (k.sizes[1] - 1) / 2;
  const double R = std::min(h0, h1);
  if (R < 1) throw Error("kernel support too small for ring sampling");
  constexpr int kSamples = 256, kRings = 8;
  const std::size_t n = k.sig.algebra_dim();

  std::vector<std::size_t> rows, cols;
  for (int o = 0; o < k.c_out; ++o) {
    for (BladeMask c : blades_of_grade(k.sig, grade_out)) rows.push_back(o * n + c);
  }
  for (int i = 0; i < k.c_in; ++i) {
    for (BladeMask b : blades_of_grade(k.sig, grade_in)) cols.push_back(i * n + b);
  }

  auto sample = [&](std::size_t r, std::size_t c, double x0, double x1) {
    const int i0 = std::clamp(static_cast<int>(std::floor(x0)), 0, k.sizes[0] - 2);
    const int i1 = std::clamp(static_cast<int>(std::floor(x1)), 0, k.sizes[1] - 2);
    const double f0 = x0 - i0, f1 = x1 - i1;
    auto at = [&](int a, int b) { return k.at(r, c, static_cast<std::size_t>(a) * k.sizes[1] + b); };
    return (1 - f0) * (1 - f1) * at(i0, i1) + f0 * (1 - f1) * at(i0 + 1, i1) +
           (1 - f0) * f1 * at(i0, i1 + 1) + f0 * f1 * at(i0 + 1, i1 + 1);
  };

  std::vector<std::complex<double>> twiddle(kSamples);
  for (int s = 0; s < kSamples; ++s) {
    twiddle[s] = std::polar(1.0, -2.0 * std::numbers::pi * s / kSamples);
  }
  std::vector<double> energy(kSamples / 2 + 1, 0.0);
  std::vector<double> ring(kSamples);
  for (std::size_t r : rows) {
    for (std::size_t c : cols) {
      for (int j = 1; j <= kRings; ++j) {
        const double radius = R * j / kRings;
        for (int s = 0; s < kSamples; ++s) {
          const double phi = 2.0 * std::numbers::pi * s / kSamples;
          ring[s] = sample(r, c, h0 + radius * std::cos(phi), h1 + radius * std::sin(phi));
        }
        for (int m = 0; m < kSamples; ++m) {
          std::complex<double> acc = 0.0;
          for (int s = 0; s < kSamples; ++s) acc += ring[s] * twiddle[(m * s) % kSamples];
          energy[std::min(m, kSamples - m)] += std::norm(acc);
        }
      }
    }
  }
  return energy;
}

double energy_fraction(const std::vector<double>& spectrum, int frequency) {
  const double total = std::accumulate(spectrum.begin(), spectrum.end(), 0.0);
  if (total == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return spectrum.at(frequency) / total;
}

int dominant_frequency(const std::vector<double>& spectrum) {
  return static_cast<int>(std::max_element(spectrum.begin(), spectrum.end()) - spectrum.begin());
}

SteerableKernel compose_kernels(const SteerableKernel& k1, const SteerableKernel& k2) {
  if (!(k1.sig == k2.sig)) throw Error("kernel signatures differ");
  if (k2.c_in != k1.c_out) throw Error("kernel channel chain does not match");
  const std::size_t d = k1.sizes.size();
  std::vector<int> sizes(d);
  for (std::size_t a = 0; a < d; ++a) sizes[a] = k1.sizes[a] + k2.sizes[a] - 1;
  SteerableKernel out = make_zero_kernel(k1.sig, k1.c_in, k2.c_out, sizes);

  auto unravel = [](std::size_t p, const std::vector<int>& s) {
    std::vector<int> idx(s.size());
    for (std::ptrdiff_t a = static_cast<std::ptrdiff_t>(s.size()) - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(p % s[a]);
      p /= s[a];
    }
    return idx;
  };
  for (std::size_t p1 = 0; p1 < k1.points(); ++p1) {
    const auto i1 = unravel(p1, k1.sizes);
    const Eigen::MatrixXd b1 = k1.block(p1);
    for (std::size_t p2 = 0; p2 < k2.points(); ++p2) {
      const auto i2 = unravel(p2, k2.sizes);
      std::size_t q = 0;
      for (std::size_t a = 0; a < d; ++a) q = q * sizes[a] + i1[a] + i2[a];
      out.set_block(q, out.block(q) + k2.block(p2) * b1);
    }
  }
  out.provenance = "composition";
  return out;
}

nlohmann::json to_json(const CheckReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"check", r.check},          {"signature", {r.sig.p, r.sig.q}},
          {"n_samples", r.n_samples},  {"max_err", num(r.max_err)},
          {"mean_err", num(r.mean_err)}, {"min_err", num(r.min_err)},
          {"tolerance", r.tolerance},  {"bound", r.lower_bound ? "lower" : "upper"},
          {"pass", r.pass}};
}

CheckReport make_report(std::string check, const Signature& sig, const std::vector<double>& errs,
                        double tolerance, bool lower_bound) {
  CheckReport r;
  r.check = std::move(check);
  r.sig = sig;
  r.n_samples = static_cast<int>(errs.size());
  r.tolerance = tolerance;
  r.lower_bound = lower_bound;
  bool finite = !errs.empty();
  r.min_err = errs.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (double e : errs) {
    finite = finite && std::isfinite(e);
    r.max_err = std::max(r.max_err, e);
    r.min_err = std::min(r.min_err, e);
    r.mean_err += e;
  }
  if (!errs.empty()) r.mean_err /= static_cast<double>(errs.size());
  r.pass = finite && (lower_bound ? r.min_err > tolerance : r.max_err < tolerance);
  return r;
}

namespace {

Multivector random_multivector(const Signature& sig, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Multivector x(sig);
  for (double& v : x.coeffs()) v = normal(rng);
  return x;
}

Multivector random_vector(const Signature& sig, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Multivector x(sig);
  for (int i = 0; i < sig.dim(); ++i) x[BladeMask{1} << i] = normal(rng);
  return x;
}

double rel(const Multivector& err, double scale) { return err.norm_l2() / scale; }

std::vector<double> random_point(int d, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(d);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

std::vector<CheckReport> check_algebra(const Signature& sig, int samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> assoc, unit, fundamental, anti;
  const Multivector one = Multivector::scalar(sig, 1.0);
  for (int s = 0; s < samples; ++s) {
    const Multivector x = random_multivector(sig, rng), y = random_multivector(sig, rng),
                      z = random_multivector(sig, rng);
    const double scale = x.norm_l2() * y.norm_l2() * z.norm_l2();
    assoc.push_back(rel(geometric_product(geometric_product(x, y), z) -
                            geometric_product(x, geometric_product(y, z)),
                        scale));
    unit.push_back(std::max(rel(geometric_product(one, x) - x, x.norm_l2()),
                            rel(geometric_product(x, one) - x, x.norm_l2())));

    const Multivector u = random_vector(sig, rng), v = random_vector(sig, rng);
    std::vector<double> uc(sig.dim()), vc(sig.dim());
    for (int i = 0; i < sig.dim(); ++i) {
      uc[i] = u[BladeMask{1} << i];
      vc[i] = v[BladeMask{1} << i];
    }
    fundamental.push_back(
        rel(geometric_product(v, v) - Multivector::scalar(sig, sig.quadratic_form(vc)),
            v.norm_l2() * v.norm_l2()));
    anti.push_back(rel(geometric_product(u, v) + geometric_product(v, u) -
                           Multivector::scalar(sig, 2.0 * sig.inner(uc, vc)),
                       u.norm_l2() * v.norm_l2()));
  }
  for (int i = 0; i < sig.dim(); ++i) {
    for (int j = 0; j < sig.dim(); ++j) {
      if (i == j) continue;
      const Multivector ei = Multivector::blade(sig, BladeMask{1} << i);
      const Multivector ej = Multivector::blade(sig, BladeMask{1} << j);
      anti.push_back(rel(geometric_product(ei, ej) + geometric_product(ej, ei), 1.0));
    }
  }
  return {make_report("associativity", sig, assoc, 1e-12),
          make_report("unitality", sig, unit, 1e-12),
          make_report("fundamental_relation", sig, fundamental, 1e-12),
          make_report("anticommutation", sig, anti, 1e-12)};
}

std::vector<CheckReport> check_representation(const Signature& sig, int samples,
                                              std::uint64_t seed) {
  Rng rng(seed);
  const auto table = cayley_table(sig);
  const Eigen::VectorXd norms =
      Eigen::Map<const Eigen::VectorXd>(table->blade_norms().data(), table->blade_norms().size());
  const Eigen::MatrixXd bar_eta = norms.asDiagonal();
  const auto grades = blade_grades(sig);
  std::vector<double> hom, orth, mult, grade;
  for (int s = 0; s < samples; ++s) {
    const GroupElement g1 = sample_group_element(sig, rng), g2 = sample_group_element(sig, rng);
    const Eigen::MatrixXd r1 = rho_cl_matrix(g1).matrix, r2 = rho_cl_matrix(g2).matrix;
    const Eigen::MatrixXd r12 = rho_cl_matrix(compose(g1, g2)).matrix;
    const Eigen::MatrixXd prod = r1 * r2;
    hom.push_back((r12 - prod).norm() / prod.norm());

    orth.push_back((r1.transpose() * bar_eta * r1 - bar_eta).norm() / r1.squaredNorm());

    const CliffordRep rep = rho_cl_matrix(g1);
    const Multivector x = random_multivector(sig, rng), y = random_multivector(sig, rng);
    const Multivector gx = apply(rep, x), gy = apply(rep, y);
    mult.push_back(rel(apply(rep, geometric_product(x, y)) - geometric_product(gx, gy),
                       gx.norm_l2() * gy.norm_l2()));

    double off = 0.0;
    for (Eigen::Index r = 0; r < r1.rows(); ++r) {
      for (Eigen::Index c = 0; c < r1.cols(); ++c) {
        if (grades[r] != grades[c]) off += r1(r, c) * r1(r, c);
      }
    }
    grade.push_back(std::sqrt(off) / r1.norm());
  }
  return {make_report("homomorphism", sig, hom, 1e-9),
          make_report("orthogonality", sig, orth, 1e-9),
          make_report("multiplicativity", sig, mult, 1e-9),
          make_report("grade_preservation", sig, grade, 1e-9)};
}

std::vector<CheckReport> check_head(const Signature& sig, int samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckReport> out;
  for (HeadMode mode : {HeadMode::blade, HeadMode::grade}) {
    KernelConfig config;
    config.sig = sig;
    config.grid = std::vector<int>(sig.dim(), 3);
    config.c_in = 2;
    config.c_out = 3;
    config.head = mode;
    config.seed = seed + 1;
    KernelParams params = init_kernel(config);
    std::vector<double> errs;
    for (int s = 0; s < samples; ++s) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (double& w : params.head.w) w = normal(rng);
      const WeightedCayley Ws = expand_head(params);
      std::vector<Multivector> k, f;
      for (int j = 0; j < config.c_in * config.c_out; ++j) k.push_back(random_multivector(sig, rng));
      for (int j = 0; j < config.c_in; ++j) f.push_back(random_multivector(sig, rng));
      const GroupElement g = sample_group_element(sig, rng);
      const CliffordRep rep = rho_cl_matrix(g);
      std::vector<Multivector> gk, gf;
      for (const auto& x : k) gk.push_back(apply(rep, x));
      for (const auto& x : f) gf.push_back(apply(rep, x));
      auto head = [&](std::span<const Multivector> kk, std::span<const Multivector> ff) {
        return mode == HeadMode::grade ? kernel_head_apply_grades(params.head, kk, ff)
                                       : kernel_head_apply(Ws, kk, ff);
      };
      const auto lhs = head(gk, gf);
      const auto base = head(k, f);
      double num = 0.0, den = 0.0;
      for (int o = 0; o < config.c_out; ++o) {
        const Multivector rhs = apply(rep, base[o]);
        num += std::pow((lhs[o] - rhs).norm_l2(), 2);
        den += std::pow(rhs.norm_l2(), 2);
      }
      errs.push_back(std::sqrt(num / den));
    }
    out.push_back(make_report("head_equivariance_" + to_string(mode), sig, errs, 1e-9));
  }
  return out;
}

std::vector<CheckReport> check_steerability(const Signature& sig, int samples, std::uint64_t seed) {
  std::vector<CheckReport> out;
  for (HeadMode mode : {HeadMode::blade, HeadMode::grade, HeadMode::unstructured}) {
    Rng rng(seed);
    KernelConfig config;
    config.sig = sig;
    config.grid = std::vector<int>(sig.dim(), 5);
    config.c_in = 2;
    config.c_out = 2;
    config.depth = 3;
    config.width = 6;
    config.head = mode;
    config.seed = seed + 7;
    const KernelParams params = init_kernel(config);
    const KernelFn fn = [&](std::span<const double> v) { return evaluate_kernel_at(params, v); };
    std::vector<std::vector<double>> vs(samples);
    std::vector<GroupElement> elems;
    for (int s = 0; s < samples; ++s) {
      elems.push_back(sample_group_element(sig, rng, 2.0));
      vs[s] = random_point(sig.dim(), rng);
    }
    std::vector<double> errs(samples);
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < samples; ++s) {
      errs[s] = steerability_error(fn, elems[s], config.c_in, config.c_out, {vs[s]});
    }
    if (mode == HeadMode::unstructured) {
      out.push_back(make_report("steerability_negative_control", sig,
                                {std::accumulate(errs.begin(), errs.end(), 0.0) / samples}, 0.1,
                                true));
    } else {
      out.push_back(make_report("steerability_" + to_string(mode), sig, errs, 1e-9));
    }
  }
  return out;
}

namespace {

CsCnnConfig equivariance_model(const Signature& sig, HeadMode head, std::uint64_t seed) {
  CsCnnConfig c;
  c.sig = sig;
  c.kernel_grid = std::vector<int>(sig.dim(), sig.dim() <= 2 ? 5 : 3);
  c.channels = {2, 3, 2};
  c.depth = 2;
  c.width = 4;
  c.head = head;
  c.bias = true;
  c.seed = seed;
  return c;
}

}  // namespace

std::vector<CheckReport> check_grid_equivariance(const Signature& sig, std::uint64_t seed) {
  const int d = sig.dim();
  if (d < 2 || d > 3) throw Error("grid equivariance suite supports p+q in {2,3}");
  const std::vector<int> sizes(d, d == 2 ? 16 : 8);
  Rng rng(seed);
  const MultivectorField f = synth_field(sig, sizes, 2, 1.0, rng);
  const auto parts = grid_linear_parts(sig);
  std::vector<IsometryAction> acts;
  std::uniform_int_distribution<int> shift(0, sizes[0] - 1);
  for (const auto& g : parts) {
    std::vector<int> t(d);
    for (int& x : t) x = shift(rng);
    acts.push_back({t, g});
  }

  std::vector<CheckReport> out;
  for (HeadMode head : {HeadMode::blade, HeadMode::unstructured}) {
    CsCnn model = init_cscnn(equivariance_model(sig, head, seed + 3));
    // nonzero biases so the bias path is exercised
    for (auto& b : model.biases) {
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.1 * (i + 1);
    }
    const auto layers = build_layers(model);
    const FieldMap fn = [&](const MultivectorField& x) { return model_forward(layers, x); };
    std::vector<double> errs;
    for (std::size_t a = 0; a < acts.size(); ++a) {
      // the control only counts actions with a nontrivial linear part
      if (head == HeadMode::unstructured && a == 0) continue;
      errs.push_back(relative_equivariance_error(fn, acts[a], f));
    }
    if (head == HeadMode::blade) {
      out.push_back(make_report("grid_equivariance", sig, errs, 1e-6));
    } else {
      out.push_back(make_report("grid_equivariance_negative_control", sig, errs, 0.05, true));
    }
  }
  return out;
}

SteerableKernel frequency_one_kernel(int from_grade, int to_grade, int size) {
  const Signature sig(2, 0);
  if (size < 3 || size % 2 == 0) throw Error("kernel size must be odd and >= 3");
  SteerableKernel k = make_zero_kernel(sig, 1, 1, {size, size});
  const int half = (size - 1) / 2;
  const double s = std::max(1.0, half / 2.0);
  for (int a = 0; a < size; ++a) {
    for (int b = 0; b < size; ++b) {
      const double x = a - half, y = b - half;
      const double g = std::exp(-(x * x + y * y) / (2.0 * s * s));
      const std::size_t n = static_cast<std::size_t>(a) * size + b;
      // R(r) [-sin, cos] and R(r) [cos, sin] with R(r) = r g(r)
      const double rot[2] = {-y * g, x * g}, rad[2] = {x * g, y * g};
      if (from_grade == 1 && to_grade == 0) {
        k.at(0, 1, n) = rot[0];
        k.at(0, 2, n) = rot[1];
      } else if (from_grade == 0 && to_grade == 1) {
        k.at(1, 0, n) = rot[0];
        k.at(2, 0, n) = rot[1];
      } else if (from_grade == 1 && to_grade == 2) {
        k.at(3, 1, n) = rad[0];
        k.at(3, 2, n) = rad[1];
      } else if (from_grade == 2 && to_grade == 1) {
        k.at(1, 3, n) = rad[0];
        k.at(2, 3, n) = rad[1];
      } else {
        throw Error("no frequency-1 block between these grades");
      }
    }
  }
  k.provenance = "frequency_one";
  return k;
}

std::vector<CheckReport> check_spectrum(std::uint64_t seed) {
  const Signature sig(2, 0);
  KernelConfig config;
  config.sig = sig;
  config.grid = {9, 9};
  config.c_in = 2;
  config.c_out = 2;
  config.depth = 3;
  config.width = 8;
  config.seed = seed;
  const SteerableKernel k = generate_kernel(init_kernel(config));

  std::vector<CheckReport> out;
  const auto ss = angular_spectrum(k, 0, 0);
  out.push_back(make_report("spectrum_scalar_scalar_freq0", sig, {energy_fraction(ss, 0)}, 0.99, true));
  const auto vv = angular_spectrum(k, 1, 1);
  out.push_back(make_report("spectrum_vector_vector_freq2", sig, {energy_fraction(vv, 2)}, 0.02));
  const auto vs = angular_spectrum(k, 1, 0);
  double other = 0.0;
  for (std::size_t m = 0; m < vs.size(); ++m) {
    if (m != 1) other = std::max(other, vs[m]);
  }
  out.push_back(make_report("spectrum_vector_scalar_dominant1", sig, {other / vs[1]}, 1.0));

  const int size = 7;
  const SteerableKernel pi =
      compose_kernels(frequency_one_kernel(1, 2, size), frequency_one_kernel(2, 1, size));
  const SteerableKernel sigma =
      compose_kernels(frequency_one_kernel(1, 0, size), frequency_one_kernel(0, 1, size));
  SteerableKernel diff = pi;
  for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= sigma.data[i];
  const auto dv = angular_spectrum(diff, 1, 1);
  out.push_back(make_report("spectrum_composed_difference_freq2", sig, {energy_fraction(dv, 2)},
                            0.5, true));
  return out;
}

double central_difference(const std::function<double(double)>& f, double h, int order) {
  switch (order) {
    case 2: return (f(h) - f(-h)) / (2.0 * h);
    case 4: return (-f(2 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2 * h)) / (12.0 * h);
    case 6:
      return (f(3 * h) - 9.0 * f(2 * h) + 45.0 * f(h) - 45.0 * f(-h) + 9.0 * f(-2 * h) -
              f(-3 * h)) /
             (60.0 * h);
    default: throw Error("finite difference order must be 2, 4 or 6");
  }
}

std::vector<GradientCheck> gradient_check(CsCnn& model, std::span<const Sample> batch,
                                          const FiniteDifference& fd) {
  const LossGradient lg = loss_and_gradient(model, batch);
  auto refs = param_refs(model);
  std::vector<GradientCheck> out;
  for (std::size_t r = 0; r < refs.size(); ++r) {
    if (!refs[r].trainable) continue;
    GradientCheck gc{refs[r].name, refs[r].data.size(), 0.0, 0.0};
    for (std::size_t i = 0; i < refs[r].data.size(); ++i) {
      double& v = refs[r].data[i];
      const double saved = v;
      const double numeric = central_difference(
          [&](double dx) {
            v = saved + dx;
            return loss_value(model, batch);
          },
          fd.h, fd.order);
      v = saved;
      const double analytic = lg.grads[r][i];
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      const double diff = std::abs(numeric - analytic);
      if (scale < fd.abs_floor) {
        gc.max_abs = std::max(gc.max_abs, diff);
      } else {
        gc.max_rel = std::max(gc.max_rel, diff / scale);
      }
    }
    out.push_back(gc);
  }
  return out;
}

std::vector<CheckReport> run_suite(const std::string& suite, const Signature& sig,
                                   std::uint64_t seed) {
  if (suite == "algebra") return check_algebra(sig, 100, seed);
  if (suite == "representation") return check_representation(sig, 200, seed);
  if (suite == "head") return check_head(sig, 100, seed);
  if (suite == "steerability") return check_steerability(sig, 100, seed);
  if (suite == "equivariance") return check_grid_equivariance(sig, seed);
  if (suite == "spectrum") return check_spectrum(seed);
  throw Error("unknown suite '" + suite + "'");
}

}  // namespace csk
