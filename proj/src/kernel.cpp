#include "csk/kernel.hpp"

#include <cmath>

namespace csk {

HeadMode parse_head_mode(const std::string& text) {
  if (text == "blade") return HeadMode::blade;
  if (text == "grade") return HeadMode::grade;
  if (text == "fixed_one") return HeadMode::fixed_one;
  if (text == "unstructured") return HeadMode::unstructured;
  throw Error("unknown head_weights mode '" + text + "'");
}

std::string to_string(HeadMode mode) {
  switch (mode) {
    case HeadMode::blade: return "blade";
    case HeadMode::grade: return "grade";
    case HeadMode::fixed_one: return "fixed_one";
    case HeadMode::unstructured: return "unstructured";
  }
  return "?";
}

KernelGrid make_kernel_grid(const Signature& sig, std::vector<int> sizes) {
  const int d = sig.dim();
  if (static_cast<int>(sizes.size()) != d) {
    throw Error("kernel grid needs " + std::to_string(d) + " sizes");
  }
  std::size_t total = 1;
  for (int x : sizes) {
    if (x < 1 || x % 2 == 0) throw Error("kernel grid sizes must be odd and positive");
    total *= x;
  }
  KernelGrid grid{sig, sizes, std::vector<double>(total * d)};
  std::vector<int> idx(d, 0);
  for (std::size_t n = 0; n < total; ++n) {
    for (int a = 0; a < d; ++a) {
      const int half = (sizes[a] - 1) / 2;
      grid.coords[n * d + a] = half == 0 ? 0.0 : static_cast<double>(idx[a] - half) / half;
    }
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < sizes[a]) break;
      idx[a] = 0;
    }
  }
  return grid;
}

void validate(const KernelConfig& config) {
  if (static_cast<int>(config.grid.size()) != config.sig.dim()) {
    throw Error("kernel grid rank must equal p+q");
  }
  for (int x : config.grid) {
    if (x < 1 || x % 2 == 0) throw Error("kernel grid sizes must be odd and positive");
  }
  if (config.c_in < 1 || config.c_out < 1) throw Error("channel counts must be positive");
  validate(KernelNetConfig{config.sig, config.c_in * config.c_out, config.depth, config.width});
}

KernelParams init_kernel(const KernelConfig& config) {
  validate(config);
  Rng rng(config.seed);
  KernelParams params;
  params.config = config;
  params.net = init_kernel_network(
      KernelNetConfig{config.sig, config.c_in * config.c_out, config.depth, config.width}, rng);

  std::uniform_real_distribution<double> width(0.4, 0.6);
  const int grades = config.sig.grades();
  params.shell.sigma = width(rng);
  params.shell.mask_sigma.resize(static_cast<std::size_t>(grades) * config.c_in * config.c_out);
  for (double& s : params.shell.mask_sigma) s = width(rng);

  std::size_t points = 1;
  for (int x : config.grid) points *= x;
  std::normal_distribution<double> head_init(
      0.0, 1.0 / std::sqrt(static_cast<double>(config.c_in) * static_cast<double>(points)));

  params.head = HeadWeights{config.c_in, config.c_out, grades, {}};
  params.head.w.resize(static_cast<std::size_t>(config.c_out) * config.c_in * grades * grades *
                       grades);
  for (double& w : params.head.w) w = config.head == HeadMode::fixed_one ? 1.0 : head_init(rng);

  if (config.head == HeadMode::unstructured) {
    const std::size_t n = config.sig.algebra_dim();
    params.unstructured.resize(static_cast<std::size_t>(config.c_out) * config.c_in * n * n * n);
    for (double& w : params.unstructured) w = head_init(rng);
  }
  return params;
}

double scalar_shell(const Signature& sig, std::span<const double> v, double sigma) {
  if (!(sigma > 0.0)) throw Error("shell width must be positive");
  const double q = sig.quadratic_form(v);
  if (q == 0.0) return 0.0;
  const double sgn = q > 0.0 ? 1.0 : -1.0;
  return sgn * std::exp(-std::abs(q) / (2.0 * sigma * sigma));
}

WeightedCayley expand_head(const KernelParams& params) {
  const auto& config = params.config;
  const Signature& sig = config.sig;
  const std::size_t n = sig.algebra_dim();
  WeightedCayley out{sig, config.c_in, config.c_out, {}};
  if (config.head == HeadMode::unstructured) {
    out.W = params.unstructured;
    return out;
  }
  const auto table = cayley_table(sig);
  out.W.assign(static_cast<std::size_t>(config.c_out) * config.c_in * n * n * n, 0.0);
  for (int o = 0; o < config.c_out; ++o) {
    for (int i = 0; i < config.c_in; ++i) {
      for (BladeMask a = 0; a < n; ++a) {
        for (BladeMask b = 0; b < n; ++b) {
          const BladeMask c = a ^ b;
          const double w = params.head.at(o, i, blade_grade(c), blade_grade(a), blade_grade(b));
          out.W[(((static_cast<std::size_t>(o) * config.c_in + i) * n + c) * n + a) * n + b] =
              table->product_sign(a, b) * w;
        }
      }
    }
  }
  return out;
}

std::vector<Multivector> kernel_matrix_at(const KernelParams& params, std::span<const double> v) {
  const auto& config = params.config;
  const Signature& sig = config.sig;
  const double s = scalar_shell(sig, v, params.shell.sigma);
  auto k = kernel_network_forward(params.net, cl_embed(s, v, sig));
  if (!config.mask) return k;

  const int grades = sig.grades();
  std::vector<double> mask(static_cast<std::size_t>(grades));
  for (int o = 0; o < config.c_out; ++o) {
    for (int i = 0; i < config.c_in; ++i) {
      for (int g = 0; g < grades; ++g) {
        mask[g] = scalar_shell(
            sig, v, params.shell.mask_sigma[(static_cast<std::size_t>(g) * config.c_in + i) * config.c_out + o]);
      }
      Multivector& kio = k[o * config.c_in + i];
      for (BladeMask a = 0; a < kio.size(); ++a) kio[a] *= mask[blade_grade(a)];
    }
  }
  return k;
}

Eigen::MatrixXd head_operator(const WeightedCayley& W, std::span<const Multivector> k) {
  const std::size_t n = W.sig.algebra_dim();
  if (k.size() != static_cast<std::size_t>(W.c_in * W.c_out)) {
    throw Error("kernel head expects c_out*c_in multivectors");
  }
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(W.c_out * n, W.c_in * n);
  for (int o = 0; o < W.c_out; ++o) {
    for (int i = 0; i < W.c_in; ++i) {
      const Multivector& kio = k[o * W.c_in + i];
      for (BladeMask c = 0; c < n; ++c) {
        for (BladeMask a = 0; a < n; ++a) {
          if (kio[a] == 0.0) continue;
          for (BladeMask b = 0; b < n; ++b) {
            op(o * n + c, i * n + b) += kio[a] * W.at(o, i, c, a, b);
          }
        }
      }
    }
  }
  return op;
}

std::vector<Multivector> kernel_head_apply(const WeightedCayley& W,
                                           std::span<const Multivector> k,
                                           std::span<const Multivector> f) {
  if (f.size() != static_cast<std::size_t>(W.c_in)) throw Error("kernel head expects c_in inputs");
  const std::size_t n = W.sig.algebra_dim();
  const Eigen::MatrixXd op = head_operator(W, k);
  Eigen::VectorXd in(W.c_in * n);
  for (int i = 0; i < W.c_in; ++i) {
    if (!(f[i].signature() == W.sig)) throw Error("signature mismatch in kernel head");
    for (std::size_t b = 0; b < n; ++b) in[i * n + b] = f[i][b];
  }
  const Eigen::VectorXd out = op * in;
  std::vector<Multivector> result;
  for (int o = 0; o < W.c_out; ++o) {
    result.emplace_back(W.sig, std::vector<double>(out.data() + o * n, out.data() + (o + 1) * n));
  }
  return result;
}

std::vector<Multivector> kernel_head_apply_grades(const HeadWeights& w,
                                                  std::span<const Multivector> k,
                                                  std::span<const Multivector> f) {
  if (k.size() != static_cast<std::size_t>(w.c_in * w.c_out) ||
      f.size() != static_cast<std::size_t>(w.c_in)) {
    throw Error("kernel head shape mismatch");
  }
  const Signature sig = f.empty() ? Signature(1, 0) : f[0].signature();
  const int d = sig.dim();
  std::vector<Multivector> out(w.c_out, Multivector(sig));
  for (int o = 0; o < w.c_out; ++o) {
    for (int i = 0; i < w.c_in; ++i) {
      for (int m = 0; m <= d; ++m) {
        const Multivector km = grade_projection(k[o * w.c_in + i], m);
        for (int n = 0; n <= d; ++n) {
          const Multivector prod = geometric_product(km, grade_projection(f[i], n));
          for (int g = 0; g <= d; ++g) out[o] += w.at(o, i, g, m, n) * grade_projection(prod, g);
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd head_operator_grades(const HeadWeights& w, std::span<const Multivector> k) {
  if (k.empty()) throw Error("kernel head expects c_out*c_in multivectors");
  const Signature sig = k[0].signature();
  const std::size_t n = sig.algebra_dim();
  Eigen::MatrixXd op(w.c_out * n, w.c_in * n);
  std::vector<Multivector> basis(w.c_in, Multivector(sig));
  for (int i = 0; i < w.c_in; ++i) {
    for (BladeMask b = 0; b < n; ++b) {
      basis[i][b] = 1.0;
      const auto column = kernel_head_apply_grades(w, k, basis);
      basis[i][b] = 0.0;
      for (int o = 0; o < w.c_out; ++o) {
        for (BladeMask c = 0; c < n; ++c) op(o * n + c, i * n + b) = column[o][c];
      }
    }
  }
  return op;
}

Eigen::MatrixXd evaluate_kernel_at(const KernelParams& params, std::span<const double> v) {
  const auto k = kernel_matrix_at(params, v);
  if (params.config.head == HeadMode::grade) return head_operator_grades(params.head, k);
  return head_operator(expand_head(params), k);
}

std::size_t SteerableKernel::points() const {
  std::size_t n = 1;
  for (int x : sizes) n *= x;
  return n;
}

Eigen::MatrixXd SteerableKernel::block(std::size_t n) const {
  Eigen::MatrixXd op(rows(), cols());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < cols(); ++c) op(r, c) = at(r, c, n);
  }
  return op;
}

void SteerableKernel::set_block(std::size_t n, const Eigen::MatrixXd& op) {
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < cols(); ++c) at(r, c, n) = op(r, c);
  }
}

SteerableKernel make_zero_kernel(const Signature& sig, int c_in, int c_out,
                                 std::vector<int> sizes) {
  SteerableKernel k{sig, c_in, c_out, std::move(sizes), {}, {}};
  if (static_cast<int>(k.sizes.size()) != sig.dim()) throw Error("kernel rank must equal p+q");
  k.data.assign(k.rows() * k.cols() * k.points(), 0.0);
  return k;
}

namespace {

SteerableKernel generate(const KernelParams& params, bool parallel) {
  const auto& config = params.config;
  const KernelGrid grid = make_kernel_grid(config.sig, config.grid);
  SteerableKernel kernel = make_zero_kernel(config.sig, config.c_in, config.c_out, config.grid);
  kernel.provenance = to_json(config).dump();
  const WeightedCayley W = expand_head(params);
  const bool by_grades = config.head == HeadMode::grade;
  const auto total = static_cast<std::ptrdiff_t>(grid.size());

  auto point = [&](std::ptrdiff_t n) {
    const auto k = kernel_matrix_at(params, grid.point(n));
    kernel.set_block(n, by_grades ? head_operator_grades(params.head, k) : head_operator(W, k));
  };
  if (parallel) {
    // Any exception escaping an OpenMP region terminates; inputs are validated above.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < total; ++n) point(n);
  } else {
    for (std::ptrdiff_t n = 0; n < total; ++n) point(n);
  }
  return kernel;
}

}  // namespace

SteerableKernel generate_kernel(const KernelParams& params) { return generate(params, true); }
SteerableKernel generate_kernel_serial(const KernelParams& params) {
  return generate(params, false);
}

std::vector<ParamRef> param_refs(KernelParams& params, const std::string& prefix) {
  auto refs = param_refs(params.net, prefix + "net.");
  const int g = params.config.sig.grades();
  refs.push_back({prefix + "shell.sigma", {1}, std::span<double>(&params.shell.sigma, 1)});
  refs.push_back({prefix + "shell.mask_sigma", {g, params.config.c_in, params.config.c_out},
                  params.shell.mask_sigma, params.config.mask});
  const auto mode = params.config.head;
  refs.push_back({prefix + "head.w",
                  {params.config.c_out, params.config.c_in, g, g, g},
                  params.head.w,
                  mode == HeadMode::blade || mode == HeadMode::grade});
  if (mode == HeadMode::unstructured) {
    const int n = static_cast<int>(params.config.sig.algebra_dim());
    refs.push_back({prefix + "head.unstructured",
                    {params.config.c_out, params.config.c_in, n, n, n},
                    params.unstructured,
                    false});
  }
  return refs;
}

nlohmann::json to_json(const KernelConfig& config) {
  return {{"signature", {config.sig.p, config.sig.q}},
          {"grid", config.grid},
          {"channels", {config.c_in, config.c_out}},
          {"depth", config.depth},
          {"width", config.width},
          {"head_weights", to_string(config.head)},
          {"mask", config.mask},
          {"seed", config.seed}};
}

KernelConfig kernel_config_from_json(const nlohmann::json& j) {
  KernelConfig c;
  const auto& s = j.at("signature");
  c.sig = Signature(s.at(0).get<int>(), s.at(1).get<int>());
  c.grid = j.at("grid").get<std::vector<int>>();
  c.c_in = j.at("channels").at(0).get<int>();
  c.c_out = j.at("channels").at(1).get<int>();
  c.depth = j.at("depth").get<int>();
  c.width = j.at("width").get<int>();
  c.head = parse_head_mode(j.at("head_weights").get<std::string>());
  c.mask = j.at("mask").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  validate(c);
  return c;
}

nlohmann::json kernel_manifest(const KernelParams& params) {
  auto& mutable_params = const_cast<KernelParams&>(params);
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& ref : param_refs(mutable_params)) {
    tensors[ref.name] = {{"shape", ref.shape},
                         {"values", std::vector<double>(ref.data.begin(), ref.data.end())}};
  }
  return {{"version", 1}, {"config", to_json(params.config)}, {"tensors", tensors}};
}

KernelParams kernel_from_manifest(const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1) throw Error("unsupported kernel manifest version");
  KernelParams params = init_kernel(kernel_config_from_json(j.at("config")));
  const auto& tensors = j.at("tensors");
  auto refs = param_refs(params);
  if (tensors.size() != refs.size()) throw Error("kernel manifest has unexpected tensors");
  for (auto& ref : refs) {
    const auto values = tensors.at(ref.name).at("values").get<std::vector<double>>();
    if (values.size() != ref.data.size()) throw Error("tensor '" + ref.name + "' has wrong size");
    std::copy(values.begin(), values.end(), ref.data.begin());
  }
  return params;
}

}  // namespace csk
