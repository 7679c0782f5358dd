#include "csk/train.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <numbers>

#include "csk/autodiff.hpp"
#include "csk/verify.hpp"

namespace csk {

void validate(const CsCnnConfig& config) {
  if (config.channels.size() < 2) throw Error("CS-CNN needs at least one convolution");
  for (int c : config.channels) {
    if (c < 1) throw Error("channel counts must be positive");
  }
  if (config.residual && config.channels.front() != config.channels.back()) {
    throw Error("residual connection needs equal input and output channels");
  }
  for (std::size_t l = 0; l + 1 < config.channels.size(); ++l) {
    validate(layer_kernel_config(config, l));
  }
}

KernelConfig layer_kernel_config(const CsCnnConfig& config, std::size_t layer) {
  KernelConfig k;
  k.sig = config.sig;
  k.grid = config.kernel_grid;
  k.c_in = config.channels.at(layer);
  k.c_out = config.channels.at(layer + 1);
  k.depth = config.depth;
  k.width = config.width;
  k.head = config.head;
  k.mask = config.mask;
  k.seed = config.seed * 1000003ULL + layer;
  return k;
}

CsCnn init_cscnn(const CsCnnConfig& config) {
  validate(config);
  CsCnn model{config, {}, {}};
  for (std::size_t l = 0; l + 1 < config.channels.size(); ++l) {
    model.kernels.push_back(init_kernel(layer_kernel_config(config, l)));
    model.biases.emplace_back(config.bias ? config.channels[l + 1] : 0, 0.0);
  }
  return model;
}

std::vector<Layer> build_layers(const CsCnn& model) {
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < model.kernels.size(); ++l) {
    if (l > 0) layers.push_back(Layer{ActivationLayer{}});
    layers.push_back(Layer{ConvLayer{generate_kernel(model.kernels[l]), model.biases[l],
                                     model.config.padding}});
  }
  if (!model.config.residual) return layers;
  std::vector<Layer> wrapped;
  wrapped.push_back(Layer{ResidualBlock{std::move(layers)}});
  return wrapped;
}

MultivectorField cscnn_forward(const CsCnn& model, const MultivectorField& f) {
  const auto layers = build_layers(model);
  return model_forward(layers, f);
}

std::vector<ParamRef> param_refs(CsCnn& model) {
  std::vector<ParamRef> refs;
  for (std::size_t l = 0; l < model.kernels.size(); ++l) {
    auto k = param_refs(model.kernels[l], std::to_string(l) + ".");
    refs.insert(refs.end(), k.begin(), k.end());
    if (!model.biases[l].empty()) {
      refs.push_back({std::to_string(l) + ".bias",
                      {static_cast<int>(model.biases[l].size())},
                      model.biases[l]});
    }
  }
  return refs;
}

double loss_value(const CsCnn& model, std::span<const Sample> batch) {
  if (batch.empty()) throw Error("empty batch");
  const auto layers = build_layers(model);
  // extended accumulator keeps summation noise below finite-difference resolution
  long double sum = 0.0L;
  std::size_t count = 0;
  for (const Sample& s : batch) {
    const MultivectorField out = model_forward(layers, s.input);
    if (out.data.size() != s.target.data.size()) throw Error("target shape does not match output");
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const long double e = static_cast<long double>(out.data[i]) - s.target.data[i];
      sum += e * e;
    }
    count += out.data.size();
  }
  return static_cast<double>(sum / count);
}

namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

std::vector<std::size_t> as_shape(const std::vector<int>& s) {
  return std::vector<std::size_t>(s.begin(), s.end());
}

// Constants shared by every kernel graph of one signature.
struct AlgebraConstants {
  std::size_t blades = 0;
  std::size_t grades = 0;
  Tensor grade_onehot;  // (K, B)
  Tensor e0;            // (B)
  Tensor e0_row;        // (1, B)
  Tensor weighted;      // (K, K, K, B, B, B): [gr C][gr A][gr B] one-hot times Lambda^C_AB
};

AlgebraConstants algebra_constants(const Signature& sig) {
  AlgebraConstants c;
  const std::size_t n = sig.algebra_dim(), g = sig.grades();
  c.blades = n;
  c.grades = g;
  c.grade_onehot = Tensor::zeros({g, n});
  for (BladeMask a = 0; a < n; ++a) c.grade_onehot.data[blade_grade(a) * n + a] = 1.0;
  c.e0 = Tensor::zeros({n});
  c.e0.data[0] = 1.0;
  c.e0_row = Tensor::zeros({1, n});
  c.e0_row.data[0] = 1.0;
  c.weighted = Tensor::zeros({g, g, g, n, n, n});
  const auto table = cayley_table(sig);
  for (BladeMask a = 0; a < n; ++a) {
    for (BladeMask b = 0; b < n; ++b) {
      const BladeMask cc = a ^ b;
      const std::size_t kidx =
          (static_cast<std::size_t>(blade_grade(cc)) * g + blade_grade(a)) * g + blade_grade(b);
      c.weighted.data[((kidx * n + cc) * n + a) * n + b] = table->product_sign(a, b);
    }
  }
  return c;
}

struct GraphContext {
  Tape& tape;
  std::map<std::string, Var> leaves;
  AlgebraConstants alg;
};

// Operator field (c_out*B, c_in*B, N) of one kernel, unflipped.
Var kernel_graph(GraphContext& ctx, const KernelParams& params, const std::string& prefix) {
  Tape& t = ctx.tape;
  const auto& config = params.config;
  const Signature& sig = config.sig;
  const KernelGrid grid = make_kernel_grid(sig, config.grid);
  const std::size_t N = grid.size(), B = ctx.alg.blades, d = sig.dim();
  const std::size_t O = config.c_out, I = config.c_in;
  auto leaf = [&](const std::string& name) { return ctx.leaves.at(prefix + name); };

  Tensor neg_half_abs_q = Tensor::zeros({N}), sign_q = Tensor::zeros({N});
  Tensor vector_part = Tensor::zeros({N, 1, B});
  for (std::size_t n = 0; n < N; ++n) {
    const auto v = grid.point(n);
    const double q = sig.quadratic_form(v);
    neg_half_abs_q.data[n] = -0.5 * std::abs(q);
    sign_q.data[n] = q > 0.0 ? 1.0 : (q < 0.0 ? -1.0 : 0.0);
    for (std::size_t i = 0; i < d; ++i) vector_part.data[n * B + (BladeMask{1} << i)] = v[i];
  }
  const Var nq = t.constant(neg_half_abs_q), sq = t.constant(sign_q);
  const Var G = t.constant(ctx.alg.grade_onehot), e0 = t.constant(ctx.alg.e0);
  const Var T = t.constant(ctx.alg.weighted);

  // Scalar shell and embedding.
  const Var inv = t.reciprocal(t.square(leaf("shell.sigma")));
  const Var shell = t.einsum("n,n->n", t.exp(t.einsum("z,n->n", inv, nq)), sq);
  Var h = t.add(t.einsum("n,ca->nca", shell, t.constant(ctx.alg.e0_row)), t.constant(vector_part));

  // Kernel network.
  for (int layer = 0; layer < config.depth; ++layer) {
    const std::string base = "net." + std::to_string(layer);
    const Var w = t.einsum("kmc,ka->mca", leaf(base + ".linear.w"), G);
    h = t.einsum("nca,mca->nma", h, w);
    if (layer + 1 == config.depth) break;
    const Var wc = t.einsum("cxyz,xyzuvw->cuvw", leaf(base + ".product.w"), T);
    const Var prod = t.einsum("ncuw,ncw->ncu", t.einsum("ncv,cuvw->ncuw", h, wc), h);
    h = t.add(h, prod);
    const Var gate = t.normal_cdf(t.einsum("nca,a->nc", h, e0));
    h = t.einsum("nca,nc->nca", h, gate);
  }
  Var k = t.reshape(h, {N, O, I, B});

  if (config.mask) {
    const Var minv = t.reciprocal(t.square(leaf("shell.mask_sigma")));
    const Var shells = t.exp(t.einsum("kio,n->nkio", minv, nq));
    const Var mask = t.einsum("noia,n->noia", t.einsum("nkio,ka->noia", shells, G), sq);
    k = t.mul(k, mask);
  }

  Var W;
  if (config.head == HeadMode::unstructured) {
    W = leaf("head.unstructured");
  } else {
    W = t.einsum("oixyz,xyzuvw->oiuvw", leaf("head.w"), T);
  }
  const Var op = t.einsum("noiv,oiuvw->ouiwn", k, W);
  return t.reshape(op, {O * B, I * B, N});
}

std::shared_ptr<const std::vector<std::size_t>> flip_index(std::size_t rows_cols,
                                                           const std::vector<int>& sizes) {
  std::size_t N = 1;
  for (int s : sizes) N *= s;
  std::vector<std::size_t> mirror(N);
  std::vector<int> idx(sizes.size(), 0);
  for (std::size_t p = 0; p < N; ++p) {
    std::size_t m = 0;
    for (std::size_t a = 0; a < sizes.size(); ++a) m = m * sizes[a] + (sizes[a] - 1 - idx[a]);
    mirror[p] = m;
    for (std::ptrdiff_t a = static_cast<std::ptrdiff_t>(sizes.size()) - 1; a >= 0; --a) {
      if (++idx[a] < sizes[a]) break;
      idx[a] = 0;
    }
  }
  auto index = std::make_shared<std::vector<std::size_t>>(rows_cols * N);
  for (std::size_t rc = 0; rc < rows_cols; ++rc) {
    for (std::size_t p = 0; p < N; ++p) (*index)[rc * N + p] = rc * N + mirror[p];
  }
  return index;
}

}  // namespace

LossGradient loss_and_gradient(CsCnn& model, std::span<const Sample> batch) {
  if (batch.empty()) throw Error("empty batch");
  const auto& config = model.config;
  const Signature& sig = config.sig;
  const std::vector<int>& sizes = batch[0].input.sizes;
  const std::size_t Z = batch.size(), P = batch[0].input.points(), B = sig.algebra_dim();

  Tape tape;
  GraphContext ctx{tape, {}, algebra_constants(sig)};
  auto refs = param_refs(model);
  std::vector<Var> vars;
  for (const auto& ref : refs) {
    Tensor value(as_shape(ref.shape), std::vector<double>(ref.data.begin(), ref.data.end()));
    const Var v = ref.trainable ? tape.parameter(std::move(value)) : tape.constant(std::move(value));
    ctx.leaves.emplace(ref.name, v);
    vars.push_back(v);
  }

  const std::size_t c0 = config.channels.front(), cL = config.channels.back();
  Tensor in = Tensor::zeros({Z, c0 * B, P}), target = Tensor::zeros({Z, cL * B, P});
  for (std::size_t z = 0; z < Z; ++z) {
    const Sample& s = batch[z];
    if (s.input.sizes != sizes || s.input.channels != static_cast<int>(c0) ||
        s.target.channels != static_cast<int>(cL) || s.target.sizes != sizes) {
      throw Error("batch samples do not match the model");
    }
    const auto x = to_channel_major(s.input), y = to_channel_major(s.target);
    std::copy(x.begin(), x.end(), in.data.begin() + z * x.size());
    std::copy(y.begin(), y.end(), target.data.begin() + z * y.size());
  }
  const Var input = tape.constant(std::move(in));
  auto taps = std::make_shared<const std::vector<std::ptrdiff_t>>(
      correlation_taps(sizes, config.kernel_grid, config.padding));
  const Var ones = tape.constant(Tensor(std::vector<std::size_t>{Z, P}, std::vector<double>(Z * P, 1.0)));
  const Var e0 = tape.constant(ctx.alg.e0);

  Var h = input;
  for (std::size_t l = 0; l < model.kernels.size(); ++l) {
    const std::string prefix = std::to_string(l) + ".";
    const std::size_t ci = config.channels[l], co = config.channels[l + 1];
    if (l > 0) {
      const Var h4 = tape.reshape(h, {Z, ci, B, P});
      const Var gate = tape.normal_cdf(tape.einsum("zcap,a->zcp", h4, e0));
      h = tape.reshape(tape.einsum("zcap,zcp->zcap", h4, gate), {Z, ci * B, P});
    }
    const Var op = kernel_graph(ctx, model.kernels[l], prefix);
    const Var flipped = tape.gather(op, flip_index(co * B * ci * B, config.kernel_grid),
                                    {co * B, ci * B, make_kernel_grid(sig, config.kernel_grid).size()});
    h = tape.correlate(h, flipped, taps);
    if (!model.biases[l].empty()) {
      const Var b = tape.reshape(tape.einsum("c,a->ca", ctx.leaves.at(prefix + "bias"), e0), {co * B});
      h = tape.add(h, tape.einsum("c,zp->zcp", b, ones));
    }
  }
  if (config.residual) h = tape.add(h, input);
  const Var loss = tape.mean(tape.square(tape.sub(h, tape.constant(std::move(target)))));

  LossGradient result;
  result.loss = tape.value(loss).data[0];
  tape.backward(loss);
  for (std::size_t r = 0; r < refs.size(); ++r) {
    result.grads.push_back(refs[r].trainable ? tape.grad(vars[r]).data : std::vector<double>{});
  }
  return result;
}

MultivectorField synth_field(const Signature& sig, const std::vector<int>& sizes, int channels,
                             double smoothness, Rng& rng) {
  if (smoothness < 0.0) throw Error("smoothness must be non-negative");
  MultivectorField f = make_field(sig, channels, sizes);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : f.data) v = normal(rng);
  if (smoothness == 0.0) return f;

  const int radius = static_cast<int>(std::ceil(3.0 * smoothness));
  std::vector<double> taps(2 * radius + 1);
  double norm = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-0.5 * k * k / (smoothness * smoothness));
    norm += taps[k + radius] * taps[k + radius];
  }
  for (double& w : taps) w /= std::sqrt(norm);

  const std::size_t d = sizes.size(), B = f.blades(), P = f.points();
  std::vector<std::size_t> stride(d, 1);
  for (std::ptrdiff_t a = static_cast<std::ptrdiff_t>(d) - 2; a >= 0; --a) stride[a] = stride[a + 1] * sizes[a + 1];
  for (std::size_t axis = 0; axis < d; ++axis) {
    MultivectorField out = f;
    std::fill(out.data.begin(), out.data.end(), 0.0);
    const int len = sizes[axis];
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < P; ++p) {
        const int pos = static_cast<int>((p / stride[axis]) % len);
        for (int k = -radius; k <= radius; ++k) {
          const int src_pos = ((pos + k) % len + len) % len;
          const std::size_t src = p + (static_cast<std::ptrdiff_t>(src_pos) - pos) * static_cast<std::ptrdiff_t>(stride[axis]);
          const double w = taps[k + radius];
          for (std::size_t a = 0; a < B; ++a) out.at(c, p, a) += w * f.at(c, src, a);
        }
      }
    }
    f = std::move(out);
  }
  return f;
}

MultivectorField gradient_target(const MultivectorField& f) {
  MultivectorField out = make_field(f.sig, f.channels, f.sizes);
  const std::size_t d = f.sizes.size(), P = f.points();
  std::vector<std::size_t> stride(d, 1);
  for (std::ptrdiff_t a = static_cast<std::ptrdiff_t>(d) - 2; a >= 0; --a) stride[a] = stride[a + 1] * f.sizes[a + 1];
  for (int c = 0; c < f.channels; ++c) {
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t axis = 0; axis < d; ++axis) {
        const int len = f.sizes[axis];
        const int pos = static_cast<int>((p / stride[axis]) % len);
        const auto shifted = [&](int delta) {
          const int q = ((pos + delta) % len + len) % len;
          return p + (static_cast<std::ptrdiff_t>(q) - pos) * static_cast<std::ptrdiff_t>(stride[axis]);
        };
        out.at(c, p, BladeMask{1} << axis) = 0.5 * (f.at(c, shifted(1), 0) - f.at(c, shifted(-1), 0));
      }
    }
  }
  return out;
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "teacher_student") return TaskKind::teacher_student;
  if (text == "gradient_operator") return TaskKind::gradient_operator;
  throw Error("unknown task '" + text + "'");
}

std::string to_string(TaskKind kind) {
  return kind == TaskKind::teacher_student ? "teacher_student" : "gradient_operator";
}

Dataset make_dataset(const ToyTask& task) {
  if (task.train_size < 1 || task.test_size < 1) throw Error("dataset sizes must be positive");
  Rng rng(task.seed);
  Dataset data;
  auto fill = [&](std::vector<Sample>& out, int count) {
    for (int s = 0; s < count; ++s) {
      if (task.kind == TaskKind::gradient_operator) {
        MultivectorField f = synth_field(task.sig, task.sizes, 1, task.smoothness, rng);
        // only the scalar grade carries signal
        for (std::size_t p = 0; p < f.points(); ++p) {
          for (BladeMask a = 1; a < f.blades(); ++a) f.at(0, p, a) = 0.0;
        }
        MultivectorField y = gradient_target(f);
        out.push_back({std::move(f), std::move(y)});
      } else {
        out.push_back({synth_field(task.sig, task.sizes, task.teacher.channels.front(),
                                   task.smoothness, rng),
                       MultivectorField{}});
      }
    }
  };
  fill(data.train, task.train_size);
  fill(data.test, task.test_size);

  if (task.kind == TaskKind::teacher_student) {
    CsCnnConfig tc = task.teacher;
    tc.sig = task.sig;
    tc.seed = task.seed ^ 0x9e3779b97f4a7c15ULL;
    const CsCnn teacher = init_cscnn(tc);
    const auto layers = build_layers(teacher);
    for (auto* set : {&data.train, &data.test}) {
      for (Sample& s : *set) s.target = model_forward(layers, s.input);
    }
  }
  return data;
}

double relative_mse(const CsCnn& model, std::span<const Sample> samples) {
  const auto layers = build_layers(model);
  double err = 0.0, mean = 0.0, count = 0.0;
  for (const Sample& s : samples) {
    for (double v : s.target.data) mean += v;
    count += static_cast<double>(s.target.data.size());
  }
  mean /= count;
  double var = 0.0;
  for (const Sample& s : samples) {
    const MultivectorField out = model_forward(layers, s.input);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const double e = out.data[i] - s.target.data[i];
      const double c = s.target.data[i] - mean;
      err += e * e;
      var += c * c;
    }
  }
  if (var == 0.0) throw Error("target has zero variance");
  return err / var;
}

namespace {

double model_equivariance_error(const CsCnn& model, const MultivectorField& probe) {
  const auto layers = build_layers(model);
  const FieldMap fn = [&](const MultivectorField& f) { return model_forward(layers, f); };
  double worst = 0.0;
  std::vector<int> t(probe.sizes.size());
  for (std::size_t a = 0; a < t.size(); ++a) t[a] = static_cast<int>(a * 3 + 1) % probe.sizes[a];
  for (const GroupElement& g : grid_linear_parts(probe.sig)) {
    const double e = relative_equivariance_error(fn, IsometryAction{t, g}, probe);
    worst = std::isnan(e) ? e : std::max(worst, e);
    if (std::isnan(worst)) break;
  }
  return worst;
}

bool is_width(const std::string& name) {
  return name.ends_with("shell.sigma") || name.ends_with("shell.mask_sigma");
}

}  // namespace

TrainReport train_loop(const ToyTask& task, const CsCnnConfig& model_config,
                       const TrainOptions& options) {
  if (options.steps < 0 || options.batch < 1 || !(options.lr > 0.0)) {
    throw Error("invalid training options");
  }
  CsCnnConfig config = model_config;
  config.sig = task.sig;
  TrainReport report;
  report.model = init_cscnn(config);
  const Dataset data = make_dataset(task);
  if (report.model.config.channels.front() != data.train[0].input.channels ||
      report.model.config.channels.back() != data.train[0].target.channels) {
    throw Error("model channels do not match the task");
  }

  Rng probe_rng(task.seed + 17);
  const MultivectorField probe =
      synth_field(task.sig, task.sizes, data.train[0].input.channels, task.smoothness, probe_rng);

  report.initial_test_loss = loss_value(report.model, data.test);
  report.initial_relative_mse = relative_mse(report.model, data.test);

  const std::size_t n_train = data.train.size();
  for (int step = 0; step <= options.steps; ++step) {
    const bool checkpoint = step == 0 || step == options.steps || step == options.steps / 2 ||
                            (options.eval_every > 0 && step % options.eval_every == 0);
    TrainRecord rec{step, 0.0, -1.0};
    if (checkpoint) {
      rec.equivariance_error = model_equivariance_error(report.model, probe);
      if (!std::isnan(rec.equivariance_error)) {
        report.max_equivariance_error = std::max(report.max_equivariance_error, rec.equivariance_error);
      }
    }
    std::vector<Sample> batch;
    for (int b = 0; b < options.batch; ++b) {
      batch.push_back(data.train[(static_cast<std::size_t>(step) * options.batch + b) % n_train]);
    }
    if (step == options.steps) {
      rec.loss = loss_value(report.model, batch);
      report.records.push_back(rec);
      break;
    }
    const LossGradient lg = loss_and_gradient(report.model, batch);
    rec.loss = lg.loss;
    report.records.push_back(rec);
    if (!std::isfinite(lg.loss)) {
      report.diverged = true;
      std::cerr << "training diverged at step " << step << "\n";
      break;
    }
    const double lr =
        options.cosine
            ? 0.5 * options.lr * (1.0 + std::cos(std::numbers::pi * step / options.steps))
            : options.lr;
    auto refs = param_refs(report.model);
    for (std::size_t r = 0; r < refs.size(); ++r) {
      if (!refs[r].trainable) continue;
      const bool width = is_width(refs[r].name);
      for (std::size_t i = 0; i < refs[r].data.size(); ++i) {
        double& v = refs[r].data[i];
        v -= lr * lg.grads[r][i];
        if (width) v = std::max(v, options.min_width);
      }
    }
  }

  if (!report.diverged) {
    report.final_test_loss = loss_value(report.model, data.test);
    report.final_relative_mse = relative_mse(report.model, data.test);
  } else {
    report.final_test_loss = std::numeric_limits<double>::quiet_NaN();
    report.final_relative_mse = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

nlohmann::json to_json(const CsCnnConfig& c) {
  return {{"signature", {c.sig.p, c.sig.q}},
          {"kernel_grid", c.kernel_grid},
          {"channels", c.channels},
          {"depth", c.depth},
          {"width", c.width},
          {"head_weights", to_string(c.head)},
          {"mask", c.mask},
          {"bias", c.bias},
          {"residual", c.residual},
          {"padding", to_string(c.padding)},
          {"seed", c.seed}};
}

namespace {

void apply_config(const nlohmann::json& j, CsCnnConfig& c) {
  if (!j.is_object()) throw Error("model config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "signature") {
      c.sig = Signature(value.at(0).get<int>(), value.at(1).get<int>());
    } else if (key == "kernel_grid") {
      c.kernel_grid = value.get<std::vector<int>>();
    } else if (key == "channels") {
      c.channels = value.get<std::vector<int>>();
    } else if (key == "depth") {
      c.depth = value.get<int>();
    } else if (key == "width") {
      c.width = value.get<int>();
    } else if (key == "head_weights") {
      c.head = parse_head_mode(value.get<std::string>());
    } else if (key == "mask") {
      c.mask = value.get<bool>();
    } else if (key == "bias") {
      c.bias = value.get<bool>();
    } else if (key == "residual") {
      c.residual = value.get<bool>();
    } else if (key == "padding") {
      c.padding = parse_padding(value.get<std::string>());
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else {
      throw Error("unknown model config key '" + key + "'");
    }
  }
}

}  // namespace

CsCnnConfig cscnn_config_from_json(const nlohmann::json& j) {
  CsCnnConfig c;
  apply_config(j, c);
  validate(c);
  return c;
}

nlohmann::json to_json(const TrainRecord& r) {
  nlohmann::json j{{"step", r.step}, {"loss", r.loss}};
  j["equivariance_error"] = r.equivariance_error < 0.0 ? nlohmann::json(nullptr)
                                                       : nlohmann::json(r.equivariance_error);
  return j;
}

nlohmann::json cscnn_manifest(const CsCnn& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < model.kernels.size(); ++l) {
    layers.push_back({{"kernel", kernel_manifest(model.kernels[l])}, {"bias", model.biases[l]}});
  }
  return {{"version", 1}, {"config", to_json(model.config)}, {"layers", layers}};
}

TrainSetup train_preset(TaskKind kind, std::uint64_t seed) {
  TrainSetup s;
  s.task.kind = kind;
  s.task.seed = seed;
  s.model.seed = seed + 1;
  if (kind == TaskKind::teacher_student) {
    s.task.teacher.channels = {2, 2};
    s.task.teacher.kernel_grid = {5, 5};
    s.model = s.task.teacher;
    s.model.seed = seed + 1;
    s.model.width = 16;
    s.options.lr = 1.0;
    s.options.steps = 500;
    s.options.min_width = 0.3;
  } else {
    s.model.channels = {1, 1};
    s.model.kernel_grid = {3, 3};
    s.model.depth = 3;
    s.options.lr = 0.5;
    s.options.steps = 6000;
    s.options.eval_every = 500;
    s.options.min_width = 0.3;
  }
  return s;
}

nlohmann::json to_json(const TrainSetup& s) {
  const ToyTask& t = s.task;
  const TrainOptions& o = s.options;
  return {{"version", 1},
          {"task",
           {{"kind", to_string(t.kind)},
            {"signature", {t.sig.p, t.sig.q}},
            {"sizes", t.sizes},
            {"train_size", t.train_size},
            {"test_size", t.test_size},
            {"smoothness", t.smoothness},
            {"seed", t.seed},
            {"teacher", to_json(t.teacher)}}},
          {"model", to_json(s.model)},
          {"train",
           {{"steps", o.steps},
            {"lr", o.lr},
            {"cosine", o.cosine},
            {"batch", o.batch},
            {"eval_every", o.eval_every},
            {"min_width", o.min_width}}}};
}

TrainSetup train_setup_from_json(const nlohmann::json& j, const TrainSetup& base) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  if (!j.contains("version") || j.at("version") != 1) throw Error("config needs \"version\": 1");
  TrainSetup s = base;
  for (const auto& [key, value] : j.items()) {
    if (key == "version") continue;
    if (key == "model") {
      apply_config(value, s.model);
    } else if (key == "task") {
      for (const auto& [k, v] : value.items()) {
        if (k == "kind") s.task.kind = parse_task_kind(v.get<std::string>());
        else if (k == "signature") s.task.sig = Signature(v.at(0).get<int>(), v.at(1).get<int>());
        else if (k == "sizes") s.task.sizes = v.get<std::vector<int>>();
        else if (k == "train_size") s.task.train_size = v.get<int>();
        else if (k == "test_size") s.task.test_size = v.get<int>();
        else if (k == "smoothness") s.task.smoothness = v.get<double>();
        else if (k == "seed") s.task.seed = v.get<std::uint64_t>();
        else if (k == "teacher") apply_config(v, s.task.teacher);
        else throw Error("unknown task key '" + k + "'");
      }
    } else if (key == "train") {
      for (const auto& [k, v] : value.items()) {
        if (k == "steps") s.options.steps = v.get<int>();
        else if (k == "lr") s.options.lr = v.get<double>();
        else if (k == "cosine") s.options.cosine = v.get<bool>();
        else if (k == "batch") s.options.batch = v.get<int>();
        else if (k == "eval_every") s.options.eval_every = v.get<int>();
        else if (k == "min_width") s.options.min_width = v.get<double>();
        else throw Error("unknown train key '" + k + "'");
      }
    } else {
      throw Error("unknown config key '" + key + "'");
    }
  }
  validate(s.model);
  return s;
}

}  // namespace csk
