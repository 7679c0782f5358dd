#include "csk/autodiff.hpp"

#include <cmath>

#include "csk/algebra.hpp"
#include "csk/cgenn.hpp"

namespace csk::ad {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (element_count(shape) != data.size()) throw Error("tensor data does not match its shape");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

std::string to_string(Op op) {
  switch (op) {
    case Op::parameter: return "parameter";
    case Op::constant: return "constant";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::einsum: return "einsum";
    case Op::exp: return "exp";
    case Op::abs: return "abs";
    case Op::sign: return "sign";
    case Op::normal_cdf: return "normal_cdf";
    case Op::reciprocal: return "reciprocal";
    case Op::square: return "square";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::reshape: return "reshape";
    case Op::gather: return "gather";
    case Op::correlate: return "correlate";
  }
  return "?";
}

std::vector<double> einsum_kernel(const std::string& la, const std::vector<double>& a,
                                  const std::string& lb, const std::vector<double>& b,
                                  const std::string& lout, const std::map<char, std::size_t>& dims) {
  std::string labels = lout;
  for (char c : la + lb) {
    if (labels.find(c) == std::string::npos) labels += c;
  }
  const std::size_t L = labels.size();
  auto strides_for = [&](const std::string& operand) {
    std::vector<std::size_t> s(L, 0);
    std::size_t stride = 1;
    for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(operand.size()) - 1; k >= 0; --k) {
      const std::size_t pos = labels.find(operand[k]);
      s[pos] = stride;
      stride *= dims.at(operand[k]);
    }
    return s;
  };
  const auto sa = strides_for(la), sb = strides_for(lb), so = strides_for(lout);
  std::vector<std::size_t> dim(L);
  std::size_t total = 1, out_size = 1;
  for (std::size_t l = 0; l < L; ++l) {
    dim[l] = dims.at(labels[l]);
    total *= dim[l];
  }
  for (char c : lout) out_size *= dims.at(c);

  std::vector<double> out(out_size, 0.0);
  if (total == 0) return out;
  std::vector<std::size_t> idx(L, 0);
  std::size_t ia = 0, ib = 0, io = 0;
  for (std::size_t count = 0; count < total; ++count) {
    out[io] += a[ia] * b[ib];
    for (std::ptrdiff_t l = static_cast<std::ptrdiff_t>(L) - 1; l >= 0; --l) {
      ++idx[l];
      ia += sa[l];
      ib += sb[l];
      io += so[l];
      if (idx[l] < dim[l]) break;
      ia -= sa[l] * dim[l];
      ib -= sb[l] * dim[l];
      io -= so[l] * dim[l];
      idx[l] = 0;
    }
  }
  return out;
}

namespace {

struct EinsumSpec {
  std::string a, b, out;
};

EinsumSpec parse_einsum(const std::string& spec) {
  const auto comma = spec.find(',');
  const auto arrow = spec.find("->");
  if (comma == std::string::npos || arrow == std::string::npos || arrow < comma) {
    throw Error("einsum spec must look like 'ab,bc->ac', got '" + spec + "'");
  }
  return {spec.substr(0, comma), spec.substr(comma + 1, arrow - comma - 1), spec.substr(arrow + 2)};
}

std::map<char, std::size_t> label_dims(const EinsumSpec& s, const Tensor& a, const Tensor& b) {
  std::map<char, std::size_t> dims;
  auto bind = [&](const std::string& labels, const Tensor& t) {
    if (labels.size() != t.shape.size()) {
      throw Error("einsum operand rank " + std::to_string(t.shape.size()) + " does not match '" +
                  labels + "'");
    }
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (labels.find(labels[k]) != k) throw Error("repeated einsum label in one operand");
      auto [it, fresh] = dims.emplace(labels[k], t.shape[k]);
      if (!fresh && it->second != t.shape[k]) {
        throw Error(std::string("einsum label '") + labels[k] + "' has inconsistent extents");
      }
    }
  };
  bind(s.a, a);
  bind(s.b, b);
  for (char c : s.out) {
    if (!dims.contains(c)) throw Error(std::string("einsum output label '") + c + "' is unbound");
  }
  return dims;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape != b.shape) throw Error(std::string(what) + ": operand shapes differ");
}

}  // namespace

Var Tape::push(Node n) {
  if (consumed_) throw Error("tape already consumed by backward()");
  for (std::size_t p : n.parents) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw Error("variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::parameter(Tensor value) {
  Node n{Op::parameter, std::move(value), {}};
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) { return push(Node{Op::constant, std::move(value), {}}); }

Var Tape::add(Var a, Var b) {
  const Tensor &x = node(a).value, &y = node(b).value;
  check_same_shape(x, y, "add");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += y.data[i];
  return push(Node{Op::add, std::move(out), {a.id, b.id}});
}

Var Tape::sub(Var a, Var b) {
  const Tensor &x = node(a).value, &y = node(b).value;
  check_same_shape(x, y, "sub");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= y.data[i];
  return push(Node{Op::sub, std::move(out), {a.id, b.id}});
}

Var Tape::mul(Var a, Var b) {
  const Tensor &x = node(a).value, &y = node(b).value;
  check_same_shape(x, y, "mul");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= y.data[i];
  return push(Node{Op::mul, std::move(out), {a.id, b.id}});
}

Var Tape::scale(Var a, double s) {
  Tensor out = node(a).value;
  for (double& v : out.data) v *= s;
  Node n{Op::scale, std::move(out), {a.id}};
  n.scalar = s;
  return push(std::move(n));
}

Var Tape::einsum(const std::string& spec, Var a, Var b) {
  const auto s = parse_einsum(spec);
  const Tensor &x = node(a).value, &y = node(b).value;
  const auto dims = label_dims(s, x, y);
  std::vector<std::size_t> shape;
  for (char c : s.out) shape.push_back(dims.at(c));
  Tensor out(shape, einsum_kernel(s.a, x.data, s.b, y.data, s.out, dims));
  Node n{Op::einsum, std::move(out), {a.id, b.id}};
  n.spec = spec;
  return push(std::move(n));
}

namespace {

template <class F>
Tensor map(const Tensor& t, F f) {
  Tensor out = t;
  for (double& v : out.data) v = f(v);
  return out;
}

}  // namespace

Var Tape::exp(Var a) {
  return push(Node{Op::exp, map(node(a).value, [](double v) { return std::exp(v); }), {a.id}});
}

Var Tape::abs(Var a) {
  return push(Node{Op::abs, map(node(a).value, [](double v) { return std::abs(v); }), {a.id}});
}

Var Tape::sign(Var a) {
  auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  return push(Node{Op::sign, map(node(a).value, sgn), {a.id}});
}

Var Tape::normal_cdf(Var a) {
  return push(
      Node{Op::normal_cdf, map(node(a).value, [](double v) { return csk::normal_cdf(v); }), {a.id}});
}

Var Tape::reciprocal(Var a) {
  return push(Node{Op::reciprocal, map(node(a).value, [](double v) { return 1.0 / v; }), {a.id}});
}

Var Tape::square(Var a) {
  return push(Node{Op::square, map(node(a).value, [](double v) { return v * v; }), {a.id}});
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (double v : node(a).value.data) s += v;
  return push(Node{Op::sum, Tensor::scalar(s), {a.id}});
}

Var Tape::mean(Var a) {
  const Tensor& x = node(a).value;
  if (x.size() == 0) throw Error("mean of an empty tensor");
  double s = 0.0;
  for (double v : x.data) s += v;
  return push(Node{Op::mean, Tensor::scalar(s / static_cast<double>(x.size())), {a.id}});
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  Tensor out = node(a).value;
  if (element_count(shape) != out.size()) throw Error("reshape changes the element count");
  out.shape = std::move(shape);
  return push(Node{Op::reshape, std::move(out), {a.id}});
}

Var Tape::gather(Var a, std::shared_ptr<const std::vector<std::size_t>> index,
                 std::vector<std::size_t> shape) {
  const Tensor& x = node(a).value;
  if (element_count(shape) != index->size()) throw Error("gather index does not match shape");
  Tensor out = Tensor::zeros(std::move(shape));
  for (std::size_t j = 0; j < index->size(); ++j) {
    if ((*index)[j] >= x.size()) throw Error("gather index out of range");
    out.data[j] = x.data[(*index)[j]];
  }
  Node n{Op::gather, std::move(out), {a.id}};
  n.index = std::move(index);
  return push(std::move(n));
}

Var Tape::correlate(Var in, Var w, std::shared_ptr<const std::vector<std::ptrdiff_t>> taps) {
  const Tensor &x = node(in).value, &k = node(w).value;
  if (x.shape.size() != 3 || k.shape.size() != 3 || x.shape[1] != k.shape[1]) {
    throw Error("correlate expects in (batch, c_in, P) and w (c_out, c_in, T)");
  }
  const std::size_t batch = x.shape[0], c_in = x.shape[1], points = x.shape[2];
  const std::size_t c_out = k.shape[0], n_taps = k.shape[2];
  if (taps->size() != points * n_taps) throw Error("correlate tap table has wrong size");

  Tensor out = Tensor::zeros({batch, c_out, points});
  const auto total = static_cast<std::ptrdiff_t>(batch * c_out * points);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t job = 0; job < total; ++job) {
    const std::size_t b = job / (c_out * points);
    const std::size_t o = (job / points) % c_out;
    const std::size_t p = job % points;
    const std::ptrdiff_t* row = taps->data() + p * n_taps;
    double acc = 0.0;
    for (std::size_t i = 0; i < c_in; ++i) {
      const double* wi = k.data.data() + (o * c_in + i) * n_taps;
      const double* xi = x.data.data() + (b * c_in + i) * points;
      for (std::size_t t = 0; t < n_taps; ++t) {
        if (row[t] >= 0) acc += wi[t] * xi[row[t]];
      }
    }
    out.data[job] = acc;
  }
  Node n{Op::correlate, std::move(out), {in.id, w.id}};
  n.taps = std::move(taps);
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!consumed_) throw Error("grad() requires a completed backward()");
  if (n.op != Op::parameter) throw Error("gradients are kept for parameters only");
  return n.grad;
}

void Tape::accumulate(std::size_t id, const std::vector<double>& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
  for (std::size_t i = 0; i < g.size(); ++i) n.grad.data[i] += g[i];
}

void Tape::backward(Var loss) {
  if (consumed_) throw Error("backward() already ran on this tape");
  if (node(loss).value.size() != 1) throw Error("backward() needs a scalar loss");
  nodes_[loss.id].grad = Tensor(nodes_[loss.id].value.shape, {1.0});

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.data.empty() || n.op == Op::parameter) continue;
    const std::vector<double>& g = n.grad.data;
    auto parent_value = [&](std::size_t k) -> const Tensor& { return nodes_[n.parents[k]].value; };

    switch (n.op) {
      case Op::add:
        accumulate(n.parents[0], g);
        accumulate(n.parents[1], g);
        break;
      case Op::sub: {
        accumulate(n.parents[0], g);
        std::vector<double> neg(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
        accumulate(n.parents[1], neg);
        break;
      }
      case Op::mul: {
        const Tensor &x = parent_value(0), &y = parent_value(1);
        std::vector<double> gx(g.size()), gy(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
          gx[i] = g[i] * y.data[i];
          gy[i] = g[i] * x.data[i];
        }
        accumulate(n.parents[0], gx);
        accumulate(n.parents[1], gy);
        break;
      }
      case Op::scale: {
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * n.scalar;
        accumulate(n.parents[0], gx);
        break;
      }
      case Op::einsum: {
        const auto s = parse_einsum(n.spec);
        const Tensor &x = parent_value(0), &y = parent_value(1);
        const auto dims = label_dims(s, x, y);
        if (nodes_[n.parents[0]].needs_grad) {
          accumulate(n.parents[0], einsum_kernel(s.out, g, s.b, y.data, s.a, dims));
        }
        if (nodes_[n.parents[1]].needs_grad) {
          accumulate(n.parents[1], einsum_kernel(s.out, g, s.a, x.data, s.b, dims));
        }
        break;
      }
      case Op::exp: {
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * n.value.data[i];
        accumulate(n.parents[0], gx);
        break;
      }
      case Op::abs: {
        const Tensor& x = parent_value(0);
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = x.data[i];
          gx[i] = v > 0.0 ? g[i] : (v < 0.0 ? -g[i] : 0.0);
        }
        accumulate(n.parents[0], gx);
        break;
      }
      case Op::sign:
        break;
      case Op::normal_cdf: {
        const Tensor& x = parent_value(0);
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * csk::normal_pdf(x.data[i]);
        accumulate(n.parents[0], gx);
        break;
      }
      case Op::reciprocal: {
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = -g[i] * n.value.data[i] * n.value.data[i];
        accumulate(n.parents[0], gx);
        break;
      }
      case Op::square: {
        const Tensor& x = parent_value(0);
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = 2.0 * g[i] * x.data[i];
        accumulate(n.parents[0], gx);
        break;
      }
      case Op::sum:
        accumulate(n.parents[0], std::vector<double>(parent_value(0).size(), g[0]));
        break;
      case Op::mean: {
        const std::size_t size = parent_value(0).size();
        accumulate(n.parents[0], std::vector<double>(size, g[0] / static_cast<double>(size)));
        break;
      }
      case Op::reshape:
        accumulate(n.parents[0], g);
        break;
      case Op::gather: {
        std::vector<double> gx(parent_value(0).size(), 0.0);
        for (std::size_t j = 0; j < g.size(); ++j) gx[(*n.index)[j]] += g[j];
        accumulate(n.parents[0], gx);
        break;
      }
      case Op::correlate: {
        const Tensor &x = parent_value(0), &k = parent_value(1);
        const std::size_t batch = x.shape[0], c_in = x.shape[1], points = x.shape[2];
        const std::size_t c_out = k.shape[0], n_taps = k.shape[2];
        const auto& taps = *n.taps;
        if (nodes_[n.parents[0]].needs_grad) {
          std::vector<double> gx(x.size(), 0.0);
          const auto jobs = static_cast<std::ptrdiff_t>(batch * c_in);
#pragma omp parallel for schedule(static)
          for (std::ptrdiff_t job = 0; job < jobs; ++job) {
            const std::size_t b = job / c_in, i = job % c_in;
            double* gxi = gx.data() + (b * c_in + i) * points;
            for (std::size_t o = 0; o < c_out; ++o) {
              const double* wi = k.data.data() + (o * c_in + i) * n_taps;
              const double* go = g.data() + (b * c_out + o) * points;
              for (std::size_t p = 0; p < points; ++p) {
                const std::ptrdiff_t* row = taps.data() + p * n_taps;
                for (std::size_t t = 0; t < n_taps; ++t) {
                  if (row[t] >= 0) gxi[row[t]] += go[p] * wi[t];
                }
              }
            }
          }
          accumulate(n.parents[0], gx);
        }
        if (nodes_[n.parents[1]].needs_grad) {
          std::vector<double> gk(k.size(), 0.0);
          const auto jobs = static_cast<std::ptrdiff_t>(c_out * c_in);
#pragma omp parallel for schedule(static)
          for (std::ptrdiff_t job = 0; job < jobs; ++job) {
            const std::size_t o = job / c_in, i = job % c_in;
            double* gki = gk.data() + job * n_taps;
            for (std::size_t b = 0; b < batch; ++b) {
              const double* xi = x.data.data() + (b * c_in + i) * points;
              const double* go = g.data() + (b * c_out + o) * points;
              for (std::size_t p = 0; p < points; ++p) {
                const std::ptrdiff_t* row = taps.data() + p * n_taps;
                for (std::size_t t = 0; t < n_taps; ++t) {
                  if (row[t] >= 0) gki[t] += go[p] * xi[row[t]];
                }
              }
            }
          }
          accumulate(n.parents[1], gk);
        }
        break;
      }
      default:
        throw Error("backward: unsupported op '" + to_string(n.op) + "' in graph");
    }
    n.grad = Tensor();
  }

  for (Node& n : nodes_) {
    if (n.op != Op::parameter) {
      n.value = Tensor();
    } else if (n.grad.data.empty()) {
      n.grad = Tensor::zeros(n.value.shape);  // not reached by the loss
    }
  }
  consumed_ = true;
}

}  // namespace csk::ad
