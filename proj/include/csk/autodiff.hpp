#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace csk::ad {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v) { return Tensor({}, {v}); }
  std::size_t size() const { return data.size(); }
};

std::size_t element_count(const std::vector<std::size_t>& shape);

enum class Op {
  parameter,
  constant,
  add,
  sub,
  mul,
  scale,
  einsum,
  exp,
  abs,
  sign,
  normal_cdf,
  reciprocal,
  square,
  sum,
  mean,
  reshape,
  gather,
  correlate,
};

std::string to_string(Op op);

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

// Single-use reverse-mode tape. Nodes are appended in topological order; backward()
// sweeps them once in reverse and then releases every intermediate value.
class Tape {
public:
  Var parameter(Tensor value);
  Var constant(Tensor value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise, equal shapes
  Var scale(Var a, double s);
  // Two-operand Einstein summation, e.g. "noiA,oiCAB->oCiBn". Labels are single
  // characters; every output label must occur in an operand.
  Var einsum(const std::string& spec, Var a, Var b);
  Var exp(Var a);
  Var abs(Var a);
  Var sign(Var a);  // zero gradient everywhere
  Var normal_cdf(Var a);
  Var reciprocal(Var a);
  Var square(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var reshape(Var a, std::vector<std::size_t> shape);
  // out[j] = a[index[j]]; covers transposes and flips.
  Var gather(Var a, std::shared_ptr<const std::vector<std::size_t>> index,
             std::vector<std::size_t> shape);
  // in: (batch, c_in, P), w: (c_out, c_in, T) -> (batch, c_out, P); taps from
  // correlation_taps, layout [P][T], -1 = zero padding.
  Var correlate(Var in, Var w, std::shared_ptr<const std::vector<std::ptrdiff_t>> taps);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() loss with respect to a parameter.
  const Tensor& grad(Var v) const;

  void backward(Var loss);
  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Node(Op op_, Tensor value_, std::vector<std::size_t> parents_)
        : op(op_), value(std::move(value_)), parents(std::move(parents_)) {}
    Op op;
    Tensor value;
    std::vector<std::size_t> parents;
    bool needs_grad = false;
    Tensor grad;
    double scalar = 0.0;
    std::string spec;
    std::shared_ptr<const std::vector<std::size_t>> index;
    std::shared_ptr<const std::vector<std::ptrdiff_t>> taps;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void accumulate(std::size_t id, const std::vector<double>& g);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// General einsum kernel shared by forward and backward passes. `dims` maps every
// label to its extent; output labels absent from both operands broadcast.
std::vector<double> einsum_kernel(const std::string& la, const std::vector<double>& a,
                                  const std::string& lb, const std::vector<double>& b,
                                  const std::string& lout, const std::map<char, std::size_t>& dims);

}  // namespace csk::ad
