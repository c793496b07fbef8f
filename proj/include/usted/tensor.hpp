#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "usted/random.hpp"

// Dense double tensors with tape-based reverse-mode differentiation.
// A Tensor is a value; when produced by an op on a Graph it also carries a
// node handle. One Graph is recorded per training step and replayed in exact
// reverse order by backward().

namespace usted {

class Graph;
struct Parameter;

using Vec = std::vector<double>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, Vec data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor row(Vec data);                  // [1 x n]
  static Tensor uniform(std::vector<int> shape, double lo, double hi,
                        RandomStream& rng);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  // 2-D views; 1-D tensors count as a single row.
  int rows() const { return ndim() == 2 ? shape_[0] : 1; }
  int cols() const { return ndim() == 2 ? shape_[1] : (ndim() == 1 ? shape_[0] : 0); }
  std::size_t size() const;
  bool defined() const { return data_ != nullptr; }

  double item() const;  // requires size() == 1
  double at(int r, int c) const { return (*data_)[static_cast<std::size_t>(r) * cols() + c]; }

  const Vec& data() const { return *data_; }
  Vec& mutable_data() { return *data_; }
  const std::shared_ptr<Vec>& storage() const { return data_; }

  bool attached() const { return graph_ != nullptr; }
  Graph* graph() const { return graph_; }
  int node() const { return node_; }

 private:
  friend class Graph;
  std::vector<int> shape_;
  std::shared_ptr<Vec> data_;
  Graph* graph_ = nullptr;
  int node_ = -1;
};

// A persistent, trainable tensor. Gradients accumulate into `grad` when a
// graph the parameter participates in is backpropagated.
struct Parameter {
  std::string name;
  Tensor value;
  Vec grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.size(), 0.0) {}

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
  double grad_at(std::size_t i) const { return grad[i]; }
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kAddBias,
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kSoftmax,
  kLogSoftmax,
  kSoftmaxMasked,
  kEmbed,
  kConcat,
  kSliceRows,
  kSliceCols,
  kTranspose,
  kScale,
  kSum,
  kPick,
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf for a trainable parameter; memoized so repeated use within the graph
  // shares one node.
  Tensor param(Parameter& p);

  // Runs reverse-mode accumulation from a scalar loss. May be called once.
  void backward(const Tensor& loss);

  // Gradient of any recorded node (zeros if the node was not reached).
  Vec grad_of(const Tensor& t) const;

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  friend struct OpRecorder;

  struct Node {
    OpKind kind = OpKind::kLeaf;
    int p0 = -1, p1 = -1;                     // parent node ids (-1: constant)
    std::shared_ptr<const Vec> in0, in1;      // operand values
    std::vector<int> shape0, shape1;
    std::vector<int> parents_multi;           // concat
    std::vector<std::shared_ptr<const Vec>> ins_multi;
    std::vector<std::vector<int>> shapes_multi;
    std::shared_ptr<Vec> out;
    std::vector<int> out_shape;
    Vec grad;                                 // allocated on demand
    Parameter* param = nullptr;
    std::vector<int> ints;                    // ids / slice bounds
    double scalar = 0.0;
    int axis = 1;
  };

  Vec& grad_buf(int id);
  void backprop_node(int id);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool backward_done_ = false;
};

// ---- Ops ----
// Each op validates shapes, computes the value with the kernels, and records
// a node when an operand is attached to a graph. Mixing graphs is an error.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// x[m x n] + bias[1 x n] broadcast over rows (the only broadcast supported).
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
// axis 1: per row (2-D); axis 0: per column (2-D) or the whole 1-D vector.
Tensor softmax(const Tensor& x, int axis = 1);
Tensor log_softmax(const Tensor& x, int axis = 1);
// mask entries are 0/1; masked positions get weight exactly 0.
Tensor softmax_masked(const Tensor& x, const Tensor& mask, int axis = 1);
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice_rows(const Tensor& x, int r0, int r1);
Tensor slice_cols(const Tensor& x, int c0, int c1);
Tensor transpose(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor sum(const Tensor& x);
Tensor pick(const Tensor& x, int r, int c);

// ---- Gradient checking ----

// Central differences (f(x+eps) - f(x-eps)) / 2eps against backward() grads.
// Relative error denominator: max(|analytic|, |numeric|, 1e-8).
// `build_loss` must construct a fresh graph from the current parameter values.

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// coords_per_param <= 0 checks every coordinate.
GradCheckReport grad_check(const std::function<Tensor(Graph&)>& build_loss,
                           const std::vector<Parameter*>& params, double eps,
                           int coords_per_param = 0, std::uint64_t seed = 0);

// Single-input form: f maps one tensor to a scalar.
double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& f,
                  const Tensor& point, double eps);

}  // namespace usted
