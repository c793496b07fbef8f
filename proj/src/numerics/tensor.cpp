#include "usted/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "usted/kernels.hpp"

namespace usted {

namespace {

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    // 0 is allowed so an empty lookup can yield a 0 x d tensor.
    if (d < 0) throw std::invalid_argument("tensor dims must be non-negative");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

void require_2d(const Tensor& t, const char* what) {
  if (t.ndim() != 2)
    throw std::invalid_argument(std::string(what) + ": expected 2-D tensor, got " +
                                shape_str(t.shape()));
}

Graph* common_graph(const Tensor& a, const Tensor& b) {
  if (a.attached() && b.attached() && a.graph() != b.graph())
    throw std::invalid_argument("operands recorded on different graphs");
  return a.attached() ? a.graph() : (b.attached() ? b.graph() : nullptr);
}

void check_finite(const Vec& v, const char* op) {
  for (double x : v)
    if (!std::isfinite(x))
      throw std::runtime_error(std::string(op) + ": non-finite value");
}

// (outer groups, group length, element stride, base stride between groups)
struct AxisView {
  int groups, len, stride, group_stride;
};

AxisView axis_view(const std::vector<int>& shape, int axis) {
  if (shape.size() == 1) return {1, shape[0], 1, 0};
  if (shape.size() != 2) throw std::invalid_argument("softmax: tensor must be 1-D or 2-D");
  if (axis == 1) return {shape[0], shape[1], 1, shape[1]};
  if (axis == 0) return {shape[1], shape[0], shape[1], 1};
  throw std::invalid_argument("softmax: axis must be 0 or 1");
}

}  // namespace

// ---- Tensor ----

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(std::make_shared<Vec>(numel(shape_), 0.0)) {}

Tensor::Tensor(std::vector<int> shape, Vec data) : shape_(std::move(shape)) {
  if (numel(shape_) != data.size())
    throw std::invalid_argument("data length does not match shape " + shape_str(shape_));
  data_ = std::make_shared<Vec>(std::move(data));
}

Tensor Tensor::row(Vec data) {
  const int n = static_cast<int>(data.size());
  return Tensor({1, n}, std::move(data));
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, RandomStream& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.mutable_data()) x = rng.uniform(lo, hi);
  return t;
}

std::size_t Tensor::size() const { return data_ ? data_->size() : 0; }

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("item(): tensor has " + std::to_string(size()) + " elements");
  return (*data_)[0];
}

// ---- Graph recording ----

struct OpRecorder {
  Graph* g = nullptr;
  Graph::Node node;

  explicit OpRecorder(Graph* graph, OpKind kind) : g(graph) { node.kind = kind; }

  void operand0(const Tensor& t) {
    node.p0 = t.attached() ? t.node() : -1;
    node.in0 = t.storage();
    node.shape0 = t.shape();
  }
  void operand1(const Tensor& t) {
    node.p1 = t.attached() ? t.node() : -1;
    node.in1 = t.storage();
    node.shape1 = t.shape();
  }

  Tensor finish(std::vector<int> out_shape, std::shared_ptr<Vec> out) {
    Tensor t;
    t.shape_ = std::move(out_shape);
    t.data_ = out;
    if (g) {
      node.out = std::move(out);
      node.out_shape = t.shape_;
      t.graph_ = g;
      t.node_ = static_cast<int>(g->nodes_.size());
      g->nodes_.push_back(std::move(node));
    }
    return t;
  }
};

Tensor Graph::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) {
    Tensor t;
    t.shape_ = p.value.shape();
    t.data_ = p.value.storage();
    t.graph_ = this;
    t.node_ = it->second;
    return t;
  }
  OpRecorder rec(this, OpKind::kLeaf);
  rec.node.param = &p;
  Tensor t = rec.finish(p.value.shape(), p.value.storage());
  param_nodes_[&p] = t.node_;
  return t;
}

Vec& Graph::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad.assign(n.out->size(), 0.0);
  return n.grad;
}

void Graph::backward(const Tensor& loss) {
  if (loss.graph() != this || loss.node() < 0)
    throw std::invalid_argument("backward: loss is not recorded on this graph");
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(loss.shape()));
  if (backward_done_) throw std::runtime_error("backward: graph already backpropagated");
  backward_done_ = true;

  grad_buf(loss.node()).assign(1, 1.0);
  for (int id = loss.node(); id >= 0; --id) {
    if (nodes_[static_cast<std::size_t>(id)].grad.empty()) continue;
    backprop_node(id);
  }
}

Vec Graph::grad_of(const Tensor& t) const {
  if (t.graph() != this || t.node() < 0)
    throw std::invalid_argument("grad_of: tensor is not recorded on this graph");
  const Node& n = nodes_[static_cast<std::size_t>(t.node())];
  if (n.grad.empty()) return Vec(t.size(), 0.0);
  return n.grad;
}

void Graph::backprop_node(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Vec& g = n.grad;
  const std::size_t gsize = g.size();

  auto into = [&](int parent) -> Vec* {
    if (parent < 0) return nullptr;
    Node& pn = nodes_[static_cast<std::size_t>(parent)];
    if (pn.grad.empty()) pn.grad.assign(pn.out->size(), 0.0);
    return &pn.grad;
  };

  switch (n.kind) {
    case OpKind::kLeaf: {
      if (n.param) {
        kernels::axpy(1.0, g.data(), n.param->grad.data(), gsize);
      }
      break;
    }
    case OpKind::kMatmul: {
      const int m = n.shape0[0], k = n.shape0[1], nn = n.shape1[1];
      if (Vec* da = into(n.p0))
        kernels::matmul_nt_acc(g.data(), n.in1->data(), da->data(), m, nn, k);
      if (Vec* db = into(n.p1))
        kernels::matmul_tn_acc(n.in0->data(), g.data(), db->data(), k, m, nn);
      break;
    }
    case OpKind::kAdd: {
      if (Vec* da = into(n.p0)) kernels::axpy(1.0, g.data(), da->data(), gsize);
      if (Vec* db = into(n.p1)) kernels::axpy(1.0, g.data(), db->data(), gsize);
      break;
    }
    case OpKind::kSub: {
      if (Vec* da = into(n.p0)) kernels::axpy(1.0, g.data(), da->data(), gsize);
      if (Vec* db = into(n.p1)) kernels::axpy(-1.0, g.data(), db->data(), gsize);
      break;
    }
    case OpKind::kMul: {
      if (Vec* da = into(n.p0))
        for (std::size_t i = 0; i < gsize; ++i) (*da)[i] += g[i] * (*n.in1)[i];
      if (Vec* db = into(n.p1))
        for (std::size_t i = 0; i < gsize; ++i) (*db)[i] += g[i] * (*n.in0)[i];
      break;
    }
    case OpKind::kAddBias: {
      const int m = n.shape0[0], c = n.shape0[1];
      if (Vec* dx = into(n.p0)) kernels::axpy(1.0, g.data(), dx->data(), gsize);
      if (Vec* db = into(n.p1)) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < c; ++j)
            (*db)[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * c + j];
      }
      break;
    }
    case OpKind::kTanh: {
      if (Vec* dx = into(n.p0)) {
        const Vec& y = *n.out;
        for (std::size_t i = 0; i < gsize; ++i) (*dx)[i] += g[i] * (1.0 - y[i] * y[i]);
      }
      break;
    }
    case OpKind::kSigmoid: {
      if (Vec* dx = into(n.p0)) {
        const Vec& y = *n.out;
        for (std::size_t i = 0; i < gsize; ++i) (*dx)[i] += g[i] * y[i] * (1.0 - y[i]);
      }
      break;
    }
    case OpKind::kExp: {
      if (Vec* dx = into(n.p0)) {
        const Vec& y = *n.out;
        for (std::size_t i = 0; i < gsize; ++i) (*dx)[i] += g[i] * y[i];
      }
      break;
    }
    case OpKind::kLog: {
      if (Vec* dx = into(n.p0)) {
        const Vec& x = *n.in0;
        for (std::size_t i = 0; i < gsize; ++i) (*dx)[i] += g[i] / x[i];
      }
      break;
    }
    case OpKind::kSoftmax:
    case OpKind::kSoftmaxMasked: {
      if (Vec* dx = into(n.p0)) {
        const Vec& y = *n.out;
        const AxisView v = axis_view(n.out_shape, n.axis);
        for (int grp = 0; grp < v.groups; ++grp) {
          const std::size_t base = static_cast<std::size_t>(grp) * v.group_stride;
          double dot = 0.0;
          for (int i = 0; i < v.len; ++i) {
            const std::size_t idx = base + static_cast<std::size_t>(i) * v.stride;
            dot += g[idx] * y[idx];
          }
          for (int i = 0; i < v.len; ++i) {
            const std::size_t idx = base + static_cast<std::size_t>(i) * v.stride;
            (*dx)[idx] += y[idx] * (g[idx] - dot);
          }
        }
      }
      break;
    }
    case OpKind::kLogSoftmax: {
      if (Vec* dx = into(n.p0)) {
        const Vec& y = *n.out;
        const AxisView v = axis_view(n.out_shape, n.axis);
        for (int grp = 0; grp < v.groups; ++grp) {
          const std::size_t base = static_cast<std::size_t>(grp) * v.group_stride;
          double gsum = 0.0;
          for (int i = 0; i < v.len; ++i)
            gsum += g[base + static_cast<std::size_t>(i) * v.stride];
          for (int i = 0; i < v.len; ++i) {
            const std::size_t idx = base + static_cast<std::size_t>(i) * v.stride;
            (*dx)[idx] += g[idx] - std::exp(y[idx]) * gsum;
          }
        }
      }
      break;
    }
    case OpKind::kEmbed: {
      if (Vec* dt = into(n.p0)) {
        const int d = n.shape0[1];
        for (std::size_t u = 0; u < n.ints.size(); ++u) {
          const std::size_t dst = static_cast<std::size_t>(n.ints[u]) * d;
          const std::size_t src = u * static_cast<std::size_t>(d);
          for (int j = 0; j < d; ++j) (*dt)[dst + j] += g[src + j];
        }
      }
      break;
    }
    case OpKind::kConcat: {
      const bool by_rows = n.axis == 0;
      const int out_cols = n.out_shape[1];
      std::size_t row_off = 0, col_off = 0;
      for (std::size_t part = 0; part < n.parents_multi.size(); ++part) {
        const auto& ps = n.shapes_multi[part];
        const int pr = ps[0], pc = ps[1];
        if (n.parents_multi[part] >= 0) {
          Vec* dp = into(n.parents_multi[part]);
          for (int i = 0; i < pr; ++i)
            for (int j = 0; j < pc; ++j) {
              const std::size_t src =
                  (row_off + i) * static_cast<std::size_t>(out_cols) + col_off + j;
              (*dp)[static_cast<std::size_t>(i) * pc + j] += g[src];
            }
        }
        if (by_rows) row_off += static_cast<std::size_t>(pr);
        else col_off += static_cast<std::size_t>(pc);
      }
      break;
    }
    case OpKind::kSliceRows: {
      if (Vec* dx = into(n.p0)) {
        const int c = n.shape0[1], r0 = n.ints[0];
        kernels::axpy(1.0, g.data(), dx->data() + static_cast<std::size_t>(r0) * c, gsize);
      }
      break;
    }
    case OpKind::kSliceCols: {
      if (Vec* dx = into(n.p0)) {
        const int rows = n.out_shape[0], w = n.out_shape[1];
        const int c = n.shape0[1], c0 = n.ints[0];
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < w; ++j)
            (*dx)[static_cast<std::size_t>(i) * c + c0 + j] +=
                g[static_cast<std::size_t>(i) * w + j];
      }
      break;
    }
    case OpKind::kTranspose: {
      if (Vec* dx = into(n.p0)) {
        const int m = n.shape0[0], c = n.shape0[1];
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < c; ++j)
            (*dx)[static_cast<std::size_t>(i) * c + j] +=
                g[static_cast<std::size_t>(j) * m + i];
      }
      break;
    }
    case OpKind::kScale: {
      if (Vec* dx = into(n.p0)) kernels::axpy(n.scalar, g.data(), dx->data(), gsize);
      break;
    }
    case OpKind::kSum: {
      if (Vec* dx = into(n.p0)) {
        const double gv = g[0];
        for (double& d : *dx) d += gv;
      }
      break;
    }
    case OpKind::kPick: {
      if (Vec* dx = into(n.p0)) {
        const std::size_t idx =
            static_cast<std::size_t>(n.ints[0]) * n.shape0[1] + n.ints[1];
        (*dx)[idx] += g[0];
      }
      break;
    }
  }
}

// ---- Op implementations ----

namespace {

Tensor unary_op(OpKind kind, const Tensor& x,
                void (*kernel)(const double*, double*, std::size_t),
                const char* name, bool check_out_finite) {
  auto out = std::make_shared<Vec>(x.size());
  kernel(x.data().data(), out->data(), x.size());
  if (check_out_finite) check_finite(*out, name);
  OpRecorder rec(x.graph(), kind);
  rec.operand0(x);
  return rec.finish(x.shape(), std::move(out));
}

Tensor binary_elemwise(OpKind kind, const Tensor& a, const Tensor& b,
                       void (*kernel)(const double*, const double*, double*, std::size_t),
                       const char* name) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(name) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  auto out = std::make_shared<Vec>(a.size());
  kernel(a.data().data(), b.data().data(), out->data(), a.size());
  OpRecorder rec(common_graph(a, b), kind);
  rec.operand0(a);
  rec.operand1(b);
  return rec.finish(a.shape(), std::move(out));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul lhs");
  require_2d(b, "matmul rhs");
  if (a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: inner dims differ, " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = std::make_shared<Vec>(static_cast<std::size_t>(m) * n);
  kernels::matmul(a.data().data(), b.data().data(), out->data(), m, k, n);
  OpRecorder rec(common_graph(a, b), OpKind::kMatmul);
  rec.operand0(a);
  rec.operand1(b);
  return rec.finish({m, n}, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elemwise(OpKind::kAdd, a, b, kernels::add, "add");
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elemwise(OpKind::kSub, a, b, kernels::sub, "sub");
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elemwise(OpKind::kMul, a, b, kernels::mul, "mul");
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_2d(x, "add_bias input");
  if (bias.rows() != 1 || bias.cols() != x.dim(1))
    throw std::invalid_argument("add_bias: bias " + shape_str(bias.shape()) +
                                " does not match input " + shape_str(x.shape()));
  const int m = x.dim(0), c = x.dim(1);
  auto out = std::make_shared<Vec>(x.size());
  const double* bp = bias.data().data();
  const double* xp = x.data().data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < c; ++j)
      (*out)[static_cast<std::size_t>(i) * c + j] = xp[static_cast<std::size_t>(i) * c + j] + bp[j];
  OpRecorder rec(common_graph(x, bias), OpKind::kAddBias);
  rec.operand0(x);
  rec.operand1(bias);
  return rec.finish(x.shape(), std::move(out));
}

Tensor tanh(const Tensor& x) {
  return unary_op(OpKind::kTanh, x, kernels::tanh_v, "tanh", false);
}
Tensor sigmoid(const Tensor& x) {
  return unary_op(OpKind::kSigmoid, x, kernels::sigmoid_v, "sigmoid", false);
}
Tensor exp(const Tensor& x) {
  return unary_op(OpKind::kExp, x, kernels::exp_v, "exp", true);
}
Tensor log(const Tensor& x) {
  return unary_op(OpKind::kLog, x, kernels::log_v, "log", true);
}

namespace {

Tensor softmax_impl(const Tensor& x, const Tensor* mask, int axis, bool log_form) {
  check_finite(x.data(), log_form ? "log_softmax" : "softmax");
  const AxisView v = axis_view(x.shape(), axis);
  auto out = std::make_shared<Vec>(x.size());
  const double* xp = x.data().data();
  const double* mp = mask ? mask->data().data() : nullptr;
  if (mask && mask->shape() != x.shape())
    throw std::invalid_argument("softmax mask shape mismatch");

  for (int grp = 0; grp < v.groups; ++grp) {
    const std::size_t base = static_cast<std::size_t>(grp) * v.group_stride;
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < v.len; ++i) {
      const std::size_t idx = base + static_cast<std::size_t>(i) * v.stride;
      if (!mp || mp[idx] != 0.0) mx = std::max(mx, xp[idx]);
    }
    if (mx == -std::numeric_limits<double>::infinity())
      throw std::invalid_argument("softmax: all positions masked");
    double sum = 0.0;
    for (int i = 0; i < v.len; ++i) {
      const std::size_t idx = base + static_cast<std::size_t>(i) * v.stride;
      if (!mp || mp[idx] != 0.0) sum += std::exp(xp[idx] - mx);
    }
    const double lse = std::log(sum);
    for (int i = 0; i < v.len; ++i) {
      const std::size_t idx = base + static_cast<std::size_t>(i) * v.stride;
      if (mp && mp[idx] == 0.0) {
        (*out)[idx] = log_form ? -std::numeric_limits<double>::infinity() : 0.0;
      } else {
        const double z = xp[idx] - mx;
        (*out)[idx] = log_form ? z - lse : std::exp(z) / sum;
      }
    }
  }
  OpRecorder rec(x.graph(),
                 log_form ? OpKind::kLogSoftmax
                          : (mask ? OpKind::kSoftmaxMasked : OpKind::kSoftmax));
  rec.operand0(x);
  rec.node.axis = axis;
  if (mask) rec.operand1(*mask);  // value only; no grad flows to the mask
  return rec.finish(x.shape(), std::move(out));
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) { return softmax_impl(x, nullptr, axis, false); }

Tensor log_softmax(const Tensor& x, int axis) { return softmax_impl(x, nullptr, axis, true); }

Tensor softmax_masked(const Tensor& x, const Tensor& mask, int axis) {
  if (mask.attached())
    throw std::invalid_argument("softmax_masked: mask must be a constant tensor");
  return softmax_impl(x, &mask, axis, false);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  require_2d(table, "embedding table");
  const int v = table.dim(0), d = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " out of range [0, " + std::to_string(v) + ")");
  const int u = static_cast<int>(ids.size());
  auto out = std::make_shared<Vec>(static_cast<std::size_t>(u) * d);
  const double* tp = table.data().data();
  for (int i = 0; i < u; ++i)
    std::memcpy(out->data() + static_cast<std::size_t>(i) * d,
                tp + static_cast<std::size_t>(ids[i]) * d, sizeof(double) * d);
  OpRecorder rec(table.graph(), OpKind::kEmbed);
  rec.operand0(table);
  rec.node.ints = ids;
  return rec.finish({u, d}, std::move(out));
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  Graph* g = nullptr;
  int rows = parts.front().dim(0), cols = parts.front().dim(1);
  for (const Tensor& p : parts) {
    require_2d(p, "concat part");
    if (p.attached()) {
      if (g && g != p.graph())
        throw std::invalid_argument("concat: parts on different graphs");
      g = p.graph();
    }
    if (&p == &parts.front()) continue;
    if (axis == 0) {
      if (p.dim(1) != cols) throw std::invalid_argument("concat rows: column mismatch");
      rows += p.dim(0);
    } else {
      if (p.dim(0) != rows) throw std::invalid_argument("concat cols: row mismatch");
      cols += p.dim(1);
    }
  }

  auto out = std::make_shared<Vec>(static_cast<std::size_t>(rows) * cols);
  std::size_t row_off = 0, col_off = 0;
  for (const Tensor& p : parts) {
    const int pr = p.dim(0), pc = p.dim(1);
    const double* src = p.data().data();
    for (int i = 0; i < pr; ++i)
      std::memcpy(out->data() + (row_off + i) * static_cast<std::size_t>(cols) + col_off,
                  src + static_cast<std::size_t>(i) * pc, sizeof(double) * pc);
    if (axis == 0) row_off += static_cast<std::size_t>(pr);
    else col_off += static_cast<std::size_t>(pc);
  }

  OpRecorder rec(g, OpKind::kConcat);
  rec.node.axis = axis;
  for (const Tensor& p : parts) {
    rec.node.parents_multi.push_back(p.attached() ? p.node() : -1);
    rec.node.ins_multi.push_back(p.storage());
    rec.node.shapes_multi.push_back(p.shape());
  }
  return rec.finish({rows, cols}, std::move(out));
}

Tensor slice_rows(const Tensor& x, int r0, int r1) {
  require_2d(x, "slice_rows input");
  if (r0 < 0 || r1 > x.dim(0) || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + ", " +
                                std::to_string(r1) + ") for " + shape_str(x.shape()));
  const int c = x.dim(1), m = r1 - r0;
  auto out = std::make_shared<Vec>(static_cast<std::size_t>(m) * c);
  std::memcpy(out->data(), x.data().data() + static_cast<std::size_t>(r0) * c,
              sizeof(double) * out->size());
  OpRecorder rec(x.graph(), OpKind::kSliceRows);
  rec.operand0(x);
  rec.node.ints = {r0, r1};
  return rec.finish({m, c}, std::move(out));
}

Tensor slice_cols(const Tensor& x, int c0, int c1) {
  require_2d(x, "slice_cols input");
  if (c0 < 0 || c1 > x.dim(1) || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + ", " +
                                std::to_string(c1) + ") for " + shape_str(x.shape()));
  const int m = x.dim(0), c = x.dim(1), w = c1 - c0;
  auto out = std::make_shared<Vec>(static_cast<std::size_t>(m) * w);
  for (int i = 0; i < m; ++i)
    std::memcpy(out->data() + static_cast<std::size_t>(i) * w,
                x.data().data() + static_cast<std::size_t>(i) * c + c0, sizeof(double) * w);
  OpRecorder rec(x.graph(), OpKind::kSliceCols);
  rec.operand0(x);
  rec.node.ints = {c0, c1};
  return rec.finish({m, w}, std::move(out));
}

Tensor transpose(const Tensor& x) {
  require_2d(x, "transpose input");
  const int m = x.dim(0), c = x.dim(1);
  auto out = std::make_shared<Vec>(x.size());
  const double* xp = x.data().data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < c; ++j)
      (*out)[static_cast<std::size_t>(j) * m + i] = xp[static_cast<std::size_t>(i) * c + j];
  OpRecorder rec(x.graph(), OpKind::kTranspose);
  rec.operand0(x);
  return rec.finish({c, m}, std::move(out));
}

Tensor scale(const Tensor& x, double c) {
  auto out = std::make_shared<Vec>(x.size());
  kernels::scale(x.data().data(), c, out->data(), x.size());
  OpRecorder rec(x.graph(), OpKind::kScale);
  rec.operand0(x);
  rec.node.scalar = c;
  return rec.finish(x.shape(), std::move(out));
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  OpRecorder rec(x.graph(), OpKind::kSum);
  rec.operand0(x);
  return rec.finish({1}, std::make_shared<Vec>(1, s));
}

Tensor pick(const Tensor& x, int r, int c) {
  require_2d(x, "pick input");
  if (r < 0 || r >= x.dim(0) || c < 0 || c >= x.dim(1))
    throw std::invalid_argument("pick: index (" + std::to_string(r) + ", " +
                                std::to_string(c) + ") out of " + shape_str(x.shape()));
  OpRecorder rec(x.graph(), OpKind::kPick);
  rec.operand0(x);
  rec.node.ints = {r, c};
  return rec.finish({1}, std::make_shared<Vec>(1, x.at(r, c)));
}

// ---- Gradient checking ----

GradCheckReport grad_check(const std::function<Tensor(Graph&)>& build_loss,
                           const std::vector<Parameter*>& params, double eps,
                           int coords_per_param, std::uint64_t seed) {
  for (Parameter* p : params) p->zero_grad();
  std::vector<Vec> analytic;
  {
    Graph g;
    Tensor loss = build_loss(g);
    g.backward(loss);
  }
  for (Parameter* p : params) analytic.push_back(p->grad);

  auto loss_value = [&]() {
    Graph g;
    return build_loss(g).item();
  };

  RandomStream rng(seed);
  GradCheckReport rep;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    const std::size_t n = p.value.size();
    std::vector<std::size_t> coords;
    if (coords_per_param <= 0 || static_cast<std::size_t>(coords_per_param) >= n) {
      coords.resize(n);
      std::iota(coords.begin(), coords.end(), 0);
    } else {
      coords.push_back(0);
      coords.push_back(n - 1);
      for (int i = 2; i < coords_per_param; ++i)
        coords.push_back(static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n))));
    }
    Vec& data = p.value.mutable_data();
    for (std::size_t ci : coords) {
      const double saved = data[ci];
      data[ci] = saved + eps;
      const double fp = loss_value();
      data[ci] = saved - eps;
      const double fm = loss_value();
      data[ci] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double an = analytic[pi][ci];
      const double denom = std::max({std::fabs(numeric), std::fabs(an), 1e-8});
      const double rel = std::fabs(numeric - an) / denom;
      ++rep.coords_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = p.name;
        rep.worst_index = ci;
      }
    }
  }
  return rep;
}

double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& f,
                  const Tensor& point, double eps) {
  Parameter p("point", Tensor(point.shape(), point.data()));
  auto build = [&](Graph& g) { return f(g, g.param(p)); };
  return grad_check(build, {&p}, eps).max_rel_err;
}

}  // namespace usted
