#include "s2da/autodiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace s2da::ad {
namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.shape().rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 operand, got " + t.shape().str());
  }
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) mismatch(op, a.shape(), b.shape());
}

double sigmoid_of(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Stable per-row log-sum-exp with the max term split off, so that rows
// dominated by one logit keep full relative precision.
struct RowLse {
  double max;
  double log1p_rest;  // log(sum_j exp(x_j - max))
};

RowLse row_lse(std::span<const double> x) {
  std::size_t arg = 0;
  for (std::size_t j = 1; j < x.size(); ++j) {
    if (x[j] > x[arg]) arg = j;
  }
  double rest = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j != arg) rest += std::exp(x[j] - x[arg]);
  }
  return {x[arg], std::log1p(rest)};
}

}  // namespace

const Tensor& Var::value() const { return graph_->value(id_); }
const Tensor& Var::grad() const { return graph_->grad(id_); }

const Tensor& Graph::value(NodeId id) const {
  const Node& n = nodes_.at(id);
  return n.param ? n.param->value : n.value;
}

const Tensor& Graph::grad(NodeId id) const {
  static const Tensor kEmpty;
  if (id >= grads_.size() || grads_[id].empty()) return kEmpty;
  return grads_[id];
}

void Graph::check_owner(Var v, const char* op) const {
  if (!v.valid() || &v.graph() != this || v.id() >= nodes_.size()) {
    throw std::invalid_argument(std::string(op) + ": operand does not belong to this graph");
  }
}

std::span<const NodeId> Graph::parents_of(const Node& n) const {
  return std::span<const NodeId>(parents_).subspan(n.parent_begin, n.parent_count);
}

std::span<const long long> Graph::aux_of(const Node& n) const {
  return std::span<const long long>(aux_).subspan(n.aux_begin, n.aux_count);
}

Var Graph::push(Op op, Tensor value, std::initializer_list<Var> parents, const char* name) {
  return push(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()), name);
}

Var Graph::push(Op op, Tensor value, std::span<const Var> parents, const char* name) {
  if (!value.all_finite()) {
    throw NumericError(std::string(name) + ": non-finite value produced at node " +
                       std::to_string(nodes_.size()));
  }
  Node n;
  n.op = op;
  n.parent_begin = static_cast<std::uint32_t>(parents_.size());
  n.parent_count = static_cast<std::uint32_t>(parents.size());
  for (const Var& p : parents) {
    parents_.push_back(p.id());
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Var Graph::constant(Tensor value) {
  require_rank2(value, "constant");
  return push(Op::kConstant, std::move(value), {}, "constant");
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  require_rank2(p.value, "param");
  if (!p.value.all_finite()) throw NumericError("parameter " + p.name + " holds non-finite values");
  Node n;
  n.op = Op::kParam;
  n.param = &p;
  n.requires_grad = !p.frozen;
  n.parent_begin = static_cast<std::uint32_t>(parents_.size());
  nodes_.push_back(std::move(n));
  const auto id = static_cast<NodeId>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Graph::matmul(Var a, Var b) {
  check_owner(a, "matmul");
  check_owner(b, "matmul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank2(x, "matmul");
  require_rank2(y, "matmul");
  if (x.cols() != y.rows()) mismatch("matmul", x.shape(), y.shape());
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  Tensor out(Shape{m, n});
  const double* xa = x.data().data();
  const double* yb = y.data().data();
  double* o = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = o + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = xa[i * k + p];
      if (s == 0.0) continue;
      const double* yrow = yb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * yrow[j];
    }
  }
  return push(Op::kMatmul, std::move(out), {a, b}, "matmul");
}

Var Graph::add(Var a, Var b) {
  check_owner(a, "add");
  check_owner(b, "add");
  require_same("add", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.data();
  auto y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
  return push(Op::kAdd, std::move(out), {a, b}, "add");
}

Var Graph::add_row(Var a, Var row) {
  check_owner(a, "add_row");
  check_owner(row, "add_row");
  const Tensor& x = a.value();
  const Tensor& r = row.value();
  require_rank2(x, "add_row");
  if (r.rows() != 1 || r.cols() != x.cols()) mismatch("add_row", x.shape(), r.shape());
  Tensor out = x;
  const std::size_t n = x.cols();
  auto o = out.data();
  auto rv = r.data();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] += rv[j];
  }
  return push(Op::kAddRow, std::move(out), {a, row}, "add_row");
}

Var Graph::mul(Var a, Var b) {
  check_owner(a, "mul");
  check_owner(b, "mul");
  require_same("mul", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.data();
  auto y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= y[i];
  return push(Op::kMul, std::move(out), {a, b}, "mul");
}

Var Graph::scale(Var a, double factor) {
  check_owner(a, "scale");
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  Var r = push(Op::kScale, std::move(out), {a}, "scale");
  nodes_[r.id()].scalar = factor;
  return r;
}

Var Graph::tanh(Var a) {
  check_owner(a, "tanh");
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  return push(Op::kTanh, std::move(out), {a}, "tanh");
}

Var Graph::sigmoid(Var a) {
  check_owner(a, "sigmoid");
  Tensor out = a.value();
  for (double& v : out.data()) v = sigmoid_of(v);
  return push(Op::kSigmoid, std::move(out), {a}, "sigmoid");
}

Var Graph::softmax(Var a) {
  check_owner(a, "softmax");
  const Tensor& x = a.value();
  require_rank2(x, "softmax");
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row_span(r);
    auto o = out.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (double& v : o) v /= z;
  }
  return push(Op::kSoftmax, std::move(out), {a}, "softmax");
}

Var Graph::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  std::size_t rows = 0;
  const std::size_t cols = parts[0].value().cols();
  for (const Var& p : parts) {
    check_owner(p, "concat_rows");
    require_rank2(p.value(), "concat_rows");
    if (p.value().cols() != cols) mismatch("concat_rows", parts[0].shape(), p.shape());
    rows += p.value().rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const Var& p : parts) {
    auto d = p.value().data();
    data.insert(data.end(), d.begin(), d.end());
  }
  return push(Op::kConcatRows, Tensor(Shape{rows, cols}, std::move(data)), parts, "concat_rows");
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    check_owner(p, "concat_cols");
    require_rank2(p.value(), "concat_cols");
    if (p.value().rows() != rows) mismatch("concat_cols", parts[0].shape(), p.shape());
    cols += p.value().cols();
  }
  Tensor out(Shape{rows, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = t.row_span(r);
      std::copy(src.begin(), src.end(), out.data().begin() + r * cols + off);
    }
    off += t.cols();
  }
  return push(Op::kConcatCols, std::move(out), parts, "concat_cols");
}

Var Graph::slice_rows(Var a, std::size_t begin, std::size_t end) {
  check_owner(a, "slice_rows");
  const Tensor& x = a.value();
  require_rank2(x, "slice_rows");
  if (begin >= end || end > x.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + x.shape().str());
  }
  const std::size_t n = x.cols();
  std::vector<double> data(x.data().begin() + begin * n, x.data().begin() + end * n);
  Var r = push(Op::kSliceRows, Tensor(Shape{end - begin, n}, std::move(data)), {a}, "slice_rows");
  Node& node = nodes_[r.id()];
  node.aux_begin = static_cast<std::uint32_t>(aux_.size());
  node.aux_count = 1;
  aux_.push_back(static_cast<long long>(begin));
  return r;
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t end) {
  check_owner(a, "slice_cols");
  const Tensor& x = a.value();
  require_rank2(x, "slice_cols");
  if (begin >= end || end > x.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + x.shape().str());
  }
  const std::size_t w = end - begin;
  Tensor out(Shape{x.rows(), w});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row_span(r).subspan(begin, w);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  Var r = push(Op::kSliceCols, std::move(out), {a}, "slice_cols");
  Node& node = nodes_[r.id()];
  node.aux_begin = static_cast<std::uint32_t>(aux_.size());
  node.aux_count = 1;
  aux_.push_back(static_cast<long long>(begin));
  return r;
}

Var Graph::select_rows(Var a, std::span<const std::size_t> rows) {
  check_owner(a, "select_rows");
  const Tensor& x = a.value();
  require_rank2(x, "select_rows");
  if (rows.empty()) throw ShapeError("select_rows: empty row selection");
  const std::size_t n = x.cols();
  Tensor out(Shape{rows.size(), n});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) {
      throw ShapeError("select_rows: row " + std::to_string(rows[i]) + " out of bounds for " +
                       x.shape().str());
    }
    auto src = x.row_span(rows[i]);
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  Var r = push(Op::kSelectRows, std::move(out), {a}, "select_rows");
  Node& node = nodes_[r.id()];
  node.aux_begin = static_cast<std::uint32_t>(aux_.size());
  node.aux_count = static_cast<std::uint32_t>(rows.size());
  for (std::size_t idx : rows) aux_.push_back(static_cast<long long>(idx));
  return r;
}

Var Graph::transpose(Var a) {
  check_owner(a, "transpose");
  const Tensor& x = a.value();
  require_rank2(x, "transpose");
  Tensor out(Shape{x.cols(), x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(c, r) = x.at(r, c);
  }
  return push(Op::kTranspose, std::move(out), {a}, "transpose");
}

Var Graph::sum(Var a) {
  check_owner(a, "sum");
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return push(Op::kSum, Tensor(Shape{1, 1}, s), {a}, "sum");
}

Var Graph::mean(Var a) {
  check_owner(a, "mean");
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return push(Op::kMean, Tensor(Shape{1, 1}, s / static_cast<double>(a.value().size())), {a},
              "mean");
}

Var Graph::embedding(Var table, std::span<const int> ids) {
  check_owner(table, "embedding");
  const Tensor& t = table.value();
  require_rank2(t, "embedding");
  if (ids.empty()) throw ShapeError("embedding: empty id list");
  const std::size_t e = t.cols();
  Tensor out(Shape{ids.size(), e});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= t.rows()) {
      throw std::out_of_range("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(t.rows()) + " rows");
    }
    auto src = t.row_span(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  Var r = push(Op::kEmbedding, std::move(out), {table}, "embedding");
  Node& node = nodes_[r.id()];
  node.aux_begin = static_cast<std::uint32_t>(aux_.size());
  node.aux_count = static_cast<std::uint32_t>(ids.size());
  for (int id : ids) aux_.push_back(id);
  return r;
}

Var Graph::cross_entropy(Var logits, std::span<const int> targets, Reduction reduction) {
  check_owner(logits, "cross_entropy");
  const Tensor& x = logits.value();
  require_rank2(x, "cross_entropy");
  if (targets.size() != x.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     x.shape().str());
  }
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (targets[r] < 0) continue;
    if (static_cast<std::size_t>(targets[r]) >= x.cols()) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(targets[r]) +
                              " outside " + std::to_string(x.cols()) + " classes");
    }
    auto row = x.row_span(r);
    const RowLse lse = row_lse(row);
    total += lse.log1p_rest + (lse.max - row[static_cast<std::size_t>(targets[r])]);
    ++counted;
  }
  double denom = 1.0;
  if (reduction == Reduction::kMean) {
    if (counted == 0) throw std::invalid_argument("cross_entropy: no unmasked targets");
    denom = static_cast<double>(counted);
  }
  Var r = push(Op::kCrossEntropy, Tensor(Shape{1, 1}, total / denom), {logits}, "cross_entropy");
  Node& node = nodes_[r.id()];
  node.scalar = 1.0 / denom;
  node.aux_begin = static_cast<std::uint32_t>(aux_.size());
  node.aux_count = static_cast<std::uint32_t>(targets.size());
  for (int t : targets) aux_.push_back(t);
  return r;
}

Var Graph::unfold_rows(Var a, std::size_t width) {
  check_owner(a, "unfold_rows");
  const Tensor& x = a.value();
  require_rank2(x, "unfold_rows");
  if (width % 2 == 0) throw ShapeError("unfold_rows: width must be odd");
  const std::size_t t_len = x.rows(), c = x.cols();
  const long long half = static_cast<long long>(width / 2);
  Tensor out(Shape{t_len, width * c});
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t k = 0; k < width; ++k) {
      const long long src = static_cast<long long>(t) + static_cast<long long>(k) - half;
      if (src < 0 || src >= static_cast<long long>(t_len)) continue;
      for (std::size_t ch = 0; ch < c; ++ch) {
        out.at(t, k * c + ch) = x.at(static_cast<std::size_t>(src), ch);
      }
    }
  }
  Var r = push(Op::kUnfoldRows, std::move(out), {a}, "unfold_rows");
  Node& node = nodes_[r.id()];
  node.aux_begin = static_cast<std::uint32_t>(aux_.size());
  node.aux_count = 1;
  aux_.push_back(static_cast<long long>(width));
  return r;
}

Tensor& Graph::grad_slot(NodeId id) {
  Tensor& g = grads_[id];
  if (g.empty()) g = Tensor(value(id).shape());
  return g;
}

void Graph::backward(Var loss) {
  check_owner(loss, "backward");
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + loss.shape().str());
  }
  grads_.assign(nodes_.size(), Tensor{});
  grads_[loss.id()] = Tensor(loss.shape(), 1.0);
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    if (!nodes_[id].requires_grad || grads_[id].empty()) continue;
    backprop_node(id);
  }
  for (NodeId id = 0; id <= loss.id(); ++id) {
    const Node& n = nodes_[id];
    if (n.op != Op::kParam || !n.requires_grad || grads_[id].empty()) continue;
    auto dst = n.param->grad.data();
    auto src = grads_[id].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

void Graph::backprop_node(NodeId id) {
  const Node& n = nodes_[id];
  const auto ps = parents_of(n);
  // grads_ is sized up front, so this reference survives grad_slot() calls.
  const Tensor& gy = grads_[id];
  auto wants = [&](std::size_t i) { return nodes_[ps[i]].requires_grad; };

  switch (n.op) {
    case Op::kConstant:
    case Op::kParam:
      break;
    case Op::kMatmul: {
      const Tensor& a = value(ps[0]);
      const Tensor& b = value(ps[1]);
      const std::size_t m = a.rows(), k = a.cols(), nn = b.cols();
      const double* g = gy.data().data();
      if (wants(0)) {
        double* ga = grad_slot(ps[0]).data().data();
        const double* bd = b.data().data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            const double* brow = bd + p * nn;
            const double* grow = g + i * nn;
            for (std::size_t j = 0; j < nn; ++j) s += grow[j] * brow[j];
            ga[i * k + p] += s;
          }
        }
      }
      if (wants(1)) {
        double* gb = grad_slot(ps[1]).data().data();
        const double* ad = a.data().data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double s = ad[i * k + p];
            if (s == 0.0) continue;
            double* gbrow = gb + p * nn;
            const double* grow = g + i * nn;
            for (std::size_t j = 0; j < nn; ++j) gbrow[j] += s * grow[j];
          }
        }
      }
      break;
    }
    case Op::kAdd: {
      for (std::size_t i = 0; i < 2; ++i) {
        if (!wants(i)) continue;
        auto dst = grad_slot(ps[i]).data();
        auto src = gy.data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
      break;
    }
    case Op::kAddRow: {
      if (wants(0)) {
        auto dst = grad_slot(ps[0]).data();
        auto src = gy.data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
      if (wants(1)) {
        auto dst = grad_slot(ps[1]).data();
        const std::size_t cols = gy.cols();
        for (std::size_t r = 0; r < gy.rows(); ++r) {
          for (std::size_t c = 0; c < cols; ++c) dst[c] += gy.at(r, c);
        }
      }
      break;
    }
    case Op::kMul: {
      const auto g = gy.data();
      if (wants(0)) {
        auto dst = grad_slot(ps[0]).data();
        auto other = value(ps[1]).data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j] * other[j];
      }
      if (wants(1)) {
        auto dst = grad_slot(ps[1]).data();
        auto other = value(ps[0]).data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j] * other[j];
      }
      break;
    }
    case Op::kScale: {
      if (!wants(0)) break;
      auto dst = grad_slot(ps[0]).data();
      auto g = gy.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j] * n.scalar;
      break;
    }
    case Op::kTanh: {
      if (!wants(0)) break;
      auto dst = grad_slot(ps[0]).data();
      auto y = n.value.data();
      auto g = gy.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j] * (1.0 - y[j] * y[j]);
      break;
    }
    case Op::kSigmoid: {
      if (!wants(0)) break;
      auto dst = grad_slot(ps[0]).data();
      auto y = n.value.data();
      auto g = gy.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j] * y[j] * (1.0 - y[j]);
      break;
    }
    case Op::kSoftmax: {
      if (!wants(0)) break;
      Tensor& dst = grad_slot(ps[0]);
      for (std::size_t r = 0; r < gy.rows(); ++r) {
        auto y = n.value.row_span(r);
        auto g = gy.row_span(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) dot += g[j] * y[j];
        auto d = dst.row_span(r);
        for (std::size_t j = 0; j < y.size(); ++j) d[j] += y[j] * (g[j] - dot);
      }
      break;
    }
    case Op::kConcatRows: {
      std::size_t off = 0;
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const std::size_t len = value(ps[i]).size();
        if (wants(i)) {
          auto dst = grad_slot(ps[i]).data();
          for (std::size_t j = 0; j < len; ++j) dst[j] += gy[off + j];
        }
        off += len;
      }
      break;
    }
    case Op::kConcatCols: {
      std::size_t off = 0;
      const std::size_t cols = gy.cols();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const std::size_t w = value(ps[i]).cols();
        if (wants(i)) {
          Tensor& dst = grad_slot(ps[i]);
          for (std::size_t r = 0; r < gy.rows(); ++r) {
            for (std::size_t c = 0; c < w; ++c) dst.at(r, c) += gy[r * cols + off + c];
          }
        }
        off += w;
      }
      break;
    }
    case Op::kSliceRows: {
      if (!wants(0)) break;
      const auto begin = static_cast<std::size_t>(aux_of(n)[0]);
      auto dst = grad_slot(ps[0]).data();
      const std::size_t off = begin * gy.cols();
      for (std::size_t j = 0; j < gy.size(); ++j) dst[off + j] += gy[j];
      break;
    }
    case Op::kSliceCols: {
      if (!wants(0)) break;
      const auto begin = static_cast<std::size_t>(aux_of(n)[0]);
      Tensor& dst = grad_slot(ps[0]);
      for (std::size_t r = 0; r < gy.rows(); ++r) {
        for (std::size_t c = 0; c < gy.cols(); ++c) dst.at(r, begin + c) += gy.at(r, c);
      }
      break;
    }
    case Op::kSelectRows: {
      if (!wants(0)) break;
      Tensor& dst = grad_slot(ps[0]);
      const auto rows = aux_of(n);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        auto d = dst.row_span(static_cast<std::size_t>(rows[i]));
        auto g = gy.row_span(i);
        for (std::size_t c = 0; c < d.size(); ++c) d[c] += g[c];
      }
      break;
    }
    case Op::kTranspose: {
      if (!wants(0)) break;
      Tensor& dst = grad_slot(ps[0]);
      for (std::size_t r = 0; r < dst.rows(); ++r) {
        for (std::size_t c = 0; c < dst.cols(); ++c) dst.at(r, c) += gy.at(c, r);
      }
      break;
    }
    case Op::kSum:
    case Op::kMean: {
      if (!wants(0)) break;
      auto dst = grad_slot(ps[0]).data();
      double g = gy[0];
      if (n.op == Op::kMean) g /= static_cast<double>(dst.size());
      for (double& d : dst) d += g;
      break;
    }
    case Op::kEmbedding: {
      if (!wants(0)) break;
      Tensor& dst = grad_slot(ps[0]);
      const auto ids = aux_of(n);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto d = dst.row_span(static_cast<std::size_t>(ids[i]));
        auto g = gy.row_span(i);
        for (std::size_t c = 0; c < d.size(); ++c) d[c] += g[c];
      }
      break;
    }
    case Op::kCrossEntropy: {
      if (!wants(0)) break;
      const Tensor& x = value(ps[0]);
      Tensor& dst = grad_slot(ps[0]);
      const auto targets = aux_of(n);
      const double g = gy[0] * n.scalar;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        if (targets[r] < 0) continue;
        auto row = x.row_span(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        auto d = dst.row_span(r);
        for (std::size_t j = 0; j < row.size(); ++j) d[j] += g * std::exp(row[j] - mx) / z;
        d[static_cast<std::size_t>(targets[r])] -= g;
      }
      break;
    }
    case Op::kUnfoldRows: {
      if (!wants(0)) break;
      Tensor& dst = grad_slot(ps[0]);
      const auto width = static_cast<std::size_t>(aux_of(n)[0]);
      const std::size_t t_len = dst.rows(), c = dst.cols();
      const long long half = static_cast<long long>(width / 2);
      for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t k = 0; k < width; ++k) {
          const long long src = static_cast<long long>(t) + static_cast<long long>(k) - half;
          if (src < 0 || src >= static_cast<long long>(t_len)) continue;
          for (std::size_t ch = 0; ch < c; ++ch) {
            dst.at(static_cast<std::size_t>(src), ch) += gy.at(t, k * c + ch);
          }
        }
      }
      break;
    }
  }
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  return parts[0].graph().concat_rows(parts);
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  return parts[0].graph().concat_cols(parts);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lz = std::log(z);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - mx - lz;
  return out;
}

}  // namespace s2da::ad
