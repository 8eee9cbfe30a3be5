#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "s2da/autodiff/parameter.hpp"
#include "s2da/autodiff/tensor.hpp"

namespace s2da::ad {

using NodeId = std::uint32_t;
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

enum class Reduction { kSum, kMean };

/// Reverse-mode tape. Values are computed eagerly as nodes are appended;
/// parents always precede children, so the tape is acyclic by construction.
///
/// All operations work on rank-2 tensors; a scalar is [1,1]. Shapes must match
/// exactly except for the inner dimension of matmul and the explicit row
/// broadcast of add_row.
///
/// A graph is confined to one thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Binds a parameter; repeated calls with the same parameter return the same node.
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softmax(Var a);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var slice_rows(Var a, std::size_t begin, std::size_t end);
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  Var select_rows(Var a, std::span<const std::size_t> rows);
  Var transpose(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var embedding(Var table, std::span<const int> ids);
  /// Softmax cross-entropy per row; rows whose target is negative are ignored.
  Var cross_entropy(Var logits, std::span<const int> targets, Reduction reduction);
  /// out[t, k*C + c] = a[t + k - width/2, c], zero outside [0, T). width must be odd.
  Var unfold_rows(Var a, std::size_t width);

  /// Populates node gradients and accumulates into bound parameters' `grad`.
  /// Node gradient accumulators are reset at the start of every call.
  void backward(Var loss);

  const Tensor& value(NodeId id) const;
  const Tensor& grad(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kConstant, kParam, kMatmul, kAdd, kAddRow, kMul, kScale, kTanh, kSigmoid,
    kSoftmax, kConcatRows, kConcatCols, kSliceRows, kSliceCols, kSelectRows,
    kTranspose, kSum, kMean, kEmbedding, kCrossEntropy, kUnfoldRows,
  };

  struct Node {
    Op op;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::uint32_t parent_begin = 0;
    std::uint32_t parent_count = 0;
    std::uint32_t aux_begin = 0;
    std::uint32_t aux_count = 0;
    double scalar = 0.0;
    Tensor value;
  };

  Var push(Op op, Tensor value, std::initializer_list<Var> parents, const char* name);
  Var push(Op op, Tensor value, std::span<const Var> parents, const char* name);
  void check_owner(Var v, const char* op) const;
  std::span<const NodeId> parents_of(const Node& n) const;
  std::span<const long long> aux_of(const Node& n) const;
  Tensor& grad_slot(NodeId id);
  void backprop_node(NodeId id);

  std::vector<Node> nodes_;
  std::vector<NodeId> parents_;
  std::vector<long long> aux_;
  std::vector<Tensor> grads_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
  friend class Var;
};

// Free-function spellings used by model code.
inline Var matmul(Var a, Var b) { return a.graph().matmul(a, b); }
inline Var operator+(Var a, Var b) { return a.graph().add(a, b); }
inline Var operator*(Var a, Var b) { return a.graph().mul(a, b); }
inline Var add_row(Var a, Var row) { return a.graph().add_row(a, row); }
inline Var scale(Var a, double f) { return a.graph().scale(a, f); }
inline Var tanh(Var a) { return a.graph().tanh(a); }
inline Var sigmoid(Var a) { return a.graph().sigmoid(a); }
inline Var softmax(Var a) { return a.graph().softmax(a); }
inline Var transpose(Var a) { return a.graph().transpose(a); }
inline Var sum(Var a) { return a.graph().sum(a); }
inline Var mean(Var a) { return a.graph().mean(a); }
inline Var slice_rows(Var a, std::size_t b, std::size_t e) { return a.graph().slice_rows(a, b, e); }
inline Var slice_cols(Var a, std::size_t b, std::size_t e) { return a.graph().slice_cols(a, b, e); }
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}
inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

/// Row-wise log-softmax of a plain tensor (no graph), numerically stable.
std::vector<double> log_softmax(std::span<const double> logits);

}  // namespace s2da::ad
