#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "argem/tensor.hpp"

namespace argem {

/// Handle to a value recorded on a Tape.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Positive coordinates of the structure reconstruction target (undirected
/// edges plus self loops) in CSR-of-columns form, with the class imbalance
/// weights derived from the zero/nonzero split.
struct StructTarget {
  int n = 0;
  std::vector<int> row_ptr;  // n+1
  std::vector<int> cols;     // sorted within each row, diagonal included
  double pos_weight = 1.0;
  double norm = 1.0;

  std::size_t nnz() const { return cols.size(); }

  /// Throws ContractError when the self-loop-augmented adjacency has no zero
  /// entries (complete graph), where the weighting is undefined.
  static StructTarget build(int n, const std::vector<std::pair<int, int>>& edges);
};

/// Define-by-run reverse-mode tape. Values are computed eagerly as operations
/// are recorded; backward() replays the recording in exact reverse order.
/// Single-threaded during recording and backward.
class Tape {
 public:
  Var leaf(DenseMat value, bool requires_grad);
  Var constant(DenseMat value) { return leaf(std::move(value), false); }

  const DenseMat& value(Var v) const;

  /// Gradient of the last backward() target with respect to v. Zero matrix
  /// for any node not on a path to the loss.
  const DenseMat& grad(Var v) const;

  /// Reverse pass from a scalar (1x1) node. Accumulators are reset first.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Recorded operations. Every output is checked finite; a non-finite entry
  // raises NumericError naming the operation. Operands passed by reference
  // (SparseMat, StructTarget, target matrices) are captured by pointer and
  // must outlive the tape.
  Var matmul(Var a, Var b);
  Var spmm(const SparseMat& s, Var z);  // s is constant; gradient is s^T G
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double c);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var transpose(Var a);
  Var clamp(Var a, double lo, double hi);
  Var add_bias(Var a, Var bias);  // bias is 1 x cols, broadcast over rows
  Var sum_all(Var a);
  Var mean_all(Var a);

  /// Mean sigmoid cross-entropy against a constant binary target matrix.
  Var bce_with_logits_mean(Var logits, const DenseMat& targets);
  /// Same with every target equal to `target` (0 or 1).
  Var bce_with_logits_mean_const(Var logits, double target);

  /// Weighted sigmoid cross-entropy of explicit n x n logits against tgt.
  Var structure_loss_logits(Var logits, const StructTarget& tgt);
  /// Fused form for inner-product logits Z Z^T; the n x n matrix is never
  /// materialized (processed in row blocks).
  Var structure_loss_inner(Var z, const StructTarget& tgt);

  /// Closed-form KL(N(mu, diag(sigma^2)) || N(0, I)) averaged per node.
  Var kl_gaussian(Var mu, Var log_sigma);

 private:
  using PullFn = std::function<void(Tape&, const DenseMat& self_grad)>;

  struct Node {
    DenseMat value;
    DenseMat grad;  // allocated per backward pass for grad-requiring nodes
    bool requires_grad = false;
    bool touched = false;
    PullFn pull;
  };

  std::vector<Node> nodes_;

  Var push(DenseMat value, bool requires_grad, PullFn pull, const char* op_name);
  bool wants_grad(int idx) const { return nodes_[idx].requires_grad; }
  bool any_grad(std::initializer_list<Var> vs) const;
  void accumulate(int idx, const DenseMat& g);
  void accumulate_scaled(int idx, const DenseMat& g, double c);
  const DenseMat& val(int idx) const { return nodes_[idx].value; }
};

// Numerically stable scalar helpers shared with the loss kernels.
double stable_sigmoid(double x);
double softplus(double x);  // log(1 + e^x) without overflow

}  // namespace argem
