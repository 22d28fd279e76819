#include "argem/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace argem {

namespace {

using EigenRowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMapMat = Eigen::Map<const EigenRowMat>;
using MapMat = Eigen::Map<EigenRowMat>;
using ConstMapArr = Eigen::Map<const Eigen::ArrayXd>;
using MapArr = Eigen::Map<Eigen::ArrayXd>;

DenseMat matmul_nt(const DenseMat& a, const DenseMat& b) {
  // a * b^T
  check_shape(a.cols == b.cols, "matmul_nt: extents");
  DenseMat c(a.rows, b.rows);
  if (c.size() == 0 || a.cols == 0) return c;
  ConstMapMat ma(a.data.data(), a.rows, a.cols);
  ConstMapMat mb(b.data.data(), b.rows, b.cols);
  MapMat mc(c.data.data(), c.rows, c.cols);
  mc.noalias() = ma * mb.transpose();
  return c;
}

DenseMat matmul_tn(const DenseMat& a, const DenseMat& b) {
  // a^T * b
  check_shape(a.rows == b.rows, "matmul_tn: extents");
  DenseMat c(a.cols, b.cols);
  if (c.size() == 0 || a.rows == 0) return c;
  ConstMapMat ma(a.data.data(), a.rows, a.cols);
  ConstMapMat mb(b.data.data(), b.rows, b.cols);
  MapMat mc(c.data.data(), c.rows, c.cols);
  mc.noalias() = ma.transpose() * mb;
  return c;
}

DenseMat sigmoid_mat(const DenseMat& l) {
  DenseMat out(l.rows, l.cols);
  if (l.size() == 0) return out;
  ConstMapArr x(l.data.data(), static_cast<Eigen::Index>(l.size()));
  MapArr y(out.data.data(), static_cast<Eigen::Index>(out.size()));
  Eigen::ArrayXd e = (-x.abs()).exp();
  y = (x >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e));
  return out;
}

int rows_per_block(int n) {
  // keep the materialized block near 8 MB
  const long target = 1'000'000;
  long b = target / std::max(1, n);
  return static_cast<int>(std::clamp(b, 1L, static_cast<long>(std::max(1, n))));
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

StructTarget StructTarget::build(int n, const std::vector<std::pair<int, int>>& edges) {
  StructTarget t;
  t.n = n;
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) adj[i].push_back(i);  // self loops
  for (const auto& [a, b] : edges) {
    check_contract(a >= 0 && a < n && b >= 0 && b < n, "edge endpoint out of range");
    if (a == b) continue;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  t.row_ptr.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    auto& row = adj[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    t.row_ptr[i + 1] = t.row_ptr[i] + static_cast<int>(row.size());
    t.cols.insert(t.cols.end(), row.begin(), row.end());
  }
  const double total = static_cast<double>(n) * n;
  const double pos = static_cast<double>(t.cols.size());
  check_contract(pos < total,
                 "structure loss undefined: self-loop-augmented adjacency has no "
                 "zero entries (complete graph)");
  t.pos_weight = (total - pos) / pos;
  t.norm = total / (2.0 * (total - pos));
  return t;
}

Var Tape::push(DenseMat value, bool requires_grad, PullFn pull, const char* op_name) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op_name) + ": non-finite output");
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(DenseMat value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr, "leaf");
}

const DenseMat& Tape::value(Var v) const {
  check_contract(v.valid() && v.idx < static_cast<int>(nodes_.size()), "invalid var");
  return nodes_[v.idx].value;
}

const DenseMat& Tape::grad(Var v) const {
  check_contract(v.valid() && v.idx < static_cast<int>(nodes_.size()), "invalid var");
  return nodes_[v.idx].grad;
}

void Tape::accumulate(int idx, const DenseMat& g) {
  Node& n = nodes_[idx];
  if (!n.requires_grad) return;
  check_shape(n.value.same_shape(g), "gradient shape mismatch");
  n.touched = true;
  for (std::size_t k = 0; k < g.size(); ++k) n.grad.data[k] += g.data[k];
}

void Tape::accumulate_scaled(int idx, const DenseMat& g, double c) {
  Node& n = nodes_[idx];
  if (!n.requires_grad) return;
  check_shape(n.value.same_shape(g), "gradient shape mismatch");
  n.touched = true;
  for (std::size_t k = 0; k < g.size(); ++k) n.grad.data[k] += c * g.data[k];
}

void Tape::backward(Var loss) {
  check_contract(loss.valid() && loss.idx < static_cast<int>(nodes_.size()),
                 "backward: invalid loss handle");
  const DenseMat& lv = nodes_[loss.idx].value;
  check_contract(lv.rows == 1 && lv.cols == 1, "backward: loss is not a scalar");

  for (Node& n : nodes_) {
    n.touched = false;
    if (n.requires_grad) {
      n.grad = DenseMat::zeros(n.value.rows, n.value.cols);
    } else {
      n.grad = DenseMat();
    }
  }
  if (!nodes_[loss.idx].requires_grad) return;  // loss depends on constants only
  nodes_[loss.idx].grad(0, 0) = 1.0;
  nodes_[loss.idx].touched = true;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.pull && n.touched) n.pull(*this, n.grad);
  }
}

bool Tape::any_grad(std::initializer_list<Var> vs) const {
  for (Var v : vs) {
    if (nodes_[v.idx].requires_grad) return true;
  }
  return false;
}

Var Tape::matmul(Var a, Var b) {
  DenseMat out = dense_matmul(value(a), value(b));
  const int ai = a.idx, bi = b.idx;
  return push(std::move(out), any_grad({a, b}),
              [ai, bi](Tape& t, const DenseMat& g) {
                if (t.wants_grad(ai)) t.accumulate(ai, matmul_nt(g, t.val(bi)));
                if (t.wants_grad(bi)) t.accumulate(bi, matmul_tn(t.val(ai), g));
              },
              "matmul");
}

Var Tape::spmm(const SparseMat& s, Var z) {
  DenseMat out = argem::spmm(s, value(z));
  const int zi = z.idx;
  const SparseMat* sp = &s;
  return push(std::move(out), any_grad({z}),
              [zi, sp](Tape& t, const DenseMat& g) {
                if (t.wants_grad(zi)) t.accumulate(zi, spmm_transpose(*sp, g));
              },
              "spmm");
}

Var Tape::add(Var a, Var b) {
  const DenseMat& av = value(a);
  const DenseMat& bv = value(b);
  check_shape(av.same_shape(bv), "add: shape mismatch");
  DenseMat out(av.rows, av.cols);
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = av.data[k] + bv.data[k];
  const int ai = a.idx, bi = b.idx;
  return push(std::move(out), any_grad({a, b}),
              [ai, bi](Tape& t, const DenseMat& g) {
                t.accumulate(ai, g);
                t.accumulate(bi, g);
              },
              "add");
}

Var Tape::sub(Var a, Var b) {
  const DenseMat& av = value(a);
  const DenseMat& bv = value(b);
  check_shape(av.same_shape(bv), "sub: shape mismatch");
  DenseMat out(av.rows, av.cols);
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = av.data[k] - bv.data[k];
  const int ai = a.idx, bi = b.idx;
  return push(std::move(out), any_grad({a, b}),
              [ai, bi](Tape& t, const DenseMat& g) {
                t.accumulate(ai, g);
                t.accumulate_scaled(bi, g, -1.0);
              },
              "sub");
}

Var Tape::hadamard(Var a, Var b) {
  const DenseMat& av = value(a);
  const DenseMat& bv = value(b);
  check_shape(av.same_shape(bv), "hadamard: shape mismatch");
  DenseMat out(av.rows, av.cols);
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = av.data[k] * bv.data[k];
  const int ai = a.idx, bi = b.idx;
  return push(std::move(out), any_grad({a, b}),
              [ai, bi](Tape& t, const DenseMat& g) {
                if (t.wants_grad(ai)) {
                  const DenseMat& bval = t.val(bi);
                  DenseMat da(g.rows, g.cols);
                  for (std::size_t k = 0; k < g.size(); ++k)
                    da.data[k] = g.data[k] * bval.data[k];
                  t.accumulate(ai, da);
                }
                if (t.wants_grad(bi)) {
                  const DenseMat& aval = t.val(ai);
                  DenseMat db(g.rows, g.cols);
                  for (std::size_t k = 0; k < g.size(); ++k)
                    db.data[k] = g.data[k] * aval.data[k];
                  t.accumulate(bi, db);
                }
              },
              "hadamard");
}

Var Tape::scale(Var a, double c) {
  const DenseMat& av = value(a);
  DenseMat out(av.rows, av.cols);
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = c * av.data[k];
  const int ai = a.idx;
  return push(std::move(out), any_grad({a}),
              [ai, c](Tape& t, const DenseMat& g) { t.accumulate_scaled(ai, g, c); },
              "scale");
}

Var Tape::relu(Var a) {
  const DenseMat& av = value(a);
  DenseMat out(av.rows, av.cols);
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = std::max(av.data[k], 0.0);
  const int ai = a.idx;
  return push(std::move(out), any_grad({a}),
              [ai](Tape& t, const DenseMat& g) {
                const DenseMat& x = t.val(ai);
                DenseMat da(g.rows, g.cols);
                for (std::size_t k = 0; k < g.size(); ++k)
                  da.data[k] = x.data[k] > 0.0 ? g.data[k] : 0.0;
                t.accumulate(ai, da);
              },
              "relu");
}

Var Tape::sigmoid(Var a) {
  DenseMat out = sigmoid_mat(value(a));
  const int ai = a.idx;
  const int self_will_be = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({a}),
              [ai, self_will_be](Tape& t, const DenseMat& g) {
                const DenseMat& y = t.val(self_will_be);
                DenseMat da(g.rows, g.cols);
                for (std::size_t k = 0; k < g.size(); ++k)
                  da.data[k] = g.data[k] * y.data[k] * (1.0 - y.data[k]);
                t.accumulate(ai, da);
              },
              "sigmoid");
}

Var Tape::exp(Var a) {
  const DenseMat& av = value(a);
  DenseMat out(av.rows, av.cols);
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = std::exp(av.data[k]);
  const int ai = a.idx;
  const int self_will_be = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({a}),
              [ai, self_will_be](Tape& t, const DenseMat& g) {
                const DenseMat& y = t.val(self_will_be);
                DenseMat da(g.rows, g.cols);
                for (std::size_t k = 0; k < g.size(); ++k)
                  da.data[k] = g.data[k] * y.data[k];
                t.accumulate(ai, da);
              },
              "exp");
}

Var Tape::transpose(Var a) {
  const DenseMat& av = value(a);
  DenseMat out(av.cols, av.rows);
  for (int i = 0; i < av.rows; ++i)
    for (int j = 0; j < av.cols; ++j) out(j, i) = av(i, j);
  const int ai = a.idx;
  return push(std::move(out), any_grad({a}),
              [ai](Tape& t, const DenseMat& g) {
                DenseMat da(g.cols, g.rows);
                for (int i = 0; i < g.rows; ++i)
                  for (int j = 0; j < g.cols; ++j) da(j, i) = g(i, j);
                t.accumulate(ai, da);
              },
              "transpose");
}

Var Tape::clamp(Var a, double lo, double hi) {
  check_contract(lo <= hi, "clamp: lo > hi");
  const DenseMat& av = value(a);
  DenseMat out(av.rows, av.cols);
  for (std::size_t k = 0; k < out.size(); ++k)
    out.data[k] = std::clamp(av.data[k], lo, hi);
  const int ai = a.idx;
  return push(std::move(out), any_grad({a}),
              [ai, lo, hi](Tape& t, const DenseMat& g) {
                const DenseMat& x = t.val(ai);
                DenseMat da(g.rows, g.cols);
                for (std::size_t k = 0; k < g.size(); ++k)
                  da.data[k] = (x.data[k] > lo && x.data[k] < hi) ? g.data[k] : 0.0;
                t.accumulate(ai, da);
              },
              "clamp");
}

Var Tape::add_bias(Var a, Var bias) {
  const DenseMat& av = value(a);
  const DenseMat& bv = value(bias);
  check_shape(bv.rows == 1 && bv.cols == av.cols, "add_bias: bias must be 1 x cols");
  DenseMat out(av.rows, av.cols);
  for (int i = 0; i < av.rows; ++i)
    for (int j = 0; j < av.cols; ++j) out(i, j) = av(i, j) + bv(0, j);
  const int ai = a.idx, bi = bias.idx;
  return push(std::move(out), any_grad({a, bias}),
              [ai, bi](Tape& t, const DenseMat& g) {
                t.accumulate(ai, g);
                if (t.wants_grad(bi)) {
                  DenseMat db(1, g.cols);
                  for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) db(0, j) += g(i, j);
                  t.accumulate(bi, db);
                }
              },
              "add_bias");
}

Var Tape::sum_all(Var a) {
  const DenseMat& av = value(a);
  DenseMat out(1, 1);
  for (double v : av.data) out(0, 0) += v;
  const int ai = a.idx;
  return push(std::move(out), any_grad({a}),
              [ai](Tape& t, const DenseMat& g) {
                const DenseMat& x = t.val(ai);
                t.accumulate(ai, DenseMat::filled(x.rows, x.cols, g(0, 0)));
              },
              "sum_all");
}

Var Tape::mean_all(Var a) {
  const DenseMat& av = value(a);
  check_contract(av.size() > 0, "mean_all: empty input");
  DenseMat out(1, 1);
  for (double v : av.data) out(0, 0) += v;
  out(0, 0) /= static_cast<double>(av.size());
  const int ai = a.idx;
  return push(std::move(out), any_grad({a}),
              [ai](Tape& t, const DenseMat& g) {
                const DenseMat& x = t.val(ai);
                t.accumulate(ai, DenseMat::filled(x.rows, x.cols,
                                                  g(0, 0) / static_cast<double>(x.size())));
              },
              "mean_all");
}

// mean over entries of t*softplus(-l) + (1-t)*softplus(l), which rewrites to
// softplus(l) - t*l entrywise.
Var Tape::bce_with_logits_mean(Var logits, const DenseMat& targets) {
  const DenseMat& lv = value(logits);
  check_shape(lv.same_shape(targets), "bce: target shape mismatch");
  check_contract(lv.size() > 0, "bce: empty input");
  for (double v : targets.data) {
    check_contract(v == 0.0 || v == 1.0, "bce: target entries must be binary");
  }
  const std::size_t n = lv.size();
  ConstMapArr l(lv.data.data(), static_cast<Eigen::Index>(n));
  ConstMapArr tg(targets.data.data(), static_cast<Eigen::Index>(n));
  const double total = ((-l.abs()).exp().log1p() + l.max(0.0) - tg * l).sum();
  DenseMat out(1, 1);
  out(0, 0) = total / static_cast<double>(n);

  const int li = logits.idx;
  const DenseMat* tp = &targets;
  return push(std::move(out), any_grad({logits}),
              [li, tp](Tape& t, const DenseMat& g) {
                const DenseMat& lval = t.val(li);
                DenseMat dl = sigmoid_mat(lval);
                const double c = g(0, 0) / static_cast<double>(lval.size());
                for (std::size_t k = 0; k < dl.size(); ++k)
                  dl.data[k] = c * (dl.data[k] - tp->data[k]);
                t.accumulate(li, dl);
              },
              "bce_with_logits_mean");
}

Var Tape::bce_with_logits_mean_const(Var logits, double target) {
  const DenseMat& lv = value(logits);
  check_contract(lv.size() > 0, "bce: empty input");
  check_contract(target == 0.0 || target == 1.0, "bce: target must be 0 or 1");
  const std::size_t n = lv.size();
  ConstMapArr l(lv.data.data(), static_cast<Eigen::Index>(n));
  const double total = ((-l.abs()).exp().log1p() + l.max(0.0) - target * l).sum();
  DenseMat out(1, 1);
  out(0, 0) = total / static_cast<double>(n);

  const int li = logits.idx;
  return push(std::move(out), any_grad({logits}),
              [li, target](Tape& t, const DenseMat& g) {
                const DenseMat& lval = t.val(li);
                DenseMat dl = sigmoid_mat(lval);
                const double c = g(0, 0) / static_cast<double>(lval.size());
                for (std::size_t k = 0; k < dl.size(); ++k)
                  dl.data[k] = c * (dl.data[k] - target);
                t.accumulate(li, dl);
              },
              "bce_with_logits_mean_const");
}

Var Tape::structure_loss_logits(Var logits, const StructTarget& tgt) {
  const DenseMat& lv = value(logits);
  check_shape(lv.rows == tgt.n && lv.cols == tgt.n,
              "structure_loss_logits: logits must be n x n");
  const std::size_t total_entries = lv.size();
  ConstMapArr l(lv.data.data(), static_cast<Eigen::Index>(total_entries));
  double total = ((-l.abs()).exp().log1p() + l.max(0.0)).sum();
  // Positive entries: replace softplus(l) with pos_weight * softplus(-l).
  for (int i = 0; i < tgt.n; ++i) {
    for (int k = tgt.row_ptr[i]; k < tgt.row_ptr[i + 1]; ++k) {
      const double x = lv(i, tgt.cols[k]);
      total += tgt.pos_weight * softplus(-x) - softplus(x);
    }
  }
  DenseMat out(1, 1);
  out(0, 0) = tgt.norm * total / static_cast<double>(total_entries);
  if (!std::isfinite(out(0, 0))) {
    throw NumericError("structure_loss_logits: non-finite output");
  }

  const int li = logits.idx;
  const StructTarget* tp = &tgt;
  return push(std::move(out), any_grad({logits}),
              [li, tp](Tape& t, const DenseMat& g) {
                const DenseMat& lval = t.val(li);
                DenseMat w = sigmoid_mat(lval);
                // t=1 entries: pos_weight * (sigma - 1)
                for (int i = 0; i < tp->n; ++i) {
                  for (int k = tp->row_ptr[i]; k < tp->row_ptr[i + 1]; ++k) {
                    double& wij = w(i, tp->cols[k]);
                    wij = tp->pos_weight * (wij - 1.0);
                  }
                }
                const double c =
                    g(0, 0) * tp->norm / static_cast<double>(lval.size());
                for (std::size_t k = 0; k < w.size(); ++k) w.data[k] *= c;
                t.accumulate(li, w);
              },
              "structure_loss_logits");
}

Var Tape::structure_loss_inner(Var z, const StructTarget& tgt) {
  const DenseMat& zv = value(z);
  check_shape(zv.rows == tgt.n, "structure_loss_inner: Z rows must equal n");
  const int n = tgt.n;
  const int d = zv.cols;
  const int bs = rows_per_block(n);
  ConstMapMat zm(zv.data.data(), n, d);

  double total = 0.0;
  EigenRowMat block;
  for (int r0 = 0; r0 < n; r0 += bs) {
    const int b = std::min(bs, n - r0);
    block.noalias() = zm.middleRows(r0, b) * zm.transpose();
    auto arr = block.array();
    total += ((-arr.abs()).exp().log1p() + arr.max(0.0)).sum();
    for (int i = 0; i < b; ++i) {
      const int row = r0 + i;
      for (int k = tgt.row_ptr[row]; k < tgt.row_ptr[row + 1]; ++k) {
        const double x = block(i, tgt.cols[k]);
        total += tgt.pos_weight * softplus(-x) - softplus(x);
      }
    }
  }
  DenseMat out(1, 1);
  out(0, 0) = tgt.norm * total / (static_cast<double>(n) * n);
  if (!std::isfinite(out(0, 0))) {
    throw NumericError("structure_loss_inner: non-finite output");
  }

  const int zi = z.idx;
  const StructTarget* tp = &tgt;
  return push(
      std::move(out), any_grad({z}),
      [zi, tp](Tape& t, const DenseMat& g) {
        if (!t.wants_grad(zi)) return;
        const DenseMat& zval = t.val(zi);
        const int n = tp->n;
        const int d = zval.cols;
        const int bs = rows_per_block(n);
        ConstMapMat zm(zval.data.data(), n, d);
        // dZ = 2 c W Z with W = sigma(ZZ^T) adjusted at positive entries;
        // W is symmetric, so (W + W^T) Z = 2 W Z.
        const double c = g(0, 0) * tp->norm / (static_cast<double>(n) * n);
        DenseMat dz(n, d);
        MapMat dzm(dz.data.data(), n, d);
        using RowArr =
            Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        EigenRowMat block, w;
        for (int r0 = 0; r0 < n; r0 += bs) {
          const int b = std::min(bs, n - r0);
          block.noalias() = zm.middleRows(r0, b) * zm.transpose();
          auto arr = block.array();
          RowArr e = (-arr.abs()).exp();
          w = ((arr >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e))).matrix();
          for (int i = 0; i < b; ++i) {
            const int row = r0 + i;
            for (int k = tp->row_ptr[row]; k < tp->row_ptr[row + 1]; ++k) {
              double& wij = w(i, tp->cols[k]);
              wij = tp->pos_weight * (wij - 1.0);
            }
          }
          dzm.middleRows(r0, b).noalias() = (2.0 * c) * (w * zm);
        }
        t.accumulate(zi, dz);
      },
      "structure_loss_inner");
}

Var Tape::kl_gaussian(Var mu, Var log_sigma) {
  const DenseMat& mv = value(mu);
  const DenseMat& sv = value(log_sigma);
  check_shape(mv.same_shape(sv), "kl_gaussian: shape mismatch");
  const double n = static_cast<double>(mv.rows);
  double total = 0.0;
  for (std::size_t k = 0; k < mv.size(); ++k) {
    const double m = mv.data[k];
    const double s = sv.data[k];
    total += 0.5 * (std::exp(2.0 * s) + m * m - 1.0 - 2.0 * s);
  }
  DenseMat out(1, 1);
  out(0, 0) = total / n;

  const int mi = mu.idx, si = log_sigma.idx;
  return push(std::move(out), any_grad({mu, log_sigma}),
              [mi, si](Tape& t, const DenseMat& g) {
                const DenseMat& m = t.val(mi);
                const DenseMat& s = t.val(si);
                const double c = g(0, 0) / static_cast<double>(m.rows);
                if (t.wants_grad(mi)) {
                  DenseMat dm(m.rows, m.cols);
                  for (std::size_t k = 0; k < m.size(); ++k)
                    dm.data[k] = c * m.data[k];
                  t.accumulate(mi, dm);
                }
                if (t.wants_grad(si)) {
                  DenseMat ds(s.rows, s.cols);
                  for (std::size_t k = 0; k < s.size(); ++k)
                    ds.data[k] = c * (std::exp(2.0 * s.data[k]) - 1.0);
                  t.accumulate(si, ds);
                }
              },
              "kl_gaussian");
}

}  // namespace argem
