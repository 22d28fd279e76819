#include "argem/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace argem {

using EigenRowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EigenRowMat>;
using ConstMapMat = Eigen::Map<const EigenRowMat>;

bool DenseMat::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

SparseMat SparseMat::from_coo(int rows, int cols,
                              std::vector<std::tuple<int, int, double>> triplets) {
  for (const auto& [i, j, v] : triplets) {
    check_contract(i >= 0 && i < rows && j >= 0 && j < cols,
                   "sparse triplet index out of range");
    (void)v;
  }
  std::sort(triplets.begin(), triplets.end(),
            [](const auto& a, const auto& b) {
              return std::tie(std::get<0>(a), std::get<1>(a)) <
                     std::tie(std::get<0>(b), std::get<1>(b));
            });

  SparseMat s;
  s.rows = rows;
  s.cols = cols;
  s.row_ptr.assign(rows + 1, 0);
  s.col_idx.reserve(triplets.size());
  s.vals.reserve(triplets.size());
  int last_i = -1, last_j = -1;
  for (const auto& [i, j, v] : triplets) {
    if (i == last_i && j == last_j) {
      s.vals.back() += v;  // duplicate coordinate, coalesce
      continue;
    }
    s.col_idx.push_back(j);
    s.vals.push_back(v);
    s.row_ptr[i + 1]++;
    last_i = i;
    last_j = j;
  }
  for (int r = 0; r < rows; ++r) s.row_ptr[r + 1] += s.row_ptr[r];
  return s;
}

SparseMat SparseMat::identity(int n) {
  SparseMat s;
  s.rows = n;
  s.cols = n;
  s.row_ptr.resize(n + 1);
  s.col_idx.resize(n);
  s.vals.assign(n, 1.0);
  for (int i = 0; i <= n; ++i) s.row_ptr[i] = i;
  for (int i = 0; i < n; ++i) s.col_idx[i] = i;
  return s;
}

DenseMat SparseMat::to_dense() const {
  DenseMat d(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      d(i, col_idx[k]) = vals[k];
    }
  }
  return d;
}

DenseMat dense_matmul(const DenseMat& a, const DenseMat& b) {
  check_shape(a.cols == b.rows, "matmul: inner extents differ (" +
                                    std::to_string(a.cols) + " vs " +
                                    std::to_string(b.rows) + ")");
  DenseMat c(a.rows, b.cols);
  if (c.size() == 0 || a.cols == 0) return c;
  ConstMapMat ma(a.data.data(), a.rows, a.cols);
  ConstMapMat mb(b.data.data(), b.rows, b.cols);
  MapMat mc(c.data.data(), c.rows, c.cols);
  mc.noalias() = ma * mb;
  return c;
}

DenseMat spmm(const SparseMat& s, const DenseMat& z) {
  check_shape(s.cols == z.rows, "spmm: sparse cols " + std::to_string(s.cols) +
                                    " != dense rows " + std::to_string(z.rows));
  DenseMat out(s.rows, z.cols);
  const int d = z.cols;
  for (int i = 0; i < s.rows; ++i) {
    double* dst = out.data.data() + static_cast<std::size_t>(i) * d;
    for (int k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) {
      const double v = s.vals[k];
      const double* src = z.data.data() + static_cast<std::size_t>(s.col_idx[k]) * d;
      Eigen::Map<Eigen::ArrayXd>(dst, d) +=
          v * Eigen::Map<const Eigen::ArrayXd>(src, d);
    }
  }
  return out;
}

DenseMat spmm_transpose(const SparseMat& s, const DenseMat& z) {
  check_shape(s.rows == z.rows, "spmm_transpose: sparse rows " +
                                    std::to_string(s.rows) + " != dense rows " +
                                    std::to_string(z.rows));
  DenseMat out(s.cols, z.cols);
  const int d = z.cols;
  for (int i = 0; i < s.rows; ++i) {
    const double* src = z.data.data() + static_cast<std::size_t>(i) * d;
    for (int k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) {
      const double v = s.vals[k];
      double* dst = out.data.data() + static_cast<std::size_t>(s.col_idx[k]) * d;
      Eigen::Map<Eigen::ArrayXd>(dst, d) +=
          v * Eigen::Map<const Eigen::ArrayXd>(src, d);
    }
  }
  return out;
}

}  // namespace argem
