#pragma once

#include <cassert>
#include <cstddef>
#include <tuple>
#include <vector>

#include "argem/error.hpp"

namespace argem {

/// Row-major dense matrix of 64-bit reals.
struct DenseMat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows*cols, row-major

  DenseMat() = default;
  DenseMat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  static DenseMat zeros(int r, int c) { return DenseMat(r, c); }
  static DenseMat filled(int r, int c, double v) {
    DenseMat m(r, c);
    m.data.assign(m.data.size(), v);
    return m;
  }

  double& operator()(int i, int j) {
    assert(i >= 0 && i < rows && j >= 0 && j < cols);
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    assert(i >= 0 && i < rows && j >= 0 && j < cols);
    return data[static_cast<std::size_t>(i) * cols + j];
  }

  std::size_t size() const { return data.size(); }
  bool same_shape(const DenseMat& o) const { return rows == o.rows && cols == o.cols; }

  /// True when every entry is finite.
  bool all_finite() const;
};

/// Compressed-sparse-row matrix. At most one stored value per (i, j).
struct SparseMat {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;  // rows+1
  std::vector<int> col_idx;  // nnz, sorted within each row
  std::vector<double> vals;  // nnz

  SparseMat() = default;

  std::size_t nnz() const { return vals.size(); }

  /// Build from coordinate triplets; duplicate coordinates are summed.
  static SparseMat from_coo(int rows, int cols,
                            std::vector<std::tuple<int, int, double>> triplets);

  static SparseMat identity(int n);

  DenseMat to_dense() const;
};

// Kernels. All single-threaded and deterministic.

/// C = A * B for dense operands.
DenseMat dense_matmul(const DenseMat& a, const DenseMat& b);

/// Y = S * Z, sparse times dense. Cost O(nnz(S) * Z.cols).
DenseMat spmm(const SparseMat& s, const DenseMat& z);

/// Y = S^T * Z without materializing the transpose.
DenseMat spmm_transpose(const SparseMat& s, const DenseMat& z);

}  // namespace argem
