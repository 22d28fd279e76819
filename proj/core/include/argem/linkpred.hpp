#pragma once

#include <utility>
#include <vector>

#include "argem/tensor.hpp"

namespace argem {

/// sigmoid(z_i . z_j) per pair. Indices must be < z.rows.
std::vector<double> score_edges(const DenseMat& z,
                                const std::vector<std::pair<int, int>>& pairs);

/// Probability that a random positive outscores a random negative, ties
/// counted one half. Exhaustive O(N*M) pair count.
double auc_pairwise(const std::vector<double>& pos_scores,
                    const std::vector<double>& neg_scores);

/// Same quantity via a rank walk in O((N+M) log(N+M)). Agrees exactly with
/// auc_pairwise: both divide the same integer pair count.
double auc_rank(const std::vector<double>& pos_scores,
                const std::vector<double>& neg_scores);

inline double auc(const std::vector<double>& pos_scores,
                  const std::vector<double>& neg_scores) {
  return auc_rank(pos_scores, neg_scores);
}

/// Mean of precision@k over the ranks of the positives, scores sorted
/// descending. Equal scores keep their input order (stable sort).
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels);

}  // namespace argem
