#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "argem/tensor.hpp"

namespace argem {

struct ClusterAssignment {
  std::vector<int> labels;  // per-row cluster id in [0, k)
  DenseMat centroids;       // k x d
  double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeding, best inertia over `restarts`
/// restarts with seeds derived from `seed`. Empty clusters are reseeded to
/// the point farthest from its centroid. Deterministic per seed.
ClusterAssignment kmeans(const DenseMat& z, int k, std::uint64_t seed,
                         int max_iter = 300, int restarts = 10);

/// Minimum-cost perfect assignment on a square cost matrix; returns the
/// column assigned to each row.
std::vector<int> assignment_min_cost(const DenseMat& cost);

/// Fraction matched under the best one-to-one relabeling of predicted
/// clusters onto truth classes.
double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

enum class NmiNorm { Arithmetic, Geometric };

/// Mutual information normalized by the mean entropy. Degenerate inputs with
/// zero total entropy are defined as 0.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth,
           NmiNorm norm = NmiNorm::Arithmetic);

/// Adjusted Rand index in [-1, 1].
double ari(const std::vector<int>& pred, const std::vector<int>& truth);

/// Macro F1 and precision over truth classes after Hungarian alignment of
/// cluster ids.
std::pair<double, double> f1_and_precision(const std::vector<int>& pred,
                                           const std::vector<int>& truth);

}  // namespace argem
