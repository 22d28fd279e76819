#include "argem/linkpred.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "argem/error.hpp"
#include "argem/tape.hpp"

namespace argem {

std::vector<double> score_edges(const DenseMat& z,
                                const std::vector<std::pair<int, int>>& pairs) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    check_contract(a >= 0 && a < z.rows && b >= 0 && b < z.rows,
                   "score_edges: node index out of range");
    double dot = 0.0;
    const double* ra = z.data.data() + static_cast<std::size_t>(a) * z.cols;
    const double* rb = z.data.data() + static_cast<std::size_t>(b) * z.cols;
    for (int k = 0; k < z.cols; ++k) dot += ra[k] * rb[k];
    scores.push_back(stable_sigmoid(dot));
  }
  return scores;
}

double auc_pairwise(const std::vector<double>& pos_scores,
                    const std::vector<double>& neg_scores) {
  check_contract(!pos_scores.empty() && !neg_scores.empty(),
                 "auc: both score lists must be nonempty");
  // Numerator counted in halves so ties stay exact integers.
  std::uint64_t numerator2 = 0;
  for (double p : pos_scores) {
    for (double q : neg_scores) {
      if (p > q) numerator2 += 2;
      else if (p == q) numerator2 += 1;
    }
  }
  return static_cast<double>(numerator2) /
         (2.0 * static_cast<double>(pos_scores.size()) *
          static_cast<double>(neg_scores.size()));
}

double auc_rank(const std::vector<double>& pos_scores,
                const std::vector<double>& neg_scores) {
  check_contract(!pos_scores.empty() && !neg_scores.empty(),
                 "auc: both score lists must be nonempty");
  std::vector<std::pair<double, int>> all;  // (score, is_positive)
  all.reserve(pos_scores.size() + neg_scores.size());
  for (double p : pos_scores) all.emplace_back(p, 1);
  for (double q : neg_scores) all.emplace_back(q, 0);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::uint64_t numerator2 = 0;
  std::uint64_t negatives_below = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    std::uint64_t pos_in_group = 0, neg_in_group = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      if (all[j].second) ++pos_in_group;
      else ++neg_in_group;
      ++j;
    }
    numerator2 += pos_in_group * (2 * negatives_below + neg_in_group);
    negatives_below += neg_in_group;
    i = j;
  }
  return static_cast<double>(numerator2) /
         (2.0 * static_cast<double>(pos_scores.size()) *
          static_cast<double>(neg_scores.size()));
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  check_contract(scores.size() == labels.size(),
                 "average_precision: length mismatch");
  const std::size_t positives =
      static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  check_contract(positives > 0, "average_precision: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 1; rank <= order.size(); ++rank) {
    if (labels[order[rank - 1]] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  return sum / static_cast<double>(positives);
}

}  // namespace argem
