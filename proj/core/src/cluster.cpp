#include "argem/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "argem/error.hpp"
#include "argem/rng.hpp"

namespace argem {

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

ClusterAssignment lloyd_once(const DenseMat& z, int k, Rng& rng, int max_iter) {
  const int n = z.rows, d = z.cols;
  ClusterAssignment out;
  out.centroids = DenseMat(k, d);
  out.labels.assign(n, 0);

  auto row = [](const DenseMat& m, int i) -> const double* {
    return m.data.data() + static_cast<std::size_t>(i) * m.cols;
  };
  auto mut_row = [](DenseMat& m, int i) -> double* {
    return m.data.data() + static_cast<std::size_t>(i) * m.cols;
  };

  // k-means++ seeding
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  {
    const int first = static_cast<int>(rng.below(n));
    std::copy(row(z, first), row(z, first) + d, mut_row(out.centroids, 0));
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        dist2[i] = std::min(dist2[i], sq_dist(row(z, i), row(out.centroids, c - 1), d));
        total += dist2[i];
      }
      int chosen = n - 1;
      if (total > 0.0) {
        const double target = rng.uniform01() * total;
        double cum = 0.0;
        for (int i = 0; i < n; ++i) {
          cum += dist2[i];
          if (cum >= target) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = static_cast<int>(rng.below(n));  // all points coincide
      }
      std::copy(row(z, chosen), row(z, chosen) + d, mut_row(out.centroids, c));
    }
  }

  std::vector<int> counts(k);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(row(z, i), row(out.centroids, 0), d);
      for (int c = 1; c < k; ++c) {
        const double dc = sq_dist(row(z, i), row(out.centroids, c), d);
        if (dc < best_d) {
          best_d = dc;
          best = c;
        }
      }
      if (out.labels[i] != best) {
        out.labels[i] = best;
        changed = true;
      }
    }

    // reseed empty clusters to the point farthest from its centroid
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) counts[out.labels[i]]++;
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[out.labels[i]] <= 1) continue;  // keep singletons intact
        const double dc = sq_dist(row(z, i), row(out.centroids, out.labels[i]), d);
        if (dc > far_d) {
          far_d = dc;
          far = i;
        }
      }
      if (far < 0) break;
      counts[out.labels[far]]--;
      out.labels[far] = c;
      counts[c] = 1;
      changed = true;
    }

    DenseMat sums(k, d);
    for (int i = 0; i < n; ++i) {
      double* s = sums.data.data() + static_cast<std::size_t>(out.labels[i]) * d;
      const double* x = row(z, i);
      for (int t = 0; t < d; ++t) s[t] += x[t];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double* ctr = mut_row(out.centroids, c);
      const double* s = sums.data.data() + static_cast<std::size_t>(c) * d;
      for (int t = 0; t < d; ++t) ctr[t] = s[t] / counts[c];
    }
    if (!changed && iter > 0) break;
  }

  out.inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    out.inertia += sq_dist(row(z, i), row(out.centroids, out.labels[i]), d);
  }
  return out;
}

/// Contingency table with labels remapped to dense ids by first appearance.
DenseMat contingency(const std::vector<int>& pred, const std::vector<int>& truth,
                     int* kp_out = nullptr, int* kt_out = nullptr) {
  check_contract(pred.size() == truth.size(), "label vectors differ in length");
  check_contract(!pred.empty(), "label vectors are empty");
  std::unordered_map<int, int> pmap, tmap;
  std::vector<int> p(pred.size()), t(truth.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto [pi, pnew] = pmap.emplace(pred[i], static_cast<int>(pmap.size()));
    auto [ti, tnew] = tmap.emplace(truth[i], static_cast<int>(tmap.size()));
    (void)pnew;
    (void)tnew;
    p[i] = pi->second;
    t[i] = ti->second;
  }
  const int kp = static_cast<int>(pmap.size());
  const int kt = static_cast<int>(tmap.size());
  DenseMat c(kp, kt);
  for (std::size_t i = 0; i < p.size(); ++i) c(p[i], t[i]) += 1.0;
  if (kp_out) *kp_out = kp;
  if (kt_out) *kt_out = kt;
  return c;
}

/// Hungarian assignment maximizing the matched mass of a contingency table,
/// padded square. Returns for each predicted cluster the matched truth class
/// (or -1 for padding columns).
std::vector<int> align_clusters(const DenseMat& cont) {
  const int s = std::max(cont.rows, cont.cols);
  double max_v = 0.0;
  for (double v : cont.data) max_v = std::max(max_v, v);
  DenseMat cost(s, s);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      const double v = (i < cont.rows && j < cont.cols) ? cont(i, j) : 0.0;
      cost(i, j) = max_v - v;
    }
  }
  std::vector<int> assign = assignment_min_cost(cost);
  std::vector<int> out(cont.rows);
  for (int i = 0; i < cont.rows; ++i) {
    out[i] = assign[i] < cont.cols ? assign[i] : -1;
  }
  return out;
}

}  // namespace

ClusterAssignment kmeans(const DenseMat& z, int k, std::uint64_t seed, int max_iter,
                         int restarts) {
  check_contract(k >= 1, "kmeans: k must be >= 1");
  check_contract(k <= z.rows, "kmeans: k exceeds the number of points");
  check_contract(z.all_finite(), "kmeans: input must be finite");
  check_contract(max_iter >= 1 && restarts >= 1, "kmeans: iterations must be >= 1");

  ClusterAssignment best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(r)));
    ClusterAssignment cand = lloyd_once(z, k, rng, max_iter);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

std::vector<int> assignment_min_cost(const DenseMat& cost) {
  check_contract(cost.rows == cost.cols && cost.rows >= 1,
                 "assignment: cost matrix must be square");
  const int n = cost.rows;
  const double INF = std::numeric_limits<double>::infinity();
  // Shortest augmenting path formulation with potentials, 1-indexed.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, INF);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = INF;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] >= 1) result[p[j] - 1] = j - 1;
  }
  return result;
}

double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  DenseMat cont = contingency(pred, truth);
  std::vector<int> match = align_clusters(cont);
  double correct = 0.0;
  for (int i = 0; i < cont.rows; ++i) {
    if (match[i] >= 0) correct += cont(i, match[i]);
  }
  return correct / static_cast<double>(pred.size());
}

double nmi(const std::vector<int>& pred, const std::vector<int>& truth, NmiNorm norm) {
  DenseMat cont = contingency(pred, truth);
  const double n = static_cast<double>(pred.size());
  std::vector<double> a(cont.rows, 0.0), b(cont.cols, 0.0);
  for (int i = 0; i < cont.rows; ++i)
    for (int j = 0; j < cont.cols; ++j) {
      a[i] += cont(i, j);
      b[j] += cont(i, j);
    }
  double mi = 0.0;
  for (int i = 0; i < cont.rows; ++i) {
    for (int j = 0; j < cont.cols; ++j) {
      const double nij = cont(i, j);
      if (nij == 0.0) continue;
      mi += (nij / n) * std::log(nij * n / (a[i] * b[j]));
    }
  }
  double ha = 0.0, hb = 0.0;
  for (double ai : a) {
    if (ai > 0) ha -= (ai / n) * std::log(ai / n);
  }
  for (double bj : b) {
    if (bj > 0) hb -= (bj / n) * std::log(bj / n);
  }
  const double denom = norm == NmiNorm::Arithmetic ? 0.5 * (ha + hb) : std::sqrt(ha * hb);
  if (denom <= 0.0) return 0.0;  // degenerate single-cluster input
  return mi / denom;
}

double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
  DenseMat cont = contingency(pred, truth);
  const double n = static_cast<double>(pred.size());
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  long double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  std::vector<double> a(cont.rows, 0.0), b(cont.cols, 0.0);
  for (int i = 0; i < cont.rows; ++i) {
    for (int j = 0; j < cont.cols; ++j) {
      sum_ij += choose2(cont(i, j));
      a[i] += cont(i, j);
      b[j] += cont(i, j);
    }
  }
  for (double ai : a) sum_a += choose2(ai);
  for (double bj : b) sum_b += choose2(bj);
  const long double total = choose2(n);
  const long double expected = sum_a * sum_b / total;
  const long double max_index = 0.5L * (sum_a + sum_b);
  if (max_index == expected) {
    // both partitions trivial; identical contingency mass means agreement
    return 1.0;
  }
  return static_cast<double>((sum_ij - expected) / (max_index - expected));
}

std::pair<double, double> f1_and_precision(const std::vector<int>& pred,
                                           const std::vector<int>& truth) {
  DenseMat cont = contingency(pred, truth);
  std::vector<int> match = align_clusters(cont);
  std::vector<double> cluster_size(cont.rows, 0.0), class_size(cont.cols, 0.0);
  for (int i = 0; i < cont.rows; ++i)
    for (int j = 0; j < cont.cols; ++j) {
      cluster_size[i] += cont(i, j);
      class_size[j] += cont(i, j);
    }
  // truth class -> matched cluster
  std::vector<int> cluster_of(cont.cols, -1);
  for (int i = 0; i < cont.rows; ++i) {
    if (match[i] >= 0) cluster_of[match[i]] = i;
  }
  double f1_sum = 0.0, prec_sum = 0.0;
  for (int j = 0; j < cont.cols; ++j) {
    const int c = cluster_of[j];
    double precision = 0.0, recall = 0.0;
    if (c >= 0 && cluster_size[c] > 0.0) {
      const double tp = cont(c, j);
      precision = tp / cluster_size[c];
      recall = class_size[j] > 0.0 ? tp / class_size[j] : 0.0;
    }
    const double f1 =
        (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    f1_sum += f1;
    prec_sum += precision;
  }
  const double k = static_cast<double>(cont.cols);
  return {f1_sum / k, prec_sum / k};
}

}  // namespace argem
