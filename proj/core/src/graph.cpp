#include "argem/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "argem/error.hpp"
#include "argem/rng.hpp"

namespace argem {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::uint64_t pair_key(int a, int b, int n) {
  return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n) + b;
}

}  // namespace

void Graph::validate() const {
  check_contract(features.rows == n, "feature row count must equal node count");
  check_contract(features.cols == m, "feature column count must equal m");
  check_contract(!has_labels() || static_cast<int>(labels.size()) == n,
                 "label count must equal node count");
  for (const auto& [a, b] : edges) {
    check_contract(a >= 0 && b >= 0 && a < n && b < n, "edge endpoint out of range");
    check_contract(a < b, "edges must be canonical (i < j)");
  }
  for (std::size_t k = 1; k < edges.size(); ++k) {
    check_contract(edges[k - 1] < edges[k], "edges must be sorted and unique");
  }
}

Graph load_citation_dataset(const std::string& content_path,
                            const std::string& cites_path, LoadReport* report) {
  std::ifstream content(content_path);
  if (!content) throw ParseError("cannot open content file: " + content_path);

  Graph g;
  std::unordered_map<std::string, int> id_of;
  std::unordered_map<std::string, int> class_of;
  std::vector<std::vector<double>> feature_rows;
  std::string line;
  std::size_t lineno = 0;
  int m = -1;
  while (std::getline(content, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() < 3) {
      throw ParseError(content_path + ":" + std::to_string(lineno) +
                       ": expected node_id, features, class_label");
    }
    const int row_m = static_cast<int>(fields.size()) - 2;
    if (m < 0) {
      m = row_m;
    } else if (row_m != m) {
      throw ParseError(content_path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(m + 2) + " fields, got " +
                       std::to_string(fields.size()));
    }
    const std::string& id = fields.front();
    if (id_of.count(id)) {
      throw ParseError(content_path + ":" + std::to_string(lineno) +
                       ": duplicate node id '" + id + "'");
    }
    std::vector<double> feat(m);
    for (int j = 0; j < m; ++j) {
      try {
        std::size_t pos = 0;
        feat[j] = std::stod(fields[j + 1], &pos);
        if (pos != fields[j + 1].size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ParseError(content_path + ":" + std::to_string(lineno) +
                         ": feature field " + std::to_string(j + 1) +
                         " is not a number: '" + fields[j + 1] + "'");
      }
    }
    const std::string& cls = fields.back();
    auto [it, inserted] =
        class_of.emplace(cls, static_cast<int>(class_of.size()));
    if (inserted) g.label_names.push_back(cls);
    id_of.emplace(id, static_cast<int>(g.node_ids.size()));
    g.node_ids.push_back(id);
    g.labels.push_back(it->second);
    feature_rows.push_back(std::move(feat));
  }
  if (feature_rows.empty()) {
    throw ParseError(content_path + ": no nodes");
  }
  g.n = static_cast<int>(feature_rows.size());
  g.m = m;
  g.features = DenseMat(g.n, g.m);
  for (int i = 0; i < g.n; ++i) {
    std::copy(feature_rows[i].begin(), feature_rows[i].end(),
              g.features.data.begin() + static_cast<std::size_t>(i) * g.m);
  }

  std::ifstream cites(cites_path);
  if (!cites) throw ParseError("cannot open cites file: " + cites_path);
  LoadReport rep;
  std::set<std::pair<int, int>> edge_set;
  lineno = 0;
  while (std::getline(cites, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw ParseError(cites_path + ":" + std::to_string(lineno) +
                       ": expected exactly two tab-separated ids");
    }
    ++rep.cites_lines;
    auto a_it = id_of.find(fields[0]);
    auto b_it = id_of.find(fields[1]);
    if (a_it == id_of.end() || b_it == id_of.end()) {
      ++rep.skipped_unknown_id;
      continue;
    }
    int a = a_it->second, b = b_it->second;
    if (a == b) {
      ++rep.dropped_self_citations;
      continue;
    }
    if (a > b) std::swap(a, b);
    if (!edge_set.emplace(a, b).second) {
      ++rep.dropped_duplicate_edges;
    }
  }
  g.edges.assign(edge_set.begin(), edge_set.end());
  if (report) *report = rep;
  g.validate();
  return g;
}

Propagator build_propagator(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> degree(n, 1);  // self loop
  for (const auto& [a, b] : edges) {
    check_contract(a >= 0 && b >= 0 && a < n && b < n, "edge endpoint out of range");
    check_contract(a != b, "self loops are implicit");
    degree[a]++;
    degree[b]++;
  }
  std::vector<double> inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(degree[i]));

  std::vector<std::tuple<int, int, double>> triplets;
  triplets.reserve(2 * edges.size() + n);
  for (int i = 0; i < n; ++i) {
    triplets.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
  }
  for (const auto& [a, b] : edges) {
    const double v = inv_sqrt[a] * inv_sqrt[b];
    triplets.emplace_back(a, b, v);
    triplets.emplace_back(b, a, v);
  }
  Propagator p;
  p.mat = SparseMat::from_coo(n, n, std::move(triplets));
  return p;
}

Propagator build_propagator(const Graph& g) { return build_propagator(g.n, g.edges); }

EdgeSplit split_edges(const Graph& g, double val_frac, double test_frac,
                      std::uint64_t seed) {
  check_contract(val_frac >= 0.0 && test_frac >= 0.0 && val_frac + test_frac < 1.0,
                 "split fractions must satisfy 0 <= val + test < 1");
  const std::size_t e = g.edges.size();
  const std::size_t n_val = static_cast<std::size_t>(val_frac * static_cast<double>(e));
  const std::size_t n_test = static_cast<std::size_t>(test_frac * static_cast<double>(e));
  if (val_frac > 0.0 && n_val == 0) {
    throw SizingError("graph too small: validation split would be empty");
  }
  if (test_frac > 0.0 && n_test == 0) {
    throw SizingError("graph too small: test split would be empty");
  }

  const std::uint64_t total_pairs =
      static_cast<std::uint64_t>(g.n) * (g.n - 1) / 2;
  const std::uint64_t non_edges = total_pairs - e;
  if (non_edges < n_val + n_test) {
    throw SizingError("insufficient non-edges for negative sampling: need " +
                      std::to_string(n_val + n_test) + ", have " +
                      std::to_string(non_edges));
  }

  Rng rng(seed);
  EdgeSplit split;
  split.seed = seed;

  auto shuffled = g.edges;
  rng.shuffle(shuffled);
  split.test_pos.assign(shuffled.begin(), shuffled.begin() + n_test);
  split.val_pos.assign(shuffled.begin() + n_test, shuffled.begin() + n_test + n_val);
  split.train_edges.assign(shuffled.begin() + n_test + n_val, shuffled.end());

  std::unordered_set<std::uint64_t> forbidden;
  forbidden.reserve(e + n_val + n_test);
  for (const auto& [a, b] : g.edges) forbidden.insert(pair_key(a, b, g.n));

  auto sample_negatives = [&](std::size_t count,
                              std::vector<std::pair<int, int>>& out) {
    // Rejection sampling; falls back to full enumeration when the non-edge
    // set is small relative to the request.
    std::size_t attempts = 0;
    const std::size_t attempt_limit = 1000 * count + 10000;
    while (out.size() < count && attempts < attempt_limit) {
      ++attempts;
      int a = static_cast<int>(rng.below(g.n));
      int b = static_cast<int>(rng.below(g.n));
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      const std::uint64_t key = pair_key(a, b, g.n);
      if (forbidden.count(key)) continue;
      forbidden.insert(key);
      out.emplace_back(a, b);
    }
    if (out.size() < count) {
      std::vector<std::pair<int, int>> pool;
      for (int a = 0; a < g.n; ++a) {
        for (int b = a + 1; b < g.n; ++b) {
          if (!forbidden.count(pair_key(a, b, g.n))) pool.emplace_back(a, b);
        }
      }
      rng.shuffle(pool);
      for (const auto& p : pool) {
        if (out.size() == count) break;
        forbidden.insert(pair_key(p.first, p.second, g.n));
        out.push_back(p);
      }
    }
  };
  sample_negatives(n_test, split.test_neg);
  sample_negatives(n_val, split.val_neg);
  return split;
}

}  // namespace argem
