#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "argem/tensor.hpp"

namespace argem {

/// Undirected attributed graph. Edges are stored once as canonical (i < j)
/// pairs, sorted; the adjacency is binary with zero diagonal. Immutable after
/// construction, safe to share across threads for reading.
struct Graph {
  int n = 0;  // node count
  int m = 0;  // feature count
  std::vector<std::pair<int, int>> edges;  // canonical, sorted, unique
  DenseMat features;                       // n x m
  std::vector<int> labels;                 // empty when the dataset has none
  std::vector<std::string> label_names;    // class id -> original label string
  std::vector<std::string> node_ids;       // node index -> external id

  bool has_labels() const { return !labels.empty(); }
  int num_classes() const { return static_cast<int>(label_names.size()); }

  /// Checks the structural invariants; throws ContractError on violation.
  void validate() const;
};

/// Counters for tolerated irregularities in the input files.
struct LoadReport {
  std::size_t cites_lines = 0;
  std::size_t skipped_unknown_id = 0;  // cites referencing ids not in content
  std::size_t dropped_self_citations = 0;
  std::size_t dropped_duplicate_edges = 0;
};

/// Parses `.content` (node_id <tab> f_1 .. f_m <tab> class_label) and
/// `.cites` (cited_id <tab> citing_id) files. Citation pairs are symmetrized;
/// duplicates and self-citations are dropped; lines referencing unknown ids
/// are skipped and counted, never fatal. Malformed lines raise ParseError
/// with the line number.
Graph load_citation_dataset(const std::string& content_path,
                            const std::string& cites_path,
                            LoadReport* report = nullptr);

/// Symmetric normalization of the self-loop-augmented adjacency:
/// P_ij = A~_ij / sqrt(d~_i d~_j) with A~ = A + I.
struct Propagator {
  SparseMat mat;
};

Propagator build_propagator(const Graph& g);
/// Same, from an explicit edge subset (training adjacency).
Propagator build_propagator(int n, const std::vector<std::pair<int, int>>& edges);

/// Train/validation/test split of the undirected edge set with matched
/// negative samples. The three positive lists partition the edge set.
struct EdgeSplit {
  std::vector<std::pair<int, int>> train_edges;
  std::vector<std::pair<int, int>> val_pos, val_neg;
  std::vector<std::pair<int, int>> test_pos, test_neg;
  std::uint64_t seed = 0;
};

/// Holds out floor(frac * |E|) uniformly random positives per set and samples
/// equally many negatives uniformly from the non-edges of the full graph,
/// disjoint between the two negative sets. Deterministic for a fixed seed.
/// Throws ContractError for invalid fractions and SizingError when the graph
/// cannot satisfy the requested sizes.
EdgeSplit split_edges(const Graph& g, double val_frac, double test_frac,
                      std::uint64_t seed);

}  // namespace argem
