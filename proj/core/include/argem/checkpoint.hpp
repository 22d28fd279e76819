#pragma once

#include <map>
#include <string>
#include <vector>

#include "argem/model.hpp"

namespace argem {

/// Versioned binary weight dump plus a free-form metadata map (config echo,
/// dataset identity). Reloading reproduces bit-identical weight matrices.
struct Checkpoint {
  ModelWeights weights;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// One row per node: node_id <tab> v_1 .. v_d, printed with enough digits to
/// round-trip 64-bit values exactly.
void save_embedding_tsv(const std::string& path, const DenseMat& z,
                        const std::vector<std::string>& node_ids);
DenseMat load_embedding_tsv(const std::string& path,
                            std::vector<std::string>* node_ids = nullptr);

}  // namespace argem
