#pragma once

#include <map>
#include <string>

#include <graftkit/losses.hpp>
#include <graftkit/model_graph.hpp>
#include <graftkit/tensor.hpp>

namespace graftkit {

/*
 * Self-contained model container: format version, split indices, the loss
 * weights the run used, and named chain parts ("front", "mid", "last" and,
 * for grafted models, "gn_front") with their full layer structure and
 * parameters. Parameters are stored as raw little-endian doubles and
 * round-trip bit-exactly.
 */
struct Checkpoint {
  int format_version = 1;
  SplitSpec split{1, 1};
  LossWeights weights;
  std::map<std::string, BlockChain> parts;

  const BlockChain& part(const std::string& name) const;
  bool has_part(const std::string& name) const { return parts.count(name) != 0; }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_from_grafted(const GraftedModel& model, const BlockChain& intensity_front,
                                   const SplitSpec& split, const LossWeights& weights);
Checkpoint checkpoint_from_chain(const BlockChain& chain, const SplitSpec& split);

// Reassemble the full pretrained chain (front + mid + last).
BlockChain assemble_pretrained(const Checkpoint& ckpt);
// Grafted model from a checkpoint carrying a gn_front part.
GraftedModel assemble_grafted(const Checkpoint& ckpt);

// Standalone tensor blob in the same container format (e.g. serialized
// voxel grids).
void save_tensor_blob(const std::string& path, const Tensor& tensor);
Tensor load_tensor_blob(const std::string& path);

}  // namespace graftkit
