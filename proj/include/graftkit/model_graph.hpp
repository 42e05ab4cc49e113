#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <graftkit/layers.hpp>
#include <graftkit/tensor.hpp>

namespace graftkit {

struct InputSpec {
  std::int64_t channels = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
};

/*
 * Named unit of network splitting. What constitutes a block is up to the
 * backbone adapter (a conv stage, a residual block, a classifier head);
 * the chain machinery only relies on blocks composing sequentially.
 */
class Block {
 public:
  Block() = default;
  explicit Block(std::string name) : name_(std::move(name)) {}
  Block(std::string name, std::vector<std::unique_ptr<Layer>> layers)
      : name_(std::move(name)), layers_(std::move(layers)) {}

  Block(const Block& other);
  Block& operator=(const Block& other);
  Block(Block&&) = default;
  Block& operator=(Block&&) = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor apply(const Tensor& x) const;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool with_param_grads);

  std::int64_t param_count() const;
  std::vector<std::int64_t> out_shape(std::vector<std::int64_t> in) const;

  const std::string& name() const { return name_; }
  std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

 private:
  std::string name_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/*
 * Ordered chain of differentiable blocks. Applying all blocks in sequence
 * reproduces the source model exactly; splitting hands out sub-chains that
 * compose back to the same computation, operation for operation.
 *
 * forward() caches per-layer state for a subsequent backward(); infer() is
 * const and cache-free, so a frozen chain can be shared across threads for
 * read-only use.
 */
class BlockChain {
 public:
  BlockChain() = default;
  BlockChain(std::vector<Block> blocks, InputSpec input_spec)
      : blocks_(std::move(blocks)), input_spec_(input_spec) {}

  Tensor infer(const Tensor& x) const;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool with_param_grads = true);

  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  std::vector<Block>& blocks() { return blocks_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  const InputSpec& input_spec() const { return input_spec_; }
  void set_input_spec(InputSpec spec) { input_spec_ = spec; }

  std::int64_t param_count() const;
  std::vector<std::int64_t> block_param_counts() const;

  std::vector<Tensor*> params();
  std::vector<Tensor*> grads();
  void zero_grad();

  // Output shape for a batch of the given size at the nominal input spec.
  std::vector<std::int64_t> out_shape(std::int64_t batch = 1) const;
  std::vector<std::int64_t> out_shape(std::vector<std::int64_t> in) const;

  // Structural mirror with freshly initialized parameters; the first layer
  // carrying input channels is rebuilt for `in_channels`. Deterministic for
  // a fixed seed.
  BlockChain mirror(std::int64_t in_channels, std::uint64_t seed) const;

 private:
  std::vector<Block> blocks_;
  InputSpec input_spec_;
};

/*
 * Split positions: blocks [0, front_end) form the front end, [front_end,
 * mid_end) the middle net and [mid_end, size) the remaining layers. The
 * front end is never empty; the remainder may be.
 */
struct SplitSpec {
  std::size_t front_end = 0;
  std::size_t mid_end = 0;

  void validate(std::size_t chain_size) const;
  std::string str() const;
};

struct SplitParts {
  BlockChain front;
  BlockChain mid;
  BlockChain last;
};

SplitParts split(const BlockChain& chain, const SplitSpec& spec);

/*
 * A trainable front end spliced onto the frozen tail of a pretrained
 * network. mid and last keep the pretrained parameters bit-for-bit and are
 * never updated; only gn_front holds trainable state.
 */
struct GraftedModel {
  BlockChain gn_front;
  BlockChain mid;   // frozen
  BlockChain last;  // frozen

  Tensor infer(const Tensor& v) const;
  std::int64_t trainable_param_count() const { return gn_front.param_count(); }
};

GraftedModel graft(BlockChain gn_front, BlockChain mid, BlockChain last);

// Fresh front end mirroring front_template with the input rebuilt for
// in_channels (the new modality's channel count).
BlockChain build_grafted_frontend(const BlockChain& front_template, std::int64_t in_channels,
                                  std::uint64_t seed);

struct ParamCount {
  std::int64_t count = 0;
  double fraction = 0.0;
};

ParamCount count_params(const BlockChain& chain, std::int64_t total);

// Reference backbone: a five-block LeNet-style classifier over 28x28 inputs
// (two conv+pool stages, then three fully connected stages). The default
// split keeps both conv stages in the front end and the first FC stage in
// the middle net.
BlockChain make_lenet5(std::int64_t in_channels = 1, std::uint64_t seed = 0);

inline constexpr SplitSpec kLenetDefaultSplit{2, 3};

// The six (front depth x mid depth) split variants exercised on the
// reference backbone.
std::vector<SplitSpec> reference_split_variants();

}  // namespace graftkit
