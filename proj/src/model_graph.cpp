#include <graftkit/model_graph.hpp>

#include <sstream>
#include <stdexcept>

namespace graftkit {

// ---------------------------------------------------------------------------
// Block

Block::Block(const Block& other) : name_(other.name_) {
  layers_.reserve(other.layers_.size());
  for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
}

Block& Block::operator=(const Block& other) {
  if (this == &other) return *this;
  Block copy(other);
  *this = std::move(copy);
  return *this;
}

Tensor Block::apply(const Tensor& x) const {
  Tensor y = x;
  for (const auto& layer : layers_) y = layer->apply(y);
  return y;
}

Tensor Block::forward(const Tensor& x) {
  Tensor y = x;
  for (auto& layer : layers_) y = layer->forward(y);
  return y;
}

Tensor Block::backward(const Tensor& grad_out, bool with_param_grads) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->backward(g, with_param_grads);
  }
  return g;
}

std::int64_t Block::param_count() const {
  std::int64_t n = 0;
  for (const auto& layer : layers_) n += layer->param_count();
  return n;
}

std::vector<std::int64_t> Block::out_shape(std::vector<std::int64_t> in) const {
  for (const auto& layer : layers_) in = layer->out_shape(in);
  return in;
}

// ---------------------------------------------------------------------------
// BlockChain

Tensor BlockChain::infer(const Tensor& x) const {
  Tensor y = x;
  for (const auto& block : blocks_) y = block.apply(y);
  return y;
}

Tensor BlockChain::forward(const Tensor& x) {
  Tensor y = x;
  for (auto& block : blocks_) y = block.forward(y);
  return y;
}

Tensor BlockChain::backward(const Tensor& grad_out, bool with_param_grads) {
  Tensor g = grad_out;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    g = it->backward(g, with_param_grads);
  }
  return g;
}

std::int64_t BlockChain::param_count() const {
  std::int64_t n = 0;
  for (const auto& block : blocks_) n += block.param_count();
  return n;
}

std::vector<std::int64_t> BlockChain::block_param_counts() const {
  std::vector<std::int64_t> counts;
  counts.reserve(blocks_.size());
  for (const auto& block : blocks_) counts.push_back(block.param_count());
  return counts;
}

std::vector<Tensor*> BlockChain::params() {
  std::vector<Tensor*> out;
  for (auto& block : blocks_) {
    for (auto& layer : block.layers()) {
      for (Tensor* p : layer->params()) out.push_back(p);
    }
  }
  return out;
}

std::vector<Tensor*> BlockChain::grads() {
  std::vector<Tensor*> out;
  for (auto& block : blocks_) {
    for (auto& layer : block.layers()) {
      for (Tensor* g : layer->grads()) out.push_back(g);
    }
  }
  return out;
}

void BlockChain::zero_grad() {
  for (auto& block : blocks_) {
    for (auto& layer : block.layers()) layer->zero_grad();
  }
}

std::vector<std::int64_t> BlockChain::out_shape(std::int64_t batch) const {
  return out_shape({batch, input_spec_.channels, input_spec_.height, input_spec_.width});
}

std::vector<std::int64_t> BlockChain::out_shape(std::vector<std::int64_t> in) const {
  for (const auto& block : blocks_) in = block.out_shape(std::move(in));
  return in;
}

BlockChain BlockChain::mirror(std::int64_t in_channels, std::uint64_t seed) const {
  if (blocks_.empty()) throw std::invalid_argument("mirror: template chain has no blocks");
  if (in_channels < 1) throw std::invalid_argument("mirror: in_channels must be >= 1");
  Rng rng(seed);
  std::vector<Block> blocks;
  blocks.reserve(blocks_.size());
  bool channels_pending = true;
  for (const auto& block : blocks_) {
    Block copy(block.name());
    for (const auto& layer : block.layers()) {
      const bool takes_channels = layer->has_input_channels();
      copy.add(layer->fresh(rng, channels_pending && takes_channels ? in_channels : -1));
      if (takes_channels) channels_pending = false;
    }
    blocks.push_back(std::move(copy));
  }
  if (channels_pending) {
    throw std::invalid_argument("mirror: template chain has no layer with input channels");
  }
  InputSpec spec = input_spec_;
  spec.channels = in_channels;
  return BlockChain(std::move(blocks), spec);
}

// ---------------------------------------------------------------------------
// Splitting

void SplitSpec::validate(std::size_t chain_size) const {
  if (front_end == 0) {
    throw std::out_of_range("split index front_end=0: front end must contain at least one block");
  }
  if (front_end > mid_end) {
    throw std::out_of_range("split index mid_end=" + std::to_string(mid_end) +
                            " precedes front_end=" + std::to_string(front_end));
  }
  if (mid_end > chain_size) {
    throw std::out_of_range("split index mid_end=" + std::to_string(mid_end) +
                            " exceeds chain size " + std::to_string(chain_size));
  }
}

std::string SplitSpec::str() const {
  std::ostringstream os;
  os << "(" << front_end << ", " << mid_end << ")";
  return os.str();
}

SplitParts split(const BlockChain& chain, const SplitSpec& spec) {
  spec.validate(chain.size());
  SplitParts parts;
  std::vector<Block> front_blocks(chain.blocks().begin(),
                                  chain.blocks().begin() + static_cast<std::ptrdiff_t>(spec.front_end));
  std::vector<Block> mid_blocks(chain.blocks().begin() + static_cast<std::ptrdiff_t>(spec.front_end),
                                chain.blocks().begin() + static_cast<std::ptrdiff_t>(spec.mid_end));
  std::vector<Block> last_blocks(chain.blocks().begin() + static_cast<std::ptrdiff_t>(spec.mid_end),
                                 chain.blocks().end());

  parts.front = BlockChain(std::move(front_blocks), chain.input_spec());
  const auto h_shape = parts.front.out_shape(1);
  InputSpec mid_spec;
  mid_spec.channels = h_shape[1];
  if (h_shape.size() == 4) {
    mid_spec.height = h_shape[2];
    mid_spec.width = h_shape[3];
  }
  parts.mid = BlockChain(std::move(mid_blocks), mid_spec);
  const auto r_shape = parts.mid.out_shape(h_shape);
  InputSpec last_spec;
  last_spec.channels = r_shape[1];
  if (r_shape.size() == 4) {
    last_spec.height = r_shape[2];
    last_spec.width = r_shape[3];
  }
  parts.last = BlockChain(std::move(last_blocks), last_spec);
  return parts;
}

// ---------------------------------------------------------------------------
// Grafting

Tensor GraftedModel::infer(const Tensor& v) const {
  return last.infer(mid.infer(gn_front.infer(v)));
}

GraftedModel graft(BlockChain gn_front, BlockChain mid, BlockChain last) {
  const auto produced = gn_front.out_shape(1);
  const InputSpec& expected = mid.input_spec();
  std::vector<std::int64_t> want = {1, expected.channels};
  if (produced.size() == 4) {
    want.push_back(expected.height);
    want.push_back(expected.width);
  }
  if (produced != want) {
    throw std::invalid_argument("graft: front end output shape " + shape_str(produced) +
                                " does not match middle net input shape " + shape_str(want));
  }
  GraftedModel model;
  model.gn_front = std::move(gn_front);
  model.mid = std::move(mid);
  model.last = std::move(last);
  return model;
}

BlockChain build_grafted_frontend(const BlockChain& front_template, std::int64_t in_channels,
                                  std::uint64_t seed) {
  if (in_channels < 1) throw std::invalid_argument("build_grafted_frontend: in_channels must be >= 1");
  return front_template.mirror(in_channels, seed);
}

ParamCount count_params(const BlockChain& chain, std::int64_t total) {
  ParamCount pc;
  pc.count = chain.param_count();
  pc.fraction = total > 0 ? static_cast<double>(pc.count) / static_cast<double>(total) : 0.0;
  return pc;
}

// ---------------------------------------------------------------------------
// Reference backbone

BlockChain make_lenet5(std::int64_t in_channels, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Block> blocks;

  Block conv1("conv1");
  auto c1 = std::make_unique<Conv2d>(in_channels, 6, 5);
  c1->init(rng);
  conv1.add(std::move(c1));
  conv1.add(std::make_unique<ReLU>());
  conv1.add(std::make_unique<MaxPool2d>(2));
  blocks.push_back(std::move(conv1));

  Block conv2("conv2");
  auto c2 = std::make_unique<Conv2d>(6, 32, 5);
  c2->init(rng);
  conv2.add(std::move(c2));
  conv2.add(std::make_unique<ReLU>());
  conv2.add(std::make_unique<MaxPool2d>(2));
  blocks.push_back(std::move(conv2));

  Block fc1("fc1");
  fc1.add(std::make_unique<Flatten>());
  auto l1 = std::make_unique<Linear>(32 * 4 * 4, 96);
  l1->init(rng);
  fc1.add(std::move(l1));
  fc1.add(std::make_unique<ReLU>());
  blocks.push_back(std::move(fc1));

  Block fc2("fc2");
  auto l2 = std::make_unique<Linear>(96, 84);
  l2->init(rng);
  fc2.add(std::move(l2));
  fc2.add(std::make_unique<ReLU>());
  blocks.push_back(std::move(fc2));

  Block fc3("fc3");
  auto l3 = std::make_unique<Linear>(84, 10);
  l3->init(rng);
  fc3.add(std::move(l3));
  blocks.push_back(std::move(fc3));

  return BlockChain(std::move(blocks), InputSpec{in_channels, 28, 28});
}

std::vector<SplitSpec> reference_split_variants() {
  std::vector<SplitSpec> specs;
  for (std::size_t front = 1; front <= 3; ++front) {
    for (std::size_t mid_depth = 1; mid_depth <= 2; ++mid_depth) {
      specs.push_back(SplitSpec{front, front + mid_depth});
    }
  }
  return specs;
}

}  // namespace graftkit
