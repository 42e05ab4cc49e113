#include <graftkit/checkpoint.hpp>

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace graftkit {

using nlohmann::json;

namespace {

constexpr char kModelMagic[4] = {'G', 'K', 'C', 'P'};
constexpr char kTensorMagic[4] = {'G', 'K', 'T', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

// Doubles are serialized as little-endian IEEE-754 bit patterns.
void write_doubles(std::ostream& out, const double* data, std::int64_t count) {
  for (std::int64_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof(bits));
    write_u64(out, bits);
  }
}

void read_doubles(std::istream& in, double* data, std::int64_t count) {
  for (std::int64_t i = 0; i < count; ++i) {
    const std::uint64_t bits = read_u64(in);
    std::memcpy(&data[i], &bits, sizeof(bits));
  }
}

json chain_descriptor(const BlockChain& chain) {
  json blocks = json::array();
  for (const Block& block : chain.blocks()) {
    json layers = json::array();
    for (const auto& layer : block.layers()) {
      json hyper = json::object();
      for (const auto& [key, value] : layer->hyper()) hyper[key] = value;
      layers.push_back({{"kind", layer->kind()}, {"hyper", hyper}});
    }
    blocks.push_back({{"name", block.name()}, {"layers", layers}});
  }
  const InputSpec& spec = chain.input_spec();
  return {{"blocks", blocks},
          {"input_spec", {{"channels", spec.channels}, {"height", spec.height},
                          {"width", spec.width}}}};
}

BlockChain chain_from_descriptor(const json& desc) {
  std::vector<Block> blocks;
  for (const json& jb : desc.at("blocks")) {
    Block block(jb.at("name").get<std::string>());
    for (const json& jl : jb.at("layers")) {
      LayerHyper hyper;
      for (const auto& [key, value] : jl.at("hyper").items()) {
        hyper[key] = value.get<std::int64_t>();
      }
      block.add(make_layer(jl.at("kind").get<std::string>(), hyper));
    }
    blocks.push_back(std::move(block));
  }
  const json& js = desc.at("input_spec");
  InputSpec spec{js.at("channels").get<std::int64_t>(), js.at("height").get<std::int64_t>(),
                 js.at("width").get<std::int64_t>()};
  return BlockChain(std::move(blocks), spec);
}

void write_container(const std::string& path, const char magic[4], const json& header,
                     const std::vector<const Tensor*>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(magic, 4);
  write_u32(out, kFormatVersion);
  const std::string header_text = header.dump();
  write_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const Tensor* t : tensors) write_doubles(out, t->data(), t->numel());
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

json read_container(const std::string& path, const char magic[4], std::ifstream& in) {
  in.open(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  char got[4];
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0) {
    throw std::runtime_error("'" + path + "' is not a " + std::string(magic, 4) + " container");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("'" + path + "': unsupported format version " +
                             std::to_string(version));
  }
  const std::uint64_t header_len = read_u64(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("'" + path + "': truncated header");
  return json::parse(header_text);
}

}  // namespace

const BlockChain& Checkpoint::part(const std::string& name) const {
  const auto it = parts.find(name);
  if (it == parts.end()) {
    throw std::runtime_error("checkpoint has no part '" + name + "'");
  }
  return it->second;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json parts = json::object();
  std::vector<const Tensor*> tensors;
  for (const auto& [name, chain] : ckpt.parts) {
    parts[name] = chain_descriptor(chain);
    for (Tensor* t : const_cast<BlockChain&>(chain).params()) tensors.push_back(t);
  }
  json header{{"format_version", ckpt.format_version},
              {"split", {{"front_end", ckpt.split.front_end}, {"mid_end", ckpt.split.mid_end}}},
              {"loss_weights",
               {{"alpha", ckpt.weights.alpha},
                {"beta", ckpt.weights.beta},
                {"gamma_h", ckpt.weights.gamma_h},
                {"gamma_r", ckpt.weights.gamma_r}}},
              {"parts", parts}};
  write_container(path, kModelMagic, header, tensors);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in;
  const json header = read_container(path, kModelMagic, in);

  Checkpoint ckpt;
  ckpt.format_version = header.at("format_version").get<int>();
  ckpt.split.front_end = header.at("split").at("front_end").get<std::size_t>();
  ckpt.split.mid_end = header.at("split").at("mid_end").get<std::size_t>();
  const json& jw = header.at("loss_weights");
  ckpt.weights.alpha = jw.at("alpha").get<double>();
  ckpt.weights.beta = jw.at("beta").get<double>();
  ckpt.weights.gamma_h = jw.at("gamma_h").get<double>();
  ckpt.weights.gamma_r = jw.at("gamma_r").get<double>();

  for (const auto& [name, desc] : header.at("parts").items()) {
    ckpt.parts.emplace(name, chain_from_descriptor(desc));
  }
  // std::map iterates parts in the same (sorted) order they were written.
  for (auto& [name, chain] : ckpt.parts) {
    (void)name;
    for (Tensor* t : chain.params()) read_doubles(in, t->data(), t->numel());
  }
  if (!in) throw std::runtime_error("'" + path + "': truncated parameter data");
  return ckpt;
}

Checkpoint checkpoint_from_grafted(const GraftedModel& model, const BlockChain& intensity_front,
                                   const SplitSpec& spec, const LossWeights& weights) {
  Checkpoint ckpt;
  ckpt.split = spec;
  ckpt.weights = weights;
  ckpt.parts.emplace("front", intensity_front);
  ckpt.parts.emplace("mid", model.mid);
  ckpt.parts.emplace("last", model.last);
  ckpt.parts.emplace("gn_front", model.gn_front);
  return ckpt;
}

Checkpoint checkpoint_from_chain(const BlockChain& chain, const SplitSpec& spec) {
  Checkpoint ckpt;
  ckpt.split = spec;
  SplitParts parts = split(chain, spec);
  ckpt.parts.emplace("front", std::move(parts.front));
  ckpt.parts.emplace("mid", std::move(parts.mid));
  ckpt.parts.emplace("last", std::move(parts.last));
  return ckpt;
}

BlockChain assemble_pretrained(const Checkpoint& ckpt) {
  const BlockChain& front = ckpt.part("front");
  const BlockChain& mid = ckpt.part("mid");
  const BlockChain& last = ckpt.part("last");
  std::vector<Block> blocks;
  for (const Block& b : front.blocks()) blocks.push_back(b);
  for (const Block& b : mid.blocks()) blocks.push_back(b);
  for (const Block& b : last.blocks()) blocks.push_back(b);
  return BlockChain(std::move(blocks), front.input_spec());
}

GraftedModel assemble_grafted(const Checkpoint& ckpt) {
  return graft(ckpt.part("gn_front"), ckpt.part("mid"), ckpt.part("last"));
}

void save_tensor_blob(const std::string& path, const Tensor& tensor) {
  json header{{"shape", tensor.shape()}, {"dtype", "f64"}};
  write_container(path, kTensorMagic, header, {&tensor});
}

Tensor load_tensor_blob(const std::string& path) {
  std::ifstream in;
  const json header = read_container(path, kTensorMagic, in);
  Tensor t(header.at("shape").get<std::vector<std::int64_t>>());
  read_doubles(in, t.data(), t.numel());
  if (!in) throw std::runtime_error("'" + path + "': truncated tensor data");
  return t;
}

}  // namespace graftkit
