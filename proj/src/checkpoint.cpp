#include "sra/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sra {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "SRACKPT1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian hosts");

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},
          {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},
          {"d_ff", c.d_ff},
          {"vocab_size", c.vocab_size},
          {"max_len", c.max_len},
          {"num_classes", c.num_classes},
          {"dropout", c.dropout},
          {"supervision_layer", c.supervision_layer},
          {"supervision_head", c.supervision_head == kMeanOverHeads ? json("mean") : json(c.supervision_head)},
          {"init_seed", c.init_seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.supervision_layer = j.at("supervision_layer").get<int>();
  const auto& head = j.at("supervision_head");
  c.supervision_head = head.is_string() ? kMeanOverHeads : head.get<int>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Parameters& params, const json& manifest) {
  json tensors = json::array();
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    tensors.push_back({{"name", params.name(i)},
                       {"shape", {params.tensor(i).rows(), params.tensor(i).cols()}}});
  }
  const json header = {{"format", "sra-checkpoint"},
                       {"config", to_json(params.config())},
                       {"manifest", manifest},
                       {"tensors", std::move(tensors)}};
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, kMagicLen);
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    const auto& t = params.tensor(i);
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[kMagicLen];
  in.read(magic, kMagicLen);
  if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw std::runtime_error(path.string() + " is not an SRA checkpoint");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header in " + path.string());

  const json header = json::parse(text);
  Checkpoint ckpt{Parameters(model_config_from_json(header.at("config"))), header.value("manifest", json::object())};
  const auto& table = header.at("tensors");
  if (table.size() != ckpt.params.tensor_count()) throw std::runtime_error("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < ckpt.params.tensor_count(); ++i) {
    auto& t = ckpt.params.tensor(i);
    const auto shape = table[i].at("shape").get<std::vector<Eigen::Index>>();
    if (table[i].at("name").get<std::string>() != ckpt.params.name(i) || shape.size() != 2 ||
        shape[0] != t.rows() || shape[1] != t.cols()) {
      throw std::runtime_error("checkpoint tensor " + std::to_string(i) + " does not match the config");
    }
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!in) throw std::runtime_error("truncated checkpoint data in " + path.string());
  return ckpt;
}

}  // namespace sra
