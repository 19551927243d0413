#include "csitk/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "csitk/errors.hpp"

namespace csitk::io {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void append_f64_le(std::vector<char>& buf, double v) {
  const uint64_t bits = std::bit_cast<uint64_t>(v);
  for (int k = 0; k < 8; ++k) buf.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
}

double read_f64_le(const char* p) {
  uint64_t bits = 0;
  for (int k = 0; k < 8; ++k)
    bits |= static_cast<uint64_t>(static_cast<unsigned char>(p[k])) << (8 * k);
  return std::bit_cast<double>(bits);
}

}  // namespace

const Tensor* NamedTensors::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void write_checkpoint(const std::string& dir, const NamedTensors& ckpt) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("write_checkpoint: cannot create " + dir + ": " + ec.message());

  json table = json::array();
  std::vector<char> blob;
  for (const auto& [name, t] : ckpt.tensors) {
    table.push_back(json{{"name", name}, {"shape", t.shape}, {"offset", blob.size()}});
    for (double v : t.values) append_f64_le(blob, v);
  }
  json manifest{{"magic", kCheckpointMagic},
                {"version", kCheckpointVersion},
                {"meta", ckpt.meta},
                {"tensors", table}};

  {
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("write_checkpoint: cannot open manifest.json");
    f << manifest.dump(2) << "\n";
    if (!f) throw IoError("write_checkpoint: manifest.json write failed");
  }
  {
    std::ofstream f(fs::path(dir) / "params.bin", std::ios::binary);
    if (!f) throw IoError("write_checkpoint: cannot open params.bin");
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!f) throw IoError("write_checkpoint: params.bin write failed");
  }
}

NamedTensors read_checkpoint(const std::string& dir) {
  json manifest;
  {
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("read_checkpoint: cannot open " + dir + "/manifest.json");
    try {
      f >> manifest;
    } catch (const json::exception& e) {
      throw IoError(std::string("read_checkpoint: malformed manifest.json: ") + e.what());
    }
  }
  if (!manifest.contains("magic") || manifest["magic"] != kCheckpointMagic)
    throw IoError("read_checkpoint: missing or wrong magic (want \"CSIC\")");
  if (!manifest.contains("version") || manifest["version"].get<int>() != kCheckpointVersion)
    throw IoError("read_checkpoint: unsupported checkpoint version");

  std::vector<char> blob;
  {
    std::ifstream f(fs::path(dir) / "params.bin", std::ios::binary | std::ios::ate);
    if (!f) throw IoError("read_checkpoint: cannot open " + dir + "/params.bin");
    const std::streamsize n = f.tellg();
    f.seekg(0);
    blob.resize(static_cast<size_t>(n));
    f.read(blob.data(), n);
    if (!f) throw IoError("read_checkpoint: params.bin read failed");
  }

  NamedTensors ckpt;
  ckpt.meta = manifest.value("meta", json::object());
  for (const json& rec : manifest.at("tensors")) {
    const std::string name = rec.at("name").get<std::string>();
    const std::vector<int> shape = rec.at("shape").get<std::vector<int>>();
    const size_t offset = rec.at("offset").get<size_t>();
    Tensor t = Tensor::zeros(shape);
    if (offset + t.values.size() * 8 > blob.size())
      throw IoError("read_checkpoint: tensor '" + name + "' extends past params.bin");
    for (size_t i = 0; i < t.values.size(); ++i)
      t.values[i] = read_f64_le(blob.data() + offset + i * 8);
    ckpt.tensors.emplace_back(name, std::move(t));
  }
  return ckpt;
}

json model_config_to_json(const model::ModelConfig& c) {
  return json{{"d_model", c.d_model}, {"n_layers", c.n_layers},
              {"n_heads", c.n_heads}, {"d_ff", c.d_ff},
              {"max_len", c.max_len}, {"feature_dim", c.feature_dim},
              {"plain_head", c.plain_head}};
}

model::ModelConfig model_config_from_json(const json& j) {
  model::ModelConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  c.plain_head = j.at("plain_head").get<bool>();
  c.validate();
  return c;
}

void save_model(const std::string& dir, const model::TransformerModel& m, json extra_meta) {
  NamedTensors ckpt;
  ckpt.meta = json{{"kind", "transformer"}, {"model_config", model_config_to_json(m.config())}};
  for (auto& [key, value] : extra_meta.items()) ckpt.meta[key] = value;
  m.params().visit(
      [&](const std::string& name, const Tensor& t) { ckpt.tensors.emplace_back(name, t); });
  write_checkpoint(dir, ckpt);
}

model::TransformerModel load_model(const std::string& dir) {
  const NamedTensors ckpt = read_checkpoint(dir);
  if (ckpt.meta.value("kind", "") != "transformer")
    throw IoError("load_model: checkpoint is not a transformer model");
  model::ModelConfig cfg;
  try {
    cfg = model_config_from_json(ckpt.meta.at("model_config"));
  } catch (const json::exception& e) {
    throw IoError(std::string("load_model: bad model_config: ") + e.what());
  }
  model::ModelParams params = model::init_params(cfg, 0);
  params.visit([&](const std::string& name, Tensor& t) {
    const Tensor* stored = ckpt.find(name);
    if (!stored) throw IoError("load_model: missing parameter '" + name + "'");
    if (stored->shape != t.shape)
      throw IoError("load_model: shape mismatch for '" + name + "'");
    t = *stored;
  });
  return model::TransformerModel(cfg, std::move(params));
}

}  // namespace csitk::io
