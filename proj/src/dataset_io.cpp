#include "csitk/dataset_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "csitk/errors.hpp"

namespace csitk::io {
namespace {

namespace fs = std::filesystem;
using channel::CsiTensor;
using channel::Dataset;
using channel::DatasetConfig;
using channel::ScenarioConfig;
using nlohmann::json;

void append_f32_le(std::vector<char>& buf, float v) {
  const uint32_t bits = std::bit_cast<uint32_t>(v);
  buf.push_back(static_cast<char>(bits & 0xff));
  buf.push_back(static_cast<char>((bits >> 8) & 0xff));
  buf.push_back(static_cast<char>((bits >> 16) & 0xff));
  buf.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float read_f32_le(const char* p) {
  const uint32_t bits = static_cast<uint32_t>(static_cast<unsigned char>(p[0])) |
                        static_cast<uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
                        static_cast<uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
                        static_cast<uint32_t>(static_cast<unsigned char>(p[3])) << 24;
  return std::bit_cast<float>(bits);
}

json scenario_to_json(const ScenarioConfig& s) {
  return json{{"id", channel::to_string(s.id)},
              {"profile", channel::to_string(s.profile)},
              {"rms_delay_spread", s.rms_delay_spread},
              {"doppler",
               {{"speed", s.doppler.speed},
                {"carrier_frequency", s.doppler.carrier_frequency},
                {"light_speed", s.doppler.light_speed}}},
              {"path_count", s.path_count},
              {"rician_k", s.rician_k}};
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig s;
  s.id = channel::scenario_from_string(j.at("id").get<std::string>());
  s.profile = channel::profile_from_string(j.at("profile").get<std::string>());
  s.rms_delay_spread = j.at("rms_delay_spread").get<double>();
  const json& d = j.at("doppler");
  s.doppler.speed = d.at("speed").get<double>();
  s.doppler.carrier_frequency = d.at("carrier_frequency").get<double>();
  s.doppler.light_speed = d.at("light_speed").get<double>();
  s.path_count = j.at("path_count").get<int>();
  s.rician_k = j.at("rician_k").get<double>();
  return s;
}

}  // namespace

json dataset_config_to_json(const DatasetConfig& config) {
  json scenarios = json::array();
  for (const ScenarioConfig& s : config.scenarios) scenarios.push_back(scenario_to_json(s));
  return json{{"cells", config.cells},
              {"ues_per_cell", config.ues_per_cell},
              {"scenarios", scenarios},
              {"n_subcarriers", config.n_subcarriers},
              {"n_tx", config.n_tx},
              {"n_rx", config.n_rx},
              {"subcarrier_spacing", config.subcarrier_spacing},
              {"snr_db", config.snr_db},
              {"seed", config.seed},
              {"path_loss",
               {{"exponent", config.path_loss.exponent},
                {"ref_frequency", config.path_loss.ref_frequency},
                {"freq_scaling", config.path_loss.freq_scaling}}},
              {"distance_min_m", config.distance_min_m},
              {"distance_max_m", config.distance_max_m}};
}

DatasetConfig dataset_config_from_json(const json& j) {
  DatasetConfig c;
  c.cells = j.at("cells").get<int>();
  c.ues_per_cell = j.at("ues_per_cell").get<int>();
  c.scenarios.clear();
  for (const json& s : j.at("scenarios")) c.scenarios.push_back(scenario_from_json(s));
  c.n_subcarriers = j.at("n_subcarriers").get<int>();
  c.n_tx = j.at("n_tx").get<int>();
  c.n_rx = j.at("n_rx").get<int>();
  c.subcarrier_spacing = j.at("subcarrier_spacing").get<double>();
  c.snr_db = j.at("snr_db").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  const json& pl = j.at("path_loss");
  c.path_loss.exponent = pl.at("exponent").get<double>();
  c.path_loss.ref_frequency = pl.at("ref_frequency").get<double>();
  c.path_loss.freq_scaling = pl.at("freq_scaling").get<double>();
  c.distance_min_m = j.at("distance_min_m").get<double>();
  c.distance_max_m = j.at("distance_max_m").get<double>();
  return c;
}

void write_dataset(const std::string& dir, const Dataset& ds) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("write_dataset: cannot create " + dir + ": " + ec.message());

  json records = json::array();
  std::vector<char> blob;
  blob.reserve(ds.tensors.size() * (ds.tensors.empty() ? 0 : ds.tensors[0].size() * 8));
  for (size_t i = 0; i < ds.tensors.size(); ++i) {
    const CsiTensor& h = ds.tensors[i];
    records.push_back(json{{"index", i},
                           {"cell", h.cell_id},
                           {"ue", h.ue_id},
                           {"scenario", channel::to_string(h.scenario)},
                           {"offset", blob.size()}});
    for (const channel::Complex& z : h.data) {
      append_f32_le(blob, static_cast<float>(z.real()));
      append_f32_le(blob, static_cast<float>(z.imag()));
    }
  }

  json manifest{{"magic", kDatasetMagic},
                {"version", kDatasetVersion},
                {"config", dataset_config_to_json(ds.config)},
                {"records", records}};

  {
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("write_dataset: cannot open manifest.json for writing");
    f << manifest.dump(2) << "\n";
    if (!f) throw IoError("write_dataset: manifest.json write failed");
  }
  {
    std::ofstream f(fs::path(dir) / "data.bin", std::ios::binary);
    if (!f) throw IoError("write_dataset: cannot open data.bin for writing");
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!f) throw IoError("write_dataset: data.bin write failed");
  }
}

Dataset read_dataset(const std::string& dir) {
  json manifest;
  {
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("read_dataset: cannot open " + dir + "/manifest.json");
    try {
      f >> manifest;
    } catch (const json::exception& e) {
      throw IoError(std::string("read_dataset: malformed manifest.json: ") + e.what());
    }
  }
  if (!manifest.contains("magic") || manifest["magic"] != kDatasetMagic)
    throw IoError("read_dataset: missing or wrong magic (want \"CSID\")");
  if (!manifest.contains("version") || manifest["version"].get<int>() != kDatasetVersion)
    throw IoError("read_dataset: unsupported dataset version");

  Dataset ds;
  try {
    ds.config = dataset_config_from_json(manifest.at("config"));
  } catch (const json::exception& e) {
    throw IoError(std::string("read_dataset: bad config block: ") + e.what());
  }

  std::vector<char> blob;
  {
    std::ifstream f(fs::path(dir) / "data.bin", std::ios::binary | std::ios::ate);
    if (!f) throw IoError("read_dataset: cannot open " + dir + "/data.bin");
    const std::streamsize n = f.tellg();
    f.seekg(0);
    blob.resize(static_cast<size_t>(n));
    f.read(blob.data(), n);
    if (!f) throw IoError("read_dataset: data.bin read failed");
  }

  const size_t entries =
      static_cast<size_t>(ds.config.n_subcarriers) * ds.config.n_tx * ds.config.n_rx;
  const size_t matrix_bytes = entries * 8;  // two f32 per complex entry
  ds.tensors.reserve(manifest.at("records").size());
  for (const json& r : manifest.at("records")) {
    const size_t offset = r.at("offset").get<size_t>();
    if (offset + matrix_bytes > blob.size())
      throw IoError("read_dataset: record offset past end of data.bin");
    CsiTensor h =
        CsiTensor::zeros(ds.config.n_subcarriers, ds.config.n_tx, ds.config.n_rx);
    const char* p = blob.data() + offset;
    for (size_t i = 0; i < entries; ++i) {
      const float re = read_f32_le(p + i * 8);
      const float im = read_f32_le(p + i * 8 + 4);
      h.data[i] = channel::Complex(re, im);
    }
    h.cell_id = r.at("cell").get<int>();
    h.ue_id = r.at("ue").get<int>();
    h.scenario = channel::scenario_from_string(r.at("scenario").get<std::string>());
    ds.tensors.push_back(std::move(h));
  }
  return ds;
}

}  // namespace csitk::io
