#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "resdyn/core/check.hpp"
#include "resdyn/model/fdt.hpp"
#include "resdyn/model/fdt_config.hpp"

namespace resdyn::model {

inline nlohmann::json fdt_config_to_json(const FdtConfig& c) {
  return nlohmann::json{{"n", c.n},
                        {"t_short", c.t_short},
                        {"t_long", c.t_long},
                        {"d_model", c.d_model},
                        {"n_heads", c.n_heads},
                        {"d_k", c.d_k},
                        {"d_ff", c.d_ff},
                        {"horizon", c.horizon},
                        {"n_layers", c.n_layers},
                        {"mem_hidden", c.mem_hidden},
                        {"use_global_token", c.use_global_token},
                        {"use_memory", c.use_memory},
                        {"layer_norm", c.layer_norm},
                        {"readout", to_string(c.readout)}};
}

inline FdtConfig fdt_config_from_json(const nlohmann::json& j) {
  FdtConfig c;
  c.n = j.at("n").get<std::size_t>();
  c.t_short = j.at("t_short").get<std::size_t>();
  c.t_long = j.at("t_long").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_k = j.at("d_k").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.horizon = j.at("horizon").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.mem_hidden = j.at("mem_hidden").get<std::size_t>();
  c.use_global_token = j.at("use_global_token").get<bool>();
  c.use_memory = j.at("use_memory").get<bool>();
  c.layer_norm = j.at("layer_norm").get<bool>();
  c.readout = readout_from_string(j.at("readout").get<std::string>());
  c.validate();
  return c;
}

/// Self-describing checkpoint: magic, length-prefixed JSON header (format
/// version, architecture, normalization statistics, parameter directory),
/// then the raw 64-bit parameter values in directory order.
inline void save_checkpoint(const FdtModel& model, const std::string& path) {
  static constexpr char kMagic[8] = {'R', 'D', 'N', 'C', 'K', 'P', 'T', '1'};

  auto vec_to_json = [](const Eigen::VectorXd& v) {
    std::vector<double> out(v.data(), v.data() + v.size());
    return nlohmann::json(out);
  };
  nlohmann::json header{{"format_version", 1},
                        {"config", fdt_config_to_json(model.config())},
                        {"normalization",
                         {{"input_mean", vec_to_json(model.input_mean())},
                          {"input_std", vec_to_json(model.input_std())},
                          {"target_mean", vec_to_json(model.target_mean())},
                          {"target_std", vec_to_json(model.target_std())}}}};
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& [name, p] : model.params().entries())
    dir.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  header["params"] = dir;

  const std::string header_str = header.dump();
  std::ofstream out(path, std::ios::binary);
  RESDYN_REQUIRE(out.good(), "checkpoint: cannot open '" << path << "' for writing");
  out.write(kMagic, sizeof(kMagic));
  const auto header_size = static_cast<std::uint64_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&header_size), sizeof(header_size));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, p] : model.params().entries())
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  RESDYN_REQUIRE(out.good(), "checkpoint: write failed for '" << path << "'");
}

inline FdtModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  RESDYN_REQUIRE(in.good(), "checkpoint: cannot open '" << path << "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  RESDYN_REQUIRE(in.good() && std::memcmp(magic, "RDNCKPT1", 8) == 0,
                 "checkpoint: bad magic in '" << path << "'");
  std::uint64_t header_size = 0;
  in.read(reinterpret_cast<char*>(&header_size), sizeof(header_size));
  std::string header_str(header_size, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_size));
  RESDYN_REQUIRE(in.good(), "checkpoint: truncated header in '" << path << "'");
  const nlohmann::json header = nlohmann::json::parse(header_str);
  RESDYN_REQUIRE(header.at("format_version").get<int>() == 1,
                 "checkpoint: unsupported format version in '" << path << "'");

  FdtModel model(fdt_config_from_json(header.at("config")));

  auto vec_from_json = [](const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  const auto& norm = header.at("normalization");
  model.set_normalization(vec_from_json(norm.at("input_mean")), vec_from_json(norm.at("input_std")),
                          vec_from_json(norm.at("target_mean")),
                          vec_from_json(norm.at("target_std")));

  for (const auto& entry : header.at("params")) {
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<std::size_t>();
    const auto cols = entry.at("cols").get<std::size_t>();
    core::Param& p = model.params().at(name);
    RESDYN_REQUIRE(p.value.rows() == rows && p.value.cols() == cols,
                   "checkpoint: shape of '" << name << "' does not match the stored config");
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  RESDYN_REQUIRE(in.good(), "checkpoint: truncated parameter data in '" << path << "'");
  return model;
}

}  // namespace resdyn::model
