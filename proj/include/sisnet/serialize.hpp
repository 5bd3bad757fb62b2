#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "sisnet/pipeline.hpp"

namespace sisnet {

// Writes one tensor text file per parameter plus a JSON manifest mapping
// parameter names to relative paths.
inline void save_params(Pipeline& pipe, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["params"] = nlohmann::json::object();
  for (auto& [name, tensor] : pipe.params()) {
    const std::string file = name + ".txt";
    write_tensor_text((dir / file).string(), *tensor);
    manifest["params"][name] = file;
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw value_error("cannot write parameter manifest in '" + dir.string() + "'");
  os << manifest.dump(2) << '\n';
}

inline void load_params(Pipeline& pipe, const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw value_error("cannot open parameter manifest in '" + dir.string() + "'");
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw value_error(std::string("parameter manifest: ") + e.what());
  }
  if (!manifest.contains("params"))
    throw value_error("parameter manifest: missing 'params' object");
  for (auto& [name, tensor] : pipe.params()) {
    if (!manifest["params"].contains(name))
      throw value_error("parameter manifest: missing entry for '" + name + "'");
    const std::string file = manifest["params"][name].get<std::string>();
    Tensor loaded = read_tensor_text((dir / file).string());
    if (!loaded.same_shape(*tensor)) {
      throw shape_error("parameter '" + name + "': stored shape " +
                        shape_str(loaded.shape()) + " does not match model shape " +
                        shape_str(tensor->shape()));
    }
    *tensor = std::move(loaded);
  }
}

}  // namespace sisnet
