#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cardiomm/core/binary_io.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/nn/param.hpp"

#include <nlohmann/json.hpp>

namespace cardiomm {

inline constexpr int kCheckpointFormatVersion = 1;

/// Named parameter arrays plus a manifest describing where they came from.
/// On disk: `manifest.json` and a single `params.bin` of little-endian
/// float32 in manifest order.
struct Checkpoint {
  std::string architecture;
  std::string stage;
  std::string config_hash;
  nlohmann::json best_metric;  // e.g. {"val_loss": ...} or {"val_bal_acc": ...}
  std::map<std::string, MatF> arrays;

  std::string id() const { return stage + "-" + config_hash; }

  static Checkpoint from_params(const ParamRefs<float>& params,
                                std::string architecture, std::string stage,
                                std::string config_hash) {
    Checkpoint ckpt;
    ckpt.architecture = std::move(architecture);
    ckpt.stage = std::move(stage);
    ckpt.config_hash = std::move(config_hash);
    for (const auto* p : params) {
      check_arg(!ckpt.arrays.count(p->name),
                "checkpoint: duplicate parameter name '" + p->name + "'");
      ckpt.arrays[p->name] = p->value;
    }
    return ckpt;
  }

  /// Copies stored arrays into matching params. Every target parameter must
  /// be present with an identical shape; anything else is an architecture
  /// mismatch.
  void apply(const ParamRefs<float>& params) const {
    for (auto* p : params) {
      auto it = arrays.find(p->name);
      if (it == arrays.end())
        throw DependencyError("checkpoint '" + id() + "': missing parameter '" +
                              p->name + "'");
      if (it->second.rows() != p->value.rows() ||
          it->second.cols() != p->value.cols())
        throw DependencyError(
            "checkpoint '" + id() + "': shape mismatch for '" + p->name +
            "': stored " + std::to_string(it->second.rows()) + "x" +
            std::to_string(it->second.cols()) + ", model wants " +
            std::to_string(p->value.rows()) + "x" +
            std::to_string(p->value.cols()));
      p->value = it->second;
    }
  }
};

inline void save_checkpoint(const Checkpoint& ckpt,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json entries = nlohmann::json::array();
  std::ofstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw IoError("save_checkpoint: cannot write params.bin under " + dir.string());
  std::uint64_t offset = 0;
  for (const auto& [name, m] : ckpt.arrays) {
    entries.push_back({{"name", name},
                       {"shape", {m.rows(), m.cols()}},
                       {"offset", offset}});
    write_f32_le(bin, m.data(), static_cast<std::size_t>(m.size()));
    offset += static_cast<std::uint64_t>(m.size()) * 4;
  }
  nlohmann::json manifest{{"format_version", kCheckpointFormatVersion},
                          {"architecture", ckpt.architecture},
                          {"stage", ckpt.stage},
                          {"config_hash", ckpt.config_hash},
                          {"best_metric", ckpt.best_metric},
                          {"params", entries}};
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw IoError("save_checkpoint: cannot write manifest under " + dir.string());
  mf << manifest.dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf)
    throw DependencyError("load_checkpoint: no manifest.json under " +
                          dir.string() + " (was the upstream stage run?)");
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_checkpoint: malformed manifest: " + std::string(e.what()));
  }
  const int version = manifest.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion)
    throw IoError("load_checkpoint: unsupported format version " +
                  std::to_string(version) + ", expected " +
                  std::to_string(kCheckpointFormatVersion));

  Checkpoint ckpt;
  ckpt.architecture = manifest.at("architecture").get<std::string>();
  ckpt.stage = manifest.at("stage").get<std::string>();
  ckpt.config_hash = manifest.at("config_hash").get<std::string>();
  ckpt.best_metric = manifest.value("best_metric", nlohmann::json());

  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw IoError("load_checkpoint: missing params.bin under " + dir.string());
  const auto file_bytes = std::filesystem::file_size(dir / "params.bin");
  for (const auto& e : manifest.at("params")) {
    const std::string name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<std::vector<Index>>();
    const auto offset = e.at("offset").get<std::uint64_t>();
    check_arg(shape.size() == 2, "load_checkpoint: malformed shape for '" + name + "'");
    const auto bytes = static_cast<std::uint64_t>(shape[0]) *
                       static_cast<std::uint64_t>(shape[1]) * 4;
    if (offset + bytes > file_bytes)
      throw IoError("load_checkpoint: params.bin holds " +
                    std::to_string(file_bytes) + " bytes but '" + name +
                    "' needs range [" + std::to_string(offset) + ", " +
                    std::to_string(offset + bytes) + ")");
    MatF m(shape[0], shape[1]);
    bin.seekg(static_cast<std::streamoff>(offset));
    read_f32_le(bin, m.data(), static_cast<std::size_t>(m.size()));
    if (!bin) throw IoError("load_checkpoint: short read for '" + name + "'");
    ckpt.arrays[name] = std::move(m);
  }
  return ckpt;
}

}  // namespace cardiomm
