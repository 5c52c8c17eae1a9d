#pragma once

// Run manifests: everything needed to re-execute a command and check that
// it reproduces its outputs byte for byte.

#include <chrono>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrm/dataset.hpp"
#include "rrm/error.hpp"
#include "rrm/kv_config.hpp"

namespace rrm {

inline constexpr const char* kVersionTag = "rrm-0.1.0";

struct FileDigest {
  std::string path;
  std::string hash;

  friend bool operator==(const FileDigest&, const FileDigest&) = default;
};

struct RunManifest {
  std::string version = kVersionTag;
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  KeyValues net_config;
  KeyValues trainer_config;
  KeyValues eval_config;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::string started_at;
  double wall_seconds = 0.0;
};

inline FileDigest digest(const std::string& path) { return {path, file_hash(path)}; }

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json to_json(const RunManifest& m) {
  auto files = [](const std::vector<FileDigest>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : v) arr.push_back({{"path", f.path}, {"hash", f.hash}});
    return arr;
  };
  return {{"format", "rrm-manifest"},
          {"version", m.version},
          {"command", m.command},
          {"argv", m.argv},
          {"seed", m.seed},
          {"net_config", m.net_config},
          {"trainer_config", m.trainer_config},
          {"eval_config", m.eval_config},
          {"inputs", files(m.inputs)},
          {"outputs", files(m.outputs)},
          {"started_at", m.started_at},
          {"wall_seconds", m.wall_seconds}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "rrm-manifest") throw IoError("not a run manifest");
  auto files = [](const nlohmann::json& arr) {
    std::vector<FileDigest> v;
    for (const auto& f : arr) v.push_back({f.at("path").get<std::string>(), f.at("hash").get<std::string>()});
    return v;
  };
  RunManifest m;
  m.version = j.at("version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.net_config = j.at("net_config").get<KeyValues>();
  m.trainer_config = j.at("trainer_config").get<KeyValues>();
  m.eval_config = j.at("eval_config").get<KeyValues>();
  m.inputs = files(j.at("inputs"));
  m.outputs = files(j.at("outputs"));
  m.started_at = j.value("started_at", "");
  m.wall_seconds = j.value("wall_seconds", 0.0);
  return m;
}

inline std::string manifest_path_for(const std::string& primary_output) {
  return primary_output + ".manifest.json";
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << to_json(m).dump(2) << '\n';
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest: " + path);
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + path + ": " + e.what());
  }
}

}  // namespace rrm
