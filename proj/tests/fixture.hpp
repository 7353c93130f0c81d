#pragma once

// Writes a synthetic dataset, manifest and run config into a directory so
// the CLI can be driven end to end.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cascade/cli.hpp"
#include "cascade/data.hpp"
#include "json.hpp"

namespace cascade::testing {

struct Project {
  std::filesystem::path dir;
  std::filesystem::path config;
  Dataset data;
};

inline Project write_project(const std::filesystem::path& dir, const SynthesisSpec& spec, const std::string& backend_yaml,
                             const std::string& cascade_yaml = "", const std::string& evaluation_yaml = "") {
  std::filesystem::create_directories(dir);
  Project p{dir, dir / "run.yaml", synthesize_dataset(spec)};
  {
    std::ofstream labels(dir / "labels.txt");
    for (std::size_t i = 0; i < p.data.labels.size(); ++i) labels << p.data.labels[i] << '\n';
  }
  {
    std::ofstream scores(dir / "scores.jsonl");
    write_scores(scores, p.data.records, p.data.labels);
  }
  std::ofstream(dir / "manifest.yaml") << "name: synthetic\nlabel_set: labels.txt\nscores: scores.jsonl\nsplit: test\n";
  std::ofstream cfg(p.config);
  cfg << "manifest: manifest.yaml\n";
  cfg << "cascade:\n  k: " << spec.k << "\n" << cascade_yaml;
  cfg << "backend:\n" << backend_yaml;
  if (!evaluation_yaml.empty()) cfg << "evaluation:\n" << evaluation_yaml;
  cfg << "output_dir: out\n";
  return p;
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cascade-cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

/// Document with every latency key and the metadata block removed.
inline nlohmann::json strip_volatile(nlohmann::json doc) {
  if (doc.is_object()) {
    doc.erase("metadata");
    for (auto it = doc.begin(); it != doc.end();) {
      if (it.key().find("latency") != std::string::npos || it.key() == "est_throughput") {
        it = doc.erase(it);
      } else {
        *it = strip_volatile(*it);
        ++it;
      }
    }
  } else if (doc.is_array()) {
    for (auto& v : doc) v = strip_volatile(v);
  }
  return doc;
}

/// Predictions file with latency keys stripped, one JSON line per item.
inline std::string predictions_without_latency(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line, out;
  while (std::getline(in, line)) out += strip_volatile(nlohmann::json::parse(line)).dump() + '\n';
  return out;
}

}  // namespace cascade::testing
