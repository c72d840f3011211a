#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nowcast::pipeline {

/// Key-value configuration: a TOML-style `key = value` file plus flag
/// overrides (flags win). Keys are dotted lowercase.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_real(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Randomized stages must be given an explicit seed.
  uint64_t require_seed(const std::string& stage) const;

  std::string out_dir() const { return get_string("paths.out", "out"); }
  int workers() const;

  /// Hash of the semantic configuration; runtime.* keys and the output
  /// directory do not participate, so reruns and different worker counts
  /// produce identical artifacts.
  uint64_t semantic_hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct ManifestFile {
  std::string file;  // basename
  std::string hash;  // 16-hex FNV-1a
  std::size_t rows = 0;
};

struct Manifest {
  std::string stage;
  std::string config_hash;
  std::vector<ManifestFile> inputs;
  std::vector<ManifestFile> outputs;

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
};

/// Stage names in pipeline order (report last); `synth` stands apart.
const std::vector<std::string>& pipeline_stages();

/// Runs one stage: validates prerequisites, reads inputs, writes artifacts
/// atomically and records a manifest. Throws MissingArtifactError when a
/// prerequisite artifact is absent (the message names the stage to run).
void run_stage(const std::string& stage, const Config& config);

/// Cross-checks every manifest in the output directory: an input consumed
/// under a name some earlier stage produced must carry the same hash.
/// `exclude_stage` skips one manifest (the report excludes its own, which
/// is being rewritten while it runs).
struct ProvenanceCheck {
  bool ok = true;
  std::vector<std::string> stages_seen;
  std::vector<std::string> mismatches;
};
ProvenanceCheck verify_manifest_chain(const std::string& out_dir,
                                      const std::string& exclude_stage = "");

}  // namespace nowcast::pipeline
