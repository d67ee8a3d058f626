#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "advjudge/corpus.hpp"
#include "advjudge/judge.hpp"
#include "advjudge/response_cache.hpp"
#include "advjudge/run_config.hpp"

namespace advjudge {

inline constexpr std::string_view kToolVersion = "0.3.0";

/// Backends built from a RunConfig, all sharing one response cache.
class BackendRegistry {
 public:
  void add(const std::string& name, std::shared_ptr<JudgeBackend> backend);
  JudgeBackend& get(const std::string& name) const;
  bool contains(const std::string& name) const { return backends_.contains(name); }

 private:
  std::map<std::string, std::shared_ptr<JudgeBackend>> backends_;
};

/// `corpus` feeds mock language models that learn their known words from it.
BackendRegistry make_backends(const RunConfig& config, const Corpus& corpus, std::shared_ptr<ResponseCache> cache);

/// Everything a command needs, loaded once.
struct RunContext {
  RunConfig config;
  Corpus corpus;
  CorpusSplit split;
  std::shared_ptr<ResponseCache> cache;
  BackendRegistry backends;
  std::string started_at;
};

/// Validates the config, loads and splits the corpus, opens the cache and
/// builds the backends.
RunContext prepare_run(const RunConfig& config);

struct CommandResult {
  std::vector<std::filesystem::path> outputs;
  std::filesystem::path manifest;
};

/// Spearman correlation of the configured backend with human scores, one
/// row per attribute, on the full corpus.
CommandResult cmd_assess(RunContext& ctx);

/// Learns a phrase on the dev split; writes the phrase artifact.
CommandResult cmd_attack(RunContext& ctx);

/// Prefix sweep of a phrase on the test split.
CommandResult cmd_evaluate(RunContext& ctx, const std::filesystem::path& phrase_path);

/// Prefix sweep against `target_backend`, labelled with both backend ids.
CommandResult cmd_transfer(RunContext& ctx, const std::filesystem::path& phrase_path,
                           const std::string& target_backend);

/// Perplexity detection of the phrase on the test split.
CommandResult cmd_detect(RunContext& ctx, const std::filesystem::path& phrase_path);

/// Writes <out>/<command>_manifest.json listing `outputs` with their hashes.
std::filesystem::path write_manifest(const RunContext& ctx, const std::string& command,
                                     const std::vector<std::filesystem::path>& outputs);

}  // namespace advjudge
