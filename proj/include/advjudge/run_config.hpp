#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advjudge/corpus.hpp"
#include "advjudge/judge.hpp"

namespace advjudge {

/// Rule-based mock backend settings, as written under backends.<name>.
struct MockBackendSpec {
  std::string rule = "keyword";  // keyword | word-count | constant
  std::vector<std::string> keywords;
  double base = 1.0;
  double weight = 1.0;
  double cap = 5.0;
  double value = 3.0;  // constant rule
  double slope = 1.0;
  // Language-model behaviour; empty type means no log-probabilities.
  std::string lm_type;  // vocabulary | hashed | uniform
  std::vector<std::string> lm_known;
  bool lm_known_from_corpus = false;
  double lm_known_logprob = -2.0;
  double lm_unknown_logprob = -10.0;
  double lm_lo = -8.0;
  double lm_hi = -1.0;
  double lm_vocab_size = 50000.0;
};

struct BackendSpec {
  std::string name;
  std::string type = "mock";  // mock | remote
  BackendConfig config;       // backend_id defaults to the name
  MockBackendSpec mock;
};

struct AttackSettings {
  std::filesystem::path vocabulary;
  std::vector<std::string> words;  // inline vocabulary, used when no file is given
  bool lowercase_only = false;
  std::size_t min_len = 1;
  std::size_t max_len = 64;
  std::size_t max_words = 4;
  std::optional<std::size_t> subsample;
  bool resample_pairs = true;
  bool literal_objective = false;
};

struct RunConfig {
  std::filesystem::path source;  // config file the values came from
  std::string task = "summ";
  std::uint64_t seed = 0;
  std::filesystem::path corpus_path;
  CorpusFormat corpus_format = CorpusFormat::native_jsonl;
  SplitSpec split;
  std::map<std::string, BackendSpec> backends;
  std::string backend;
  std::vector<std::string> attributes{"OVE"};
  std::string mode = "comparative";
  std::string score = "expectation";  // expectation | direct
  int max_score = 5;
  AttackSettings attack;
  std::vector<std::size_t> prefix_lengths;  // empty: 0..L
  bool strict_pessimistic = false;
  std::string lm_backend;  // detection; empty: `backend`
  std::filesystem::path comparative_template;
  std::filesystem::path absolute_template;
  std::filesystem::path cache;
  std::filesystem::path out = "out";
};

/// Parses YAML text. Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const std::string& yaml_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Throws ConfigError when names do not resolve or values are out of range.
void validate_run_config(const RunConfig& config);

/// Snapshot for manifests. Holds environment variable names, never their values.
nlohmann::json to_json(const RunConfig& config);

}  // namespace advjudge
