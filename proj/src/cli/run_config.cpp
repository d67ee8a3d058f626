#include "advjudge/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "advjudge/assessment.hpp"
#include "advjudge/attack.hpp"
#include "advjudge/error.hpp"
#include "advjudge/prompt_templates.hpp"

namespace advjudge {

using nlohmann::json;

namespace {

template <typename T>
T get(const YAML::Node& node, const char* key, T fallback) {
  if (!node || !node[key] || node[key].IsNull()) return fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

void reject_unknown(const YAML::Node& node, const std::set<std::string>& known, const std::string& where) {
  if (!node || !node.IsMap()) return;
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "' in " + where);
  }
}

BackendSpec parse_backend(const std::string& name, const YAML::Node& node) {
  if (!node.IsMap()) throw ConfigError("backends." + name + " must be a mapping");
  reject_unknown(node,
                 {"type", "backend_id", "endpoint_url", "model", "api_key_env", "max_parallel", "timeout_ms",
                  "retry", "comparative_tokens", "score_tokens", "top_logprobs", "max_text_tokens", "rule",
                  "keywords", "base", "weight", "cap", "value", "slope", "lm"},
                 "backends." + name);
  BackendSpec b;
  b.name = name;
  b.type = get<std::string>(node, "type", "mock");
  if (b.type != "mock" && b.type != "remote") {
    throw ConfigError("backends." + name + ".type must be mock or remote, got '" + b.type + "'");
  }
  auto& c = b.config;
  c.backend_id = get<std::string>(node, "backend_id", name);
  c.endpoint_url = get<std::string>(node, "endpoint_url", "");
  c.model_name = get<std::string>(node, "model", b.type == "mock" ? "mock" : "");
  c.api_key_env = get<std::string>(node, "api_key_env", "");
  c.max_parallel = get<int>(node, "max_parallel", c.max_parallel);
  c.request_timeout = std::chrono::milliseconds(get<long long>(node, "timeout_ms", c.request_timeout.count()));
  if (node["retry"]) {
    c.retry.attempts = get<int>(node["retry"], "attempts", c.retry.attempts);
    c.retry.backoff = std::chrono::milliseconds(get<long long>(node["retry"], "backoff_ms", c.retry.backoff.count()));
  }
  c.comparative_tokens = get<std::vector<std::string>>(node, "comparative_tokens", c.comparative_tokens);
  c.score_tokens = get<std::vector<std::string>>(node, "score_tokens", c.score_tokens);
  c.top_logprobs = get<int>(node, "top_logprobs", c.top_logprobs);
  c.max_text_tokens = get<int>(node, "max_text_tokens", c.max_text_tokens);

  auto& m = b.mock;
  m.rule = get<std::string>(node, "rule", m.rule);
  m.keywords = get<std::vector<std::string>>(node, "keywords", m.keywords);
  m.base = get<double>(node, "base", m.base);
  m.weight = get<double>(node, "weight", m.weight);
  m.cap = get<double>(node, "cap", m.cap);
  m.value = get<double>(node, "value", m.value);
  m.slope = get<double>(node, "slope", m.slope);
  if (const auto lm = node["lm"]) {
    reject_unknown(lm,
                   {"type", "known", "known_from_corpus", "known_logprob", "unknown_logprob", "lo", "hi",
                    "vocab_size"},
                   "backends." + name + ".lm");
    m.lm_type = get<std::string>(lm, "type", "");
    m.lm_known = get<std::vector<std::string>>(lm, "known", {});
    m.lm_known_from_corpus = get<bool>(lm, "known_from_corpus", false);
    m.lm_known_logprob = get<double>(lm, "known_logprob", m.lm_known_logprob);
    m.lm_unknown_logprob = get<double>(lm, "unknown_logprob", m.lm_unknown_logprob);
    m.lm_lo = get<double>(lm, "lo", m.lm_lo);
    m.lm_hi = get<double>(lm, "hi", m.lm_hi);
    m.lm_vocab_size = get<double>(lm, "vocab_size", m.lm_vocab_size);
  }
  return b;
}

}  // namespace

RunConfig parse_run_config(const std::string& yaml_text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config must be a YAML mapping");
  reject_unknown(root,
                 {"task", "seed", "corpus", "split", "backends", "backend", "attribute", "attributes", "mode",
                  "score", "max_score", "attack", "evaluation", "detection", "templates", "cache", "out"},
                 "config");

  RunConfig c;
  c.task = get<std::string>(root, "task", c.task);
  c.seed = get<std::uint64_t>(root, "seed", c.seed);
  c.split.seed = c.seed;

  if (const auto corpus = root["corpus"]) {
    c.corpus_path = resolve(base_dir, get<std::string>(corpus, "path", ""));
    c.corpus_format = parse_corpus_format(get<std::string>(corpus, "format", "native-jsonl"));
  }
  if (const auto split = root["split"]) {
    c.split.dev_fraction = get<double>(split, "dev_fraction", c.split.dev_fraction);
    c.split.seed = get<std::uint64_t>(split, "seed", c.split.seed);
    c.split.seen_candidate_indices =
        get<std::vector<std::size_t>>(split, "seen_candidates", c.split.seen_candidate_indices);
  }
  if (const auto backends = root["backends"]) {
    if (!backends.IsMap()) throw ConfigError("backends must be a mapping of name -> settings");
    for (const auto& kv : backends) {
      const auto name = kv.first.as<std::string>();
      c.backends[name] = parse_backend(name, kv.second);
    }
  }
  c.backend = get<std::string>(root, "backend", "");
  if (root["attributes"]) {
    c.attributes = get<std::vector<std::string>>(root, "attributes", {});
  } else if (root["attribute"]) {
    c.attributes = {get<std::string>(root, "attribute", "OVE")};
  }
  c.mode = get<std::string>(root, "mode", c.mode);
  c.score = get<std::string>(root, "score", c.score);
  c.max_score = get<int>(root, "max_score", c.max_score);

  if (const auto a = root["attack"]) {
    reject_unknown(a,
                   {"vocabulary", "words", "lowercase_only", "min_len", "max_len", "max_words", "subsample",
                    "resample_pairs", "literal_objective"},
                   "attack");
    c.attack.vocabulary = resolve(base_dir, get<std::string>(a, "vocabulary", ""));
    c.attack.words = get<std::vector<std::string>>(a, "words", {});
    c.attack.lowercase_only = get<bool>(a, "lowercase_only", c.attack.lowercase_only);
    c.attack.min_len = get<std::size_t>(a, "min_len", c.attack.min_len);
    c.attack.max_len = get<std::size_t>(a, "max_len", c.attack.max_len);
    c.attack.max_words = get<std::size_t>(a, "max_words", c.attack.max_words);
    if (a["subsample"] && !a["subsample"].IsNull()) c.attack.subsample = get<std::size_t>(a, "subsample", 0);
    c.attack.resample_pairs = get<bool>(a, "resample_pairs", c.attack.resample_pairs);
    c.attack.literal_objective = get<bool>(a, "literal_objective", c.attack.literal_objective);
  }
  if (const auto e = root["evaluation"]) {
    reject_unknown(e, {"prefix_lengths", "strict_pessimistic"}, "evaluation");
    c.prefix_lengths = get<std::vector<std::size_t>>(e, "prefix_lengths", {});
    c.strict_pessimistic = get<bool>(e, "strict_pessimistic", false);
  }
  if (const auto d = root["detection"]) {
    reject_unknown(d, {"lm_backend"}, "detection");
    c.lm_backend = get<std::string>(d, "lm_backend", "");
  }
  if (const auto t = root["templates"]) {
    reject_unknown(t, {"comparative", "absolute"}, "templates");
    c.comparative_template = resolve(base_dir, get<std::string>(t, "comparative", ""));
    c.absolute_template = resolve(base_dir, get<std::string>(t, "absolute", ""));
  }
  c.cache = resolve(base_dir, get<std::string>(root, "cache", ""));
  c.out = resolve(base_dir, get<std::string>(root, "out", "out"));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto config = parse_run_config(buf.str(), path.parent_path());
  config.source = path;
  return config;
}

void validate_run_config(const RunConfig& c) {
  PromptTemplates::for_task(c.task);
  if (c.corpus_path.empty()) throw ConfigError("corpus.path is required");
  if (c.backends.empty()) throw ConfigError("at least one backend must be configured under 'backends'");
  if (c.backend.empty()) throw ConfigError("'backend' must name one of the configured backends");
  if (!c.backends.contains(c.backend)) throw ConfigError("backend '" + c.backend + "' is not configured");
  if (!c.lm_backend.empty() && !c.backends.contains(c.lm_backend)) {
    throw ConfigError("detection.lm_backend '" + c.lm_backend + "' is not configured");
  }
  for (const auto& [name, b] : c.backends) {
    if (b.type == "remote") validate_backend_config(b.config);
    if (b.type == "mock" && b.mock.rule != "keyword" && b.mock.rule != "word-count" && b.mock.rule != "constant") {
      throw ConfigError("backends." + name + ".rule must be keyword, word-count or constant");
    }
  }
  if (c.attributes.empty()) throw ConfigError("at least one attribute is required");
  parse_attack_mode(c.mode);
  if (c.score != "expectation" && c.score != "direct") {
    throw ConfigError("score must be expectation or direct, got '" + c.score + "'");
  }
  if (c.max_score < 2) throw ConfigError("max_score must be >= 2");
  if (c.attack.max_words < 1) throw ConfigError("attack.max_words must be >= 1");
  if (c.attack.min_len > c.attack.max_len) throw ConfigError("attack.min_len exceeds attack.max_len");
  if (!(c.split.dev_fraction > 0.0 && c.split.dev_fraction < 1.0)) {
    throw ConfigError("split.dev_fraction must lie strictly between 0 and 1");
  }
  if (c.out.empty()) throw ConfigError("out must name an output directory");
}

json to_json(const RunConfig& c) {
  json backends = json::object();
  for (const auto& [name, b] : c.backends) {
    json jb = {{"type", b.type},
               {"backend_id", b.config.backend_id},
               {"model", b.config.model_name},
               {"endpoint_url", b.config.endpoint_url},
               {"api_key_env", b.config.api_key_env},
               {"max_parallel", b.config.max_parallel},
               {"timeout_ms", b.config.request_timeout.count()},
               {"retry", {{"attempts", b.config.retry.attempts}, {"backoff_ms", b.config.retry.backoff.count()}}},
               {"comparative_tokens", b.config.comparative_tokens},
               {"score_tokens", b.config.score_tokens},
               {"top_logprobs", b.config.top_logprobs},
               {"max_text_tokens", b.config.max_text_tokens}};
    if (b.type == "mock") {
      jb["rule"] = b.mock.rule;
      jb["keywords"] = b.mock.keywords;
      jb["base"] = b.mock.base;
      jb["weight"] = b.mock.weight;
      jb["cap"] = b.mock.cap;
      jb["value"] = b.mock.value;
      jb["slope"] = b.mock.slope;
      if (!b.mock.lm_type.empty()) {
        jb["lm"] = {{"type", b.mock.lm_type},
                    {"known", b.mock.lm_known},
                    {"known_from_corpus", b.mock.lm_known_from_corpus},
                    {"known_logprob", b.mock.lm_known_logprob},
                    {"unknown_logprob", b.mock.lm_unknown_logprob},
                    {"lo", b.mock.lm_lo},
                    {"hi", b.mock.lm_hi},
                    {"vocab_size", b.mock.lm_vocab_size}};
      }
    }
    backends[name] = std::move(jb);
  }
  json attack = {{"vocabulary", c.attack.vocabulary.string()},
                 {"words", c.attack.words},
                 {"lowercase_only", c.attack.lowercase_only},
                 {"min_len", c.attack.min_len},
                 {"max_len", c.attack.max_len},
                 {"max_words", c.attack.max_words},
                 {"subsample", c.attack.subsample ? json(*c.attack.subsample) : json(nullptr)},
                 {"resample_pairs", c.attack.resample_pairs},
                 {"literal_objective", c.attack.literal_objective}};
  return {{"source", c.source.string()},
          {"task", c.task},
          {"seed", c.seed},
          {"corpus", {{"path", c.corpus_path.string()}, {"format", to_string(c.corpus_format)}}},
          {"split",
           {{"dev_fraction", c.split.dev_fraction},
            {"seed", c.split.seed},
            {"seen_candidates", c.split.seen_candidate_indices}}},
          {"backends", std::move(backends)},
          {"backend", c.backend},
          {"attributes", c.attributes},
          {"mode", c.mode},
          {"score", c.score},
          {"max_score", c.max_score},
          {"attack", std::move(attack)},
          {"evaluation", {{"prefix_lengths", c.prefix_lengths}, {"strict_pessimistic", c.strict_pessimistic}}},
          {"detection", {{"lm_backend", c.lm_backend}}},
          {"templates",
           {{"comparative", c.comparative_template.string()}, {"absolute", c.absolute_template.string()}}},
          {"cache", c.cache.string()},
          {"out", c.out.string()}};
}

}  // namespace advjudge
