#include "advjudge/commands.hpp"

#include <cctype>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "advjudge/assessment.hpp"
#include "advjudge/attack.hpp"
#include "advjudge/detection.hpp"
#include "advjudge/error.hpp"
#include "advjudge/evaluation.hpp"
#include "advjudge/hashing.hpp"
#include "advjudge/mock_judge.hpp"
#include "advjudge/remote_judge.hpp"
#include "advjudge/rng.hpp"
#include "advjudge/text.hpp"

namespace advjudge {

using nlohmann::json;

void BackendRegistry::add(const std::string& name, std::shared_ptr<JudgeBackend> backend) {
  backends_[name] = std::move(backend);
}

JudgeBackend& BackendRegistry::get(const std::string& name) const {
  const auto it = backends_.find(name);
  if (it == backends_.end()) throw ConfigError("backend '" + name + "' is not configured");
  return *it->second;
}

namespace {

std::set<std::string> corpus_words(const Corpus& corpus) {
  std::set<std::string> words;
  for (const auto& g : corpus.groups) {
    for (auto& w : split_words(g.context_text)) words.insert(std::move(w));
    for (const auto& c : g.candidates) {
      for (auto& w : split_words(c.text)) words.insert(std::move(w));
    }
  }
  return words;
}

MockRules mock_rules_for(const MockBackendSpec& spec, const Corpus& corpus) {
  MockRules rules;
  if (spec.rule == "keyword") {
    rules.quality = mock_rules::keyword({spec.keywords.begin(), spec.keywords.end()}, spec.base, spec.weight,
                                        spec.cap);
  } else if (spec.rule == "word-count") {
    rules.quality = mock_rules::word_count();
  } else {
    rules.quality = mock_rules::constant(spec.value);
  }
  rules.comparative_slope = spec.slope;
  if (spec.lm_type == "vocabulary") {
    std::set<std::string> known(spec.lm_known.begin(), spec.lm_known.end());
    if (spec.lm_known_from_corpus) known.merge(corpus_words(corpus));
    rules.token_logprobs = mock_rules::vocabulary_lm(std::move(known), spec.lm_known_logprob, spec.lm_unknown_logprob);
  } else if (spec.lm_type == "hashed") {
    rules.token_logprobs = mock_rules::hashed_lm(spec.lm_lo, spec.lm_hi);
  } else if (spec.lm_type == "uniform") {
    rules.token_logprobs = mock_rules::uniform_lm(spec.lm_vocab_size);
  } else if (!spec.lm_type.empty()) {
    throw ConfigError("unknown mock lm type '" + spec.lm_type + "' (expected vocabulary, hashed or uniform)");
  }
  return rules;
}

ScoreMode score_mode(const RunConfig& c) {
  if (is_comparative(parse_attack_mode(c.mode))) return ScoreMode::comparative;
  return c.score == "direct" ? ScoreMode::absolute_direct : ScoreMode::absolute_expectation;
}

EvalSettings eval_settings(const RunConfig& c, const std::string& attribute) {
  EvalSettings s;
  s.attribute = attribute;
  s.mode = AssessmentMode{score_mode(c), c.max_score};
  s.strict_pessimistic = c.strict_pessimistic;
  s.seen_candidates = c.split.seen_candidate_indices;
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string file_safe(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '-';
  return out;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(17);
  s << *v;
  return s.str();
}

std::vector<std::size_t> prefix_lengths(const RunConfig& c, const AttackPhrase& phrase) {
  return c.prefix_lengths.empty() ? all_prefix_lengths(phrase.length()) : c.prefix_lengths;
}

CommandResult finish(const RunContext& ctx, const std::string& command, std::vector<std::filesystem::path> outputs) {
  CommandResult r;
  r.manifest = write_manifest(ctx, command, outputs);
  r.outputs = std::move(outputs);
  return r;
}

}  // namespace

BackendRegistry make_backends(const RunConfig& config, const Corpus& corpus, std::shared_ptr<ResponseCache> cache) {
  BackendRegistry registry;
  for (const auto& [name, spec] : config.backends) {
    auto templates = PromptTemplates::for_task(config.task);
    templates.load_files(config.comparative_template, config.absolute_template);
    std::shared_ptr<JudgeBackend> backend;
    if (spec.type == "remote") {
      backend = std::make_shared<RemoteJudge>(spec.config, std::move(templates));
    } else {
      backend = std::make_shared<MockJudge>(spec.config.backend_id, mock_rules_for(spec.mock, corpus),
                                            std::move(templates));
    }
    backend->set_cache(cache);
    registry.add(name, std::move(backend));
  }
  return registry;
}

RunContext prepare_run(const RunConfig& config) {
  validate_run_config(config);
  RunContext ctx;
  ctx.started_at = utc_timestamp();
  ctx.config = config;
  ctx.corpus = load_corpus(config.corpus_path, config.corpus_format);
  ctx.split = split_corpus(ctx.corpus, config.split);
  ctx.cache = config.cache.empty() ? ResponseCache::in_memory() : ResponseCache::open(config.cache);
  ctx.backends = make_backends(config, ctx.corpus, ctx.cache);
  std::filesystem::create_directories(config.out);
  return ctx;
}

CommandResult cmd_assess(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& backend = ctx.backends.get(c.backend);
  const AssessmentMode mode{score_mode(c), c.max_score};
  json rows = json::array();
  std::ostringstream csv;
  csv << "backend,attribute,mode,mean_spearman,pooled_spearman,groups_defined,groups_total\n";
  for (const auto& attribute : c.attributes) {
    const auto perf = judge_performance(backend, ctx.corpus, attribute, mode);
    rows.push_back({{"backend", backend.id()},
                    {"attribute", attribute},
                    {"mode", to_string(mode.score)},
                    {"mean_spearman", perf.mean_spearman ? json(*perf.mean_spearman) : json(nullptr)},
                    {"pooled_spearman", perf.pooled_spearman ? json(*perf.pooled_spearman) : json(nullptr)},
                    {"groups_defined", perf.groups_defined},
                    {"groups_total", perf.groups_total}});
    csv << backend.id() << ',' << attribute << ',' << to_string(mode.score) << ',' << fmt(perf.mean_spearman)
        << ',' << fmt(perf.pooled_spearman) << ',' << perf.groups_defined << ',' << perf.groups_total << '\n';
  }
  const auto stem = "assess_" + file_safe(c.task) + "_" + file_safe(to_string(mode.score)) + "_" + file_safe(backend.id());
  const auto json_path = c.out / (stem + ".json");
  const auto csv_path = c.out / (stem + ".csv");
  write_text(json_path, json{{"corpus", ctx.corpus.name}, {"rows", rows}}.dump(2) + "\n");
  write_text(csv_path, csv.str());
  return finish(ctx, "assess", {json_path, csv_path});
}

CommandResult cmd_attack(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& backend = ctx.backends.get(c.backend);
  const VocabularyFilters filters{c.attack.lowercase_only, c.attack.min_len, c.attack.max_len};
  Vocabulary vocab;
  if (!c.attack.vocabulary.empty()) {
    vocab = load_vocabulary(c.attack.vocabulary, filters);
  } else if (!c.attack.words.empty()) {
    vocab = make_vocabulary(c.attack.words, filters);
  } else {
    throw ConfigError("attack needs attack.vocabulary (a file) or attack.words");
  }

  GreedyConfig greedy;
  greedy.max_words = c.attack.max_words;
  greedy.vocab = std::move(vocab);
  greedy.seed = c.seed;
  greedy.objective.mode = parse_attack_mode(c.mode);
  greedy.objective.literal_objective = c.attack.literal_objective;
  greedy.objective.max_score = c.max_score;
  greedy.objective.absolute_score =
      c.score == "direct" ? ScoreMode::absolute_direct : ScoreMode::absolute_expectation;
  greedy.candidate_subsample = c.attack.subsample;

  const PairMode pair_mode = is_comparative(greedy.objective.mode) ? PairMode::comparative : PairMode::absolute;
  const std::uint64_t pair_seed = derive_seed(c.seed, 1);
  const PairSchedule schedule =
      c.attack.resample_pairs ? PairSchedule::resampled(ctx.split.dev, c.split, pair_mode, pair_seed)
                              : PairSchedule::fixed(training_pairs(ctx.split.dev, c.split, pair_mode, pair_seed));

  std::vector<std::filesystem::path> outputs;
  for (const auto& attribute : c.attributes) {
    AttackPhrase phrase;
    const std::string where = "attack on attribute " + attribute + ": ";
    try {
      phrase = greedy_attack(backend, ctx.split.dev, schedule, attribute, greedy);
    } catch (const BackendError& e) {
      throw BackendError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    phrase.task = c.task;
    const auto path = c.out / ("phrase_" + file_safe(c.task) + "_" + file_safe(c.mode) + "_" + file_safe(attribute) +
                               "_" + file_safe(backend.id()) + ".json");
    save_attack_phrase(phrase, path);
    outputs.push_back(path);
  }
  return finish(ctx, "attack", std::move(outputs));
}

CommandResult cmd_evaluate(RunContext& ctx, const std::filesystem::path& phrase_path) {
  const auto& c = ctx.config;
  const auto phrase = load_attack_phrase(phrase_path);
  const auto& backend = ctx.backends.get(c.backend);
  std::vector<std::filesystem::path> outputs;
  for (const auto& attribute : c.attributes) {
    auto report = rank_sweep(backend, ctx.split.test, phrase, prefix_lengths(c, phrase), eval_settings(c, attribute));
    if (report.task.empty()) report.task = c.task;
    for (auto& p : emit_report(report, c.out)) outputs.push_back(std::move(p));
  }
  return finish(ctx, "evaluate", std::move(outputs));
}

CommandResult cmd_transfer(RunContext& ctx, const std::filesystem::path& phrase_path,
                           const std::string& target_backend) {
  const auto& c = ctx.config;
  const auto phrase = load_attack_phrase(phrase_path);
  const auto& target = ctx.backends.get(target_backend);
  std::vector<std::filesystem::path> outputs;
  for (const auto& attribute : c.attributes) {
    auto report = transfer_eval(phrase, target, ctx.split.test, prefix_lengths(c, phrase), eval_settings(c, attribute));
    if (report.task.empty()) report.task = c.task;
    for (auto& p : emit_report(report, c.out)) outputs.push_back(std::move(p));
  }
  return finish(ctx, "transfer", std::move(outputs));
}

CommandResult cmd_detect(RunContext& ctx, const std::filesystem::path& phrase_path) {
  const auto& c = ctx.config;
  const auto phrase = load_attack_phrase(phrase_path);
  const auto& lm = ctx.backends.get(c.lm_backend.empty() ? c.backend : c.lm_backend);
  if (!lm.supports_text_logprobs()) {
    throw BackendError("backend '" + lm.id() + "' cannot score text log-probabilities; set detection.lm_backend");
  }
  const auto dataset = build_detection_dataset(ctx.split.test, phrase.words);
  const auto scores = score_dataset(lm, dataset);
  const auto labeled = label_scores(dataset, scores);
  const auto points = pr_sweep(labeled);
  const auto best = best_f1(points);

  const auto stem = "detect_" + file_safe(c.task) + "_" + file_safe(lm.id()) + "_" + phrase_hash(phrase.words);
  const auto csv_path = c.out / (stem + "_pr.csv");
  const auto json_path = c.out / (stem + "_summary.json");
  write_text(csv_path, pr_csv(points));
  const json summary = {{"lm_backend", lm.id()},
                        {"phrase", phrase.words},
                        {"phrase_hash", phrase_hash(phrase.words)},
                        {"items", dataset.items.size()},
                        {"clean", dataset.count(Label::clean)},
                        {"adversarial", dataset.count(Label::adversarial)},
                        {"thresholds", points.size()},
                        {"best", to_json(best)}};
  write_text(json_path, summary.dump(2) + "\n");
  return finish(ctx, "detect", {csv_path, json_path});
}

std::filesystem::path write_manifest(const RunContext& ctx, const std::string& command,
                                     const std::vector<std::filesystem::path>& outputs) {
  json files = json::array();
  for (const auto& p : outputs) files.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  json cache = {{"records", ctx.cache ? ctx.cache->size() : 0},
                {"hits", ctx.cache ? ctx.cache->hits() : 0},
                {"misses", ctx.cache ? ctx.cache->misses() : 0}};
  if (ctx.cache && !ctx.cache->path().empty()) {
    cache["path"] = ctx.cache->path().string();
    cache["sha256"] = sha256_file(ctx.cache->path());
  } else {
    cache["path"] = nullptr;
  }
  const json manifest = {{"command", command},
                         {"tool_version", kToolVersion},
                         {"config", to_json(ctx.config)},
                         {"corpus", {{"name", ctx.corpus.name}, {"sha256", sha256_file(ctx.config.corpus_path)}}},
                         {"cache", std::move(cache)},
                         {"started_at", ctx.started_at},
                         {"finished_at", utc_timestamp()},
                         {"outputs", std::move(files)}};
  const auto path = ctx.config.out / (command + "_manifest.json");
  write_text(path, manifest.dump(2) + "\n");
  return path;
}

}  // namespace advjudge
