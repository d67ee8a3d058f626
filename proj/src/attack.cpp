#include "advjudge/attack.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include "advjudge/error.hpp"
#include "advjudge/parallel.hpp"
#include "advjudge/rng.hpp"
#include "advjudge/text.hpp"

namespace advjudge {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary make_vocabulary(const std::vector<std::string>& words, const VocabularyFilters& filters) {
  Vocabulary vocab;
  std::unordered_set<std::string> seen;
  for (const auto& raw : words) {
    const std::string word(trim(raw));
    if (word.empty()) continue;
    if (split_words(word).size() != 1) throw DataError("vocabulary entry contains whitespace: '" + word + "'");
    if (word.size() < filters.min_len || word.size() > filters.max_len) continue;
    if (filters.lowercase_only &&
        std::any_of(word.begin(), word.end(), [](unsigned char c) { return std::isupper(c); })) {
      continue;
    }
    if (seen.insert(word).second) vocab.words.push_back(word);
  }
  if (vocab.words.empty()) throw DataError("vocabulary is empty after filtering");
  return vocab;
}

Vocabulary load_vocabulary(const std::filesystem::path& path, const VocabularyFilters& filters) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return make_vocabulary(lines, filters);
}

// ---------------------------------------------------------------------------
// Modes and objective

std::string_view to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::comparative: return "comparative";
    case AttackMode::absolute: return "absolute";
    case AttackMode::comparative_asym_a: return "comparative-asymA";
    case AttackMode::comparative_asym_b: return "comparative-asymB";
  }
  return "?";
}

AttackMode parse_attack_mode(std::string_view name) {
  if (name == "comparative") return AttackMode::comparative;
  if (name == "absolute") return AttackMode::absolute;
  if (name == "comparative-asymA") return AttackMode::comparative_asym_a;
  if (name == "comparative-asymB") return AttackMode::comparative_asym_b;
  throw ConfigError("unknown attack mode '" + std::string(name) +
                    "' (expected comparative, absolute, comparative-asymA or comparative-asymB)");
}

bool is_comparative(AttackMode mode) { return mode != AttackMode::absolute; }

double group_objective(const JudgeBackend& backend, const ContextGroup& group, const TrainingPair& pair,
                       std::span<const std::string> phrase, std::string_view attribute, const ObjectiveSpec& spec) {
  const auto& ctx = group.context_text;
  const auto& xa = group.candidates.at(pair.a).text;
  if (spec.mode == AttackMode::absolute) {
    const std::string attacked = append_phrase(xa, phrase);
    return spec.absolute_score == ScoreMode::absolute_direct
               ? backend.score_text(ctx, attacked, attribute, spec.max_score)
               : backend.score_distribution(ctx, attacked, attribute, spec.max_score).expectation();
  }
  if (!pair.b) throw DataError("comparative objective needs a (a, b) pair for group '" + group.context_id + "'");
  const auto& xb = group.candidates.at(*pair.b).text;
  double q = 0.0;
  if (spec.mode != AttackMode::comparative_asym_b) {
    q += backend.compare(ctx, append_phrase(xa, phrase), xb, attribute).p_first_better;
  }
  if (spec.mode != AttackMode::comparative_asym_a) {
    const double second = backend.compare(ctx, xa, append_phrase(xb, phrase), attribute).p_first_better;
    q += spec.literal_objective ? second : 1.0 - second;
  }
  return q;
}

double objective_estimate(const JudgeBackend& backend, std::span<const std::string> phrase, const Corpus& dev,
                          std::span<const TrainingPair> pairs, std::string_view attribute, const ObjectiveSpec& spec) {
  if (pairs.empty()) throw DataError("objective_estimate needs at least one training pair");
  double q = 0.0;
  for (const auto& pair : pairs) {
    q += group_objective(backend, dev.groups.at(pair.group_index), pair, phrase, attribute, spec);
  }
  return q / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Pair schedule

PairSchedule PairSchedule::fixed(std::vector<TrainingPair> pairs) {
  PairSchedule s;
  s.fixed_ = std::move(pairs);
  return s;
}

PairSchedule PairSchedule::resampled(const Corpus& dev, SplitSpec spec, PairMode mode, std::uint64_t seed) {
  PairSchedule s;
  s.dev_ = std::make_shared<const Corpus>(dev);
  s.spec_ = std::move(spec);
  s.mode_ = mode;
  s.seed_ = seed;
  // Fail on bad seen indices now rather than at iteration 1.
  training_pairs(*s.dev_, s.spec_, mode, derive_seed(seed, 0));
  return s;
}

std::vector<TrainingPair> PairSchedule::for_iteration(std::size_t iteration) const {
  if (!dev_) return fixed_;
  return training_pairs(*dev_, spec_, mode_, derive_seed(seed_, iteration));
}

// ---------------------------------------------------------------------------
// Phrase artifact

std::vector<std::string> AttackPhrase::prefix(std::size_t n) const {
  if (n > words.size()) throw std::out_of_range("phrase prefix longer than phrase");
  return {words.begin(), words.begin() + static_cast<std::ptrdiff_t>(n)};
}

json to_json(const AttackPhrase& phrase) {
  json trace = json::array();
  for (const auto& step : phrase.trace) {
    json runners = json::array();
    for (const auto& r : step.runners_up) runners.push_back({{"word", r.word}, {"objective", r.objective}});
    trace.push_back(
        {{"word", step.word}, {"objective", step.objective}, {"evaluated", step.evaluated}, {"runners_up", runners}});
  }
  return {{"words", phrase.words},
          {"mode", to_string(phrase.mode)},
          {"literal_objective", phrase.literal_objective},
          {"attribute", phrase.attribute},
          {"task", phrase.task},
          {"backend_id", phrase.backend_id},
          {"corpus", phrase.corpus},
          {"seed", phrase.seed},
          {"trace", trace}};
}

AttackPhrase attack_phrase_from_json(const json& j) {
  AttackPhrase p;
  try {
    p.words = j.at("words").get<std::vector<std::string>>();
    p.mode = parse_attack_mode(j.at("mode").get<std::string>());
    p.literal_objective = j.value("literal_objective", false);
    p.attribute = j.at("attribute").get<std::string>();
    p.task = j.value("task", "");
    p.backend_id = j.value("backend_id", "");
    p.corpus = j.value("corpus", "");
    p.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("trace")) {
      for (const auto& s : j.at("trace")) {
        TraceStep step;
        step.word = s.at("word").get<std::string>();
        step.objective = s.at("objective").get<double>();
        step.evaluated = s.value("evaluated", std::size_t{0});
        for (const auto& r : s.value("runners_up", json::array())) {
          step.runners_up.push_back({r.at("word").get<std::string>(), r.at("objective").get<double>()});
        }
        p.trace.push_back(std::move(step));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed attack phrase: ") + e.what());
  }
  for (const auto& w : p.words) {
    if (split_words(w).size() != 1) throw DataError("attack phrase word '" + w + "' is not a single word");
  }
  if (!p.trace.empty() && p.trace.size() != p.words.size()) {
    throw DataError("attack phrase trace has " + std::to_string(p.trace.size()) + " steps for " +
                    std::to_string(p.words.size()) + " words");
  }
  return p;
}

void save_attack_phrase(const AttackPhrase& phrase, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write attack phrase to " + path.string());
  out << to_json(phrase).dump(2) << '\n';
}

AttackPhrase load_attack_phrase(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open attack phrase " + path.string());
  try {
    return attack_phrase_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Greedy search

void validate_greedy_config(const GreedyConfig& config) {
  if (config.max_words < 1) throw ConfigError("greedy search needs max_words L >= 1");
  if (config.vocab.words.empty()) throw ConfigError("greedy search needs a non-empty vocabulary");
  if (config.candidate_subsample &&
      (*config.candidate_subsample < 1 || *config.candidate_subsample > config.vocab.size())) {
    throw ConfigError("candidate_subsample must lie in [1, |vocab|]");
  }
  if (config.objective.mode == AttackMode::absolute && config.objective.max_score < 2) {
    throw ConfigError("absolute attack needs K >= 2");
  }
}

std::vector<std::size_t> iteration_candidates(const GreedyConfig& config, std::size_t iteration) {
  const std::size_t v = config.vocab.size();
  std::vector<std::size_t> idx(v);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (!config.candidate_subsample || *config.candidate_subsample >= v) return idx;
  const std::size_t k = *config.candidate_subsample;
  SeededRng rng(derive_seed(config.seed ^ 0x5a65ab5a3b1e5ULL, iteration));
  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.uniform_index(v - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

void check_pairs(const Corpus& dev, std::span<const TrainingPair> pairs, AttackMode mode) {
  if (pairs.size() != dev.groups.size()) {
    throw DataError("training pairs cover " + std::to_string(pairs.size()) + " groups, dev has " +
                    std::to_string(dev.groups.size()));
  }
  std::vector<bool> covered(dev.groups.size(), false);
  const std::size_t n = dev.candidates_per_group();
  for (const auto& p : pairs) {
    if (p.group_index >= dev.groups.size()) throw DataError("training pair group index out of range");
    covered[p.group_index] = true;
    if (p.a >= n) throw DataError("training pair index a out of range");
    if (is_comparative(mode)) {
      if (!p.b || *p.b >= n || *p.b == p.a) {
        throw DataError("comparative training pair for '" + p.context_id + "' needs distinct a and b");
      }
    }
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
    throw DataError("training pairs do not cover every dev group");
  }
}

std::vector<ScoredWord> runners_up(const Vocabulary& vocab, std::span<const std::size_t> candidates,
                                   std::span<const double> q, std::size_t winner_slot, std::size_t keep,
                                   double groups) {
  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    if (s != winner_slot) order.push_back(s);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
  if (order.size() > keep) order.resize(keep);
  std::vector<ScoredWord> out;
  for (auto s : order) out.push_back({vocab.words[candidates[s]], q[s] / groups});
  return out;
}

}  // namespace

AttackPhrase greedy_attack(const JudgeBackend& backend, const Corpus& dev, const PairSchedule& schedule,
                           std::string_view attribute, const GreedyConfig& config) {
  validate_greedy_config(config);
  if (dev.groups.empty()) throw DataError("greedy search needs a non-empty dev corpus");

  AttackPhrase phrase;
  phrase.backend_id = backend.id();
  phrase.attribute = attribute;
  phrase.corpus = dev.name;
  phrase.mode = config.objective.mode;
  phrase.literal_objective = config.objective.literal_objective;
  phrase.seed = config.seed;

  const std::size_t m = dev.groups.size();
  for (std::size_t l = 0; l < config.max_words; ++l) {
    const auto pairs = schedule.for_iteration(l);
    check_pairs(dev, pairs, config.objective.mode);
    const auto candidates = iteration_candidates(config, l);
    const std::size_t w = candidates.size();

    // One slot per (word, group); summed afterwards in group order so the
    // result is bit-identical to a serial loop.
    std::vector<double> cell(w * m);
    parallel_for(w * m, backend.preferred_concurrency(), [&](std::size_t k) {
      const std::size_t s = k / m;
      const std::size_t g = k % m;
      auto trial = phrase.words;
      trial.push_back(config.vocab.words[candidates[s]]);
      const auto& pair = pairs[g];
      cell[k] = group_objective(backend, dev.groups[pair.group_index], pair, trial, attribute, config.objective);
    });

    std::vector<double> q(w, 0.0);
    for (std::size_t s = 0; s < w; ++s) {
      for (std::size_t g = 0; g < m; ++g) q[s] += cell[s * m + g];
    }
    std::size_t best = 0;
    for (std::size_t s = 1; s < w; ++s) {
      if (q[s] > q[best]) best = s;
    }

    const double groups = static_cast<double>(m);
    phrase.words.push_back(config.vocab.words[candidates[best]]);
    phrase.trace.push_back(TraceStep{phrase.words.back(), q[best] / groups,
                                     runners_up(config.vocab, candidates, q, best, config.trace_runners_up, groups),
                                     w});
  }
  return phrase;
}

AttackPhrase greedy_attack_comparative(const JudgeBackend& backend, const Corpus& dev, const PairSchedule& schedule,
                                       std::string_view attribute, const GreedyConfig& config) {
  if (!is_comparative(config.objective.mode)) throw ConfigError("greedy_attack_comparative needs a comparative mode");
  return greedy_attack(backend, dev, schedule, attribute, config);
}

AttackPhrase greedy_attack_absolute(const JudgeBackend& backend, const Corpus& dev, const PairSchedule& schedule,
                                    std::string_view attribute, const GreedyConfig& config) {
  if (config.objective.mode != AttackMode::absolute) throw ConfigError("greedy_attack_absolute needs absolute mode");
  return greedy_attack(backend, dev, schedule, attribute, config);
}

}  // namespace advjudge
