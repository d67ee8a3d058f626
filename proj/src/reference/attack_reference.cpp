#include <algorithm>
#include <limits>

#include "advjudge/error.hpp"
#include "advjudge/reference.hpp"

namespace advjudge::reference {

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
  const double groups = static_cast<double>(dev.groups.size());

  for (std::size_t l = 0; l < config.max_words; ++l) {
    const auto pairs = schedule.for_iteration(l);
    const auto candidates = iteration_candidates(config, l);
    std::vector<ScoredWord> scored;
    std::string best_word;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t idx : candidates) {
      auto trial = phrase.words;
      trial.push_back(config.vocab.words[idx]);
      double q = 0.0;
      for (const auto& pair : pairs) {
        q += group_objective(backend, dev.groups.at(pair.group_index), pair, trial, attribute, config.objective);
      }
      scored.push_back({config.vocab.words[idx], q});
      if (q > best) {
        best = q;
        best_word = config.vocab.words[idx];
      }
    }
    TraceStep step{best_word, best / groups, {}, candidates.size()};
    bool skipped = false;
    std::vector<ScoredWord> rest;
    for (const auto& s : scored) {
      if (!skipped && s.word == best_word && s.objective == best) {
        skipped = true;
        continue;
      }
      rest.push_back(s);
    }
    std::stable_sort(rest.begin(), rest.end(),
                     [](const ScoredWord& a, const ScoredWord& b) { return a.objective > b.objective; });
    for (std::size_t i = 0; i < rest.size() && i < config.trace_runners_up; ++i) {
      step.runners_up.push_back({rest[i].word, rest[i].objective / groups});
    }
    phrase.words.push_back(best_word);
    phrase.trace.push_back(std::move(step));
  }
  return phrase;
}

}  // namespace advjudge::reference
