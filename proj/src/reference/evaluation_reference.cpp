#include <algorithm>

#include "advjudge/error.hpp"
#include "advjudge/reference.hpp"

namespace advjudge::reference {

std::vector<RankEntry> evaluate_attacks(const JudgeBackend& backend, const Corpus& test,
                                        std::span<const std::string> phrase, const EvalSettings& settings) {
  if (test.groups.empty()) throw DataError("evaluation needs a non-empty test corpus");
  std::vector<RankEntry> entries;
  for (std::size_t g = 0; g < test.groups.size(); ++g) {
    const auto& group = test.groups[g];
    for (std::size_t n = 0; n < group.size(); ++n) {
      const Perturbation attack{n, {phrase.begin(), phrase.end()}};
      RankEntry e;
      e.group_index = g;
      e.context_id = group.context_id;
      e.candidate = n;
      e.seen = std::find(settings.seen_candidates.begin(), settings.seen_candidates.end(), n) !=
               settings.seen_candidates.end();
      if (settings.mode.score == ScoreMode::comparative) {
        const auto matrix = build_pairwise_matrix(backend, group, settings.attribute, attack, Execution::serial);
        const auto scores = comparative_scores(matrix);
        e.rank = rank_of(scores.values, n, settings.strict_pessimistic);
        double sum = 0.0;
        for (std::size_t j = 0; j < group.size(); ++j) {
          e.win_probs.push_back(matrix(n, j));
          if (j != n) sum += matrix(n, j);
        }
        e.metric = sum / static_cast<double>(group.size() - 1);
      } else {
        const auto scores = absolute_scores(backend, group, settings.attribute, settings.mode.max_score,
                                            settings.mode.score, attack, Execution::serial);
        e.rank = rank_of(scores.values, n, settings.strict_pessimistic);
        e.metric = scores.values[n];
      }
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

double average_rank(const JudgeBackend& backend, const Corpus& test, std::span<const std::string> phrase,
                    const EvalSettings& settings) {
  const auto entries = reference::evaluate_attacks(backend, test, phrase, settings);
  double sum = 0.0;
  for (const auto& e : entries) sum += e.rank;
  return sum / static_cast<double>(entries.size());
}

}  // namespace advjudge::reference
