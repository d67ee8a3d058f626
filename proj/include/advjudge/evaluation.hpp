#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "advjudge/assessment.hpp"
#include "advjudge/attack.hpp"
#include "advjudge/corpus.hpp"
#include "advjudge/judge.hpp"

namespace advjudge {

struct EvalSettings {
  std::string attribute = std::string(kOverallAttribute);
  AssessmentMode mode;
  /// Attacked candidate loses every tie instead of sharing the rank.
  bool strict_pessimistic = false;
  /// Candidate indices used during training, for the seen/unseen breakdown.
  std::vector<std::size_t> seen_candidates{0, 1};
  Execution exec = Execution::parallel;
};

/// Rank of scores[index] among all scores (1 = best). Ties share the mean
/// position, or count against `index` when strict.
double rank_of(std::span<const double> scores, std::size_t index, bool strict_pessimistic = false);

/// r' for one candidate: every candidate is scored, only `attacked_index`
/// carries the phrase.
double attacked_rank(const JudgeBackend& backend, const ContextGroup& group, std::size_t attacked_index,
                     std::span<const std::string> phrase, const EvalSettings& settings);

struct RankEntry {
  std::size_t group_index = 0;
  std::string context_id;
  std::size_t candidate = 0;
  double rank = 0.0;
  /// Attacked candidate's mean win probability against the others
  /// (comparative) or its score (absolute).
  double metric = 0.0;
  bool seen = false;
  /// Comparative only: p[candidate][j] for every j, 0.5 at j == candidate.
  std::vector<double> win_probs;

  bool operator==(const RankEntry&) const = default;
};

/// Every candidate of every group attacked in turn, in (group, candidate) order.
std::vector<RankEntry> evaluate_attacks(const JudgeBackend& backend, const Corpus& test,
                                        std::span<const std::string> phrase, const EvalSettings& settings);

/// Mean r' over all groups and candidates.
double average_rank(const JudgeBackend& backend, const Corpus& test, std::span<const std::string> phrase,
                    const EvalSettings& settings);

/// Mean win probability split by whether the attacked (first letter) and the
/// opposing (second letter) candidates were seen in training.
struct SeenBreakdown {
  std::optional<double> ss, su, us, uu;
  /// All pairs except seen-vs-seen.
  std::optional<double> filtered;

  bool operator==(const SeenBreakdown&) const = default;
};

struct PrefixResult {
  std::size_t prefix_len = 0;
  std::vector<std::string> words;
  double avg_rank = 0.0;
  double mean_metric = 0.0;
  std::optional<double> avg_rank_seen;
  std::optional<double> avg_rank_unseen;
  SeenBreakdown win_prob;  // comparative only
  /// Mean metric of each candidate position across groups.
  std::vector<double> mean_metric_by_position;
  std::vector<RankEntry> entries;

  bool operator==(const PrefixResult&) const = default;
};

/// Aggregates for one prefix from its per-candidate entries.
PrefixResult summarize_prefix(std::size_t prefix_len, std::vector<std::string> words, std::vector<RankEntry> entries,
                              std::size_t candidates_per_group, std::span<const std::size_t> seen,
                              ScoreMode mode);

struct RankReport {
  std::string task;
  std::string corpus;
  std::string attribute;
  ScoreMode mode = ScoreMode::comparative;
  int max_score = 5;
  bool strict_pessimistic = false;
  std::string source_backend;
  std::string target_backend;
  std::vector<std::string> phrase;
  std::string phrase_hash;
  std::vector<std::size_t> seen_candidates;
  std::size_t groups = 0;
  std::size_t candidates_per_group = 0;
  std::vector<PrefixResult> prefixes;

  bool operator==(const RankReport&) const = default;
};

/// Short content hash of the phrase words, used in file names.
std::string phrase_hash(std::span<const std::string> words);

/// 0..L.
std::vector<std::size_t> all_prefix_lengths(std::size_t phrase_length);

/// Evaluates each requested prefix of the phrase on the test corpus.
RankReport rank_sweep(const JudgeBackend& backend, const Corpus& test, const AttackPhrase& phrase,
                      std::span<const std::size_t> prefix_lengths, const EvalSettings& settings);

/// rank_sweep against a backend the phrase was not learned on. Prints a
/// warning to stderr when the backend ids coincide.
RankReport transfer_eval(const AttackPhrase& phrase, const JudgeBackend& target, const Corpus& test,
                         std::span<const std::size_t> prefix_lengths, const EvalSettings& settings);

nlohmann::json to_json(const RankReport& report);
RankReport rank_report_from_json(const nlohmann::json& j);

/// prefix_len,avg_rank,mean_metric
std::string rank_report_csv(const RankReport& report);

/// {task}_{mode}_{attribute}_{backend}_{phrase-hash}
std::string report_stem(const RankReport& report);

/// Writes <stem>.json and <stem>.csv into `out_dir`; returns both paths.
std::vector<std::filesystem::path> emit_report(const RankReport& report, const std::filesystem::path& out_dir);

RankReport load_rank_report(const std::filesystem::path& path);

}  // namespace advjudge
