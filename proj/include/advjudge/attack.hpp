#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "advjudge/assessment.hpp"
#include "advjudge/corpus.hpp"
#include "advjudge/judge.hpp"

namespace advjudge {

struct Vocabulary {
  std::vector<std::string> words;

  std::size_t size() const { return words.size(); }
};

struct VocabularyFilters {
  bool lowercase_only = false;
  std::size_t min_len = 1;
  std::size_t max_len = std::numeric_limits<std::size_t>::max();
};

/// Applies the filters, drops repeats (first occurrence wins), keeps order.
/// Throws DataError for words with inner whitespace or an empty result.
Vocabulary make_vocabulary(const std::vector<std::string>& words, const VocabularyFilters& filters = {});

/// One word per line, UTF-8. Blank lines are skipped.
Vocabulary load_vocabulary(const std::filesystem::path& path, const VocabularyFilters& filters = {});

enum class AttackMode { comparative, absolute, comparative_asym_a, comparative_asym_b };

std::string_view to_string(AttackMode mode);
AttackMode parse_attack_mode(std::string_view name);
bool is_comparative(AttackMode mode);

/// What the greedy search maximises per training group. With a pair (a, b)
/// and trial phrase d:
///   comparative   F(x_a+d, x_b) + 1 - F(x_a, x_b+d)
///   literal flag  F(x_a+d, x_b) + F(x_a, x_b+d)
///   asymA         F(x_a+d, x_b)
///   asymB         1 - F(x_a, x_b+d)
///   absolute      s(x_a+d)   (expected score by default)
struct ObjectiveSpec {
  AttackMode mode = AttackMode::comparative;
  bool literal_objective = false;
  int max_score = 5;
  ScoreMode absolute_score = ScoreMode::absolute_expectation;
};

double group_objective(const JudgeBackend& backend, const ContextGroup& group, const TrainingPair& pair,
                       std::span<const std::string> phrase, std::string_view attribute, const ObjectiveSpec& spec);

/// Mean per-group objective q/M of a fixed phrase.
double objective_estimate(const JudgeBackend& backend, std::span<const std::string> phrase, const Corpus& dev,
                          std::span<const TrainingPair> pairs, std::string_view attribute, const ObjectiveSpec& spec);

/// Which (a[, b]) indices each greedy iteration trains on.
class PairSchedule {
 public:
  /// The same pairs for every iteration.
  static PairSchedule fixed(std::vector<TrainingPair> pairs);
  /// Fresh seeded draw from the seen candidates at every iteration.
  static PairSchedule resampled(const Corpus& dev, SplitSpec spec, PairMode mode, std::uint64_t seed);

  std::vector<TrainingPair> for_iteration(std::size_t iteration) const;

 private:
  std::vector<TrainingPair> fixed_;
  std::shared_ptr<const Corpus> dev_;
  SplitSpec spec_;
  PairMode mode_ = PairMode::comparative;
  std::uint64_t seed_ = 0;
};

struct GreedyConfig {
  std::size_t max_words = 4;  // L
  Vocabulary vocab;
  std::uint64_t seed = 0;
  ObjectiveSpec objective;
  /// Evaluate only this many seeded-random vocabulary words per iteration.
  std::optional<std::size_t> candidate_subsample;
  /// Runner-up words kept per trace step.
  std::size_t trace_runners_up = 5;
};

void validate_greedy_config(const GreedyConfig& config);

struct ScoredWord {
  std::string word;
  double objective = 0.0;

  bool operator==(const ScoredWord&) const = default;
};

struct TraceStep {
  std::string word;
  double objective = 0.0;  // best q / M
  std::vector<ScoredWord> runners_up;
  std::size_t evaluated = 0;  // words scored in this iteration

  bool operator==(const TraceStep&) const = default;
};

struct AttackPhrase {
  std::vector<std::string> words;
  std::string backend_id;
  std::string task;
  std::string attribute;
  std::string corpus;
  AttackMode mode = AttackMode::comparative;
  bool literal_objective = false;
  std::uint64_t seed = 0;
  /// One step per word for learned phrases; empty for imported fixtures.
  std::vector<TraceStep> trace;

  std::size_t length() const { return words.size(); }
  /// First `n` words.
  std::vector<std::string> prefix(std::size_t n) const;
  bool operator==(const AttackPhrase&) const = default;
};

nlohmann::json to_json(const AttackPhrase& phrase);
AttackPhrase attack_phrase_from_json(const nlohmann::json& j);
void save_attack_phrase(const AttackPhrase& phrase, const std::filesystem::path& path);
AttackPhrase load_attack_phrase(const std::filesystem::path& path);

/// Vocabulary indices scored at iteration l: all of them, or a seeded
/// subsample kept in ascending order so ties still go to the lowest index.
std::vector<std::size_t> iteration_candidates(const GreedyConfig& config, std::size_t iteration);

/// Greedy universal phrase search. Each iteration scores every candidate
/// word appended to the current phrase over all training groups (OpenMP
/// over word x group), then appends the argmax; ties go to the lowest
/// vocabulary index.
AttackPhrase greedy_attack(const JudgeBackend& backend, const Corpus& dev, const PairSchedule& schedule,
                           std::string_view attribute, const GreedyConfig& config);

/// Mode-checked entry points.
AttackPhrase greedy_attack_comparative(const JudgeBackend& backend, const Corpus& dev, const PairSchedule& schedule,
                                       std::string_view attribute, const GreedyConfig& config);
AttackPhrase greedy_attack_absolute(const JudgeBackend& backend, const Corpus& dev, const PairSchedule& schedule,
                                    std::string_view attribute, const GreedyConfig& config);

}  // namespace advjudge
