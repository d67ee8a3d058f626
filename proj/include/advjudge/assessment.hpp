#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advjudge/corpus.hpp"
#include "advjudge/judge.hpp"

namespace advjudge {

enum class Execution { serial, parallel };

/// p[i][j] = probability that candidate i beats candidate j. Only the upper
/// triangle is written; the lower triangle is always its complement and the
/// diagonal is 0.5, so the symmetry invariant holds by construction.
class PairwiseMatrix {
 public:
  explicit PairwiseMatrix(std::size_t n);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return p_[i * n_ + j]; }

  /// Sets p_ij and p_ji = 1 - p_ij. Requires i != j and p in [0, 1].
  void set(std::size_t i, std::size_t j, double p_ij);

  bool operator==(const PairwiseMatrix&) const = default;

 private:
  std::size_t n_;
  std::vector<double> p_;
};

enum class ScoreMode { comparative, absolute_expectation, absolute_direct };

std::string_view to_string(ScoreMode mode);
ScoreMode parse_score_mode(std::string_view name);

struct AssessmentMode {
  ScoreMode score = ScoreMode::comparative;
  int max_score = 5;  // K, absolute modes
};

struct ScoreVector {
  std::vector<double> values;
  ScoreMode mode = ScoreMode::comparative;
};

/// Fractional ranks, 1 = best.
struct RankVector {
  std::vector<double> ranks;
};

/// Candidate `index` is judged as text + " " + words; nothing else changes.
struct Perturbation {
  std::size_t index = 0;
  std::vector<std::string> words;
};

/// 1/2 (forward + 1 - reversed): removes positional bias from two passes.
double symmetric_probability(double forward, double reversed);

/// Two backend comparisons, (x_i, x_j) then (x_j, x_i).
double pairwise_probability(const JudgeBackend& backend, std::string_view context, std::string_view x_i,
                            std::string_view x_j, std::string_view attribute);

/// Fills every off-diagonal entry: N(N-1) backend comparisons.
PairwiseMatrix build_pairwise_matrix(const JudgeBackend& backend, const ContextGroup& group,
                                     std::string_view attribute,
                                     const std::optional<Perturbation>& attack = std::nullopt,
                                     Execution exec = Execution::parallel);

/// s_n = (1/N) sum_j p[n][j], diagonal 0.5 included.
ScoreVector comparative_scores(const PairwiseMatrix& matrix);

/// Expectation sum_k k P(k) or the parsed direct score, per candidate.
ScoreVector absolute_scores(const JudgeBackend& backend, const ContextGroup& group, std::string_view attribute,
                            int max_score, ScoreMode mode,
                            const std::optional<Perturbation>& attack = std::nullopt,
                            Execution exec = Execution::parallel);

/// Scores for a whole group under either assessment style.
ScoreVector assess_group(const JudgeBackend& backend, const ContextGroup& group, std::string_view attribute,
                         const AssessmentMode& mode, const std::optional<Perturbation>& attack = std::nullopt,
                         Execution exec = Execution::parallel);

/// Higher score = better = lower rank; ties get the mean of the positions
/// they span.
RankVector ranks_from_scores(std::span<const double> scores);

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of fractional ranks; nullopt when either side has
/// zero rank variance.
std::optional<double> spearman(std::span<const double> predicted, std::span<const double> human);

struct JudgePerformance {
  std::optional<double> mean_spearman;    // mean over groups with a defined value
  std::optional<double> pooled_spearman;  // over all (group, candidate) pairs
  std::size_t groups_defined = 0;
  std::size_t groups_total = 0;
};

/// Averages per-group correlations that are defined, skipping the rest.
std::optional<double> mean_defined(std::span<const std::optional<double>> values);

JudgePerformance judge_performance(const JudgeBackend& backend, const Corpus& corpus, std::string_view attribute,
                                   const AssessmentMode& mode, Execution exec = Execution::parallel);

}  // namespace advjudge
