#include "advjudge/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advjudge/error.hpp"
#include "advjudge/parallel.hpp"
#include "advjudge/text.hpp"

namespace advjudge {

PairwiseMatrix::PairwiseMatrix(std::size_t n) : n_(n), p_(n * n, 0.5) {}

void PairwiseMatrix::set(std::size_t i, std::size_t j, double p_ij) {
  if (i == j || i >= n_ || j >= n_) throw std::out_of_range("PairwiseMatrix::set: bad index");
  if (!(p_ij >= 0.0 && p_ij <= 1.0)) throw BackendError("pairwise probability outside [0,1]");
  p_[i * n_ + j] = p_ij;
  p_[j * n_ + i] = 1.0 - p_ij;
}

std::string_view to_string(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::comparative: return "comparative";
    case ScoreMode::absolute_expectation: return "absolute";
    case ScoreMode::absolute_direct: return "absolute-direct";
  }
  return "?";
}

ScoreMode parse_score_mode(std::string_view name) {
  if (name == "comparative") return ScoreMode::comparative;
  if (name == "absolute" || name == "absolute-expectation") return ScoreMode::absolute_expectation;
  if (name == "absolute-direct") return ScoreMode::absolute_direct;
  throw ConfigError("unknown assessment mode '" + std::string(name) +
                    "' (expected comparative, absolute or absolute-direct)");
}

double symmetric_probability(double forward, double reversed) { return 0.5 * (forward + (1.0 - reversed)); }

double pairwise_probability(const JudgeBackend& backend, std::string_view context, std::string_view x_i,
                            std::string_view x_j, std::string_view attribute) {
  const double forward = backend.compare(context, x_i, x_j, attribute).p_first_better;
  const double reversed = backend.compare(context, x_j, x_i, attribute).p_first_better;
  return symmetric_probability(forward, reversed);
}

namespace {

std::vector<std::string> group_texts(const ContextGroup& group, const std::optional<Perturbation>& attack) {
  std::vector<std::string> texts;
  texts.reserve(group.size());
  for (const auto& c : group.candidates) texts.push_back(c.text);
  if (attack) {
    if (attack->index >= texts.size()) throw std::out_of_range("attacked index out of range");
    texts[attack->index] = append_phrase(texts[attack->index], attack->words);
  }
  return texts;
}

int threads_for(const JudgeBackend& backend, Execution exec) {
  return exec == Execution::parallel ? backend.preferred_concurrency() : 1;
}

}  // namespace

PairwiseMatrix build_pairwise_matrix(const JudgeBackend& backend, const ContextGroup& group,
                                     std::string_view attribute, const std::optional<Perturbation>& attack,
                                     Execution exec) {
  const std::size_t n = group.size();
  if (n < 2) throw DataError("group '" + group.context_id + "' needs at least 2 candidates");
  const auto texts = group_texts(group, attack);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> probs(pairs.size());
  parallel_for(pairs.size(), threads_for(backend, exec), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    probs[k] = pairwise_probability(backend, group.context_text, texts[i], texts[j], attribute);
  });

  PairwiseMatrix matrix(n);
  for (std::size_t k = 0; k < pairs.size(); ++k) matrix.set(pairs[k].first, pairs[k].second, probs[k]);
  return matrix;
}

ScoreVector comparative_scores(const PairwiseMatrix& matrix) {
  const std::size_t n = matrix.size();
  ScoreVector out{std::vector<double>(n, 0.0), ScoreMode::comparative};
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += matrix(i, j);
    out.values[i] = sum / static_cast<double>(n);
  }
  return out;
}

ScoreVector absolute_scores(const JudgeBackend& backend, const ContextGroup& group, std::string_view attribute,
                            int max_score, ScoreMode mode, const std::optional<Perturbation>& attack,
                            Execution exec) {
  if (max_score < 2) throw ConfigError("K must be >= 2");
  if (mode == ScoreMode::comparative) throw std::invalid_argument("absolute_scores called in comparative mode");
  const auto texts = group_texts(group, attack);
  ScoreVector out{std::vector<double>(texts.size(), 0.0), mode};
  parallel_for(texts.size(), threads_for(backend, exec), [&](std::size_t n) {
    out.values[n] = mode == ScoreMode::absolute_expectation
                        ? backend.score_distribution(group.context_text, texts[n], attribute, max_score).expectation()
                        : backend.score_text(group.context_text, texts[n], attribute, max_score);
  });
  return out;
}

ScoreVector assess_group(const JudgeBackend& backend, const ContextGroup& group, std::string_view attribute,
                         const AssessmentMode& mode, const std::optional<Perturbation>& attack, Execution exec) {
  if (mode.score == ScoreMode::comparative) {
    return comparative_scores(build_pairwise_matrix(backend, group, attribute, attack, exec));
  }
  return absolute_scores(backend, group, attribute, mode.max_score, mode.score, attack, exec);
}

RankVector ranks_from_scores(std::span<const double> scores) {
  const std::size_t n = scores.size();
  for (double s : scores) {
    if (!std::isfinite(s)) throw DataError("cannot rank a non-finite score");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RankVector out{std::vector<double>(n, 0.0)};
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Positions i..j-1 (0-based) share rank mean(i+1..j).
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) out.ranks[order[k]] = rank;
    i = j;
  }
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> predicted, std::span<const double> human) {
  if (predicted.size() != human.size()) throw std::invalid_argument("spearman: length mismatch");
  if (predicted.size() < 2) throw std::invalid_argument("spearman: needs at least 2 values");
  const auto rp = ranks_from_scores(predicted);
  const auto rh = ranks_from_scores(human);
  return pearson(rp.ranks, rh.ranks);
}

std::optional<double> mean_defined(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

JudgePerformance judge_performance(const JudgeBackend& backend, const Corpus& corpus, std::string_view attribute,
                                   const AssessmentMode& mode, Execution exec) {
  if (!corpus.has_attribute(attribute)) {
    throw DataError("corpus '" + corpus.name + "' has no human scores for attribute '" + std::string(attribute) + "'");
  }
  const std::size_t m = corpus.groups.size();
  std::vector<ScoreVector> predicted(m);
  // Parallel over groups; each group's own calls stay serial.
  parallel_for(m, threads_for(backend, exec), [&](std::size_t g) {
    predicted[g] = assess_group(backend, corpus.groups[g], attribute, mode, std::nullopt, Execution::serial);
  });

  JudgePerformance perf;
  perf.groups_total = m;
  std::vector<std::optional<double>> per_group;
  std::vector<double> pooled_pred, pooled_human;
  for (std::size_t g = 0; g < m; ++g) {
    std::vector<double> human;
    for (const auto& c : corpus.groups[g].candidates) human.push_back(*c.score(attribute));
    per_group.push_back(spearman(predicted[g].values, human));
    pooled_pred.insert(pooled_pred.end(), predicted[g].values.begin(), predicted[g].values.end());
    pooled_human.insert(pooled_human.end(), human.begin(), human.end());
  }
  perf.groups_defined = static_cast<std::size_t>(std::count_if(per_group.begin(), per_group.end(),
                                                               [](const auto& v) { return v.has_value(); }));
  perf.mean_spearman = mean_defined(per_group);
  if (pooled_pred.size() >= 2) perf.pooled_spearman = spearman(pooled_pred, pooled_human);
  return perf;
}

}  // namespace advjudge
