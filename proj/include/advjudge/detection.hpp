#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "advjudge/assessment.hpp"
#include "advjudge/corpus.hpp"
#include "advjudge/judge.hpp"

namespace advjudge {

struct PerplexityScore {
  std::string text_id;
  double perp = 0.0;  // nats per model token
};

/// -(1/|x|) log P(x) from a backend-reported log-likelihood.
double perplexity_from(const TextLogLikelihood& ll);

/// Throws BackendError when the backend cannot score text log-probabilities.
PerplexityScore perplexity(const JudgeBackend& lm, std::string_view text, std::string text_id = {});

enum class Label { clean, adversarial };

std::string_view to_string(Label label);

struct DetectionItem {
  std::string id;
  std::string text;
  Label label = Label::clean;
};

struct DetectionDataset {
  std::vector<DetectionItem> items;

  std::size_t count(Label label) const;
};

/// One clean and one attacked copy of every candidate.
DetectionDataset build_detection_dataset(const Corpus& test, std::span<const std::string> phrase);

/// Adversarial iff perp > beta.
Label classify(double perp, double beta);
Label classify(const PerplexityScore& score, double beta);

struct LabeledScore {
  double perp = 0.0;
  Label label = Label::clean;
};

struct PRPoint {
  double beta = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision is 0 when nothing is flagged; F1 is 0 when P + R = 0.
PRPoint pr_point(double beta, std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

/// Midpoints between consecutive distinct values, plus min - 1 and max + 1.
std::vector<double> sweep_thresholds(std::span<const double> values);

/// One point per threshold, ordered by increasing beta.
std::vector<PRPoint> pr_sweep(std::span<const LabeledScore> scores);

/// Highest F1; ties go to the lowest beta.
PRPoint best_f1(std::span<const PRPoint> points);

/// Perplexity of every item, in dataset order.
std::vector<PerplexityScore> score_dataset(const JudgeBackend& lm, const DetectionDataset& dataset,
                                           Execution exec = Execution::parallel);

std::vector<LabeledScore> label_scores(const DetectionDataset& dataset, std::span<const PerplexityScore> scores);

/// beta,tp,fp,fn,tn,precision,recall,f1,f1_percent
std::string pr_csv(std::span<const PRPoint> points);

nlohmann::json to_json(const PRPoint& point);

}  // namespace advjudge
