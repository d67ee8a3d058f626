#include "advjudge/detection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "advjudge/error.hpp"
#include "advjudge/parallel.hpp"
#include "advjudge/text.hpp"

namespace advjudge {

double perplexity_from(const TextLogLikelihood& ll) {
  if (ll.token_count == 0) throw BackendError("language model reported zero tokens");
  if (!std::isfinite(ll.total_logprob) || ll.total_logprob > 0.0) {
    throw BackendError("language model reported an invalid log-probability");
  }
  const double perp = -ll.total_logprob / static_cast<double>(ll.token_count);
  return perp == 0.0 ? 0.0 : perp;  // no -0.0
}

PerplexityScore perplexity(const JudgeBackend& lm, std::string_view text, std::string text_id) {
  if (trim(text).empty()) throw DataError("cannot score the perplexity of an empty text");
  if (!lm.supports_text_logprobs()) {
    throw BackendError("backend '" + lm.id() + "' does not provide text log-probabilities");
  }
  return {std::move(text_id), perplexity_from(lm.text_log_likelihood(text))};
}

std::string_view to_string(Label label) { return label == Label::clean ? "clean" : "adversarial"; }

std::size_t DetectionDataset::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [&](const DetectionItem& i) { return i.label == label; }));
}

DetectionDataset build_detection_dataset(const Corpus& test, std::span<const std::string> phrase) {
  if (phrase.empty()) throw ConfigError("detection needs a non-empty attack phrase");
  if (test.groups.empty()) throw DataError("detection needs a non-empty test corpus");
  DetectionDataset ds;
  for (const auto& g : test.groups) {
    for (const auto& c : g.candidates) {
      const std::string id = g.context_id + "/" + c.id;
      ds.items.push_back({id + "/clean", c.text, Label::clean});
      ds.items.push_back({id + "/adversarial", append_phrase(c.text, phrase), Label::adversarial});
    }
  }
  return ds;
}

Label classify(double perp, double beta) { return perp > beta ? Label::adversarial : Label::clean; }

Label classify(const PerplexityScore& score, double beta) { return classify(score.perp, beta); }

PRPoint pr_point(double beta, std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  PRPoint p{beta, tp, fp, fn, tn, 0.0, 0.0, 0.0};
  if (tp + fp > 0) p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) p.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (p.precision + p.recall > 0.0) p.f1 = 2.0 * p.precision * p.recall / (p.precision + p.recall);
  return p;
}

std::vector<double> sweep_thresholds(std::span<const double> values) {
  if (values.empty()) return {};
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  std::vector<double> out;
  out.push_back(v.front() - 1.0);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) out.push_back(v[i] + 0.5 * (v[i + 1] - v[i]));
  out.push_back(v.back() + 1.0);
  return out;
}

std::vector<PRPoint> pr_sweep(std::span<const LabeledScore> scores) {
  std::size_t n_adv = 0;
  std::vector<double> values;
  for (const auto& s : scores) {
    if (!std::isfinite(s.perp)) throw DataError("non-finite perplexity in detection sweep");
    values.push_back(s.perp);
    if (s.label == Label::adversarial) ++n_adv;
  }
  if (n_adv == 0 || n_adv == scores.size()) throw DataError("detection sweep needs both clean and adversarial items");

  // Sorted scan: the threshold passes items in ascending perplexity, each
  // moving from "flagged" to "not flagged".
  std::vector<LabeledScore> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.perp < b.perp; });
  const std::size_t n_clean = scores.size() - n_adv;
  std::size_t tp = n_adv, fp = n_clean;
  std::size_t k = 0;
  std::vector<PRPoint> out;
  for (double beta : sweep_thresholds(values)) {
    while (k < sorted.size() && !(sorted[k].perp > beta)) {
      if (sorted[k].label == Label::adversarial) {
        --tp;
      } else {
        --fp;
      }
      ++k;
    }
    out.push_back(pr_point(beta, tp, fp, n_adv - tp, n_clean - fp));
  }
  return out;
}

PRPoint best_f1(std::span<const PRPoint> points) {
  if (points.empty()) throw DataError("best_f1 needs at least one point");
  const PRPoint* best = &points.front();
  for (const auto& p : points) {
    if (p.f1 > best->f1 || (p.f1 == best->f1 && p.beta < best->beta)) best = &p;
  }
  return *best;
}

std::vector<PerplexityScore> score_dataset(const JudgeBackend& lm, const DetectionDataset& dataset, Execution exec) {
  std::vector<PerplexityScore> out(dataset.items.size());
  const int threads = exec == Execution::parallel ? lm.preferred_concurrency() : 1;
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = perplexity(lm, dataset.items[i].text, dataset.items[i].id);
  });
  return out;
}

std::vector<LabeledScore> label_scores(const DetectionDataset& dataset, std::span<const PerplexityScore> scores) {
  if (scores.size() != dataset.items.size()) throw std::invalid_argument("label_scores: size mismatch");
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i].perp, dataset.items[i].label});
  return out;
}

std::string pr_csv(std::span<const PRPoint> points) {
  std::ostringstream out;
  out.precision(17);
  out << "beta,tp,fp,fn,tn,precision,recall,f1,f1_percent\n";
  for (const auto& p : points) {
    out << p.beta << ',' << p.tp << ',' << p.fp << ',' << p.fn << ',' << p.tn << ',' << p.precision << ','
        << p.recall << ',' << p.f1 << ',' << 100.0 * p.f1 << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const PRPoint& p) {
  return {{"beta", p.beta},       {"tp", p.tp},         {"fp", p.fp}, {"fn", p.fn}, {"tn", p.tn},
          {"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

}  // namespace advjudge
