#include "advjudge/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#include "advjudge/error.hpp"
#include "advjudge/hashing.hpp"
#include "advjudge/parallel.hpp"
#include "advjudge/text.hpp"

namespace advjudge {

using nlohmann::json;

double rank_of(std::span<const double> scores, std::size_t index, bool strict_pessimistic) {
  if (index >= scores.size()) throw std::out_of_range("rank_of: index out of range");
  const double s = scores[index];
  std::size_t better = 0, tied = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j == index) continue;
    if (scores[j] > s) {
      ++better;
    } else if (scores[j] == s) {
      ++tied;
    }
  }
  if (strict_pessimistic) return static_cast<double>(better + tied + 1);
  return static_cast<double>(better + 1) + 0.5 * static_cast<double>(tied);
}

namespace {

double single_score(const JudgeBackend& backend, const ContextGroup& group, std::string_view text,
                    const EvalSettings& settings) {
  return settings.mode.score == ScoreMode::absolute_direct
             ? backend.score_text(group.context_text, text, settings.attribute, settings.mode.max_score)
             : backend.score_distribution(group.context_text, text, settings.attribute, settings.mode.max_score)
                   .expectation();
}

bool is_seen(std::span<const std::size_t> seen, std::size_t n) {
  return std::find(seen.begin(), seen.end(), n) != seen.end();
}

// Unattacked state of one group, shared by all of its attacked variants.
struct GroupBase {
  std::optional<PairwiseMatrix> matrix;
  std::vector<double> scores;
};

RankEntry comparative_entry(const JudgeBackend& backend, const ContextGroup& group, const PairwiseMatrix& base,
                            std::size_t n, std::span<const std::string> phrase, const EvalSettings& settings) {
  PairwiseMatrix matrix = base;
  if (!phrase.empty()) {
    const std::string attacked = append_phrase(group.candidates[n].text, phrase);
    // Only pairs touching n change; each is recomputed in the same
    // (lower, higher) orientation a full rebuild would use.
    for (std::size_t j = 0; j < group.size(); ++j) {
      if (j == n) continue;
      if (n < j) {
        matrix.set(n, j, pairwise_probability(backend, group.context_text, attacked, group.candidates[j].text,
                                              settings.attribute));
      } else {
        matrix.set(j, n, pairwise_probability(backend, group.context_text, group.candidates[j].text, attacked,
                                              settings.attribute));
      }
    }
  }
  const auto scores = comparative_scores(matrix);
  RankEntry e;
  e.candidate = n;
  e.rank = rank_of(scores.values, n, settings.strict_pessimistic);
  double sum = 0.0;
  for (std::size_t j = 0; j < group.size(); ++j) {
    e.win_probs.push_back(matrix(n, j));
    if (j != n) sum += matrix(n, j);
  }
  e.metric = sum / static_cast<double>(group.size() - 1);
  return e;
}

RankEntry absolute_entry(const JudgeBackend& backend, const ContextGroup& group, std::span<const double> base,
                         std::size_t n, std::span<const std::string> phrase, const EvalSettings& settings) {
  std::vector<double> scores(base.begin(), base.end());
  if (!phrase.empty()) scores[n] = single_score(backend, group, append_phrase(group.candidates[n].text, phrase), settings);
  RankEntry e;
  e.candidate = n;
  e.rank = rank_of(scores, n, settings.strict_pessimistic);
  e.metric = scores[n];
  return e;
}

}  // namespace

double attacked_rank(const JudgeBackend& backend, const ContextGroup& group, std::size_t attacked_index,
                     std::span<const std::string> phrase, const EvalSettings& settings) {
  if (attacked_index >= group.size()) throw std::out_of_range("attacked index out of range");
  const auto scores = assess_group(backend, group, settings.attribute, settings.mode,
                                   Perturbation{attacked_index, {phrase.begin(), phrase.end()}}, settings.exec);
  return rank_of(scores.values, attacked_index, settings.strict_pessimistic);
}

std::vector<RankEntry> evaluate_attacks(const JudgeBackend& backend, const Corpus& test,
                                        std::span<const std::string> phrase, const EvalSettings& settings) {
  if (test.groups.empty()) throw DataError("evaluation needs a non-empty test corpus");
  const std::size_t m = test.groups.size();
  const std::size_t n_per = test.candidates_per_group();
  if (n_per < 2) throw DataError("evaluation needs at least 2 candidates per group");
  const bool comparative = settings.mode.score == ScoreMode::comparative;
  const int threads = settings.exec == Execution::parallel ? backend.preferred_concurrency() : 1;

  std::vector<GroupBase> base(m);
  parallel_for(m, threads, [&](std::size_t g) {
    const auto& group = test.groups[g];
    if (comparative) {
      base[g].matrix = build_pairwise_matrix(backend, group, settings.attribute, std::nullopt, Execution::serial);
    } else {
      base[g].scores = absolute_scores(backend, group, settings.attribute, settings.mode.max_score,
                                       settings.mode.score, std::nullopt, Execution::serial)
                           .values;
    }
  });

  std::vector<RankEntry> entries(m * n_per);
  parallel_for(m * n_per, threads, [&](std::size_t k) {
    const std::size_t g = k / n_per;
    const std::size_t n = k % n_per;
    const auto& group = test.groups[g];
    RankEntry e = comparative ? comparative_entry(backend, group, *base[g].matrix, n, phrase, settings)
                              : absolute_entry(backend, group, base[g].scores, n, phrase, settings);
    e.group_index = g;
    e.context_id = group.context_id;
    e.seen = is_seen(settings.seen_candidates, n);
    entries[k] = std::move(e);
  });
  return entries;
}

double average_rank(const JudgeBackend& backend, const Corpus& test, std::span<const std::string> phrase,
                    const EvalSettings& settings) {
  const auto entries = evaluate_attacks(backend, test, phrase, settings);
  double sum = 0.0;
  for (const auto& e : entries) sum += e.rank;
  return sum / static_cast<double>(entries.size());
}

namespace {

std::optional<double> mean_of(double sum, std::size_t count) {
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace

PrefixResult summarize_prefix(std::size_t prefix_len, std::vector<std::string> words, std::vector<RankEntry> entries,
                              std::size_t candidates_per_group, std::span<const std::size_t> seen, ScoreMode mode) {
  if (entries.empty()) throw DataError("cannot summarise an empty evaluation");
  PrefixResult r;
  r.prefix_len = prefix_len;
  r.words = std::move(words);

  double rank_sum = 0.0, metric_sum = 0.0;
  double seen_sum = 0.0, unseen_sum = 0.0;
  std::size_t seen_count = 0, unseen_count = 0;
  std::vector<double> pos_sum(candidates_per_group, 0.0);
  std::vector<std::size_t> pos_count(candidates_per_group, 0);
  double cat_sum[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  std::size_t cat_count[2][2] = {{0, 0}, {0, 0}};

  for (const auto& e : entries) {
    rank_sum += e.rank;
    metric_sum += e.metric;
    if (e.seen) {
      seen_sum += e.rank;
      ++seen_count;
    } else {
      unseen_sum += e.rank;
      ++unseen_count;
    }
    if (e.candidate < candidates_per_group) {
      pos_sum[e.candidate] += e.metric;
      ++pos_count[e.candidate];
    }
    if (mode == ScoreMode::comparative) {
      for (std::size_t j = 0; j < e.win_probs.size(); ++j) {
        if (j == e.candidate) continue;
        const int a = e.seen ? 0 : 1;
        const int b = is_seen(seen, j) ? 0 : 1;
        cat_sum[a][b] += e.win_probs[j];
        ++cat_count[a][b];
      }
    }
  }
  const double total = static_cast<double>(entries.size());
  r.avg_rank = rank_sum / total;
  r.mean_metric = metric_sum / total;
  r.avg_rank_seen = mean_of(seen_sum, seen_count);
  r.avg_rank_unseen = mean_of(unseen_sum, unseen_count);
  for (std::size_t n = 0; n < candidates_per_group; ++n) {
    r.mean_metric_by_position.push_back(pos_count[n] ? pos_sum[n] / static_cast<double>(pos_count[n]) : 0.0);
  }
  if (mode == ScoreMode::comparative) {
    r.win_prob.ss = mean_of(cat_sum[0][0], cat_count[0][0]);
    r.win_prob.su = mean_of(cat_sum[0][1], cat_count[0][1]);
    r.win_prob.us = mean_of(cat_sum[1][0], cat_count[1][0]);
    r.win_prob.uu = mean_of(cat_sum[1][1], cat_count[1][1]);
    r.win_prob.filtered = mean_of(cat_sum[0][1] + cat_sum[1][0] + cat_sum[1][1],
                                  cat_count[0][1] + cat_count[1][0] + cat_count[1][1]);
  }
  r.entries = std::move(entries);
  return r;
}

std::string phrase_hash(std::span<const std::string> words) {
  return sha256_hex(join_words(words)).substr(0, 12);
}

std::vector<std::size_t> all_prefix_lengths(std::size_t phrase_length) {
  std::vector<std::size_t> out(phrase_length + 1);
  for (std::size_t i = 0; i <= phrase_length; ++i) out[i] = i;
  return out;
}

RankReport rank_sweep(const JudgeBackend& backend, const Corpus& test, const AttackPhrase& phrase,
                      std::span<const std::size_t> prefix_lengths, const EvalSettings& settings) {
  if (prefix_lengths.empty()) throw ConfigError("rank sweep needs at least one prefix length");
  for (auto len : prefix_lengths) {
    if (len > phrase.length()) {
      throw ConfigError("prefix length " + std::to_string(len) + " exceeds phrase length " +
                        std::to_string(phrase.length()));
    }
  }
  if (!test.has_attribute(settings.attribute) && !backend.templates().has_attribute(settings.attribute)) {
    throw ConfigError("unknown attribute '" + settings.attribute + "'");
  }
  RankReport report;
  report.task = phrase.task;
  report.corpus = test.name;
  report.attribute = settings.attribute;
  report.mode = settings.mode.score;
  report.max_score = settings.mode.max_score;
  report.strict_pessimistic = settings.strict_pessimistic;
  report.source_backend = phrase.backend_id;
  report.target_backend = backend.id();
  report.phrase = phrase.words;
  report.phrase_hash = phrase_hash(phrase.words);
  report.seen_candidates = settings.seen_candidates;
  report.groups = test.groups.size();
  report.candidates_per_group = test.candidates_per_group();
  for (auto len : prefix_lengths) {
    auto words = phrase.prefix(len);
    auto entries = evaluate_attacks(backend, test, words, settings);
    report.prefixes.push_back(summarize_prefix(len, std::move(words), std::move(entries),
                                               report.candidates_per_group, settings.seen_candidates,
                                               settings.mode.score));
  }
  return report;
}

RankReport transfer_eval(const AttackPhrase& phrase, const JudgeBackend& target, const Corpus& test,
                         std::span<const std::size_t> prefix_lengths, const EvalSettings& settings) {
  if (!phrase.backend_id.empty() && phrase.backend_id == target.id()) {
    std::cerr << "warning: phrase was learned on backend '" << target.id()
              << "'; transfer target is the same backend\n";
  }
  return rank_sweep(target, test, phrase, prefix_lengths, settings);
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json to_json(const RankReport& report) {
  json prefixes = json::array();
  for (const auto& p : report.prefixes) {
    json entries = json::array();
    for (const auto& e : p.entries) {
      json je = {{"group_index", e.group_index}, {"context_id", e.context_id}, {"candidate", e.candidate},
                 {"rank", e.rank},               {"metric", e.metric},         {"seen", e.seen}};
      if (!e.win_probs.empty()) je["win_probs"] = e.win_probs;
      entries.push_back(std::move(je));
    }
    prefixes.push_back({{"prefix_len", p.prefix_len},
                        {"words", p.words},
                        {"avg_rank", p.avg_rank},
                        {"mean_metric", p.mean_metric},
                        {"avg_rank_seen", opt(p.avg_rank_seen)},
                        {"avg_rank_unseen", opt(p.avg_rank_unseen)},
                        {"win_prob",
                         {{"seen_vs_seen", opt(p.win_prob.ss)},
                          {"seen_vs_unseen", opt(p.win_prob.su)},
                          {"unseen_vs_seen", opt(p.win_prob.us)},
                          {"unseen_vs_unseen", opt(p.win_prob.uu)},
                          {"filtered", opt(p.win_prob.filtered)}}},
                        {"mean_metric_by_position", p.mean_metric_by_position},
                        {"entries", std::move(entries)}});
  }
  return {{"task", report.task},
          {"corpus", report.corpus},
          {"attribute", report.attribute},
          {"mode", to_string(report.mode)},
          {"max_score", report.max_score},
          {"strict_pessimistic", report.strict_pessimistic},
          {"source_backend", report.source_backend},
          {"target_backend", report.target_backend},
          {"phrase", report.phrase},
          {"phrase_hash", report.phrase_hash},
          {"seen_candidates", report.seen_candidates},
          {"groups", report.groups},
          {"candidates_per_group", report.candidates_per_group},
          {"prefixes", std::move(prefixes)}};
}

RankReport rank_report_from_json(const json& j) {
  try {
    RankReport r;
    r.task = j.at("task").get<std::string>();
    r.corpus = j.at("corpus").get<std::string>();
    r.attribute = j.at("attribute").get<std::string>();
    r.mode = parse_score_mode(j.at("mode").get<std::string>());
    r.max_score = j.at("max_score").get<int>();
    r.strict_pessimistic = j.at("strict_pessimistic").get<bool>();
    r.source_backend = j.at("source_backend").get<std::string>();
    r.target_backend = j.at("target_backend").get<std::string>();
    r.phrase = j.at("phrase").get<std::vector<std::string>>();
    r.phrase_hash = j.at("phrase_hash").get<std::string>();
    r.seen_candidates = j.at("seen_candidates").get<std::vector<std::size_t>>();
    r.groups = j.at("groups").get<std::size_t>();
    r.candidates_per_group = j.at("candidates_per_group").get<std::size_t>();
    for (const auto& jp : j.at("prefixes")) {
      PrefixResult p;
      p.prefix_len = jp.at("prefix_len").get<std::size_t>();
      p.words = jp.at("words").get<std::vector<std::string>>();
      p.avg_rank = jp.at("avg_rank").get<double>();
      p.mean_metric = jp.at("mean_metric").get<double>();
      p.avg_rank_seen = get_opt(jp, "avg_rank_seen");
      p.avg_rank_unseen = get_opt(jp, "avg_rank_unseen");
      const auto& wp = jp.at("win_prob");
      p.win_prob.ss = get_opt(wp, "seen_vs_seen");
      p.win_prob.su = get_opt(wp, "seen_vs_unseen");
      p.win_prob.us = get_opt(wp, "unseen_vs_seen");
      p.win_prob.uu = get_opt(wp, "unseen_vs_unseen");
      p.win_prob.filtered = get_opt(wp, "filtered");
      p.mean_metric_by_position = jp.at("mean_metric_by_position").get<std::vector<double>>();
      for (const auto& je : jp.at("entries")) {
        RankEntry e;
        e.group_index = je.at("group_index").get<std::size_t>();
        e.context_id = je.at("context_id").get<std::string>();
        e.candidate = je.at("candidate").get<std::size_t>();
        e.rank = je.at("rank").get<double>();
        e.metric = je.at("metric").get<double>();
        e.seen = je.at("seen").get<bool>();
        if (je.contains("win_probs")) e.win_probs = je.at("win_probs").get<std::vector<double>>();
        p.entries.push_back(std::move(e));
      }
      r.prefixes.push_back(std::move(p));
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed rank report: ") + e.what());
  }
}

std::string rank_report_csv(const RankReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "prefix_len,avg_rank,mean_metric\n";
  for (const auto& p : report.prefixes) out << p.prefix_len << ',' << p.avg_rank << ',' << p.mean_metric << '\n';
  return out.str();
}

namespace {

std::string file_safe(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.';
    out += ok ? c : '-';
  }
  return out.empty() ? "none" : out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

std::string report_stem(const RankReport& report) {
  return file_safe(report.task) + "_" + file_safe(to_string(report.mode)) + "_" + file_safe(report.attribute) + "_" +
         file_safe(report.target_backend) + "_" + report.phrase_hash;
}

std::vector<std::filesystem::path> emit_report(const RankReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto stem = report_stem(report);
  const auto json_path = out_dir / (stem + ".json");
  const auto csv_path = out_dir / (stem + ".csv");
  write_text(json_path, to_json(report).dump(2) + "\n");
  write_text(csv_path, rank_report_csv(report));
  return {json_path, csv_path};
}

RankReport load_rank_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open rank report " + path.string());
  try {
    return rank_report_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace advjudge
