#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "advjudge/error.hpp"
#include "advjudge/evaluation.hpp"
#include "advjudge/mock_judge.hpp"
#include "advjudge/reference.hpp"
#include "test_support.hpp"

using namespace advjudge;
using advjudge::testing::hashed_quality;
using advjudge::testing::make_corpus;
using advjudge::testing::random_corpus;

namespace {

EvalSettings comparative() { return EvalSettings{}; }

EvalSettings absolute(ScoreMode score = ScoreMode::absolute_expectation) {
  EvalSettings s;
  s.mode = AssessmentMode{score, 5};
  return s;
}

double counting_rank(const std::vector<double>& v, std::size_t i, bool strict) {
  double r = 1.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (j == i) continue;
    if (v[j] > v[i]) r += 1.0;
    if (v[j] == v[i]) r += strict ? 1.0 : 0.5;
  }
  return r;
}

AttackPhrase phrase_of(std::vector<std::string> words) {
  AttackPhrase p;
  p.words = std::move(words);
  p.backend_id = "m";
  p.task = "summ";
  p.attribute = "OVE";
  return p;
}

}  // namespace

TEST(RankOf, MatchesCountingOracle) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(1 + rng() % 9);
    for (auto& x : v) x = static_cast<double>(rng() % 4);
    const std::size_t i = rng() % v.size();
    EXPECT_DOUBLE_EQ(rank_of(v, i), counting_rank(v, i, false));
    EXPECT_DOUBLE_EQ(rank_of(v, i, true), counting_rank(v, i, true));
  }
}

TEST(AverageRank, UnattackedIsMidpoint) {
  MockJudge judge("m", MockRules{.quality = hashed_quality(0, 5)});
  for (std::size_t n : {6u, 16u}) {
    const Corpus test = random_corpus(5, n, n);
    const double expected = (static_cast<double>(n) + 1.0) / 2.0;
    EXPECT_NEAR(average_rank(judge, test, {}, comparative()), expected, 1e-12);
    EXPECT_NEAR(average_rank(judge, test, {}, absolute()), expected, 1e-12);
  }
}

TEST(AverageRank, SaturatingAttackRanksFirst) {
  MockJudge judge("m", MockRules{.quality = mock_rules::keyword({"excellent"}, 1, 10, 50), .comparative_slope = 5});
  const Corpus test = make_corpus(6, 5);
  const std::vector<std::string> phrase{"excellent"};
  EXPECT_DOUBLE_EQ(average_rank(judge, test, phrase, comparative()), 1.0);
  EXPECT_DOUBLE_EQ(average_rank(judge, test, phrase, absolute()), 1.0);
}

TEST(AverageRank, LongestTextWinsUnderLengthJudge) {
  MockJudge judge("m", MockRules{.quality = mock_rules::word_count()});
  const Corpus test = make_corpus(4, 6);
  const std::vector<std::string> phrase(6, "pad");
  EXPECT_DOUBLE_EQ(average_rank(judge, test, phrase, comparative()), 1.0);
  // Without a phrase, candidate n has rank N - n under this judge.
  const auto entries = evaluate_attacks(judge, test, {}, comparative());
  for (const auto& e : entries) EXPECT_DOUBLE_EQ(e.rank, 6.0 - static_cast<double>(e.candidate));
}

TEST(AverageRank, StrictPessimisticOnTies) {
  MockJudge judge("m", MockRules{.quality = mock_rules::constant(3)});
  const Corpus test = make_corpus(3, 5);
  auto s = absolute();
  EXPECT_DOUBLE_EQ(average_rank(judge, test, {}, s), 3.0);
  s.strict_pessimistic = true;
  EXPECT_DOUBLE_EQ(average_rank(judge, test, {}, s), 5.0);
}

TEST(AverageRank, Bounds) {
  MockJudge judge("m", MockRules{.quality = hashed_quality(-2, 7)});
  const Corpus test = random_corpus(8, 5, 2);
  const std::vector<std::string> phrase{"beta", "zeta"};
  for (const auto& e : evaluate_attacks(judge, test, phrase, comparative())) {
    EXPECT_GE(e.rank, 1.0);
    EXPECT_LE(e.rank, 5.0);
    EXPECT_GE(e.metric, 0.0);
    EXPECT_LE(e.metric, 1.0);
    ASSERT_EQ(e.win_probs.size(), 5u);
    EXPECT_EQ(e.win_probs[e.candidate], 0.5);
  }
}

TEST(AverageRank, MeanWinProbabilityIsHalfWithoutPhrase) {
  MockJudge judge("m", MockRules{.quality = hashed_quality(0, 9)});
  const Corpus test = random_corpus(7, 6, 11);
  const auto entries = evaluate_attacks(judge, test, {}, comparative());
  double sum = 0.0;
  for (const auto& e : entries) sum += e.metric;
  EXPECT_NEAR(sum / static_cast<double>(entries.size()), 0.5, 1e-12);
}

TEST(AverageRank, ParallelMatchesReference) {
  MockJudge judge("m", MockRules{.quality = hashed_quality(0, 6)});
  const Corpus test = random_corpus(9, 6, 17);
  const std::vector<std::string> phrase{"gamma", "eta"};
  for (const auto& s : {comparative(), absolute(), absolute(ScoreMode::absolute_direct)}) {
    const auto fast = evaluate_attacks(judge, test, phrase, s);
    EXPECT_EQ(fast, reference::evaluate_attacks(judge, test, phrase, s));
    auto serial = s;
    serial.exec = Execution::serial;
    EXPECT_EQ(fast, evaluate_attacks(judge, test, phrase, serial));
    EXPECT_EQ(average_rank(judge, test, phrase, s), reference::average_rank(judge, test, phrase, s));
  }
}

TEST(AverageRank, AttackedRankAgreesWithKernel) {
  MockJudge judge("m", MockRules{.quality = hashed_quality(0, 6)});
  const Corpus test = random_corpus(3, 4, 5);
  const std::vector<std::string> phrase{"delta"};
  for (const auto& e : evaluate_attacks(judge, test, phrase, comparative())) {
    EXPECT_EQ(e.rank, attacked_rank(judge, test.groups[e.group_index], e.candidate, phrase, comparative()));
  }
}

TEST(Summary, SeenBreakdownMatchesOracle) {
  MockJudge judge("m", MockRules{.quality = hashed_quality(0, 4)});
  const Corpus test = random_corpus(6, 4, 23);
  const std::vector<std::string> phrase{"alpha"};
  const auto report = rank_sweep(judge, test, phrase_of(phrase), std::vector<std::size_t>{1}, comparative());
  const auto& p = report.prefixes.at(0);
  double sum[2][2] = {{0, 0}, {0, 0}};
  double cnt[2][2] = {{0, 0}, {0, 0}};
  double seen_rank = 0, unseen_rank = 0;
  for (const auto& e : p.entries) {
    const int a = e.candidate < 2 ? 0 : 1;
    (a == 0 ? seen_rank : unseen_rank) += e.rank;
    for (std::size_t j = 0; j < 4; ++j) {
      if (j == e.candidate) continue;
      sum[a][j < 2 ? 0 : 1] += e.win_probs[j];
      cnt[a][j < 2 ? 0 : 1] += 1;
    }
  }
  EXPECT_NEAR(*p.win_prob.ss, sum[0][0] / cnt[0][0], 1e-12);
  EXPECT_NEAR(*p.win_prob.su, sum[0][1] / cnt[0][1], 1e-12);
  EXPECT_NEAR(*p.win_prob.us, sum[1][0] / cnt[1][0], 1e-12);
  EXPECT_NEAR(*p.win_prob.uu, sum[1][1] / cnt[1][1], 1e-12);
  EXPECT_NEAR(*p.win_prob.filtered,
              (sum[0][1] + sum[1][0] + sum[1][1]) / (cnt[0][1] + cnt[1][0] + cnt[1][1]), 1e-12);
  EXPECT_NEAR(*p.avg_rank_seen, seen_rank / 12.0, 1e-12);
  EXPECT_NEAR(*p.avg_rank_unseen, unseen_rank / 12.0, 1e-12);
  ASSERT_EQ(p.mean_metric_by_position.size(), 4u);
}

TEST(Summary, AbsoluteHasNoWinProbabilities) {
  MockJudge judge("m", MockRules{.quality = hashed_quality(1, 5)});
  const Corpus test = random_corpus(3, 3, 1);
  const auto report = rank_sweep(judge, test, phrase_of({"eta"}), std::vector<std::size_t>{0, 1}, absolute());
  for (const auto& p : report.prefixes) {
    EXPECT_FALSE(p.win_prob.ss.has_value());
    EXPECT_FALSE(p.win_prob.filtered.has_value());
    for (const auto& e : p.entries) EXPECT_TRUE(e.win_probs.empty());
  }
}

TEST(Sweep, AllPrefixesAndRoundTrip) {
  MockJudge judge("m", MockRules{.quality = mock_rules::keyword({"great"}, 1, 0.7, 5)});
  const Corpus test = make_corpus(4, 4);
  const auto phrase = phrase_of({"great", "so", "great"});
  const auto report = rank_sweep(judge, test, phrase, all_prefix_lengths(3), comparative());
  ASSERT_EQ(report.prefixes.size(), 4u);
  EXPECT_NEAR(report.prefixes[0].avg_rank, 2.5, 1e-12);
  EXPECT_LT(report.prefixes[1].avg_rank, report.prefixes[0].avg_rank);
  EXPECT_EQ(report.prefixes[2].words, (std::vector<std::string>{"great", "so"}));

  EXPECT_EQ(rank_report_from_json(to_json(report)), report);
  EXPECT_EQ(rank_report_from_json(nlohmann::json::parse(to_json(report).dump())), report);

  std::istringstream csv(rank_report_csv(report));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "prefix_len,avg_rank,mean_metric");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream fields(line);
    std::string len, rank;
    std::getline(fields, len, ',');
    std::getline(fields, rank, ',');
    EXPECT_EQ(std::stoul(len), rows);
    EXPECT_DOUBLE_EQ(std::stod(rank), report.prefixes[rows].avg_rank);
    ++rows;
  }
  EXPECT_EQ(rows, 4u);

  const auto dir = advjudge::testing::temp_dir("sweep");
  const auto files = emit_report(report, dir);
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(files[0].filename().string(), report_stem(report) + ".json");
  EXPECT_EQ(load_rank_report(files[0]), report);
  EXPECT_EQ(report_stem(report), "summ_comparative_OVE_m_" + phrase_hash(phrase.words));
  EXPECT_EQ(phrase_hash(phrase.words).size(), 12u);
}

TEST(Sweep, RejectsBadRequests) {
  MockJudge judge("m", MockRules{.quality = mock_rules::word_count()});
  const Corpus test = make_corpus(2, 3);
  EXPECT_THROW(rank_sweep(judge, test, phrase_of({"a"}), std::vector<std::size_t>{2}, comparative()), ConfigError);
  auto s = comparative();
  s.attribute = "NOPE";
  EXPECT_THROW(rank_sweep(judge, test, phrase_of({"a"}), std::vector<std::size_t>{1}, s), Error);
}

TEST(Transfer, SameBackendMatchesSweep) {
  MockJudge judge("m", MockRules{.quality = hashed_quality(0, 3)});
  const Corpus test = random_corpus(4, 4, 8);
  const auto phrase = phrase_of({"beta", "theta"});
  const auto lengths = all_prefix_lengths(2);
  const auto sweep = rank_sweep(judge, test, phrase, lengths, comparative());
  ::testing::internal::CaptureStderr();
  const auto transfer = transfer_eval(phrase, judge, test, lengths, comparative());
  EXPECT_NE(::testing::internal::GetCapturedStderr().find("warning"), std::string::npos);
  EXPECT_EQ(transfer.prefixes, sweep.prefixes);
  EXPECT_EQ(transfer.source_backend, "m");
  EXPECT_EQ(transfer.target_backend, "m");
}

TEST(Transfer, LabelsBothBackends) {
  MockJudge target("other", MockRules{.quality = hashed_quality(0, 3)});
  const Corpus test = random_corpus(3, 3, 9);
  const auto report = transfer_eval(phrase_of({"beta"}), target, test, all_prefix_lengths(1), comparative());
  EXPECT_EQ(report.source_backend, "m");
  EXPECT_EQ(report.target_backend, "other");
}
