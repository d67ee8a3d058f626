// Serial reference kernels against their OpenMP counterparts on a mock
// judge with artificial per-call cost.
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "advjudge/attack.hpp"
#include "advjudge/evaluation.hpp"
#include "advjudge/mock_judge.hpp"
#include "advjudge/reference.hpp"

using namespace advjudge;

namespace {

// Roughly `work` floating point ops per call, result still a pure function
// of the text.
QualityFn costly_quality(int work) {
  return [work](const MockInput& in) {
    double acc = static_cast<double>(std::hash<std::string_view>{}(in.text) % 1000) / 250.0;
    for (int i = 0; i < work; ++i) acc = std::fmod(acc * 1.0000001 + std::sin(acc), 4.0);
    return acc;
  };
}

Corpus bench_corpus(std::size_t m, std::size_t n) {
  static const std::vector<std::string> words{"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"};
  std::mt19937_64 rng(1);
  Corpus c;
  c.name = "bench";
  c.attribute_names = {"OVE"};
  for (std::size_t g = 0; g < m; ++g) {
    ContextGroup grp;
    grp.context_id = "g" + std::to_string(g);
    grp.context_text = "context " + grp.context_id;
    for (std::size_t i = 0; i < n; ++i) {
      Candidate cand;
      cand.id = "c" + std::to_string(i);
      cand.text = grp.context_id + "c" + std::to_string(i);
      for (int k = 0; k < 6; ++k) cand.text += " " + words[rng() % words.size()];
      cand.human_scores["OVE"] = static_cast<double>(i);
      grp.candidates.push_back(std::move(cand));
    }
    c.groups.push_back(std::move(grp));
  }
  return c;
}

GreedyConfig bench_greedy() {
  std::vector<std::string> vocab;
  for (int i = 0; i < 40; ++i) vocab.push_back("w" + std::to_string(i));
  GreedyConfig cfg;
  cfg.vocab = make_vocabulary(vocab);
  cfg.max_words = 2;
  return cfg;
}

template <bool kParallel>
void BM_Greedy(benchmark::State& state) {
  MockJudge judge("bench", MockRules{.quality = costly_quality(static_cast<int>(state.range(0)))});
  const Corpus dev = bench_corpus(8, 4);
  const auto schedule = PairSchedule::fixed(training_pairs(dev, SplitSpec{}, PairMode::comparative, 1));
  const auto cfg = bench_greedy();
  for (auto _ : state) {
    auto p = kParallel ? greedy_attack(judge, dev, schedule, "OVE", cfg)
                       : reference::greedy_attack(judge, dev, schedule, "OVE", cfg);
    benchmark::DoNotOptimize(p);
  }
}

template <bool kParallel>
void BM_AverageRank(benchmark::State& state) {
  MockJudge judge("bench", MockRules{.quality = costly_quality(static_cast<int>(state.range(0)))});
  const Corpus test = bench_corpus(12, 8);
  const std::vector<std::string> phrase{"alpha", "beta"};
  const EvalSettings settings;
  for (auto _ : state) {
    const double r = kParallel ? average_rank(judge, test, phrase, settings)
                               : reference::average_rank(judge, test, phrase, settings);
    benchmark::DoNotOptimize(r);
  }
}

}  // namespace

BENCHMARK(BM_Greedy<false>)->Name("greedy/serial")->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Greedy<true>)->Name("greedy/openmp")->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AverageRank<false>)->Name("average_rank/serial")->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AverageRank<true>)->Name("average_rank/openmp")->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
