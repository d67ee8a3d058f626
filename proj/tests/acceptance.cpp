// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any gating criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "advjudge/assessment.hpp"
#include "advjudge/attack.hpp"
#include "advjudge/commands.hpp"
#include "advjudge/detection.hpp"
#include "advjudge/evaluation.hpp"
#include "advjudge/mock_judge.hpp"
#include "advjudge/text.hpp"
#include "test_support.hpp"

using namespace advjudge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

Outcome unattacked_baselines() {
  Outcome o;
  MockJudge judge("m", MockRules{.quality = advjudge::testing::hashed_quality(0, 5)});
  for (std::size_t n : {16u, 6u}) {
    const Corpus test = advjudge::testing::random_corpus(4, n, n);
    const double expected = n == 16 ? 8.50 : 3.50;
    EvalSettings comp;
    EvalSettings abs;
    abs.mode = AssessmentMode{ScoreMode::absolute_expectation, 5};
    const double rc = average_rank(judge, test, {}, comp);
    const double ra = average_rank(judge, test, {}, abs);
    o.require(std::abs(rc - expected) < 1e-9, "comparative N=" + std::to_string(n) + " gave " + num(rc));
    o.require(std::abs(ra - expected) < 1e-9, "absolute N=" + std::to_string(n) + " gave " + num(ra));
  }
  return o;
}

Outcome comparative_symmetry() {
  Outcome o;
  MockJudge judge("m", MockRules{.quality = advjudge::testing::hashed_quality(-3, 3), .comparative_slope = 1.7});
  const Corpus corpus = advjudge::testing::random_corpus(200, 5, 99);
  for (const auto& g : corpus.groups) {
    const auto m = build_pairwise_matrix(judge, g, "OVE");
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (i != j) o.require(std::abs(m(i, j) + m(j, i) - 1.0) < 1e-9, "p_ij + p_ji != 1 in " + g.context_id);
      }
    }
    const auto s = comparative_scores(m);
    const double mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / static_cast<double>(s.values.size());
    o.require(std::abs(mean - 0.5) < 1e-9, "mean score " + num(mean) + " in " + g.context_id);
  }
  return o;
}

Outcome greedy_oracle() {
  Outcome o;
  const std::map<std::string, double> weights{{"good", 0.4}, {"great", 0.9}, {"fine", 0.2}, {"best", 1.3}};
  auto quality = [&](std::string_view text) {
    double q = 1.0;
    for (const auto& w : split_words(text)) {
      const auto it = weights.find(w);
      if (it != weights.end()) q += it->second;
    }
    return q;
  };
  auto prob = [&](std::string_view x, std::string_view y) { return 1.0 / (1.0 + std::exp(-(quality(x) - quality(y)))); };
  MockJudge judge("m", MockRules{.quality = [&](const MockInput& in) { return quality(in.text); }});
  const Corpus dev = advjudge::testing::make_corpus(4, 3);
  const std::vector<std::string> words{"ok", "good", "fine", "great", "best"};

  struct Case {
    AttackMode mode;
    bool literal;
  };
  for (const Case c : {Case{AttackMode::comparative, false}, Case{AttackMode::comparative, true},
                       Case{AttackMode::absolute, false}}) {
    const bool comp = is_comparative(c.mode);
    const auto pairs = training_pairs(dev, SplitSpec{0.2, 0, {0, 1}}, comp ? PairMode::comparative : PairMode::absolute, 5);
    GreedyConfig cfg;
    cfg.vocab = make_vocabulary(words);
    cfg.max_words = 3;
    cfg.objective.mode = c.mode;
    cfg.objective.literal_objective = c.literal;
    const auto phrase = comp ? greedy_attack_comparative(judge, dev, PairSchedule::fixed(pairs), "OVE", cfg)
                             : greedy_attack_absolute(judge, dev, PairSchedule::fixed(pairs), "OVE", cfg);
    std::vector<std::string> prefix;
    for (std::size_t l = 0; l < cfg.max_words; ++l) {
      std::size_t best = 0;
      double best_q = -1e300;
      for (std::size_t w = 0; w < words.size(); ++w) {
        auto trial = prefix;
        trial.push_back(words[w]);
        double q = 0;
        for (const auto& p : pairs) {
          const auto& g = dev.groups[p.group_index];
          const std::string& a = g.candidates[p.a].text;
          if (!comp) {
            q += std::clamp(quality(append_phrase(a, trial)), 1.0, 5.0);
            continue;
          }
          const std::string& b = g.candidates[*p.b].text;
          const double fwd = prob(append_phrase(a, trial), b);
          const double rev = prob(a, append_phrase(b, trial));
          q += c.literal ? fwd + rev : fwd + 1.0 - rev;
        }
        q /= static_cast<double>(pairs.size());
        if (q > best_q + 1e-9) {
          best_q = q;
          best = w;
        }
      }
      o.require(phrase.words.at(l) == words[best], std::string(to_string(c.mode)) + (c.literal ? " literal" : "") +
                                                        " step " + std::to_string(l) + ": greedy chose " +
                                                        phrase.words.at(l) + ", oracle " + words[best]);
      prefix.push_back(words[best]);
    }
  }
  return o;
}

Outcome saturating_attack() {
  Outcome o;
  MockJudge judge("m", MockRules{.quality = mock_rules::keyword({"superb"}, 1, 2, 5)});
  const Corpus corpus = advjudge::testing::random_corpus(20, 6, 4);
  const SplitSpec spec{0.25, 11, {0, 1}};
  const auto split = split_corpus(corpus, spec);
  GreedyConfig cfg;
  cfg.vocab = make_vocabulary({"alpha", "superb", "nice", "fine"});
  cfg.max_words = 2;
  cfg.objective.mode = AttackMode::absolute;
  const auto phrase = greedy_attack_absolute(
      judge, split.dev, PairSchedule::resampled(split.dev, spec, PairMode::absolute, 3), "OVE", cfg);
  EvalSettings s;
  s.mode = AssessmentMode{ScoreMode::absolute_expectation, 5};
  const double r = average_rank(judge, split.test, phrase.words, s);
  o.require(phrase.words == std::vector<std::string>{"superb", "superb"}, "learned " + join_words(phrase.words));
  o.require(r == 1.0, "held-out average rank " + num(r));
  return o;
}

Outcome rank_arithmetic() {
  Outcome o;
  std::mt19937_64 rng(17);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(1 + rng() % 12);
    for (auto& x : v) x = static_cast<double>(rng() % 5);
    // Sort-and-tie-average oracle.
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] > v[b]; });
    std::vector<double> expected(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
      for (std::size_t k = i; k < j; ++k) expected[order[k]] = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
      i = j;
    }
    o.require(ranks_from_scores(v).ranks == expected, "rank mismatch on vector " + std::to_string(t));
  }
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + rng() % 10;
    std::vector<double> x(n), y(n);
    std::iota(x.begin(), x.end(), 0.0);
    std::iota(y.begin(), y.end(), 0.0);
    std::shuffle(x.begin(), x.end(), rng);
    std::shuffle(y.begin(), y.end(), rng);
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
    const double dn = static_cast<double>(n);
    const double textbook = 1.0 - 6.0 * d2 / (dn * (dn * dn - 1.0));
    const auto rho = spearman(x, y);
    o.require(rho && std::abs(*rho - textbook) < 1e-12, "spearman differs from closed form");
    const auto same = spearman(x, x);
    std::vector<double> neg(n);
    std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
    o.require(same && std::abs(*same - 1.0) < 1e-12, "identical order is not +1");
    const auto opposite = spearman(x, neg);
    o.require(opposite && std::abs(*opposite + 1.0) < 1e-12, "reversed order is not -1");
  }
  return o;
}

Outcome geval_expectation() {
  Outcome o;
  for (int k : {2, 5, 10}) {
    MockJudge uniform("u", MockRules{.quality = mock_rules::constant(1),
                                     .distribution = [](const MockInput&, int kk) { return std::vector<double>(kk, 1.0); }});
    const double e = uniform.score_distribution("c", "t", "OVE", k).expectation();
    o.require(std::abs(e - (k + 1) / 2.0) < 1e-12, "uniform K=" + std::to_string(k) + " gave " + num(e));
    for (int s = 1; s <= k; ++s) {
      MockJudge point("p", MockRules{.quality = mock_rules::constant(1), .distribution = [s](const MockInput&, int kk) {
                                       std::vector<double> d(kk, 0.0);
                                       d[s - 1] = 1.0;
                                       return d;
                                     }});
      const double ep = point.score_distribution("c", "t", "OVE", k).expectation();
      o.require(std::abs(ep - s) < 1e-12, "point mass at " + std::to_string(s) + " gave " + num(ep));
    }
  }
  MockJudge hand("h", MockRules{.quality = mock_rules::constant(1),
                                .distribution = [](const MockInput&, int) { return std::vector<double>{1, 2, 3, 0, 4}; }});
  const double eh = hand.score_distribution("c", "t", "OVE", 5).expectation();
  o.require(std::abs(eh - (1 * 1 + 2 * 2 + 3 * 3 + 5 * 4) / 10.0) < 1e-12, "weighted sum gave " + num(eh));

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> raw(2 + rng() % 9);
    for (auto& x : raw) x = u(rng);
    const auto d = renormalize(raw);
    const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
    const double sum = std::accumulate(d.probs.begin(), d.probs.end(), 0.0);
    o.require(std::abs(sum - 1.0) < 1e-12, "renormalised mass " + num(sum));
    for (std::size_t i = 0; i < raw.size(); ++i) {
      o.require(d.probs[i] >= 0.0 && std::abs(d.probs[i] - raw[i] / total) < 1e-12, "renormalisation not proportional");
    }
    const double e = d.expectation();
    o.require(e >= 1.0 - 1e-12 && e <= static_cast<double>(raw.size()) + 1e-12, "expectation outside [1, K]");
  }
  return o;
}

std::vector<LabeledScore> repeat(double perp, Label label, std::size_t n) {
  return std::vector<LabeledScore>(n, LabeledScore{perp, label});
}

Outcome detection_arithmetic() {
  Outcome o;
  std::vector<LabeledScore> s;
  for (const auto& part : {repeat(10, Label::adversarial, 127), repeat(10, Label::clean, 73),
                           repeat(1, Label::adversarial, 33), repeat(1, Label::clean, 127)}) {
    s.insert(s.end(), part.begin(), part.end());
  }
  const auto anchor = best_f1(pr_sweep(s));
  o.require(std::abs(anchor.precision - 0.635) < 5e-4 && std::abs(anchor.recall - 0.794) < 5e-4,
            "anchor counts gave P=" + num(anchor.precision) + " R=" + num(anchor.recall));
  o.require(std::abs(anchor.f1 - 0.706) < 5e-4, "anchor best F1 " + num(anchor.f1));

  std::vector<LabeledScore> sep = repeat(3.0, Label::clean, 50);
  const auto adv = repeat(8.0, Label::adversarial, 50);
  sep.insert(sep.end(), adv.begin(), adv.end());
  const auto perfect = best_f1(pr_sweep(sep));
  o.require(perfect.f1 == 1.0, "separable best F1 " + num(perfect.f1));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(1.0, 40.0);
    std::vector<LabeledScore> r;
    for (int i = 0; i < 5000; ++i) {
      r.push_back({u(rng), Label::clean});
      r.push_back({u(rng), Label::adversarial});
    }
    const auto b = best_f1(pr_sweep(r));
    o.require(std::abs(b.f1 - 2.0 / 3.0) <= 0.02, "label-independent seed " + std::to_string(seed) + " gave " + num(b.f1));
  }
  return o;
}

Outcome perplexity_formula() {
  Outcome o;
  MockJudge certain("c", MockRules{.quality = mock_rules::constant(1), .token_logprobs = [](std::string_view t) {
                                     return std::vector<double>(split_words(t).size(), 0.0);
                                   }});
  o.require(perplexity(certain, "a sure thing").perp == 0.0, "P(x)=1 is not 0");
  for (double v : {2.0, 1000.0, 50257.0}) {
    MockJudge uni("u", MockRules{.quality = mock_rules::constant(1), .token_logprobs = mock_rules::uniform_lm(v)});
    const double p = perplexity(uni, "one two three four five").perp;
    o.require(std::abs(p - std::log(v)) < 1e-12, "uniform V=" + num(v) + " gave " + num(p));
  }
  const std::vector<double> lps{-0.25, -3.5, -1.0, -7.125};
  MockJudge mixed("x", MockRules{.quality = mock_rules::constant(1), .token_logprobs = [&](std::string_view) { return lps; }});
  const double expected = (0.25 + 3.5 + 1.0 + 7.125) / 4.0;
  const double p = perplexity(mixed, "whatever").perp;
  o.require(std::abs(p - expected) < 1e-12, "mixed gave " + num(p));
  return o;
}

RunConfig demo_config(const fs::path& dir) {
  auto c = load_run_config(fs::path(ADVJUDGE_SOURCE_DIR) / "configs" / "mock_demo.yaml");
  c.cache = dir / "cache.jsonl";
  c.out = dir / "out";
  return c;
}

Outcome determinism() {
  Outcome o;
  const auto dir = advjudge::testing::temp_dir("acceptance_repro");
  std::vector<std::string> cold_bytes;
  fs::path phrase_path;
  {
    auto ctx = prepare_run(demo_config(dir));
    phrase_path = cmd_attack(ctx).outputs.at(0);
    const auto eval = cmd_evaluate(ctx, phrase_path);
    const auto detect = cmd_detect(ctx, phrase_path);
    for (const auto& p : eval.outputs) cold_bytes.push_back(read_file(p));
    for (const auto& p : detect.outputs) cold_bytes.push_back(read_file(p));
  }
  const std::string phrase_bytes = read_file(phrase_path);
  auto ctx = prepare_run(demo_config(dir));
  const auto attack = cmd_attack(ctx);
  const auto eval = cmd_evaluate(ctx, attack.outputs.at(0));
  const auto detect = cmd_detect(ctx, attack.outputs.at(0));
  o.require(read_file(attack.outputs.at(0)) == phrase_bytes, "attack phrase differs on rerun");
  std::vector<std::string> warm_bytes;
  for (const auto& p : eval.outputs) warm_bytes.push_back(read_file(p));
  for (const auto& p : detect.outputs) warm_bytes.push_back(read_file(p));
  o.require(warm_bytes == cold_bytes, "reports differ between cold and warm runs");
  for (const auto& name : {std::string("mock-gullible"), std::string("mock-quality")}) {
    const auto calls = dynamic_cast<const MockJudge&>(ctx.backends.get(name)).calls();
    o.require(calls == 0, name + " made " + std::to_string(calls) + " calls on a warm cache");
  }
  return o;
}

// Runs cmd_evaluate against a real endpoint when ADVJUDGE_LIVE_CONFIG names
// a config whose `backend` is a remote judge.
int live_check() {
  const char* cfg = std::getenv("ADVJUDGE_LIVE_CONFIG");
  if (cfg == nullptr || *cfg == '\0') {
    std::cout << "SKIP criterion 10: live endpoint check (set ADVJUDGE_LIVE_CONFIG to run)\n";
    return 0;
  }
  try {
    auto ctx = prepare_run(load_run_config(cfg));
    const auto phrase = fs::path(ADVJUDGE_SOURCE_DIR) / "fixtures" / "phrases" / "summ_comparative_OVE.json";
    const auto r = cmd_evaluate(ctx, phrase);
    const auto report = load_rank_report(r.outputs.at(0));
    std::cout << "INFO criterion 10: live sweep of " << report.prefixes.size() << " prefixes, avg rank "
              << report.prefixes.front().avg_rank << " -> " << report.prefixes.back().avg_rank << " (not gating)\n";
  } catch (const std::exception& e) {
    std::cout << "INFO criterion 10: live check failed (not gating): " << e.what() << "\n";
  }
  return 0;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "unattacked baselines", 1.0, unattacked_baselines},
      {2, "comparative symmetry and mean", 5.0, comparative_symmetry},
      {3, "greedy oracle equivalence", 10.0, greedy_oracle},
      {4, "saturating attack limit", 10.0, saturating_attack},
      {5, "rank arithmetic", 5.0, rank_arithmetic},
      {6, "expectation scoring", 5.0, geval_expectation},
      {7, "detection arithmetic", 5.0, detection_arithmetic},
      {8, "perplexity formula", 5.0, perplexity_formula},
      {9, "determinism and warm cache", 60.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && secs > c.limit_s) {
      o.ok = false;
      o.detail = "took " + num(secs) + " s, limit " + num(c.limit_s) + " s";
    }
    std::cout << (o.ok ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " (" << num(secs) << " s)";
    if (!o.ok) std::cout << " -- " << o.detail;
    std::cout << "\n";
    failures += o.ok ? 0 : 1;
  }
  live_check();
  return failures == 0 ? 0 : 1;
}
