// advjudge: assess LLM judges and learn / evaluate / detect universal
// adversarial phrases against them.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "advjudge/commands.hpp"
#include "advjudge/error.hpp"
#include "advjudge/run_config.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string cache;
  std::string out;
  std::string backend;
  std::vector<std::string> attributes;
  std::string mode;
  std::optional<std::size_t> max_words;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run configuration (YAML)")->required();
  cmd->add_option("--seed", o.seed, "Global seed (also seeds the split)");
  cmd->add_option("--cache", o.cache, "Response cache file (JSONL)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--backend", o.backend, "Configured backend name to judge with");
  cmd->add_option("--attribute", o.attributes, "Attribute(s) to assess, e.g. OVE, COH, CON");
  cmd->add_option("--mode", o.mode, "comparative | absolute | comparative-asymA | comparative-asymB");
  cmd->add_option("--max-words", o.max_words, "Attack phrase length L");
}

advjudge::RunConfig resolve_config(const Overrides& o) {
  auto c = advjudge::load_run_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.split.seed = *o.seed;
  }
  if (!o.cache.empty()) c.cache = o.cache;
  if (!o.out.empty()) c.out = o.out;
  if (!o.backend.empty()) c.backend = o.backend;
  if (!o.attributes.empty()) c.attributes = o.attributes;
  if (!o.mode.empty()) c.mode = o.mode;
  if (o.max_words) c.attack.max_words = *o.max_words;
  return c;
}

void print_result(const advjudge::CommandResult& r) {
  for (const auto& p : r.outputs) std::cout << p.string() << '\n';
  std::cout << r.manifest.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacks on LLM judges"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(advjudge::kToolVersion));

  Overrides o;
  std::string phrase;
  std::string target;

  auto* assess = app.add_subcommand("assess", "Spearman correlation of a judge with human scores");
  add_common(assess, o);

  auto* attack = app.add_subcommand("attack", "Learn a universal attack phrase on the dev split");
  add_common(attack, o);

  auto* evaluate = app.add_subcommand("evaluate", "Average attacked rank over phrase prefixes on the test split");
  add_common(evaluate, o);
  evaluate->add_option("--phrase", phrase, "Attack phrase artifact (JSON)")->required()->check(CLI::ExistingFile);

  auto* transfer = app.add_subcommand("transfer", "Evaluate a phrase against another backend");
  add_common(transfer, o);
  transfer->add_option("--phrase", phrase, "Attack phrase artifact (JSON)")->required()->check(CLI::ExistingFile);
  transfer->add_option("--target-backend", target, "Configured backend name to attack")->required();

  auto* detect = app.add_subcommand("detect", "Perplexity detection of attacked texts");
  add_common(detect, o);
  detect->add_option("--phrase", phrase, "Attack phrase artifact (JSON)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto ctx = advjudge::prepare_run(resolve_config(o));
    if (assess->parsed()) print_result(advjudge::cmd_assess(ctx));
    if (attack->parsed()) print_result(advjudge::cmd_attack(ctx));
    if (evaluate->parsed()) print_result(advjudge::cmd_evaluate(ctx, phrase));
    if (transfer->parsed()) print_result(advjudge::cmd_transfer(ctx, phrase, target));
    if (detect->parsed()) print_result(advjudge::cmd_detect(ctx, phrase));
  } catch (const advjudge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const advjudge::BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return 3;
  } catch (const advjudge::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
