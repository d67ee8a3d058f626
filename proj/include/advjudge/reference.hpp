#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advjudge/attack.hpp"
#include "advjudge/evaluation.hpp"

// Plain single-threaded versions of the parallel kernels. They recompute
// everything from scratch and exist so tests and benchmarks can check the
// OpenMP paths against them.
namespace advjudge::reference {

AttackPhrase greedy_attack(const JudgeBackend& backend, const Corpus& dev, const PairSchedule& schedule,
                           std::string_view attribute, const GreedyConfig& config);

/// Rebuilds every group's full score vector for each attacked candidate.
std::vector<RankEntry> evaluate_attacks(const JudgeBackend& backend, const Corpus& test,
                                        std::span<const std::string> phrase, const EvalSettings& settings);

double average_rank(const JudgeBackend& backend, const Corpus& test, std::span<const std::string> phrase,
                    const EvalSettings& settings);

}  // namespace advjudge::reference
