#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace advjudge {

/// Name of the overall attribute; derived at load time as the mean of the
/// other attributes when a file does not provide it.
inline constexpr std::string_view kOverallAttribute = "OVE";

struct Candidate {
  std::string id;
  std::string text;
  std::map<std::string, double> human_scores;

  std::optional<double> score(std::string_view attribute) const;
  bool operator==(const Candidate&) const = default;
};

struct ContextGroup {
  std::string context_id;
  std::string context_text;
  std::vector<Candidate> candidates;

  std::size_t size() const { return candidates.size(); }
  bool operator==(const ContextGroup&) const = default;
};

struct Corpus {
  std::string name;
  std::set<std::string> attribute_names;
  std::vector<ContextGroup> groups;

  /// Candidates per group (N); 0 for an empty corpus.
  std::size_t candidates_per_group() const;
  bool has_attribute(std::string_view attribute) const;
  bool operator==(const Corpus&) const = default;
};

/// Throws DataError naming the offending group/candidate when any corpus
/// invariant is broken.
void validate_corpus(const Corpus& corpus);

enum class CorpusFormat { summeval_json, topicalchat_json, native_jsonl };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format);

/// Loads, derives OVE when absent, and validates.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

Corpus read_native_jsonl(std::istream& in, std::string name);
void write_native_jsonl(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Adds OVE = mean of the remaining attributes to every candidate, unless
/// the corpus already carries it or has no attributes at all.
void derive_overall_attribute(Corpus& corpus);

struct SplitSpec {
  double dev_fraction = 0.20;
  std::uint64_t seed = 0;
  std::vector<std::size_t> seen_candidate_indices{0, 1};
};

struct CorpusSplit {
  Corpus dev;
  Corpus test;
};

/// Permutes group order with the seed, sends the first
/// round(dev_fraction * M) groups to dev, the rest to test. Relative order
/// inside each part follows the original corpus.
CorpusSplit split_corpus(const Corpus& corpus, const SplitSpec& spec);

enum class PairMode { comparative, absolute };

struct TrainingPair {
  std::string context_id;
  std::size_t group_index = 0;
  std::size_t a = 0;
  std::optional<std::size_t> b;

  bool operator==(const TrainingPair&) const = default;
};

/// One entry per dev group. Comparative entries draw a != b from the seen
/// indices; absolute entries draw a single index.
std::vector<TrainingPair> training_pairs(const Corpus& dev, const SplitSpec& spec,
                                         PairMode mode, std::uint64_t seed);

}  // namespace advjudge
