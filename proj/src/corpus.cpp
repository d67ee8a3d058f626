#include "advjudge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "advjudge/error.hpp"
#include "advjudge/rng.hpp"
#include "advjudge/text.hpp"

namespace advjudge {

using nlohmann::json;

std::optional<double> Candidate::score(std::string_view attribute) const {
  const auto it = human_scores.find(std::string(attribute));
  if (it == human_scores.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::candidates_per_group() const {
  return groups.empty() ? 0 : groups.front().candidates.size();
}

bool Corpus::has_attribute(std::string_view attribute) const {
  return attribute_names.contains(std::string(attribute));
}

void validate_corpus(const Corpus& corpus) {
  const std::size_t n = corpus.candidates_per_group();
  std::unordered_set<std::string> group_ids;
  for (const auto& group : corpus.groups) {
    const std::string where = "group '" + group.context_id + "'";
    if (!group_ids.insert(group.context_id).second) {
      throw DataError(where + ": duplicate context id");
    }
    if (trim(group.context_text).empty()) {
      throw DataError(where + ": empty context text");
    }
    if (group.candidates.size() < 2) {
      throw DataError(where + ": needs at least 2 candidates, has " +
                      std::to_string(group.candidates.size()));
    }
    if (group.candidates.size() != n) {
      throw DataError(where + ": has " + std::to_string(group.candidates.size()) +
                      " candidates, expected " + std::to_string(n));
    }
    std::unordered_set<std::string> ids;
    for (const auto& cand : group.candidates) {
      const std::string cwhere = where + " candidate '" + cand.id + "'";
      if (!ids.insert(cand.id).second) throw DataError(cwhere + ": duplicate candidate id");
      if (split_words(cand.text).empty()) throw DataError(cwhere + ": text has no words");
      for (const auto& [attr, value] : cand.human_scores) {
        if (!std::isfinite(value)) throw DataError(cwhere + ": non-finite score for " + attr);
        if (!corpus.attribute_names.contains(attr)) {
          throw DataError(cwhere + ": undeclared attribute " + attr);
        }
      }
      for (const auto& attr : corpus.attribute_names) {
        if (!cand.human_scores.contains(attr)) {
          throw DataError(cwhere + ": missing score for attribute " + attr);
        }
      }
    }
  }
}

void derive_overall_attribute(Corpus& corpus) {
  const std::string ove(kOverallAttribute);
  if (corpus.attribute_names.empty() || corpus.attribute_names.contains(ove)) return;
  for (auto& group : corpus.groups) {
    for (auto& cand : group.candidates) {
      if (cand.human_scores.empty()) continue;
      double sum = 0.0;
      for (const auto& [attr, value] : cand.human_scores) sum += value;
      cand.human_scores[ove] = sum / static_cast<double>(cand.human_scores.size());
    }
  }
  corpus.attribute_names.insert(ove);
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "summeval-json") return CorpusFormat::summeval_json;
  if (name == "topicalchat-json") return CorpusFormat::topicalchat_json;
  if (name == "native-jsonl") return CorpusFormat::native_jsonl;
  throw ConfigError("unknown corpus format '" + std::string(name) +
                    "' (expected summeval-json, topicalchat-json or native-jsonl)");
}

std::string_view to_string(CorpusFormat format) {
  switch (format) {
    case CorpusFormat::summeval_json: return "summeval-json";
    case CorpusFormat::topicalchat_json: return "topicalchat-json";
    case CorpusFormat::native_jsonl: return "native-jsonl";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Native JSONL

Corpus read_native_jsonl(std::istream& in, std::string name) {
  Corpus corpus;
  corpus.name = std::move(name);
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
      ContextGroup group;
      group.context_id = obj.at("context_id").get<std::string>();
      group.context_text = obj.at("context").get<std::string>();
      std::set<std::string> attrs;
      for (const auto& c : obj.at("candidates")) {
        Candidate cand;
        cand.id = c.at("id").get<std::string>();
        cand.text = c.at("text").get<std::string>();
        if (c.contains("scores")) {
          for (const auto& [attr, value] : c.at("scores").items()) {
            cand.human_scores[attr] = value.get<double>();
            attrs.insert(attr);
          }
        }
        group.candidates.push_back(std::move(cand));
      }
      if (first) {
        corpus.attribute_names = attrs;
        first = false;
      } else {
        corpus.attribute_names.insert(attrs.begin(), attrs.end());
      }
      corpus.groups.push_back(std::move(group));
    } catch (const json::exception& e) {
      throw DataError(corpus.name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

void write_native_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& group : corpus.groups) {
    json obj;
    obj["context_id"] = group.context_id;
    obj["context"] = group.context_text;
    obj["candidates"] = json::array();
    for (const auto& cand : group.candidates) {
      obj["candidates"].push_back({{"id", cand.id}, {"text", cand.text}, {"scores", cand.human_scores}});
    }
    out << obj.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus to " + path.string());
  write_native_jsonl(corpus, out);
}

// ---------------------------------------------------------------------------
// Published SummEval / TopicalChat layouts

namespace {

// Scores arrive as a number or as a list of annotator ratings.
std::optional<double> mean_score(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && !v.empty()) {
    double sum = 0.0;
    for (const auto& x : v) {
      if (!x.is_number()) return std::nullopt;
      sum += x.get<double>();
    }
    return sum / static_cast<double>(v.size());
  }
  return std::nullopt;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

using AttributeMap = std::vector<std::pair<std::string, std::string>>;  // source key -> short name

const AttributeMap kSummEvalAttributes = {
    {"coherence", "COH"}, {"consistency", "CON"}, {"fluency", "FLU"}, {"relevance", "REL"}};

// USR-style keys first, then the flat record keys used by G-Eval/UniEval.
const AttributeMap kTopicalChatAttributes = {
    {"understandable", "COH"}, {"natural", "NAT"},      {"maintains context", "CNT"},
    {"engaging", "ENG"},       {"coherence", "COH"},    {"naturalness", "NAT"},
    {"continuity", "CNT"},     {"engagingness", "ENG"},
};

std::map<std::string, double> map_scores(const json& scores, const AttributeMap& mapping) {
  std::map<std::string, double> out;
  if (!scores.is_object()) return out;
  for (const auto& [key, value] : scores.items()) {
    const std::string k = lower(key);
    for (const auto& [src, dst] : mapping) {
      if (k == src && !out.contains(dst)) {
        if (auto s = mean_score(value)) out[dst] = *s;
        break;
      }
    }
  }
  return out;
}

std::string first_string(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (obj.contains(k) && obj.at(k).is_string()) return obj.at(k).get<std::string>();
  }
  return {};
}

std::string id_string(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (!obj.contains(k)) continue;
    const auto& v = obj.at(k);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
  }
  return {};
}

// Reads either a JSON array or one JSON object per line.
std::vector<json> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  const auto body = trim(content);
  std::vector<json> records;
  try {
    if (!body.empty() && body.front() == '[') {
      for (auto& r : json::parse(body)) records.push_back(std::move(r));
    } else {
      std::istringstream lines(content);
      std::string line;
      while (std::getline(lines, line)) {
        if (!trim(line).empty()) records.push_back(json::parse(line));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return records;
}

// Groups flat per-candidate records by context key, keeping first-seen order.
struct Grouper {
  std::vector<ContextGroup> groups;
  std::unordered_map<std::string, std::size_t> index;

  ContextGroup& get(const std::string& key, const std::string& context_text) {
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) groups.push_back(ContextGroup{key, context_text, {}});
    return groups[it->second];
  }
};

Corpus finish(std::string name, std::vector<ContextGroup> groups) {
  Corpus corpus;
  corpus.name = std::move(name);
  corpus.groups = std::move(groups);
  for (const auto& g : corpus.groups) {
    for (const auto& c : g.candidates) {
      for (const auto& [attr, value] : c.human_scores) corpus.attribute_names.insert(attr);
    }
  }
  return corpus;
}

Corpus load_summeval(const std::filesystem::path& path) {
  Grouper grouper;
  std::size_t record_no = 0;
  for (const auto& rec : read_records(path)) {
    ++record_no;
    const std::string doc = id_string(rec, {"doc_id", "id"});
    if (doc.empty()) throw DataError(path.string() + ": record " + std::to_string(record_no) + " has no doc_id/id");
    auto& group = grouper.get(doc, first_string(rec, {"source", "text"}));
    Candidate cand;
    cand.id = id_string(rec, {"system_id", "model_id"});
    if (cand.id.empty()) cand.id = std::to_string(group.candidates.size());
    cand.text = first_string(rec, {"system_output", "decoded"});
    if (rec.contains("scores")) {
      cand.human_scores = map_scores(rec.at("scores"), kSummEvalAttributes);
    } else if (rec.contains("expert_annotations")) {
      // Average the expert annotators attribute by attribute.
      std::map<std::string, std::pair<double, int>> acc;
      for (const auto& ann : rec.at("expert_annotations")) {
        for (const auto& [attr, value] : map_scores(ann, kSummEvalAttributes)) {
          acc[attr].first += value;
          acc[attr].second += 1;
        }
      }
      for (const auto& [attr, sum_count] : acc) {
        cand.human_scores[attr] = sum_count.first / sum_count.second;
      }
    }
    group.candidates.push_back(std::move(cand));
  }
  return finish(path.stem().string(), std::move(grouper.groups));
}

Corpus load_topicalchat(const std::filesystem::path& path) {
  Grouper grouper;
  std::size_t record_no = 0;
  for (const auto& rec : read_records(path)) {
    ++record_no;
    if (rec.contains("responses")) {
      // USR layout: one object per dialogue context with nested responses.
      const std::string context = first_string(rec, {"context"});
      auto& group = grouper.get("ctx" + std::to_string(grouper.groups.size()), context);
      for (const auto& r : rec.at("responses")) {
        Candidate cand;
        cand.id = id_string(r, {"model", "system_id"});
        if (cand.id.empty()) cand.id = std::to_string(group.candidates.size());
        cand.text = first_string(r, {"response", "system_output"});
        cand.human_scores = map_scores(r, kTopicalChatAttributes);
        group.candidates.push_back(std::move(cand));
      }
    } else {
      const std::string context = first_string(rec, {"source", "context"});
      if (context.empty()) {
        throw DataError(path.string() + ": record " + std::to_string(record_no) + " has no source/context");
      }
      auto& group = grouper.get(context, context);
      Candidate cand;
      cand.id = id_string(rec, {"system_id", "model"});
      if (cand.id.empty()) cand.id = std::to_string(group.candidates.size());
      cand.text = first_string(rec, {"system_output", "response"});
      cand.human_scores = map_scores(rec.value("scores", json::object()), kTopicalChatAttributes);
      group.candidates.push_back(std::move(cand));
    }
  }
  auto groups = std::move(grouper.groups);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].context_id.size() > 64) groups[i].context_id = "ctx" + std::to_string(i);
  }
  return finish(path.stem().string(), std::move(groups));
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  Corpus corpus;
  switch (format) {
    case CorpusFormat::native_jsonl: {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw DataError("cannot open corpus file " + path.string());
      corpus = read_native_jsonl(in, path.stem().string());
      break;
    }
    case CorpusFormat::summeval_json: corpus = load_summeval(path); break;
    case CorpusFormat::topicalchat_json: corpus = load_topicalchat(path); break;
  }
  derive_overall_attribute(corpus);
  validate_corpus(corpus);
  return corpus;
}

// ---------------------------------------------------------------------------
// Splitting

CorpusSplit split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  const std::size_t m = corpus.groups.size();
  if (m < 2) throw DataError("split needs at least 2 groups, corpus has " + std::to_string(m));
  if (!(spec.dev_fraction > 0.0 && spec.dev_fraction < 1.0)) {
    throw ConfigError("dev_fraction must lie in (0, 1)");
  }
  const auto n_dev = static_cast<std::size_t>(std::llround(spec.dev_fraction * static_cast<double>(m)));
  if (n_dev == 0 || n_dev == m) {
    throw DataError("split of " + std::to_string(m) + " groups at fraction " +
                    std::to_string(spec.dev_fraction) + " leaves dev or test empty");
  }
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  SeededRng rng(spec.seed);
  rng.shuffle(order);

  std::vector<bool> in_dev(m, false);
  for (std::size_t i = 0; i < n_dev; ++i) in_dev[order[i]] = true;

  CorpusSplit split;
  split.dev.name = corpus.name + ":dev";
  split.test.name = corpus.name + ":test";
  split.dev.attribute_names = split.test.attribute_names = corpus.attribute_names;
  for (std::size_t i = 0; i < m; ++i) {
    (in_dev[i] ? split.dev : split.test).groups.push_back(corpus.groups[i]);
  }
  return split;
}

std::vector<TrainingPair> training_pairs(const Corpus& dev, const SplitSpec& spec,
                                         PairMode mode, std::uint64_t seed) {
  const auto& seen = spec.seen_candidate_indices;
  if (seen.empty()) throw ConfigError("seen_candidate_indices is empty");
  if (mode == PairMode::comparative && seen.size() < 2) {
    throw ConfigError("comparative training needs at least 2 seen candidate indices");
  }
  if (std::set<std::size_t>(seen.begin(), seen.end()).size() != seen.size()) {
    throw ConfigError("seen_candidate_indices contains duplicates");
  }
  const std::size_t n = dev.candidates_per_group();
  for (auto idx : seen) {
    if (idx >= n) {
      throw ConfigError("seen candidate index " + std::to_string(idx) + " out of range for N=" +
                        std::to_string(n));
    }
  }
  SeededRng rng(seed);
  std::vector<TrainingPair> pairs;
  pairs.reserve(dev.groups.size());
  for (std::size_t g = 0; g < dev.groups.size(); ++g) {
    TrainingPair pair;
    pair.context_id = dev.groups[g].context_id;
    pair.group_index = g;
    const std::size_t ia = rng.uniform_index(seen.size());
    pair.a = seen[ia];
    if (mode == PairMode::comparative) {
      std::size_t ib = rng.uniform_index(seen.size() - 1);
      if (ib >= ia) ++ib;
      pair.b = seen[ib];
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace advjudge
