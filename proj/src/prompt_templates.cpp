#include "advjudge/prompt_templates.hpp"

#include <fstream>
#include <sstream>

#include "advjudge/error.hpp"

namespace advjudge {

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

PromptTemplates PromptTemplates::summarization() {
  PromptTemplates t;
  t.comparative =
      "Passage:\n{context}\n\n"
      "Summary A: {response_a}\n\n"
      "Summary B: {response_b}\n\n"
      "Which Summary is {attribute_adjective}, Summary A or Summary B? Answer with A or B.";
  t.absolute =
      "You will be given one summary written for a news article.\n\n"
      "Your task is to rate the summary on one metric: {attribute_adjective}.\n"
      "Use a score from 1 to {max_score}, where {max_score} is best.\n\n"
      "Source Text:\n{context}\n\n"
      "Summary:\n{response}\n\n"
      "Evaluation Form (scores ONLY):\n- {attribute_adjective} (1-{max_score}):";
  t.comparative_adjectives = {{"COH", "more coherent"},
                              {"CON", "more consistent"},
                              {"FLU", "more fluent"},
                              {"REL", "more relevant"},
                              {"OVE", "better"}};
  t.absolute_adjectives = {{"COH", "Coherence"},
                           {"CON", "Consistency"},
                           {"FLU", "Fluency"},
                           {"REL", "Relevance"},
                           {"OVE", "Overall Quality"}};
  return t;
}

PromptTemplates PromptTemplates::dialogue() {
  PromptTemplates t;
  t.comparative =
      "Dialogue:\n{context}\n\n"
      "Response A: {response_a}\n\n"
      "Response B: {response_b}\n\n"
      "Which Response is {attribute_adjective}, Response A or Response B? Answer with A or B.";
  t.absolute =
      "You will be given a conversation between two individuals and one potential response "
      "for the next turn.\n\n"
      "Your task is to rate the response on one metric: {attribute_adjective}.\n"
      "Use a score from 1 to {max_score}, where {max_score} is best.\n\n"
      "Conversation History:\n{context}\n\n"
      "Response:\n{response}\n\n"
      "Evaluation Form (scores ONLY):\n- {attribute_adjective} (1-{max_score}):";
  t.comparative_adjectives = {{"COH", "more coherent"},
                              {"CNT", "a better continuation"},
                              {"ENG", "more engaging"},
                              {"NAT", "more natural"},
                              {"OVE", "better"}};
  t.absolute_adjectives = {{"COH", "Coherence"},
                           {"CNT", "Continuity"},
                           {"ENG", "Engagingness"},
                           {"NAT", "Naturalness"},
                           {"OVE", "Overall Quality"}};
  return t;
}

PromptTemplates PromptTemplates::for_task(std::string_view task) {
  if (task == "summ") return summarization();
  if (task == "topic" || task == "dialogue") return dialogue();
  throw ConfigError("unknown task '" + std::string(task) + "' (expected summ or topic)");
}

bool PromptTemplates::has_attribute(std::string_view attribute) const {
  const std::string key(attribute);
  return comparative_adjectives.contains(key) && absolute_adjectives.contains(key);
}

namespace {
const std::string& adjective(const std::map<std::string, std::string>& table, std::string_view attribute) {
  const auto it = table.find(std::string(attribute));
  if (it == table.end()) {
    throw ConfigError("no prompt template registered for attribute '" + std::string(attribute) + "'");
  }
  return it->second;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read template file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}
}  // namespace

std::string PromptTemplates::render_comparative(std::string_view context, std::string_view response_a,
                                                std::string_view response_b,
                                                std::string_view attribute) const {
  return render_template(comparative, {{"context", std::string(context)},
                                       {"response_a", std::string(response_a)},
                                       {"response_b", std::string(response_b)},
                                       {"attribute_adjective", adjective(comparative_adjectives, attribute)}});
}

std::string PromptTemplates::render_absolute(std::string_view context, std::string_view response,
                                             std::string_view attribute, int max_score) const {
  return render_template(absolute, {{"context", std::string(context)},
                                    {"response", std::string(response)},
                                    {"attribute_adjective", adjective(absolute_adjectives, attribute)},
                                    {"max_score", std::to_string(max_score)}});
}

void PromptTemplates::load_files(const std::filesystem::path& comparative_path,
                                 const std::filesystem::path& absolute_path) {
  if (!comparative_path.empty()) comparative = read_text(comparative_path);
  if (!absolute_path.empty()) absolute = read_text(absolute_path);
}

}  // namespace advjudge
