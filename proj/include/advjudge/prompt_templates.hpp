#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace advjudge {

/// Substitutes {name} placeholders in one pass. Text inserted for a
/// placeholder is never rescanned, so braces inside responses are safe.
/// Unknown placeholders are left as written.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

/// Prompt text for the two assessment styles. Placeholders:
/// {context}, {response}, {response_a}, {response_b}, {attribute_adjective},
/// and {max_score} for absolute prompts.
struct PromptTemplates {
  std::string comparative;
  std::string absolute;
  // Attribute short name (COH, CON, ...) -> wording for each prompt style.
  std::map<std::string, std::string> comparative_adjectives;
  std::map<std::string, std::string> absolute_adjectives;

  static PromptTemplates summarization();
  static PromptTemplates dialogue();
  static PromptTemplates for_task(std::string_view task);

  bool has_attribute(std::string_view attribute) const;

  std::string render_comparative(std::string_view context, std::string_view response_a,
                                 std::string_view response_b, std::string_view attribute) const;
  std::string render_absolute(std::string_view context, std::string_view response,
                              std::string_view attribute, int max_score) const;

  /// Replaces the template bodies with file contents; empty paths keep the defaults.
  void load_files(const std::filesystem::path& comparative_path,
                  const std::filesystem::path& absolute_path);
};

}  // namespace advjudge
