#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace advjudge {

std::vector<std::string> split_words(std::string_view text);

std::string join_words(std::span<const std::string> words);

/// x + delta: the phrase is appended after a single ASCII space. An empty
/// phrase leaves the text untouched.
std::string append_phrase(std::string_view text, std::span<const std::string> phrase);

std::string_view trim(std::string_view s);

}  // namespace advjudge
