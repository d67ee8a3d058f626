#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace advjudge {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 over length-prefixed fields, so ("ab","c") and ("a","bc") differ.
std::string sha256_fields(std::initializer_list<std::string_view> fields);

/// Hex digest of a file's contents; empty string if the file is absent.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace advjudge
