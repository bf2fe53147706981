#pragma once

// UTF-8 helpers. Offsets throughout the library are code-point offsets.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace histolens::text {

/// Decodes UTF-8 into code points. Invalid sequences decode to U+FFFD.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view cps);
std::string encode(char32_t cp);

/// Unicode Script=Han (CJK ideographs, extensions, compatibility ideographs,
/// iteration marks and Hangzhou numerals).
bool is_han(char32_t cp);

bool is_space(char32_t cp);

/// Number of Han-script characters; punctuation and whitespace are not counted.
std::size_t han_count(std::string_view utf8);

std::size_t codepoint_count(std::string_view utf8);

std::string trim(std::string_view s);

/// Trims ASCII and ideographic whitespace on both ends.
std::u32string trim(std::u32string_view s);

/// Collapses every run of whitespace to nothing. Used to compare texts
/// modulo whitespace normalization.
std::string strip_whitespace(std::string_view utf8);

/// Non-overlapping occurrences of needle in haystack (code-point aware).
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

std::string read_file(const std::filesystem::path& path);

/// Writes atomically (temp file + rename) and creates parent directories.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace histolens::text
