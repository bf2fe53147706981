#pragma once

// Minimal RFC 4180 reader/writer. Fields are UTF-8 strings.

#include <string>
#include <string_view>
#include <vector>

namespace histolens::csv {

using Row = std::vector<std::string>;

/// Parses the whole document. Quoted fields may contain commas, quotes ("")
/// and newlines. A trailing newline does not produce an empty row.
std::vector<Row> parse(std::string_view doc, std::string_view source_name = "<csv>");

std::string escape(std::string_view field);

/// One line terminated by '\n'.
std::string format_row(const Row& row);

}  // namespace histolens::csv
