#pragma once

// Shared parsing for the "start end" per-line interval files.

#include "ibdiar/features.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ibd::detail {

std::string read_text_file(const std::filesystem::path &path);

// Parses whitespace-separated pairs, one per line. Blank lines and lines
// starting with '#' are skipped. Rejects non-numeric fields, start >= end and
// entries whose start precedes the previous start. `what` names the file kind
// in error messages.
std::vector<Interval> parse_interval_lines(const std::string &text, const char *what);

}  // namespace ibd::detail
