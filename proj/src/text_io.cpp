#include "text_io.hpp"

#include "ibdiar/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ibd::detail {

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

namespace {

bool parse_double(std::string_view tok, double &out) {
  const char *first = tok.data();
  const char *last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

std::vector<Interval> parse_interval_lines(const std::string &text, const char *what) {
  std::vector<Interval> out;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string a, b, extra;
    if (!(fields >> a)) continue;
    if (a[0] == '#') continue;
    auto where = [&] { return std::string(what) + " line " + std::to_string(lineno); };
    if (!(fields >> b) || (fields >> extra))
      throw FormatError(where() + ": expected two fields");
    Interval iv;
    if (!parse_double(a, iv.start) || !parse_double(b, iv.end))
      throw FormatError(where() + ": non-numeric field");
    if (iv.start >= iv.end) throw FormatError(where() + ": start >= end");
    if (iv.start < 0.0) throw FormatError(where() + ": negative time");
    if (!out.empty() && iv.start < out.back().start)
      throw FormatError(where() + ": entries not sorted by start");
    out.push_back(iv);
  }
  return out;
}

}  // namespace ibd::detail
