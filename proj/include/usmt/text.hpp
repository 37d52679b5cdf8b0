#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace usmt {

// Whitespace split after trimming; "" and all-blank lines give an empty
// vector.
std::vector<std::string> split_ws(std::string_view line);

std::vector<std::string> split_on(std::string_view text, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string_view trim(std::string_view s);

// Tokens are stored internally with '_', '|' and '&' escaped so that the
// phrase join marker (underscore) and the ' ||| ' table delimiter can never
// collide with corpus text. The mapping is injective and reversible.
std::string escape_token(std::string_view raw);
std::string unescape_token(std::string_view escaped);

// Shortest round-trip decimal form (std::to_chars). All floating-point
// values in text artifacts go through this so artifacts are byte-stable.
std::string format_double(double v);
double parse_double(std::string_view s);  // throws ParseError
int64_t parse_int(std::string_view s);    // throws ParseError

std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);

// write-then-rename so concurrent readers never observe partial files.
void atomic_write_file(const std::string& path, std::string_view content);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

bool file_exists(const std::string& path);
void make_dirs(const std::string& path);

}  // namespace usmt
