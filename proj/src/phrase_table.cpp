#include "usmt/phrase_table.hpp"

#include <algorithm>

#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

const char* provenance_name(Provenance p) {
  return p == Provenance::induced ? "induced" : "estimated-from-parallel";
}

Provenance provenance_from_name(const std::string& name) {
  if (name == "induced") return Provenance::induced;
  if (name == "estimated-from-parallel" || name == "estimated") {
    return Provenance::estimated_from_parallel;
  }
  throw ParseError("unknown provenance: '" + name + "'");
}

size_t PhraseTable::pair_count() const {
  size_t n = 0;
  for (const auto& [src, cands] : entries) n += cands.size();
  return n;
}

const std::vector<PhraseTable::Candidate>* PhraseTable::find(const std::string& source) const {
  auto it = entries.find(source);
  return it == entries.end() ? nullptr : &it->second;
}

std::string render_phrase_table(const PhraseTable& table) {
  std::vector<const std::string*> keys;
  keys.reserve(table.entries.size());
  for (const auto& [src, cands] : table.entries) keys.push_back(&src);
  std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return *a < *b; });

  std::string out;
  for (const auto* src : keys) {
    for (const auto& c : table.entries.at(*src)) {
      out += *src;
      out += " ||| ";
      out += c.target;
      out += " ||| ";
      out += format_double(c.p_fwd);
      out += ' ';
      out += format_double(c.lex_fwd);
      out += ' ';
      out += format_double(c.p_bwd);
      out += ' ';
      out += format_double(c.lex_bwd);
      out += '\n';
    }
  }
  return out;
}

void save_phrase_table(const PhraseTable& table, const std::string& path) {
  atomic_write_file(path, render_phrase_table(table));
}

static std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  for (;;) {
    size_t pos = line.find(" ||| ", start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 5;
  }
  return fields;
}

PhraseTable parse_phrase_table(const std::vector<std::string>& lines, Provenance provenance) {
  PhraseTable table;
  table.provenance = provenance;
  size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 3) {
      throw ParseError("phrase table line " + std::to_string(lineno) +
                       ": expected 'src ||| tgt ||| scores'");
    }
    auto scores = split_ws(fields[2]);
    if (scores.size() != 4) {
      throw ParseError("phrase table line " + std::to_string(lineno) + ": expected 4 scores");
    }
    PhraseTable::Candidate c;
    c.target = fields[1];
    c.p_fwd = parse_double(scores[0]);
    c.lex_fwd = parse_double(scores[1]);
    c.p_bwd = parse_double(scores[2]);
    c.lex_bwd = parse_double(scores[3]);
    auto& cands = table.entries[fields[0]];
    for (const auto& existing : cands) {
      if (existing.target == c.target) {
        throw ParseError("phrase table line " + std::to_string(lineno) +
                         ": duplicate pair '" + fields[0] + "' ||| '" + c.target + "'");
      }
    }
    cands.push_back(std::move(c));
  }
  return table;
}

PhraseTable load_phrase_table(const std::string& path, Provenance provenance) {
  return parse_phrase_table(read_lines(path), provenance);
}

}  // namespace usmt
