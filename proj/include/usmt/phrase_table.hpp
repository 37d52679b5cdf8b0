#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace usmt {

enum class Provenance { induced, estimated_from_parallel };

const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

// Source phrases are space-joined escaped tokens ("new york"), matching what
// the decoder sees in input sentences. Candidate order is meaningful and
// preserved through save/load.
struct PhraseTable {
  struct Candidate {
    std::string target;
    double p_fwd = 0.0;
    double lex_fwd = 0.0;
    double p_bwd = 0.0;
    double lex_bwd = 0.0;
  };

  std::unordered_map<std::string, std::vector<Candidate>> entries;
  Provenance provenance = Provenance::induced;

  size_t pair_count() const;
  const std::vector<Candidate>* find(const std::string& source) const;
};

// One line per pair: "src ||| tgt ||| p_fwd lex_fwd p_bwd lex_bwd".
std::string render_phrase_table(const PhraseTable& table);
void save_phrase_table(const PhraseTable& table, const std::string& path);
PhraseTable parse_phrase_table(const std::vector<std::string>& lines, Provenance provenance);
PhraseTable load_phrase_table(const std::string& path, Provenance provenance);

}  // namespace usmt
