#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "usmt/text.hpp"

namespace usmt {

// Monolingual corpus. Sentences hold escaped tokens (see escape_token);
// blank lines are dropped at load time so every sentence is non-empty.
struct Corpus {
  std::vector<std::vector<std::string>> sentences;
  std::string language;

  size_t token_count() const;
  // Tokens counted by original (pre-merge) components, i.e. merged units
  // like "new_york" count as two.
  size_t component_count() const;
};

std::vector<std::string> tokenize(std::string_view line);

Corpus corpus_from_lines(const std::vector<std::string>& lines, std::string language);
Corpus load_corpus(const std::string& path, std::string language);

struct FrequencyTable {
  std::unordered_map<std::string, int64_t> unigrams;
  // key: left + '\t' + right (tokens never contain whitespace)
  std::unordered_map<std::string, int64_t> pairs;
  int64_t total_tokens = 0;

  int64_t count(const std::string& token) const;
  int64_t pair_count(const std::string& left, const std::string& right) const;
  static std::string pair_key(std::string_view left, std::string_view right);
};

// Unigram and within-sentence adjacent-pair counts. Throws InputError on an
// empty corpus.
FrequencyTable count(const Corpus& corpus);

// score(w_i w_j) = (freq(w_i w_j) - delta) / (freq(w_i) * freq(w_j)).
// May be negative when pair_freq < delta. Throws InputError when either
// marginal is non-positive.
double phrase_score(int64_t pair_freq, int64_t left_freq, int64_t right_freq, double delta);

struct PhraseInventory {
  struct Entry {
    std::string phrase;  // escaped components joined by '_'
    int64_t freq = 0;
  };
  std::vector<Entry> entries;  // descending freq, ties by phrase
  int max_components = 6;

  static std::vector<std::string> components(std::string_view phrase);
  static int component_count(std::string_view phrase);
};

struct CollectOptions {
  double delta = 10.0;
  double threshold = 0.0;  // required by callers; no meaningful default exists
  int passes = 6;
  int max_components = 6;
  size_t max_phrases = 0;  // 0 = unlimited
};

struct CollectResult {
  PhraseInventory inventory;
  Corpus merged;
};

// Iterative collocation merging: per pass, adjacent units scoring above the
// threshold are merged greedily left to right without overlap, and the next
// pass runs on the merged corpus. The inventory lists all surviving unit
// types of up to max_components original tokens.
CollectResult collect_phrases(const Corpus& corpus, const CollectOptions& opts);

void save_inventory(const PhraseInventory& inv, const std::string& path);
PhraseInventory load_inventory(const std::string& path);

std::string render_corpus(const Corpus& corpus);

}  // namespace usmt
