#pragma once

#include <functional>
#include <string>
#include <vector>

#include "usmt/corpus.hpp"
#include "usmt/embedding.hpp"
#include "usmt/phrase_table.hpp"

namespace usmt {

// lex(t|s) = (1/L) * prod_l max_k p(t^k | s^l). Exact; no floor or threshold
// is applied to the word-level probabilities.
double lexical_prob(const std::vector<std::string>& src_words,
                    const std::vector<std::string>& tgt_words,
                    const std::function<double(const std::string&, const std::string&)>& word_prob);

struct InduceOptions {
  size_t k = 300;         // candidates retained per source phrase
  double beta = 30.0;     // softmax peakiness
  size_t word_topk = 300; // word-level candidate cap for the lexical scores
  unsigned threads = 1;
};

// Builds the iteration-0 phrase table from two phrase inventories and their
// pre-aligned embedding spaces. Every phrase component must be present in
// its embedding space (filter inventories first).
PhraseTable induce_table(const PhraseInventory& src_inv, const PhraseInventory& tgt_inv,
                         const EmbeddingSpace& src_space, const EmbeddingSpace& tgt_space,
                         const InduceOptions& opts);

// Drops inventory entries with any component outside the space's vocabulary.
PhraseInventory filter_inventory_by_vocab(const PhraseInventory& inv, const EmbeddingSpace& space);

// Table keys use space-joined components; inventories use underscore units.
std::string phrase_to_table_key(std::string_view phrase);

}  // namespace usmt
