#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "usmt/corpus.hpp"

namespace usmt {

// Pre-aligned cross-lingual word vectors for one language. Immutable after
// load; safe to share across workers.
class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;
  EmbeddingSpace(int dim, std::string language) : dim_(dim), language_(std::move(language)) {}

  int dim() const { return dim_; }
  const std::string& language() const { return language_; }
  size_t size() const { return vectors_.size(); }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  // Throws OovError naming the token.
  const std::vector<double>& vec(const std::string& token) const;
  void add(const std::string& token, std::vector<double> v);

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  int dim_ = 0;
  std::string language_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<std::string> tokens_;
  std::vector<std::vector<double>> vectors_;
};

// Text interchange format: first line "V D", then V lines "token v1 .. vD".
// max_vocab > 0 keeps only the first max_vocab entries (files are ordered by
// descending frequency by convention). Errors carry the 1-based line number.
EmbeddingSpace load_embeddings(std::istream& in, std::string language, size_t max_vocab = 0);
EmbeddingSpace load_embeddings_file(const std::string& path, std::string language,
                                    size_t max_vocab = 0);
void save_embeddings(const EmbeddingSpace& space, std::ostream& out);
void save_embeddings_file(const EmbeddingSpace& space, const std::string& path);

// Element-wise sum of the component-word vectors; a single-token phrase is
// its own vector. Throws OovError for a missing component.
std::vector<double> phrase_embedding(std::string_view phrase, const EmbeddingSpace& space);

// Throws Error when either vector has zero norm (cosine undefined).
double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Softmax of beta * cosine over the candidate set, computed with
// max-subtraction. Probabilities are positive and sum to 1.
std::vector<double> softmax_scaled(const std::vector<double>& cosines, double beta);

// Eq.-style translation probabilities of each candidate target phrase given
// the source phrase, with the normalizer restricted to the candidate set.
std::vector<double> translation_prob(const std::string& src_phrase,
                                     const std::vector<std::string>& candidates,
                                     const EmbeddingSpace& src_space,
                                     const EmbeddingSpace& tgt_space, double beta);

struct RankedCandidates {
  struct Item {
    std::string phrase;
    double cosine = 0.0;
    double prob = 0.0;
  };
  std::string source;
  std::vector<Item> items;  // descending cosine, ties by phrase
};

// Precomputed phrase vectors for one inventory, shared across top-k queries.
struct PhraseMatrix {
  std::vector<std::string> phrases;
  std::vector<std::vector<double>> vectors;
  std::vector<double> norms;
};

PhraseMatrix build_phrase_matrix(const PhraseInventory& inv, const EmbeddingSpace& space);

RankedCandidates topk_from_matrix(const std::string& src_phrase,
                                  const std::vector<double>& src_vec, const PhraseMatrix& targets,
                                  size_t k, double beta);

// Exactly min(k, inventory size) candidates by descending cosine, ties broken
// by target-phrase lexicographic order; probabilities renormalized over the
// retained set.
RankedCandidates topk_candidates(const std::string& src_phrase, const PhraseInventory& tgt_inv,
                                 const EmbeddingSpace& src_space, const EmbeddingSpace& tgt_space,
                                 size_t k, double beta);

}  // namespace usmt
