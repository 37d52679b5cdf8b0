#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "usmt/align.hpp"
#include "usmt/lm.hpp"
#include "usmt/phrase_table.hpp"

namespace usmt {

struct FeatureWeights {
  double p_fwd = 0.2;
  double lex_fwd = 0.2;
  double p_bwd = 0.2;
  double lex_bwd = 0.2;
  double lm = 0.5;
  double word_penalty = -1.0;
  double phrase_penalty = 0.2;
  double distortion = -0.3;
  double oov = -10.0;
  // l2r mono/swap/disc, then r2l mono/swap/disc; used when the system has a
  // reordering model.
  std::array<double, 6> reordering{0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
};

std::string render_weights(const FeatureWeights& w);
void save_weights(const FeatureWeights& w, const std::string& path);
FeatureWeights parse_weights(const std::vector<std::string>& lines);
FeatureWeights load_weights(const std::string& path);

// Accumulated per-feature values. Probability features are log10 sums;
// word penalty counts target words, phrase penalty counts phrases,
// distortion sums inter-phrase jump distances, oov counts copied-through
// words.
struct FeatureVector {
  double p_fwd = 0.0, lex_fwd = 0.0, p_bwd = 0.0, lex_bwd = 0.0;
  double lm = 0.0;
  double word_penalty = 0.0;
  double phrase_penalty = 0.0;
  double distortion = 0.0;
  double oov = 0.0;
  std::array<double, 6> reordering{0, 0, 0, 0, 0, 0};

  double dot(const FeatureWeights& w, bool reordering_active) const;
};

struct TranslationSystem {
  std::shared_ptr<const PhraseTable> table;
  std::shared_ptr<const ReorderingModel> reordering;  // may be null
  std::shared_ptr<const NGramModel> lm;
  FeatureWeights weights;
  int distortion_limit = 6;
  int max_phrase_len = 6;
  // Per-span translation-option cap; candidates beyond this many (in stored
  // table order) are not considered.
  size_t options_per_span = 20;

  bool reordering_active() const { return reordering != nullptr; }
};

struct TraceStep {
  int s1 = 0, s2 = 0;             // source span, inclusive
  std::vector<std::string> target;
  bool oov = false;
};

struct DecodedSentence {
  std::vector<std::string> tokens;
  double score = 0.0;
  FeatureVector features;
  std::vector<TraceStep> trace;
};

// Coverage-stack beam search with hypothesis recombination and future-cost
// estimation. The distortion limit applies to every jump including the
// initial one; if it makes every complete ordering unreachable the sentence
// is re-decoded monotonically, so decoding is total.
DecodedSentence decode(const std::vector<std::string>& source, const TranslationSystem& system,
                       size_t beam);

std::vector<DecodedSentence> decode_batch(const std::vector<std::vector<std::string>>& sources,
                                          const TranslationSystem& system, size_t beam,
                                          unsigned threads);

// Recomputes the feature vector of a segmentation trace from scratch.
// Throws InputError when the trace does not tile the source or names a
// translation the table cannot produce.
FeatureVector score_features(const std::vector<std::string>& source,
                             const std::vector<TraceStep>& trace,
                             const TranslationSystem& system);

std::string render_trace(const std::vector<TraceStep>& trace);

// Longest source key in the table, for option enumeration.
int max_source_phrase_len(const PhraseTable& table);

}  // namespace usmt
