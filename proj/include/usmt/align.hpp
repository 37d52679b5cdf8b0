#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "usmt/phrase_table.hpp"

namespace usmt {

struct SentencePair {
  std::vector<std::string> src, tgt;
};
using ParallelCorpus = std::vector<SentencePair>;

ParallelCorpus load_parallel(const std::string& src_path, const std::string& tgt_path);
ParallelCorpus make_parallel(const std::vector<std::string>& src_lines,
                             const std::vector<std::string>& tgt_lines);

inline constexpr const char* kNullWord = "<null>";

// Word translation probabilities t(target | source). Rows sum to 1.
struct TTable {
  std::unordered_map<std::string, std::unordered_map<std::string, double>> rows;

  double prob(const std::string& src, const std::string& tgt) const;
};

struct Ibm1Options {
  int iterations = 5;
  bool use_null = true;
};

struct Ibm1Result {
  TTable ttable;
  // Data log-likelihood (natural log) after each EM iteration, computed
  // with the parameters used during that iteration's E-step.
  std::vector<double> log_likelihood;
};

Ibm1Result train_ibm1(const ParallelCorpus& pairs, const Ibm1Options& opts);

// Links are (source index, target index) pairs with set semantics.
struct WordAlignment {
  std::set<std::pair<int, int>> links;
};

// Each target word links to its argmax source word under the ttable (ties:
// lowest source index); the null word wins only when strictly better.
WordAlignment viterbi_align(const TTable& ttable, const SentencePair& pair, bool use_null = true);

// grow-diag-final-and symmetrization heuristic.
WordAlignment symmetrize(const WordAlignment& fwd, const WordAlignment& bwd, int src_len,
                         int tgt_len);

std::string render_alignment(const WordAlignment& a);
WordAlignment parse_alignment(const std::string& line);

struct SpanPair {
  int s1, s2, t1, t2;  // inclusive
};

// All phrase spans consistent with the alignment (no link leaving the box,
// at least one link inside), both sides at most max_len words. Unaligned
// boundary words extend the boxes naturally.
std::vector<SpanPair> extract_spans(const SentencePair& pair, const WordAlignment& alignment,
                                    int max_len);
std::vector<std::pair<std::string, std::string>> extract_phrases(const SentencePair& pair,
                                                                 const WordAlignment& alignment,
                                                                 int max_len);

// Extraction statistics. Estimation uses instance counts, whose marginals
// are the row/column sums of the joint, so relative frequencies normalize
// exactly. Significance testing uses sentence-level counts: the number of
// sentence pairs in which a pair was extracted, and in which each phrase
// occurs, so C(s,t) <= min(C(s), C(t)) <= N holds.
struct PairCounts {
  std::map<std::pair<std::string, std::string>, int64_t> joint;
  std::map<std::string, int64_t> src_marginal, tgt_marginal;

  std::map<std::pair<std::string, std::string>, int64_t> joint_sent;
  std::map<std::string, int64_t> src_occ, tgt_occ;
  int64_t n_pairs = 0;
};

PairCounts count_extracted(const ParallelCorpus& corpus,
                           const std::vector<WordAlignment>& alignments, int max_len);

void save_pair_counts(const PairCounts& counts, const std::string& path);
PairCounts load_pair_counts(const std::string& path);

// Relative frequencies for the phrase probabilities, lexical scores from the
// word ttables in both directions. ttable_bwd holds t(source | target).
PhraseTable estimate_table(const PairCounts& counts, const TTable& ttable_fwd,
                           const TTable& ttable_bwd);

enum Orientation { kMonotone = 0, kSwap = 1, kDiscontinuous = 2 };

struct ReorderingModel {
  struct Dist {
    double p[3] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  };
  // l2r scores a phrase's orientation w.r.t. the preceding phrase, r2l
  // w.r.t. the following one.
  std::map<std::pair<std::string, std::string>, std::pair<Dist, Dist>> table;
  double smoothing_alpha = 0.5;

  const std::pair<Dist, Dist>* find(const std::string& src, const std::string& tgt) const;
};

ReorderingModel estimate_reordering(const ParallelCorpus& corpus,
                                    const std::vector<WordAlignment>& alignments, int max_len,
                                    double smoothing_alpha = 0.5);

// "src ||| tgt ||| m s d m s d" (l2r then r2l).
void save_reordering(const ReorderingModel& model, const std::string& path);
ReorderingModel load_reordering(const std::string& path);

// One-tailed Fisher exact test: p = sum_{k >= c_st} hypergeom(k; n, c_s, c_t),
// computed in log space. Throws InputError on inconsistent counts.
double fisher_pvalue(int64_t c_st, int64_t c_s, int64_t c_t, int64_t n);

// p-value of a 1-1-1 pair in a corpus of n sentence pairs (= 1/n); pairs at
// or above a threshold just below this value are pruned as singletons.
double singleton_pvalue(int64_t n);
double singleton_threshold(int64_t n);

// Drops pairs whose p-value exceeds threshold_pvalue; sources with all
// candidates pruned disappear. Refuses induced-provenance tables.
PhraseTable prune(const PhraseTable& table, const PairCounts& counts, double threshold_pvalue);

}  // namespace usmt
