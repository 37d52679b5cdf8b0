#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "usmt/corpus.hpp"

namespace usmt {

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";
inline constexpr const char* kUnk = "<unk>";

enum class LmEstimator {
  kneser_ney,        // interpolated modified Kneser-Ney; throws if discounts invalid
  add_k,             // interpolated add-k (exactly representable as backoff)
  kn_with_fallback,  // KN, falling back to add_k when the corpus is too small
};

struct LmOptions {
  int order = 4;
  LmEstimator estimator = LmEstimator::kn_with_fallback;
  double add_k = 0.1;
  size_t vocab_cap = 0;  // 0 = no cap; otherwise rare words map to <unk>
};

// Backoff n-gram model over log10 probabilities. Immutable after training.
class NGramModel {
 public:
  struct Entry {
    double lp = 0.0;  // log10 probability
    double bo = 0.0;  // log10 backoff weight (orders below the highest)
  };

  NGramModel() = default;
  NGramModel(int order, std::vector<std::unordered_map<std::string, Entry>> tables,
             LmEstimator estimator)
      : order_(order), tables_(std::move(tables)), estimator_(estimator) {}

  int order() const { return order_; }
  LmEstimator estimator() const { return estimator_; }
  bool in_vocab(const std::string& token) const;
  size_t vocab_size() const { return tables_.empty() ? 0 : tables_[0].size(); }
  std::vector<std::string> vocabulary() const;  // sorted
  size_t ngram_count(int order) const;

  // Backoff-walk conditional log10 probability. The context may be any
  // length; only its last order-1 tokens matter. OOV words must be mapped
  // to <unk> by the caller (score_sentence does this).
  double log10_prob(const std::vector<std::string>& context, const std::string& word) const;

  const std::unordered_map<std::string, Entry>& table(int order) const {
    return tables_[static_cast<size_t>(order - 1)];
  }

  static std::string key(const std::vector<std::string>& words);

 private:
  int order_ = 0;
  std::vector<std::unordered_map<std::string, Entry>> tables_;
  LmEstimator estimator_ = LmEstimator::add_k;
};

// Raw n-gram counts with single <s> prefix and </s> suffix per sentence;
// unigram events include <s>. Exposed for tests and estimation.
std::vector<std::unordered_map<std::string, int64_t>> raw_ngram_counts(const Corpus& corpus,
                                                                       int order);

NGramModel train_lm(const Corpus& corpus, const LmOptions& opts);

// Sum of conditional log10 probabilities including the end-of-sentence
// transition; OOV tokens are scored via <unk>.
double score_sentence(const NGramModel& model, const std::vector<std::string>& tokens);

// score_sentence / (len + 1); higher is cleaner.
double cleanliness(const NGramModel& model, const std::vector<std::string>& tokens);

void save_arpa(const NGramModel& model, std::ostream& out);
void save_arpa_file(const NGramModel& model, const std::string& path);
NGramModel load_arpa(std::istream& in);
NGramModel load_arpa_file(const std::string& path);

}  // namespace usmt
