#include "doctest.h"

#include <cmath>
#include <sstream>

#include "support/oracles.hpp"
#include "usmt/corpus.hpp"
#include "usmt/lm.hpp"
#include "usmt/util.hpp"

using namespace usmt;

namespace {

// Sum of conditional probabilities over the whole vocabulary for a context.
double conditional_sum(const NGramModel& model, const std::vector<std::string>& context) {
  double total = 0.0;
  for (const auto& w : model.vocabulary()) {
    total += std::pow(10.0, model.log10_prob(context, w));
  }
  return total;
}

Corpus chain_corpus(uint64_t seed, int sentences, int vocab, int min_len, int max_len) {
  Rng rng(seed);
  std::vector<std::string> lines;
  for (int i = 0; i < sentences; ++i) {
    std::string line;
    int len = min_len + static_cast<int>(rng.below(static_cast<uint64_t>(max_len - min_len + 1)));
    int w = static_cast<int>(rng.below(static_cast<uint64_t>(vocab)));
    for (int k = 0; k < len; ++k) {
      if (k) line += ' ';
      line += "w" + std::to_string(w);
      if (rng.uniform() < 0.25) {
        // Occasional jump keeps the n-gram count-of-counts well populated.
        w = static_cast<int>(rng.below(static_cast<uint64_t>(vocab)));
      } else {
        w = (w * 7 + 1 + static_cast<int>(rng.below(3))) % vocab;
      }
    }
    lines.push_back(line);
  }
  return corpus_from_lines(lines, "x");
}

}  // namespace

TEST_CASE("unigram raw counts include sentence boundaries") {
  Corpus c = corpus_from_lines({"a a a"}, "x");
  auto counts = raw_ngram_counts(c, 1);
  // 3 tokens plus <s> and </s>: raw p(a) = 3/5 before smoothing.
  int64_t total = 0;
  for (const auto& [w, n] : counts[0]) total += n;
  CHECK(counts[0].at("a") == 3);
  CHECK(total == 5);
  CHECK(static_cast<double>(counts[0].at("a")) / static_cast<double>(total) ==
        doctest::Approx(0.6).epsilon(1e-12));

  LmOptions opts;
  opts.order = 1;
  opts.estimator = LmEstimator::add_k;
  NGramModel model = train_lm(c, opts);
  // Vocabulary: a, <s>, </s>, <unk>.
  CHECK(model.vocab_size() == 4);
  CHECK(std::pow(10.0, model.log10_prob({}, "a")) ==
        doctest::Approx((3.0 + 0.1) / (5.0 + 0.4)).epsilon(1e-12));
}

TEST_CASE("symmetric corpus gives symmetric unigram probabilities") {
  Corpus c = corpus_from_lines({"a b", "a b", "a b"}, "x");
  LmOptions opts;
  opts.order = 1;
  opts.estimator = LmEstimator::add_k;
  NGramModel model = train_lm(c, opts);
  CHECK(model.log10_prob({}, "a") == doctest::Approx(model.log10_prob({}, "b")).epsilon(1e-12));
}

TEST_CASE("unseen words score through <unk> with positive probability") {
  Corpus c = corpus_from_lines({"a b c", "b c d"}, "x");
  for (auto est : {LmEstimator::add_k, LmEstimator::kn_with_fallback}) {
    LmOptions opts;
    opts.order = 2;
    opts.estimator = est;
    NGramModel model = train_lm(c, opts);
    double lp = score_sentence(model, {"zzz"});
    CHECK(std::isfinite(lp));
    CHECK(lp < 0.0);
    CHECK(std::pow(10.0, model.log10_prob({}, "nonexistent-token")) > 0.0);
  }
}

TEST_CASE("score_sentence equals the chain-rule sum on a hand-built bigram model") {
  Corpus c = corpus_from_lines({"x y", "x z", "x y"}, "x");
  LmOptions opts;
  opts.order = 2;
  opts.estimator = LmEstimator::add_k;
  NGramModel model = train_lm(c, opts);
  std::vector<std::string> sent = {"x", "y"};
  double direct = model.log10_prob({"<s>"}, "x") + model.log10_prob({"x"}, "y") +
                  model.log10_prob({"y"}, "</s>");
  CHECK(score_sentence(model, sent) == doctest::Approx(direct).epsilon(1e-12));

  // Empty sentence: p(</s> | <s>) alone.
  CHECK(score_sentence(model, {}) ==
        doctest::Approx(model.log10_prob({"<s>"}, "</s>")).epsilon(1e-12));
}

TEST_CASE("seen sentences outscore unseen-word sentences of equal length") {
  Corpus c;
  {
    std::vector<std::string> lines;
    for (int i = 0; i < 20; ++i) lines.push_back("the cat sat");
    lines.push_back("a dog ran");
    c = corpus_from_lines(lines, "x");
  }
  LmOptions opts;
  opts.order = 2;
  opts.estimator = LmEstimator::add_k;
  NGramModel model = train_lm(c, opts);
  CHECK(score_sentence(model, {"the", "cat", "sat"}) >=
        score_sentence(model, {"qq", "ww", "ee"}));
}

TEST_CASE("add-k conditional distributions sum to one for every observed context") {
  Corpus c = chain_corpus(5, 40, 6, 2, 7);
  for (int order : {1, 2, 3}) {
    LmOptions opts;
    opts.order = order;
    opts.estimator = LmEstimator::add_k;
    NGramModel model = train_lm(c, opts);
    CHECK(conditional_sum(model, {}) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(conditional_sum(model, {"<s>"}) == doctest::Approx(1.0).epsilon(1e-6));
    for (const auto& w : model.vocabulary()) {
      CHECK(conditional_sum(model, {w}) == doctest::Approx(1.0).epsilon(1e-6));
    }
    if (order >= 3) {
      CHECK(conditional_sum(model, {"<s>", "w1"}) == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(conditional_sum(model, {"w3", "w1"}) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

namespace {

// Zipf-distributed word draws give the rare-event tail that Kneser-Ney
// discount estimation needs at every order.
Corpus zipf_corpus(uint64_t seed, int sentences, int vocab, int min_len, int max_len) {
  Rng rng(seed);
  std::vector<double> cum(static_cast<size_t>(vocab));
  double acc = 0.0;
  for (int i = 0; i < vocab; ++i) {
    acc += 1.0 / static_cast<double>(i + 1);
    cum[static_cast<size_t>(i)] = acc;
  }
  std::vector<std::string> lines;
  for (int s = 0; s < sentences; ++s) {
    std::string line;
    int len = min_len + static_cast<int>(rng.below(static_cast<uint64_t>(max_len - min_len + 1)));
    for (int k = 0; k < len; ++k) {
      double u = rng.uniform() * acc;
      size_t w = static_cast<size_t>(
          std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
      if (k) line += ' ';
      line += "w" + std::to_string(w);
    }
    lines.push_back(line);
  }
  return corpus_from_lines(lines, "x");
}

}  // namespace

TEST_CASE("kneser-ney engages on a large-enough corpus and normalizes") {
  Corpus c = zipf_corpus(11, 4000, 4000, 3, 9);
  LmOptions opts;
  opts.order = 3;
  opts.estimator = LmEstimator::kn_with_fallback;
  NGramModel model = train_lm(c, opts);
  REQUIRE(model.estimator() == LmEstimator::kneser_ney);
  CHECK(conditional_sum(model, {}) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(conditional_sum(model, {"<s>"}) == doctest::Approx(1.0).epsilon(1e-6));
  Rng rng(3);
  auto vocab = model.vocabulary();
  for (int trial = 0; trial < 12; ++trial) {
    std::vector<std::string> ctx{vocab[rng.below(vocab.size())]};
    CHECK(conditional_sum(model, ctx) == doctest::Approx(1.0).epsilon(1e-6));
    ctx.push_back(vocab[rng.below(vocab.size())]);
    CHECK(conditional_sum(model, ctx) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("tiny corpora fall back to add-k") {
  Corpus c = corpus_from_lines({"a b", "b a"}, "x");
  LmOptions opts;
  opts.order = 2;
  opts.estimator = LmEstimator::kn_with_fallback;
  NGramModel model = train_lm(c, opts);
  CHECK(model.estimator() == LmEstimator::add_k);
  // Strict KN refuses outright.
  opts.estimator = LmEstimator::kneser_ney;
  CHECK_THROWS_AS(train_lm(c, opts), Error);
}

TEST_CASE("score_sentence decomposes over concatenation up to boundary terms") {
  Corpus c = chain_corpus(17, 60, 5, 2, 6);
  LmOptions opts;
  opts.order = 2;
  opts.estimator = LmEstimator::add_k;
  NGramModel model = train_lm(c, opts);
  std::vector<std::string> s1 = {"w1", "w2", "w0"};
  std::vector<std::string> s2 = {"w3", "w4"};
  std::vector<std::string> joined = s1;
  joined.insert(joined.end(), s2.begin(), s2.end());
  double lhs = score_sentence(model, joined);
  double rhs = score_sentence(model, s1) + score_sentence(model, s2) -
               model.log10_prob({s1.back()}, "</s>") - model.log10_prob({"<s>"}, s2.front()) +
               model.log10_prob({s1.back()}, s2.front());
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("cleanliness is the length-normalized sentence score") {
  Corpus c = chain_corpus(23, 50, 5, 2, 6);
  LmOptions opts;
  opts.order = 2;
  opts.estimator = LmEstimator::add_k;
  NGramModel model = train_lm(c, opts);

  std::vector<std::string> sent = {"w1", "w2", "w3", "w0", "w4"};
  CHECK(cleanliness(model, sent) ==
        doctest::Approx(score_sentence(model, sent) / 6.0).epsilon(1e-12));
  CHECK(cleanliness(model, {}) ==
        doctest::Approx(score_sentence(model, {})).epsilon(1e-12));

  // Direct arithmetic: lm = -12, len = 5 -> -2.
  CHECK(-12.0 / (5.0 + 1.0) == doctest::Approx(-2.0));
  // Longer of two equal-score sentences is cleaner (less negative).
  double score = -10.0;
  CHECK(score / (9.0 + 1.0) > score / (4.0 + 1.0));
}

TEST_CASE("cleanliness ranking is shift-invariant only at equal lengths") {
  // With equal lengths, a constant per-token shift of log probabilities
  // preserves ordering; with unequal lengths it can flip.
  double shift = -2.0;
  double a = -8.0, b = -9.5;  // two sentences of length 4
  double len = 5.0;
  CHECK(((a / len) > (b / len)) == ((a + 4 * shift) / len > (b + 4 * shift) / len));

  double c = -8.0, d = -4.2;  // lengths 7 and 3
  bool before = (c / 8.0) > (d / 4.0);
  bool after = ((c + 7 * shift) / 8.0) > ((d + 3 * shift) / 4.0);
  CHECK(before);
  CHECK(before != after);
}

TEST_CASE("arpa round trip is byte-identical and score-preserving") {
  Corpus c = chain_corpus(31, 300, 8, 2, 7);
  for (auto est : {LmEstimator::add_k, LmEstimator::kn_with_fallback}) {
    LmOptions opts;
    opts.order = 3;
    opts.estimator = est;
    NGramModel model = train_lm(c, opts);
    std::ostringstream once;
    save_arpa(model, once);
    std::istringstream in(once.str());
    NGramModel loaded = load_arpa(in);
    std::ostringstream twice;
    save_arpa(loaded, twice);
    CHECK(once.str() == twice.str());
    std::vector<std::string> sent = {"w1", "w5", "w2", "zzz"};
    CHECK(score_sentence(model, sent) ==
          doctest::Approx(score_sentence(loaded, sent)).epsilon(1e-12));
  }
}

TEST_CASE("model scoring agrees with an independent raw-count recursion (add-k)") {
  Rng rng(47);
  for (int trial = 0; trial < 15; ++trial) {
    Corpus c = chain_corpus(100 + static_cast<uint64_t>(trial),
                            10 + static_cast<int>(rng.below(30)), 5, 1, 6);
    int order = 1 + static_cast<int>(rng.below(3));
    LmOptions opts;
    opts.order = order;
    opts.estimator = LmEstimator::add_k;
    NGramModel model = train_lm(c, opts);
    oracles::AddKOracle oracle(c.sentences, order, 0.1);
    for (int s = 0; s < 5; ++s) {
      std::vector<std::string> sent;
      int len = static_cast<int>(rng.below(6));
      for (int i = 0; i < len; ++i) sent.push_back("w" + std::to_string(rng.below(7)));
      double got = score_sentence(model, sent);
      double want = oracle.score_sentence(sent);
      CHECK(got == doctest::Approx(want).epsilon(1e-9));
      CHECK(cleanliness(model, sent) ==
            doctest::Approx(want / (static_cast<double>(sent.size()) + 1.0)).epsilon(1e-9));
    }
  }
}

TEST_CASE("vocab cap maps rare words to <unk>") {
  std::vector<std::string> lines;
  for (int i = 0; i < 30; ++i) lines.push_back("common words here");
  lines.push_back("rareword appears once");
  Corpus c = corpus_from_lines(lines, "x");
  LmOptions opts;
  opts.order = 2;
  opts.estimator = LmEstimator::add_k;
  opts.vocab_cap = 3;
  NGramModel model = train_lm(c, opts);
  CHECK_FALSE(model.in_vocab("rareword"));
  CHECK(model.in_vocab("common"));
}

TEST_CASE("train_lm rejects empty corpora and bad orders") {
  Corpus empty;
  LmOptions opts;
  CHECK_THROWS_AS(train_lm(empty, opts), InputError);
  Corpus c = corpus_from_lines({"a"}, "x");
  opts.order = 0;
  CHECK_THROWS_AS(train_lm(c, opts), InputError);
}
