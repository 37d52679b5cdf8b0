#include "doctest.h"

#include <cmath>
#include <map>

#include "support/oracles.hpp"
#include "usmt/fixture.hpp"
#include "usmt/induction.hpp"
#include "usmt/text.hpp"
#include "usmt/util.hpp"

using namespace usmt;

namespace {

double matrix_word_prob(const std::vector<std::vector<double>>& m, const std::string& s,
                        const std::string& t) {
  size_t i = static_cast<size_t>(std::stoul(s.substr(1)));
  size_t j = static_cast<size_t>(std::stoul(t.substr(1)));
  return m[i][j];
}

}  // namespace

TEST_CASE("lexical_prob evaluates the max-product equation") {
  SUBCASE("degenerate 1x1") {
    auto wp = [](const std::string&, const std::string&) { return 0.37; };
    CHECK(lexical_prob({"s"}, {"t"}, wp) == doctest::Approx(0.37).epsilon(1e-12));
  }
  SUBCASE("2x2 hand case") {
    std::vector<std::vector<double>> m = {{0.5, 0.2}, {0.1, 0.4}};
    auto wp = [&](const std::string& s, const std::string& t) { return matrix_word_prob(m, s, t); };
    CHECK(lexical_prob({"s0", "s1"}, {"t0", "t1"}, wp) == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("a source word with all-zero probabilities kills the product") {
    std::vector<std::vector<double>> m = {{0.9, 0.8}, {0.0, 0.0}};
    auto wp = [&](const std::string& s, const std::string& t) { return matrix_word_prob(m, s, t); };
    CHECK(lexical_prob({"s0", "s1"}, {"t0", "t1"}, wp) == 0.0);
  }
  SUBCASE("empty phrase is an error") {
    auto wp = [](const std::string&, const std::string&) { return 1.0; };
    CHECK_THROWS_AS(lexical_prob({}, {"t"}, wp), InputError);
    CHECK_THROWS_AS(lexical_prob({"s"}, {}, wp), InputError);
  }
}

TEST_CASE("lexical_prob matches the brute-force oracle on random matrices") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    size_t L = 1 + rng.below(5), K = 1 + rng.below(5);
    std::vector<std::vector<double>> m(L, std::vector<double>(K));
    std::vector<std::string> src, tgt;
    for (size_t i = 0; i < L; ++i) src.push_back("s" + std::to_string(i));
    for (size_t j = 0; j < K; ++j) tgt.push_back("t" + std::to_string(j));
    for (auto& row : m)
      for (auto& v : row) v = rng.uniform();
    auto wp = [&](const std::string& s, const std::string& t) { return matrix_word_prob(m, s, t); };
    double got = lexical_prob(src, tgt, wp);
    long double want = oracles::eq3(m);
    CHECK(got == doctest::Approx(static_cast<double>(want)).epsilon(1e-9));
  }
}

TEST_CASE("lexical_prob is monotone in every word probability") {
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    size_t L = 1 + rng.below(3), K = 1 + rng.below(3);
    std::vector<std::vector<double>> m(L, std::vector<double>(K));
    for (auto& row : m)
      for (auto& v : row) v = rng.uniform() * 0.9;
    std::vector<std::string> src, tgt;
    for (size_t i = 0; i < L; ++i) src.push_back("s" + std::to_string(i));
    for (size_t j = 0; j < K; ++j) tgt.push_back("t" + std::to_string(j));
    auto wp = [&](const std::string& s, const std::string& t) { return matrix_word_prob(m, s, t); };
    double before = lexical_prob(src, tgt, wp);
    size_t i = rng.below(L), j = rng.below(K);
    m[i][j] = std::min(1.0, m[i][j] + rng.uniform() * 0.1);
    double after = lexical_prob(src, tgt, wp);
    CHECK(after >= before - 1e-15);
  }
}

namespace {

Fixture tiny_cipher() {
  FixtureParams p;
  p.vocab = 30;
  p.sentences = 300;
  p.test_pairs = 10;
  p.dev_pairs = 5;
  p.one_hot = true;
  p.seed = 7;
  return make_fixture(p);
}

PhraseInventory unigram_inventory(const std::vector<std::string>& words) {
  PhraseInventory inv;
  for (const auto& w : words) inv.entries.push_back({w, 1});
  return inv;
}

}  // namespace

TEST_CASE("induce_table recovers a one-hot cipher dictionary exactly") {
  Fixture fx = tiny_cipher();
  InduceOptions opts;
  opts.k = 5;
  opts.beta = 30.0;
  opts.word_topk = 5;
  PhraseTable table = induce_table(unigram_inventory(fx.src_words),
                                   unigram_inventory(fx.tgt_words), fx.src_emb, fx.tgt_emb, opts);
  CHECK(table.provenance == Provenance::induced);
  CHECK(table.pair_count() == fx.src_words.size() * opts.k);
  for (size_t i = 0; i < fx.src_words.size(); ++i) {
    const auto* cands = table.find(fx.src_words[i]);
    REQUIRE(cands != nullptr);
    CHECK(cands->size() == opts.k);
    CHECK((*cands)[0].target == fx.tgt_words[static_cast<size_t>(fx.cipher[i])]);
    CHECK((*cands)[0].p_fwd >= 1.0 / static_cast<double>(opts.k));
    double total = 0.0;
    for (const auto& c : *cands) {
      total += c.p_fwd;
      CHECK(c.p_fwd > 0.0);
      CHECK(c.p_fwd <= 1.0);
      CHECK(c.lex_fwd > 0.0);
      CHECK(c.lex_fwd <= 1.0);
      CHECK(c.p_bwd > 0.0);
      CHECK(c.p_bwd <= 1.0);
      CHECK(c.lex_bwd > 0.0);
      CHECK(c.lex_bwd <= 1.0);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("single source and target phrase scores 1.0 everywhere") {
  EmbeddingSpace src(2, "s"), tgt(2, "t");
  src.add("hund", {1, 0});
  tgt.add("dog", {1, 0});
  PhraseInventory src_inv = unigram_inventory({"hund"});
  PhraseInventory tgt_inv = unigram_inventory({"dog"});
  InduceOptions opts;
  opts.k = 300;
  opts.word_topk = 300;
  PhraseTable table = induce_table(src_inv, tgt_inv, src, tgt, opts);
  const auto* cands = table.find("hund");
  REQUIRE(cands != nullptr);
  REQUIRE(cands->size() == 1);
  CHECK((*cands)[0].p_fwd == 1.0);
  CHECK((*cands)[0].p_bwd == 1.0);
  CHECK((*cands)[0].lex_fwd == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((*cands)[0].lex_bwd == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("multi-word phrases become space-joined table keys") {
  EmbeddingSpace src(2, "s"), tgt(2, "t");
  src.add("new", {1, 0});
  src.add("york", {0, 1});
  tgt.add("nueva", {1, 0});
  tgt.add("york", {0, 1});
  PhraseInventory src_inv = unigram_inventory({"new_york"});
  PhraseInventory tgt_inv = unigram_inventory({"nueva_york"});
  InduceOptions opts;
  opts.k = 10;
  PhraseTable table = induce_table(src_inv, tgt_inv, src, tgt, opts);
  const auto* cands = table.find("new york");
  REQUIRE(cands != nullptr);
  CHECK((*cands)[0].target == "nueva york");
}

TEST_CASE("induced table round-trips bit-identically through the text format") {
  Fixture fx = tiny_cipher();
  InduceOptions opts;
  opts.k = 4;
  PhraseTable table = induce_table(unigram_inventory(fx.src_words),
                                   unigram_inventory(fx.tgt_words), fx.src_emb, fx.tgt_emb, opts);
  std::string once = render_phrase_table(table);
  PhraseTable reloaded = parse_phrase_table(split_on(once.substr(0, once.size() - 1), '\n'),
                                            Provenance::induced);
  std::string twice = render_phrase_table(reloaded);
  CHECK(once == twice);
}

TEST_CASE("filter_inventory_by_vocab drops phrases with missing components") {
  EmbeddingSpace space(2, "s");
  space.add("a", {1, 0});
  space.add("b", {0, 1});
  PhraseInventory inv = unigram_inventory({"a", "b", "c", "a_b", "a_c"});
  auto kept = filter_inventory_by_vocab(inv, space);
  REQUIRE(kept.entries.size() == 3);
  CHECK(kept.entries[0].phrase == "a");
  CHECK(kept.entries[1].phrase == "b");
  CHECK(kept.entries[2].phrase == "a_b");
}
