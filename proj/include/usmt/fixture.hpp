#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "usmt/embedding.hpp"

namespace usmt {

// Synthetic bilingual world for tests and demos: a bigram "language" over an
// artificial vocabulary, a ciphered twin language, and pre-aligned
// embeddings. noise_sigma 0 with one_hot gives an exactly solvable setup;
// positive noise makes induction imperfect so refinement has headroom.
struct FixtureParams {
  int vocab = 500;
  int sentences = 5000;        // per monolingual side
  int test_pairs = 300;
  int dev_pairs = 200;
  int min_len = 4;
  int max_len = 11;
  int successors = 8;          // out-degree of the bigram chain
  bool one_hot = true;
  int dim = 24;                // used when one_hot is false
  double noise_sigma = 0.0;    // target-vector perturbation
  uint64_t seed = 1;
};

struct Fixture {
  std::vector<std::string> src_corpus, tgt_corpus;   // monolingual, non-parallel
  std::vector<std::string> test_src, test_tgt;       // parallel
  std::vector<std::string> dev_src, dev_tgt;         // parallel
  EmbeddingSpace src_emb, tgt_emb;
  std::vector<int> cipher;  // source word index -> target word index
  std::vector<std::string> src_words, tgt_words;
};

Fixture make_fixture(const FixtureParams& params);

// Writes src.txt tgt.txt src.emb tgt.emb test.src test.tgt dev.src dev.tgt.
void write_fixture(const Fixture& fixture, const std::string& dir);

}  // namespace usmt
