#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "usmt/decoder.hpp"
#include "usmt/lm.hpp"

namespace usmt {

enum class SynthDirection { forward, back };

const char* synth_direction_name(SynthDirection d);
SynthDirection synth_direction_from_name(const std::string& name);

// One synthetic sentence pair. The human-authored side is the source for
// forward provenance and the target for back provenance; cleanliness is the
// normalized LM score of the synthetic side.
struct SyntheticPair {
  std::vector<std::string> src, tgt;
  int iteration = 0;
  std::string system_id;
  SynthDirection direction = SynthDirection::forward;
  double cleanliness = 0.0;
  uint64_t origin_index = 0;  // position in the sampled input batch
};

struct SyntheticCorpus {
  std::vector<SyntheticPair> pairs;
};

// Decodes `sentences` with the system and pairs each input with its
// translation, oriented by provenance direction. synth_lm is the language
// model of the synthetic side's language.
SyntheticCorpus generate_synthetic(const TranslationSystem& system,
                                   const std::vector<std::vector<std::string>>& sentences,
                                   SynthDirection direction, int iteration,
                                   const std::string& system_id, const NGramModel& synth_lm,
                                   size_t beam, unsigned threads, uint64_t origin_base = 0);

// ceil(alpha * n * iteration) with a guard against float noise around exact
// integers.
uint64_t filter_keep_count(double alpha, uint64_t n, uint64_t iteration);

// Keeps the min(ceil(alpha*N*i), size) cleanest pairs; ties broken by
// (iteration, origin_index) for determinism. invert flips the cleanliness
// ordering for LMs whose scores grow with noise.
SyntheticCorpus filter_synthetic(const SyntheticCorpus& accumulated, double alpha,
                                 uint64_t iteration, uint64_t n, bool invert = false);

// Three files: <base>.src, <base>.tgt and <base>.meta (provenance TSV).
void save_synthetic(const SyntheticCorpus& corpus, const std::string& base_path);
SyntheticCorpus load_synthetic(const std::string& base_path);

}  // namespace usmt
