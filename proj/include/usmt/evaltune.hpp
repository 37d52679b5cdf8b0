#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "usmt/decoder.hpp"

namespace usmt {

struct BleuReport {
  double bleu = 0.0;  // [0, 100]
  std::array<double, 4> precisions{0, 0, 0, 0};
  double brevity_penalty = 1.0;
  int64_t hyp_len = 0;
  int64_t ref_len = 0;
};

// Corpus BLEU, orders 1-4, modified precision with clipping, brevity penalty
// exp(1 - r/h) when h < r. Without smoothing a zero precision at any
// attempted order gives BLEU 0; with smoothing, orders above 1 use
// (matches+1)/(total+1) when no match was found.
BleuReport bleu(const std::vector<std::vector<std::string>>& hypotheses,
                const std::vector<std::vector<std::string>>& references, bool smoothed = false);

std::string render_bleu(const BleuReport& report);

struct TuneOptions {
  int budget = 200;       // decode-and-score evaluations
  uint64_t seed = 0;      // recorded for reproducibility; the ascent is deterministic
  size_t beam = 20;
  unsigned threads = 1;
  bool smoothed_bleu = false;
  std::vector<double> grid = {-1.0, -0.5, -0.3, -0.2, -0.1, -0.05,
                              0.0,  0.05, 0.1,  0.2,  0.3,  0.5, 1.0};
};

struct TuneResult {
  FeatureWeights weights;
  double dev_bleu = 0.0;
  std::string log;  // one line per accepted move: iteration, coordinate, value, BLEU
};

// Coordinate ascent on dev BLEU over a fixed per-coordinate grid, cycling
// until a full cycle yields no improvement or the budget is exhausted. The
// result never scores below the starting weights on the dev set.
TuneResult tune(const TranslationSystem& system,
                const std::vector<std::vector<std::string>>& dev_src,
                const std::vector<std::vector<std::string>>& dev_ref, const TuneOptions& opts);

}  // namespace usmt
