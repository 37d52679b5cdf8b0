#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "usmt/backend.hpp"
#include "usmt/decoder.hpp"
#include "usmt/synthetic.hpp"

namespace usmt {

struct PipelineConfig {
  // inputs
  std::string src_corpus, tgt_corpus;
  std::string src_embeddings, tgt_embeddings;
  std::string dev_src, dev_tgt;
  std::string test_src, test_tgt;
  std::string workspace;
  std::string backend = "builtin";

  // loop controls
  uint64_t seed = 1;
  unsigned threads = 1;
  uint64_t sample_per_iteration = 3000000;  // N
  int usmt_iterations = 4;
  int unmt_iterations = 4;
  double alpha = 0.5;
  std::string refine_mode = "forward";  // forward | back
  std::string directions = "both";      // s2t | t2s | both (usmt-run scope)
  bool tune_weights = true;             // effective when a dev set is configured
  int tune_budget = 120;
  bool filter_invert = false;

  // phrase collection
  double delta = 10.0;
  double merge_threshold = 0.0;  // required: the paper names no value
  int phrase_passes = 6;
  int max_phrase_len = 6;
  size_t max_phrases = 0;
  size_t max_vocab = 0;

  // induction
  size_t topk = 300;
  double beta = 30.0;
  size_t word_topk = 300;

  // language model
  int lm_order = 4;
  size_t lm_vocab_cap = 0;

  // alignment / estimation
  int ibm1_iterations = 5;
  double reordering_alpha = 0.5;
  std::string prune_threshold = "singleton";  // or a p-value

  // decoding
  size_t beam = 20;
  int distortion_limit = 6;
  size_t ttable_limit = 20;

  bool has_dev() const { return !dev_src.empty() && !dev_tgt.empty(); }
  bool has_test() const { return !test_src.empty() && !test_tgt.empty(); }
  bool tuning_enabled() const { return tune_weights && has_dev(); }
  double prune_pvalue(int64_t n_pairs) const;
};

// Line-oriented "key = value"; '#' starts a comment; unknown keys are errors.
PipelineConfig parse_config(const std::vector<std::string>& lines);
PipelineConfig load_config(const std::string& path);
// Canonical form (sorted keys) used for the manifest's config digest.
std::string render_config(const PipelineConfig& cfg);

enum class RunMode { usmt_only, unmt_only, full };

// Executes the staged pipeline against a workspace. Every stage communicates
// through disk artifacts and writes a done-marker, so a run killed between
// stages resumes exactly where it stopped.
class PipelineRunner {
 public:
  PipelineRunner(PipelineConfig cfg, RunMode mode);

  const std::vector<std::string>& stage_names() const { return stage_names_; }

  // Runs stages in order, skipping completed ones; stops once `max_stages`
  // stages are complete (counting previously completed ones).
  void run(size_t max_stages = static_cast<size_t>(-1));

  std::string manifest_path() const;

  // Test BLEU per completed iteration, read from eval artifacts:
  // keys are (kind, direction, iteration) with kind "usmt" or "unmt".
  std::map<std::tuple<std::string, std::string, int>, double> learning_curve() const;

  // Loads the assembled translation system of a completed usmt stage.
  TranslationSystem usmt_system(const std::string& direction, int iteration) const;

  const PipelineConfig& config() const { return cfg_; }

 private:
  struct Stage;
  friend struct PipelineStages;

  PipelineConfig cfg_;
  RunMode mode_;
  std::vector<std::shared_ptr<Stage>> stages_;
  std::vector<std::string> stage_names_;
  std::shared_ptr<struct PipelineContext> ctx_;

  void build_plan();
};

// Convenience wrappers for the CLI subcommands.
void run_usmt(const PipelineConfig& cfg);
void run_unmt(const PipelineConfig& cfg);
void run_pipeline(const PipelineConfig& cfg);

}  // namespace usmt
