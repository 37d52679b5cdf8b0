#pragma once

#include <string>

namespace usmt {

// Knobs for the built-in SMT backend. The subprocess protocol itself carries
// no parameters: a backend is self-contained by contract.
struct BackendParams {
  int ibm1_iterations = 5;
  int max_phrase_len = 6;
  int lm_order = 3;
  size_t beam = 20;
  int distortion_limit = 6;
  unsigned threads = 1;
};

// Trains a full phrase-based system (word alignment, extraction, pruned
// table, reordering model, target-side LM) from scratch on the given pair
// files and writes it under model_dir.
void builtin_backend_train(const std::string& src_file, const std::string& tgt_file,
                           const std::string& model_dir, const BackendParams& params);

// Decodes in_file line by line; always emits exactly one output line per
// input line.
void builtin_backend_translate(const std::string& model_dir, const std::string& in_file,
                               const std::string& out_file, unsigned threads);

// Dispatch on the configured backend: "builtin" runs in process, anything
// else is treated as an executable honoring the protocol
//   backend train --src <file> --tgt <file> --model <dir>
//   backend translate --model <dir> --in <file> --out <file>
// Non-zero exit or a bad output line count raises BackendError with the
// captured diagnostics.
void backend_train(const std::string& backend, const std::string& src_file,
                   const std::string& tgt_file, const std::string& model_dir,
                   const BackendParams& params);
void backend_translate(const std::string& backend, const std::string& model_dir,
                       const std::string& in_file, const std::string& out_file,
                       unsigned threads);

}  // namespace usmt
