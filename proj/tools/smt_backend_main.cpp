// Reference translator backend: a self-contained phrase-based SMT trainer
// and decoder honoring the pipeline's subprocess protocol.
//
//   usmt-backend train --src <file> --tgt <file> --model <dir>
//   usmt-backend translate --model <dir> --in <file> --out <file>

#include <iostream>

#include "CLI11.hpp"
#include "usmt/backend.hpp"
#include "usmt/util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"phrase-based SMT translator backend"};
  app.require_subcommand(1);

  std::string src_file, tgt_file, model_dir, in_file, out_file;
  unsigned threads = 1;

  auto* train = app.add_subcommand("train", "train a model from scratch on a sentence-pair set");
  train->add_option("--src", src_file, "source-side training file")->required();
  train->add_option("--tgt", tgt_file, "target-side training file")->required();
  train->add_option("--model", model_dir, "output model directory")->required();
  train->add_option("--threads", threads, "worker threads");

  auto* translate = app.add_subcommand("translate", "translate a file line by line");
  translate->add_option("--model", model_dir, "model directory")->required();
  translate->add_option("--in", in_file, "input file")->required();
  translate->add_option("--out", out_file, "output file")->required();
  translate->add_option("--threads", threads, "worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      usmt::BackendParams params;
      params.threads = threads;
      usmt::builtin_backend_train(src_file, tgt_file, model_dir, params);
    } else {
      usmt::builtin_backend_translate(model_dir, in_file, out_file, threads);
    }
  } catch (const std::exception& e) {
    std::cerr << "usmt-backend: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
