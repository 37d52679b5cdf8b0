#include "usmt/backend.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <memory>

#include "usmt/align.hpp"
#include "usmt/corpus.hpp"
#include "usmt/decoder.hpp"
#include "usmt/lm.hpp"
#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

namespace {

// Runs argv, captures stderr, returns exit status.
int run_process(const std::vector<std::string>& argv, std::string* stderr_out) {
  int err_pipe[2];
  if (pipe(err_pipe) != 0) throw BackendError("backend: pipe() failed");
  pid_t pid = fork();
  if (pid < 0) throw BackendError("backend: fork() failed");
  if (pid == 0) {
    close(err_pipe[0]);
    dup2(err_pipe[1], 2);
    close(err_pipe[1]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    const char* msg = "execvp failed\n";
    ssize_t n = write(2, msg, strlen(msg));
    (void)n;
    _exit(127);
  }
  close(err_pipe[1]);
  char buf[4096];
  ssize_t n;
  while ((n = read(err_pipe[0], buf, sizeof(buf))) > 0) {
    stderr_out->append(buf, static_cast<size_t>(n));
  }
  close(err_pipe[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128;
}

std::string argv_to_string(const std::vector<std::string>& argv) {
  std::string s;
  for (const auto& a : argv) {
    if (!s.empty()) s += ' ';
    s += a;
  }
  return s;
}

TranslationSystem load_backend_model(const std::string& model_dir) {
  TranslationSystem sys;
  sys.table = std::make_shared<PhraseTable>(
      load_phrase_table(model_dir + "/phrase_table.txt", Provenance::estimated_from_parallel));
  if (file_exists(model_dir + "/reordering.txt")) {
    sys.reordering =
        std::make_shared<ReorderingModel>(load_reordering(model_dir + "/reordering.txt"));
  }
  sys.lm = std::make_shared<NGramModel>(load_arpa_file(model_dir + "/lm.arpa"));
  sys.weights = load_weights(model_dir + "/weights.txt");
  for (const auto& line : read_lines(model_dir + "/meta.txt")) {
    auto fields = split_ws(line);
    if (fields.size() == 2 && fields[0] == "distortion_limit") {
      sys.distortion_limit = static_cast<int>(parse_int(fields[1]));
    }
  }
  sys.max_phrase_len = max_source_phrase_len(*sys.table);
  return sys;
}

}  // namespace

void builtin_backend_train(const std::string& src_file, const std::string& tgt_file,
                           const std::string& model_dir, const BackendParams& params) {
  ParallelCorpus pairs = load_parallel(src_file, tgt_file);
  if (pairs.empty()) throw InputError("backend train: no usable sentence pairs");
  make_dirs(model_dir);

  Ibm1Options ibm_opts;
  ibm_opts.iterations = params.ibm1_iterations;
  auto fwd = train_ibm1(pairs, ibm_opts);
  ParallelCorpus swapped(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    swapped[i].src = pairs[i].tgt;
    swapped[i].tgt = pairs[i].src;
  }
  auto bwd = train_ibm1(swapped, ibm_opts);

  std::vector<WordAlignment> alignments(pairs.size());
  parallel_for(pairs.size(), params.threads, [&](size_t i) {
    WordAlignment f = viterbi_align(fwd.ttable, pairs[i]);
    WordAlignment brev = viterbi_align(bwd.ttable, swapped[i]);
    WordAlignment b;
    for (const auto& [j, k] : brev.links) b.links.emplace(k, j);
    alignments[i] = symmetrize(f, b, static_cast<int>(pairs[i].src.size()),
                               static_cast<int>(pairs[i].tgt.size()));
  });

  PairCounts counts = count_extracted(pairs, alignments, params.max_phrase_len);
  PhraseTable table = estimate_table(counts, fwd.ttable, bwd.ttable);
  PhraseTable pruned = prune(table, counts, singleton_threshold(counts.n_pairs));
  ReorderingModel reo = estimate_reordering(pairs, alignments, params.max_phrase_len);
  // Keep only entries the pruned table can ask for.
  ReorderingModel reo_kept;
  reo_kept.smoothing_alpha = reo.smoothing_alpha;
  for (const auto& [src, cands] : pruned.entries) {
    for (const auto& c : cands) {
      auto it = reo.table.find({src, c.target});
      if (it != reo.table.end()) reo_kept.table.insert(*it);
    }
  }

  Corpus tgt_side;
  tgt_side.language = "tgt";
  for (const auto& p : pairs) tgt_side.sentences.push_back(p.tgt);
  LmOptions lm_opts;
  lm_opts.order = params.lm_order;
  NGramModel lm = train_lm(tgt_side, lm_opts);

  save_phrase_table(pruned, model_dir + "/phrase_table.txt");
  save_reordering(reo_kept, model_dir + "/reordering.txt");
  save_arpa_file(lm, model_dir + "/lm.arpa");
  save_weights(FeatureWeights{}, model_dir + "/weights.txt");
  std::string meta;
  meta += "kind smt-backend\n";
  meta += "distortion_limit " + std::to_string(params.distortion_limit) + "\n";
  meta += "beam " + std::to_string(params.beam) + "\n";
  atomic_write_file(model_dir + "/meta.txt", meta);
}

void builtin_backend_translate(const std::string& model_dir, const std::string& in_file,
                               const std::string& out_file, unsigned threads) {
  TranslationSystem sys = load_backend_model(model_dir);
  size_t beam = 20;
  for (const auto& line : read_lines(model_dir + "/meta.txt")) {
    auto fields = split_ws(line);
    if (fields.size() == 2 && fields[0] == "beam") {
      beam = static_cast<size_t>(parse_int(fields[1]));
    }
  }
  auto lines = read_lines(in_file);
  std::vector<std::vector<std::string>> sources(lines.size());
  for (size_t i = 0; i < lines.size(); ++i) {
    sources[i] = tokenize(lines[i]);
    for (auto& t : sources[i]) t = escape_token(t);
  }
  auto decoded = decode_batch(sources, sys, beam, threads);
  std::string out;
  for (const auto& d : decoded) {
    std::string line;
    for (size_t i = 0; i < d.tokens.size(); ++i) {
      if (i) line += ' ';
      line += unescape_token(d.tokens[i]);
    }
    out += line;
    out += '\n';
  }
  atomic_write_file(out_file, out);
}

void backend_train(const std::string& backend, const std::string& src_file,
                   const std::string& tgt_file, const std::string& model_dir,
                   const BackendParams& params) {
  if (backend == "builtin") {
    builtin_backend_train(src_file, tgt_file, model_dir, params);
    return;
  }
  std::vector<std::string> argv = {backend,     "train",  "--src", src_file,
                                   "--tgt",     tgt_file, "--model", model_dir};
  std::string err;
  int status = run_process(argv, &err);
  if (status != 0) {
    throw BackendError("backend train failed (exit " + std::to_string(status) + "): " +
                       argv_to_string(argv) + "\n" + err);
  }
}

void backend_translate(const std::string& backend, const std::string& model_dir,
                       const std::string& in_file, const std::string& out_file,
                       unsigned threads) {
  if (backend == "builtin") {
    builtin_backend_translate(model_dir, in_file, out_file, threads);
  } else {
    std::vector<std::string> argv = {backend, "translate", "--model", model_dir,
                                     "--in",  in_file,     "--out",   out_file};
    std::string err;
    int status = run_process(argv, &err);
    if (status != 0) {
      throw BackendError("backend translate failed (exit " + std::to_string(status) + "): " +
                         argv_to_string(argv) + "\n" + err);
    }
  }
  // Protocol: exactly one output line per input line.
  size_t in_count = read_lines(in_file).size();
  size_t out_count = 0;
  if (!file_exists(out_file)) {
    throw BackendError("backend translate produced no output file: " + out_file);
  }
  out_count = read_lines(out_file).size();
  if (in_count != out_count) {
    throw BackendError("backend translate line count mismatch: " + std::to_string(in_count) +
                       " in vs " + std::to_string(out_count) + " out (" + out_file + ")");
  }
}

}  // namespace usmt
