// Command-line front end for the unsupervised MT pipeline and its parts.

#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "usmt/align.hpp"
#include "usmt/corpus.hpp"
#include "usmt/decoder.hpp"
#include "usmt/embedding.hpp"
#include "usmt/evaltune.hpp"
#include "usmt/fixture.hpp"
#include "usmt/induction.hpp"
#include "usmt/lm.hpp"
#include "usmt/pipeline.hpp"
#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace {

using namespace usmt;

std::vector<std::vector<std::string>> load_tokenized(const std::string& path) {
  std::vector<std::vector<std::string>> out;
  for (const auto& line : read_lines(path)) {
    auto toks = tokenize(line);
    for (auto& t : toks) t = escape_token(t);
    out.push_back(std::move(toks));
  }
  return out;
}

std::string render_raw_line(const std::vector<std::string>& tokens) {
  std::string line;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) line += ' ';
    line += unescape_token(tokens[i]);
  }
  return line;
}

TranslationSystem load_system(const std::string& table_path, const std::string& lm_path,
                              const std::string& weights_path, const std::string& reordering_path,
                              const std::string& provenance, int distortion_limit) {
  TranslationSystem sys;
  sys.table = std::make_shared<PhraseTable>(
      load_phrase_table(table_path, provenance_from_name(provenance)));
  sys.lm = std::make_shared<NGramModel>(load_arpa_file(lm_path));
  if (!weights_path.empty()) sys.weights = load_weights(weights_path);
  if (!reordering_path.empty()) {
    sys.reordering = std::make_shared<ReorderingModel>(load_reordering(reordering_path));
  }
  sys.distortion_limit = distortion_limit;
  sys.max_phrase_len = max_source_phrase_len(*sys.table);
  return sys;
}

PipelineConfig resolve_config(const std::string& config_path, const std::string& workspace,
                              int64_t seed, unsigned threads) {
  if (config_path.empty()) throw ConfigError("--config is required for pipeline runs");
  PipelineConfig cfg = load_config(config_path);
  if (!workspace.empty()) cfg.workspace = workspace;
  if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
  if (threads > 0) cfg.threads = threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unsupervised phrase-based MT pipeline"};
  app.require_subcommand(1);

  std::string config_path, workspace;
  int64_t seed = -1;
  unsigned threads = 0;
  app.add_option("--config", config_path, "pipeline config file")->expected(1);
  app.add_option("--seed", seed, "random seed override");
  app.add_option("--workspace", workspace, "workspace directory override");
  app.add_option("--threads", threads, "worker threads override");

  // collect-phrases
  std::string corpus_path, inventory_out, merged_out;
  double delta = 10.0, threshold = 0.0;
  int passes = 6, max_len = 6;
  size_t max_phrases = 0;
  auto* collect = app.add_subcommand("collect-phrases", "iterative phrase collection");
  collect->add_option("--corpus", corpus_path)->required();
  collect->add_option("--delta", delta);
  collect->add_option("--threshold", threshold)->required();
  collect->add_option("--passes", passes);
  collect->add_option("--max-len", max_len);
  collect->add_option("--max-phrases", max_phrases);
  collect->add_option("--inventory-out", inventory_out)->required();
  collect->add_option("--merged-out", merged_out);

  // induce
  std::string src_inv_path, tgt_inv_path, src_emb_path, tgt_emb_path, table_out;
  size_t topk = 300, word_topk = 300, max_vocab = 0;
  double beta = 30.0;
  auto* induce = app.add_subcommand("induce", "induce the iteration-0 phrase table");
  induce->add_option("--src-inventory", src_inv_path)->required();
  induce->add_option("--tgt-inventory", tgt_inv_path)->required();
  induce->add_option("--src-emb", src_emb_path)->required();
  induce->add_option("--tgt-emb", tgt_emb_path)->required();
  induce->add_option("--k", topk);
  induce->add_option("--beta", beta);
  induce->add_option("--word-k", word_topk);
  induce->add_option("--max-vocab", max_vocab);
  induce->add_option("--out", table_out)->required();

  // train-lm
  std::string lm_corpus, lm_out, estimator = "kn";
  int lm_order = 4;
  size_t lm_cap = 0;
  auto* trainlm = app.add_subcommand("train-lm", "train a backoff n-gram model (ARPA)");
  trainlm->add_option("--corpus", lm_corpus)->required();
  trainlm->add_option("--order", lm_order);
  trainlm->add_option("--estimator", estimator)->check(CLI::IsMember({"kn", "add-k", "auto"}));
  trainlm->add_option("--vocab-cap", lm_cap);
  trainlm->add_option("--out", lm_out)->required();

  // decode
  std::string dec_table, dec_lm, dec_weights, dec_reordering, dec_in, dec_out, dec_trace;
  std::string dec_provenance = "estimated";
  size_t beam = 20;
  int distortion_limit = 6;
  auto* decode_cmd = app.add_subcommand("decode", "batch decode a file");
  decode_cmd->add_option("--table", dec_table)->required();
  decode_cmd->add_option("--lm", dec_lm)->required();
  decode_cmd->add_option("--weights", dec_weights);
  decode_cmd->add_option("--reordering", dec_reordering);
  decode_cmd->add_option("--provenance", dec_provenance);
  decode_cmd->add_option("--beam", beam);
  decode_cmd->add_option("--distortion-limit", distortion_limit);
  decode_cmd->add_option("--in", dec_in)->required();
  decode_cmd->add_option("--out", dec_out)->required();
  decode_cmd->add_option("--trace", dec_trace);

  // align
  std::string al_src, al_tgt, al_out;
  int ibm1_iters = 5;
  auto* align_cmd = app.add_subcommand("align", "IBM1 + grow-diag-final-and word alignment");
  align_cmd->add_option("--src", al_src)->required();
  align_cmd->add_option("--tgt", al_tgt)->required();
  align_cmd->add_option("--iterations", ibm1_iters);
  align_cmd->add_option("--out", al_out)->required();

  // extract
  std::string ex_src, ex_tgt, ex_align, ex_out, ex_counts, ex_table;
  int ex_max_len = 6;
  auto* extract_cmd = app.add_subcommand("extract", "phrase-pair extraction from alignments");
  extract_cmd->add_option("--src", ex_src)->required();
  extract_cmd->add_option("--tgt", ex_tgt)->required();
  extract_cmd->add_option("--align", ex_align)->required();
  extract_cmd->add_option("--max-len", ex_max_len);
  extract_cmd->add_option("--out", ex_out)->required();
  extract_cmd->add_option("--counts-out", ex_counts);
  extract_cmd->add_option("--table-out", ex_table,
                          "also estimate a phrase table (IBM1 lexical scores)");
  extract_cmd->add_option("--iterations", ibm1_iters);

  // prune
  std::string pr_table, pr_counts, pr_out, pr_provenance = "estimated";
  std::string pr_threshold = "singleton";
  auto* prune_cmd = app.add_subcommand("prune", "significance-prune a phrase table");
  prune_cmd->add_option("--table", pr_table)->required();
  prune_cmd->add_option("--counts", pr_counts)->required();
  prune_cmd->add_option("--threshold", pr_threshold,
                        "p-value threshold or 'singleton' for the 1-1-1 convention");
  prune_cmd->add_option("--provenance", pr_provenance);
  prune_cmd->add_option("--out", pr_out)->required();

  // tune
  std::string tn_table, tn_lm, tn_weights_in, tn_reordering, tn_dev_src, tn_dev_ref, tn_out,
      tn_log;
  int tn_budget = 120;
  auto* tune_cmd = app.add_subcommand("tune", "coordinate-ascent weight tuning on dev BLEU");
  tune_cmd->add_option("--table", tn_table)->required();
  tune_cmd->add_option("--lm", tn_lm)->required();
  tune_cmd->add_option("--weights", tn_weights_in);
  tune_cmd->add_option("--reordering", tn_reordering);
  tune_cmd->add_option("--dev-src", tn_dev_src)->required();
  tune_cmd->add_option("--dev-ref", tn_dev_ref)->required();
  tune_cmd->add_option("--budget", tn_budget);
  tune_cmd->add_option("--beam", beam);
  tune_cmd->add_option("--distortion-limit", distortion_limit);
  tune_cmd->add_option("--out", tn_out)->required();
  tune_cmd->add_option("--log", tn_log);

  // bleu
  std::string bl_hyp, bl_ref;
  bool bl_smoothed = false;
  auto* bleu_cmd = app.add_subcommand("bleu", "corpus BLEU of a hypothesis file");
  bleu_cmd->add_option("--hyp", bl_hyp)->required();
  bleu_cmd->add_option("--ref", bl_ref)->required();
  bleu_cmd->add_flag("--smoothed", bl_smoothed);

  // runs
  auto* usmt_run = app.add_subcommand("usmt-run", "iteration 0 plus USMT refinement loop");
  auto* unmt_run = app.add_subcommand("unmt-run", "incremental UNMT loop over a usmt workspace");
  auto* pipeline_run = app.add_subcommand("pipeline-run", "full pipeline: USMT then UNMT");

  // make-fixture
  std::string fx_out;
  FixtureParams fx;
  auto* fixture_cmd = app.add_subcommand("make-fixture", "generate a cipher test fixture");
  fixture_cmd->add_option("--out", fx_out)->required();
  fixture_cmd->add_option("--vocab", fx.vocab);
  fixture_cmd->add_option("--sentences", fx.sentences);
  fixture_cmd->add_option("--test-pairs", fx.test_pairs);
  fixture_cmd->add_option("--dev-pairs", fx.dev_pairs);
  fixture_cmd->add_option("--noise", fx.noise_sigma);
  fixture_cmd->add_option("--dim", fx.dim);
  fixture_cmd->add_option("--fixture-seed", fx.seed);
  bool fx_dense = false;
  fixture_cmd->add_flag("--dense", fx_dense, "random dense vectors instead of one-hot");

  // Global flags remain usable after a subcommand name.
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  unsigned effective_threads = threads > 0 ? threads : 1;

  try {
    if (collect->parsed()) {
      Corpus corpus = load_corpus(corpus_path, "mono");
      CollectOptions opts;
      opts.delta = delta;
      opts.threshold = threshold;
      opts.passes = passes;
      opts.max_components = max_len;
      opts.max_phrases = max_phrases;
      auto res = collect_phrases(corpus, opts);
      save_inventory(res.inventory, inventory_out);
      if (!merged_out.empty()) atomic_write_file(merged_out, render_corpus(res.merged));
      std::cerr << "collected " << res.inventory.entries.size() << " phrases" << std::endl;
    } else if (induce->parsed()) {
      auto src_inv = load_inventory(src_inv_path);
      auto tgt_inv = load_inventory(tgt_inv_path);
      auto src_emb = load_embeddings_file(src_emb_path, "src", max_vocab);
      auto tgt_emb = load_embeddings_file(tgt_emb_path, "tgt", max_vocab);
      auto src_f = filter_inventory_by_vocab(src_inv, src_emb);
      auto tgt_f = filter_inventory_by_vocab(tgt_inv, tgt_emb);
      InduceOptions opts;
      opts.k = topk;
      opts.beta = beta;
      opts.word_topk = word_topk;
      opts.threads = effective_threads;
      PhraseTable table = induce_table(src_f, tgt_f, src_emb, tgt_emb, opts);
      save_phrase_table(table, table_out);
      std::cerr << "induced " << table.pair_count() << " phrase pairs" << std::endl;
    } else if (trainlm->parsed()) {
      LmOptions opts;
      opts.order = lm_order;
      opts.vocab_cap = lm_cap;
      opts.estimator = estimator == "kn"      ? LmEstimator::kn_with_fallback
                       : estimator == "add-k" ? LmEstimator::add_k
                                              : LmEstimator::kn_with_fallback;
      NGramModel model = train_lm(load_corpus(lm_corpus, "mono"), opts);
      save_arpa_file(model, lm_out);
      std::cerr << "trained order-" << model.order() << " model, vocab " << model.vocab_size()
                << std::endl;
    } else if (decode_cmd->parsed()) {
      TranslationSystem sys = load_system(dec_table, dec_lm, dec_weights, dec_reordering,
                                          dec_provenance, distortion_limit);
      auto sources = load_tokenized(dec_in);
      auto decoded = decode_batch(sources, sys, beam, effective_threads);
      std::string out, trace;
      for (const auto& d : decoded) {
        out += render_raw_line(d.tokens);
        out += '\n';
        trace += render_trace(d.trace);
        trace += '\n';
      }
      atomic_write_file(dec_out, out);
      if (!dec_trace.empty()) atomic_write_file(dec_trace, trace);
    } else if (align_cmd->parsed()) {
      ParallelCorpus pairs = load_parallel(al_src, al_tgt);
      Ibm1Options opts;
      opts.iterations = ibm1_iters;
      auto fwd = train_ibm1(pairs, opts);
      ParallelCorpus swapped(pairs.size());
      for (size_t i = 0; i < pairs.size(); ++i) {
        swapped[i].src = pairs[i].tgt;
        swapped[i].tgt = pairs[i].src;
      }
      auto bwd = train_ibm1(swapped, opts);
      std::string out;
      for (size_t i = 0; i < pairs.size(); ++i) {
        WordAlignment f = viterbi_align(fwd.ttable, pairs[i]);
        WordAlignment brev = viterbi_align(bwd.ttable, swapped[i]);
        WordAlignment b;
        for (const auto& [j, k] : brev.links) b.links.emplace(k, j);
        auto sym = symmetrize(f, b, static_cast<int>(pairs[i].src.size()),
                              static_cast<int>(pairs[i].tgt.size()));
        out += render_alignment(sym);
        out += '\n';
      }
      atomic_write_file(al_out, out);
    } else if (extract_cmd->parsed()) {
      ParallelCorpus pairs = load_parallel(ex_src, ex_tgt);
      auto align_lines = read_lines(ex_align);
      if (align_lines.size() < pairs.size()) {
        throw InputError("extract: fewer alignment lines than sentence pairs");
      }
      std::vector<WordAlignment> alignments;
      for (size_t i = 0; i < pairs.size(); ++i) {
        alignments.push_back(parse_alignment(align_lines[i]));
      }
      PairCounts counts = count_extracted(pairs, alignments, ex_max_len);
      std::string out;
      for (const auto& [key, c] : counts.joint) {
        out += key.first + " ||| " + key.second + " ||| " + std::to_string(c) + "\n";
      }
      atomic_write_file(ex_out, out);
      if (!ex_counts.empty()) save_pair_counts(counts, ex_counts);
      if (!ex_table.empty()) {
        Ibm1Options opts;
        opts.iterations = ibm1_iters;
        auto fwd = train_ibm1(pairs, opts);
        ParallelCorpus swapped(pairs.size());
        for (size_t i = 0; i < pairs.size(); ++i) {
          swapped[i].src = pairs[i].tgt;
          swapped[i].tgt = pairs[i].src;
        }
        auto bwd = train_ibm1(swapped, opts);
        save_phrase_table(estimate_table(counts, fwd.ttable, bwd.ttable), ex_table);
      }
      std::cerr << "extracted " << counts.joint.size() << " distinct pairs" << std::endl;
    } else if (prune_cmd->parsed()) {
      PhraseTable table = load_phrase_table(pr_table, provenance_from_name(pr_provenance));
      PairCounts counts = load_pair_counts(pr_counts);
      double thr = pr_threshold == "singleton" ? singleton_threshold(counts.n_pairs)
                                               : parse_double(pr_threshold);
      PhraseTable pruned = prune(table, counts, thr);
      save_phrase_table(pruned, pr_out);
      std::cerr << "kept " << pruned.pair_count() << " of " << table.pair_count() << " pairs"
                << std::endl;
    } else if (tune_cmd->parsed()) {
      TranslationSystem sys = load_system(tn_table, tn_lm, tn_weights_in, tn_reordering,
                                          "estimated", distortion_limit);
      auto dev_src_s = load_tokenized(tn_dev_src);
      auto dev_ref_s = load_tokenized(tn_dev_ref);
      TuneOptions opts;
      opts.budget = tn_budget;
      opts.beam = beam;
      opts.threads = effective_threads;
      if (seed >= 0) opts.seed = static_cast<uint64_t>(seed);
      auto result = tune(sys, dev_src_s, dev_ref_s, opts);
      save_weights(result.weights, tn_out);
      if (!tn_log.empty()) atomic_write_file(tn_log, result.log);
      std::cerr << "dev bleu " << format_double(result.dev_bleu) << std::endl;
    } else if (bleu_cmd->parsed()) {
      auto report = bleu(load_tokenized(bl_hyp), load_tokenized(bl_ref), bl_smoothed);
      std::cout << render_bleu(report);
    } else if (usmt_run->parsed()) {
      run_usmt(resolve_config(config_path, workspace, seed, threads));
    } else if (unmt_run->parsed()) {
      run_unmt(resolve_config(config_path, workspace, seed, threads));
    } else if (pipeline_run->parsed()) {
      run_pipeline(resolve_config(config_path, workspace, seed, threads));
    } else if (fixture_cmd->parsed()) {
      fx.one_hot = !fx_dense;
      write_fixture(make_fixture(fx), fx_out);
      std::cerr << "fixture written to " << fx_out << std::endl;
    }
  } catch (const std::exception& e) {
    std::cerr << "usmt: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
