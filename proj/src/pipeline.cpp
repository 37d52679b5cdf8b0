#include "usmt/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <tuple>

#include "usmt/align.hpp"
#include "usmt/corpus.hpp"
#include "usmt/embedding.hpp"
#include "usmt/evaltune.hpp"
#include "usmt/induction.hpp"
#include "usmt/lm.hpp"
#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

namespace {

std::string iter_dir(int i) {
  std::string n = std::to_string(i);
  while (n.size() < 3) n = "0" + n;
  return "iter" + n;
}

std::string opposite(const std::string& direction) {
  return direction == "s2t" ? "t2s" : "s2t";
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: boolean expected for '" + key + "', got '" + v + "'");
}

std::vector<std::vector<std::string>> load_sentences(const std::string& path) {
  std::vector<std::vector<std::string>> out;
  for (const auto& line : read_lines(path)) {
    auto toks = tokenize(line);
    for (auto& t : toks) t = escape_token(t);
    out.push_back(std::move(toks));
  }
  return out;
}

std::string render_tokens(const std::vector<std::string>& tokens) {
  std::string line;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) line += ' ';
    line += unescape_token(tokens[i]);
  }
  return line;
}

}  // namespace

double PipelineConfig::prune_pvalue(int64_t n_pairs) const {
  if (prune_threshold == "singleton") return singleton_threshold(n_pairs);
  return parse_double(prune_threshold);
}

PipelineConfig parse_config(const std::vector<std::string>& lines) {
  PipelineConfig cfg;
  size_t lineno = 0;
  for (const auto& raw : lines) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    try {
      if (key == "src_corpus") cfg.src_corpus = value;
      else if (key == "tgt_corpus") cfg.tgt_corpus = value;
      else if (key == "src_embeddings") cfg.src_embeddings = value;
      else if (key == "tgt_embeddings") cfg.tgt_embeddings = value;
      else if (key == "dev_src") cfg.dev_src = value;
      else if (key == "dev_tgt") cfg.dev_tgt = value;
      else if (key == "test_src") cfg.test_src = value;
      else if (key == "test_tgt") cfg.test_tgt = value;
      else if (key == "workspace") cfg.workspace = value;
      else if (key == "backend") cfg.backend = value;
      else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(value));
      else if (key == "threads") cfg.threads = static_cast<unsigned>(parse_int(value));
      else if (key == "sample_per_iteration") cfg.sample_per_iteration = static_cast<uint64_t>(parse_int(value));
      else if (key == "usmt_iterations") cfg.usmt_iterations = static_cast<int>(parse_int(value));
      else if (key == "unmt_iterations") cfg.unmt_iterations = static_cast<int>(parse_int(value));
      else if (key == "alpha") cfg.alpha = parse_double(value);
      else if (key == "refine_mode") cfg.refine_mode = value;
      else if (key == "directions") cfg.directions = value;
      else if (key == "tune") cfg.tune_weights = parse_bool(value, key);
      else if (key == "tune_budget") cfg.tune_budget = static_cast<int>(parse_int(value));
      else if (key == "filter_invert") cfg.filter_invert = parse_bool(value, key);
      else if (key == "delta") cfg.delta = parse_double(value);
      else if (key == "merge_threshold") cfg.merge_threshold = parse_double(value);
      else if (key == "phrase_passes") cfg.phrase_passes = static_cast<int>(parse_int(value));
      else if (key == "max_phrase_len") cfg.max_phrase_len = static_cast<int>(parse_int(value));
      else if (key == "max_phrases") cfg.max_phrases = static_cast<size_t>(parse_int(value));
      else if (key == "max_vocab") cfg.max_vocab = static_cast<size_t>(parse_int(value));
      else if (key == "topk") cfg.topk = static_cast<size_t>(parse_int(value));
      else if (key == "beta") cfg.beta = parse_double(value);
      else if (key == "word_topk") cfg.word_topk = static_cast<size_t>(parse_int(value));
      else if (key == "lm_order") cfg.lm_order = static_cast<int>(parse_int(value));
      else if (key == "lm_vocab_cap") cfg.lm_vocab_cap = static_cast<size_t>(parse_int(value));
      else if (key == "ibm1_iterations") cfg.ibm1_iterations = static_cast<int>(parse_int(value));
      else if (key == "reordering_alpha") cfg.reordering_alpha = parse_double(value);
      else if (key == "prune_threshold") cfg.prune_threshold = value;
      else if (key == "beam") cfg.beam = static_cast<size_t>(parse_int(value));
      else if (key == "distortion_limit") cfg.distortion_limit = static_cast<int>(parse_int(value));
      else if (key == "ttable_limit") cfg.ttable_limit = static_cast<size_t>(parse_int(value));
      else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const ParseError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw ConfigError("config: alpha must be in (0,1]");
  if (cfg.sample_per_iteration < 1) throw ConfigError("config: sample_per_iteration must be >= 1");
  if (cfg.usmt_iterations < 0 || cfg.unmt_iterations < 0) {
    throw ConfigError("config: iteration counts must be >= 0");
  }
  if (cfg.refine_mode != "forward" && cfg.refine_mode != "back") {
    throw ConfigError("config: refine_mode must be forward or back");
  }
  if (cfg.directions != "s2t" && cfg.directions != "t2s" && cfg.directions != "both") {
    throw ConfigError("config: directions must be s2t, t2s or both");
  }
  if (cfg.threads < 1) cfg.threads = 1;
  if (cfg.beam < 1) throw ConfigError("config: beam must be >= 1");
  if (cfg.prune_threshold != "singleton") {
    double v = parse_double(cfg.prune_threshold);
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("config: prune_threshold must be a p-value");
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  return parse_config(read_lines(path));
}

std::string render_config(const PipelineConfig& c) {
  std::vector<std::pair<std::string, std::string>> kv = {
      {"alpha", format_double(c.alpha)},
      {"backend", c.backend},
      {"beam", std::to_string(c.beam)},
      {"beta", format_double(c.beta)},
      {"delta", format_double(c.delta)},
      {"dev_src", c.dev_src},
      {"dev_tgt", c.dev_tgt},
      {"directions", c.directions},
      {"distortion_limit", std::to_string(c.distortion_limit)},
      {"filter_invert", c.filter_invert ? "true" : "false"},
      {"ibm1_iterations", std::to_string(c.ibm1_iterations)},
      {"lm_order", std::to_string(c.lm_order)},
      {"lm_vocab_cap", std::to_string(c.lm_vocab_cap)},
      {"max_phrase_len", std::to_string(c.max_phrase_len)},
      {"max_phrases", std::to_string(c.max_phrases)},
      {"max_vocab", std::to_string(c.max_vocab)},
      {"merge_threshold", format_double(c.merge_threshold)},
      {"phrase_passes", std::to_string(c.phrase_passes)},
      {"prune_threshold", c.prune_threshold},
      {"refine_mode", c.refine_mode},
      {"sample_per_iteration", std::to_string(c.sample_per_iteration)},
      {"seed", std::to_string(c.seed)},
      {"src_corpus", c.src_corpus},
      {"src_embeddings", c.src_embeddings},
      {"test_src", c.test_src},
      {"test_tgt", c.test_tgt},
      {"tgt_corpus", c.tgt_corpus},
      {"tgt_embeddings", c.tgt_embeddings},
      {"threads", std::to_string(c.threads)},
      {"ttable_limit", std::to_string(c.ttable_limit)},
      {"topk", std::to_string(c.topk)},
      {"tune", c.tune_weights ? "true" : "false"},
      {"tune_budget", std::to_string(c.tune_budget)},
      {"unmt_iterations", std::to_string(c.unmt_iterations)},
      {"usmt_iterations", std::to_string(c.usmt_iterations)},
      {"word_topk", std::to_string(c.word_topk)},
  };
  // The workspace path is where outputs land, not an input; leaving it out
  // keeps the digest identical for reruns into fresh directories.
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

struct PipelineContext {
  PipelineConfig cfg;

  std::optional<Corpus> src_corpus_, tgt_corpus_;
  std::shared_ptr<const NGramModel> src_lm_, tgt_lm_;
  std::optional<std::vector<size_t>> src_perm_, tgt_perm_;

  explicit PipelineContext(PipelineConfig c) : cfg(std::move(c)) {}

  std::string ws() const { return cfg.workspace; }
  std::string lang(bool src_side) const { return src_side ? "src" : "tgt"; }
  bool input_is_src(const std::string& direction) const { return direction == "s2t"; }

  const Corpus& corpus(bool src_side) {
    auto& slot = src_side ? src_corpus_ : tgt_corpus_;
    if (!slot) {
      slot = load_corpus(src_side ? cfg.src_corpus : cfg.tgt_corpus, lang(src_side));
      if (slot->sentences.empty()) {
        throw InputError("empty corpus: " + (src_side ? cfg.src_corpus : cfg.tgt_corpus));
      }
    }
    return *slot;
  }

  std::shared_ptr<const NGramModel> lm(bool src_side) {
    auto& slot = src_side ? src_lm_ : tgt_lm_;
    if (!slot) {
      slot = std::make_shared<NGramModel>(
          load_arpa_file(ws() + "/lm/" + lang(src_side) + ".arpa"));
    }
    return slot;
  }

  void set_lm(bool src_side, std::shared_ptr<const NGramModel> m) {
    (src_side ? src_lm_ : tgt_lm_) = std::move(m);
  }

  const std::vector<size_t>& permutation(bool src_side) {
    auto& slot = src_side ? src_perm_ : tgt_perm_;
    if (!slot) {
      size_t n = corpus(src_side).sentences.size();
      std::vector<size_t> perm(n);
      for (size_t i = 0; i < n; ++i) perm[i] = i;
      Rng rng = Rng(cfg.seed).fork(src_side ? 11 : 12);
      rng.shuffle(perm);
      slot = std::move(perm);
    }
    return *slot;
  }

  // Sampled sentences [offset, offset+count) of the pool's seeded permutation.
  std::vector<std::vector<std::string>> sample(bool src_side, uint64_t offset, uint64_t count,
                                               std::vector<size_t>* indices) {
    const auto& perm = permutation(src_side);
    if (offset + count > perm.size()) {
      throw InputError("monolingual " + lang(src_side) + " pool exhausted: need " +
                       std::to_string(offset + count) + " sentences, available " +
                       std::to_string(perm.size()));
    }
    const auto& corp = corpus(src_side);
    std::vector<std::vector<std::string>> out;
    out.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
      size_t idx = perm[offset + i];
      if (indices) indices->push_back(idx);
      out.push_back(corp.sentences[idx]);
    }
    return out;
  }

  std::string usmt_dir(const std::string& direction, int iter) const {
    return ws() + "/usmt/" + direction + "/" + iter_dir(iter);
  }
  std::string unmt_dir(const std::string& direction, int iter) const {
    return ws() + "/unmt/" + direction + "/" + iter_dir(iter);
  }

  TranslationSystem usmt_system(const std::string& direction, int iter) {
    std::string dir = usmt_dir(direction, iter);
    if (!file_exists(dir + "/phrase_table.txt")) {
      throw InputError("missing usmt system artifacts: " + dir +
                       " (run the usmt stages first)");
    }
    TranslationSystem sys;
    sys.table = std::make_shared<PhraseTable>(load_phrase_table(
        dir + "/phrase_table.txt",
        iter == 0 ? Provenance::induced : Provenance::estimated_from_parallel));
    if (file_exists(dir + "/reordering.txt")) {
      sys.reordering = std::make_shared<ReorderingModel>(load_reordering(dir + "/reordering.txt"));
    }
    sys.lm = lm(!input_is_src(direction));  // output-language model
    sys.weights = load_weights(dir + "/weights.txt");
    sys.distortion_limit = cfg.distortion_limit;
    sys.options_per_span = cfg.ttable_limit;
    sys.max_phrase_len = max_source_phrase_len(*sys.table);
    return sys;
  }

  void write_sampled(const std::string& dir, const std::vector<std::vector<std::string>>& sents,
                     const std::vector<size_t>& indices) {
    std::string text, idx;
    for (const auto& s : sents) {
      text += render_tokens(s);
      text += '\n';
    }
    for (size_t i : indices) {
      idx += std::to_string(i);
      idx += '\n';
    }
    atomic_write_file(dir + "/samples.txt", text);
    atomic_write_file(dir + "/samples.idx", idx);
  }

  // Tunes (when configured) and writes weights + log; returns the weights.
  FeatureWeights finish_weights(TranslationSystem sys, const std::string& direction,
                                const std::string& dir) {
    FeatureWeights weights = sys.weights;
    if (cfg.tuning_enabled()) {
      auto dev_in = load_sentences(input_is_src(direction) ? cfg.dev_src : cfg.dev_tgt);
      auto dev_ref = load_sentences(input_is_src(direction) ? cfg.dev_tgt : cfg.dev_src);
      TuneOptions topts;
      topts.budget = cfg.tune_budget;
      topts.seed = cfg.seed;
      topts.beam = cfg.beam;
      topts.threads = cfg.threads;
      auto tuned = tune(sys, dev_in, dev_ref, topts);
      weights = tuned.weights;
      atomic_write_file(dir + "/tuning.log", tuned.log);
    }
    save_weights(weights, dir + "/weights.txt");
    return weights;
  }

  void eval_usmt(const std::string& direction, int iter) {
    if (!cfg.has_test()) return;
    std::string dir = usmt_dir(direction, iter);
    TranslationSystem sys = usmt_system(direction, iter);
    auto test_in = load_sentences(input_is_src(direction) ? cfg.test_src : cfg.test_tgt);
    auto test_ref = load_sentences(input_is_src(direction) ? cfg.test_tgt : cfg.test_src);
    auto decoded = decode_batch(test_in, sys, cfg.beam, cfg.threads);
    std::string out;
    std::vector<std::vector<std::string>> hyps;
    hyps.reserve(decoded.size());
    for (auto& d : decoded) {
      out += render_tokens(d.tokens);
      out += '\n';
      hyps.push_back(std::move(d.tokens));
    }
    atomic_write_file(dir + "/output.txt", out);
    auto report = bleu(hyps, test_ref);
    atomic_write_file(dir + "/eval.txt",
                      "system usmt-" + direction + "-" + iter_dir(iter) + "\n" +
                          render_bleu(report));
  }

  void eval_unmt(const std::string& direction, int iter) {
    if (!cfg.has_test()) return;
    std::string dir = unmt_dir(direction, iter);
    std::string test_in_path = input_is_src(direction) ? cfg.test_src : cfg.test_tgt;
    backend_translate(cfg.backend, dir + "/model", test_in_path, dir + "/output.txt",
                      cfg.threads);
    auto hyps = load_sentences(dir + "/output.txt");
    auto refs = load_sentences(input_is_src(direction) ? cfg.test_tgt : cfg.test_src);
    auto report = bleu(hyps, refs);
    atomic_write_file(dir + "/eval.txt",
                      "system unmt-" + direction + "-" + iter_dir(iter) + "\n" +
                          render_bleu(report));
  }
};

struct PipelineRunner::Stage {
  std::string name;
  std::function<void(PipelineContext&)> fn;
};

// ---------------------------------------------------------------------------
// Stage bodies

struct PipelineStages {
  static void prepare(PipelineContext& ctx) {
    if (!(ctx.cfg.merge_threshold > 0.0)) {
      throw ConfigError("config: merge_threshold is required (> 0) for phrase collection");
    }
    for (bool src_side : {true, false}) {
      CollectOptions opts;
      opts.delta = ctx.cfg.delta;
      opts.threshold = ctx.cfg.merge_threshold;
      opts.passes = ctx.cfg.phrase_passes;
      opts.max_components = ctx.cfg.max_phrase_len;
      opts.max_phrases = ctx.cfg.max_phrases;
      auto res = collect_phrases(ctx.corpus(src_side), opts);
      std::string base = ctx.ws() + "/prepared/" + ctx.lang(src_side);
      save_inventory(res.inventory, base + ".inventory");
      atomic_write_file(base + ".merged.txt", render_corpus(res.merged));
    }
  }

  static void train_side_lm(PipelineContext& ctx, bool src_side) {
    LmOptions opts;
    opts.order = ctx.cfg.lm_order;
    opts.vocab_cap = ctx.cfg.lm_vocab_cap;
    auto model = std::make_shared<NGramModel>(train_lm(ctx.corpus(src_side), opts));
    save_arpa_file(*model, ctx.ws() + "/lm/" + ctx.lang(src_side) + ".arpa");
    ctx.set_lm(src_side, model);
  }

  static void iteration0(PipelineContext& ctx, const std::string& direction) {
    bool in_src = ctx.input_is_src(direction);
    auto in_inv = load_inventory(ctx.ws() + "/prepared/" + ctx.lang(in_src) + ".inventory");
    auto out_inv = load_inventory(ctx.ws() + "/prepared/" + ctx.lang(!in_src) + ".inventory");
    auto in_emb = load_embeddings_file(in_src ? ctx.cfg.src_embeddings : ctx.cfg.tgt_embeddings,
                                       ctx.lang(in_src), ctx.cfg.max_vocab);
    auto out_emb = load_embeddings_file(in_src ? ctx.cfg.tgt_embeddings : ctx.cfg.src_embeddings,
                                        ctx.lang(!in_src), ctx.cfg.max_vocab);
    auto in_filtered = filter_inventory_by_vocab(in_inv, in_emb);
    auto out_filtered = filter_inventory_by_vocab(out_inv, out_emb);
    InduceOptions opts;
    opts.k = ctx.cfg.topk;
    opts.beta = ctx.cfg.beta;
    opts.word_topk = ctx.cfg.word_topk;
    opts.threads = ctx.cfg.threads;
    PhraseTable table = induce_table(in_filtered, out_filtered, in_emb, out_emb, opts);
    std::string dir = ctx.usmt_dir(direction, 0);
    save_phrase_table(table, dir + "/phrase_table.txt");

    TranslationSystem sys;
    sys.table = std::make_shared<PhraseTable>(std::move(table));
    sys.lm = ctx.lm(!in_src);
    sys.distortion_limit = ctx.cfg.distortion_limit;
    sys.options_per_span = ctx.cfg.ttable_limit;
    sys.max_phrase_len = max_source_phrase_len(*sys.table);
    ctx.finish_weights(sys, direction, dir);
    ctx.eval_usmt(direction, 0);
  }

  static void refine(PipelineContext& ctx, const std::string& direction, int iter,
                     bool pool_is_src, uint64_t offset) {
    const auto& cfg = ctx.cfg;
    bool forward = cfg.refine_mode == "forward";
    bool in_src = ctx.input_is_src(direction);
    std::string dir = ctx.usmt_dir(direction, iter);
    make_dirs(dir);

    std::vector<size_t> indices;
    auto samples = ctx.sample(pool_is_src, offset, cfg.sample_per_iteration, &indices);
    ctx.write_sampled(dir, samples, indices);

    // Forward: translate real input-language text with this direction's own
    // previous system. Back: translate real output-language text with the
    // opposite direction's previous system.
    TranslationSystem translator =
        forward ? ctx.usmt_system(direction, iter - 1)
                : ctx.usmt_system(opposite(direction), iter - 1);
    std::string system_id =
        "usmt-" + (forward ? direction : opposite(direction)) + "-" + iter_dir(iter - 1);
    SynthDirection synth_dir = forward ? SynthDirection::forward : SynthDirection::back;
    // Synthetic side: the output language for forward, the input language
    // for back.
    auto synth_lm = forward ? ctx.lm(!in_src) : ctx.lm(in_src);
    // For back provenance generate_synthetic puts the synthetic text on the
    // src side, which is already this direction's input side.
    SyntheticCorpus synth = generate_synthetic(translator, samples, synth_dir, iter, system_id,
                                               *synth_lm, cfg.beam, cfg.threads);
    save_synthetic(synth, dir + "/synthetic");

    ParallelCorpus pairs;
    pairs.reserve(synth.pairs.size());
    for (const auto& p : synth.pairs) {
      if (p.src.empty() || p.tgt.empty()) continue;
      pairs.push_back({p.src, p.tgt});
    }
    if (pairs.empty()) throw InputError("refine: no usable synthetic pairs");

    Ibm1Options ibm_opts;
    ibm_opts.iterations = cfg.ibm1_iterations;
    auto fwd = train_ibm1(pairs, ibm_opts);
    ParallelCorpus swapped(pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
      swapped[i].src = pairs[i].tgt;
      swapped[i].tgt = pairs[i].src;
    }
    auto bwd = train_ibm1(swapped, ibm_opts);

    std::vector<WordAlignment> alignments(pairs.size());
    parallel_for(pairs.size(), cfg.threads, [&](size_t i) {
      WordAlignment f = viterbi_align(fwd.ttable, pairs[i]);
      WordAlignment brev = viterbi_align(bwd.ttable, swapped[i]);
      WordAlignment b;
      for (const auto& [j, k] : brev.links) b.links.emplace(k, j);
      alignments[i] = symmetrize(f, b, static_cast<int>(pairs[i].src.size()),
                                 static_cast<int>(pairs[i].tgt.size()));
    });
    std::string align_text;
    for (const auto& a : alignments) {
      align_text += render_alignment(a);
      align_text += '\n';
    }
    atomic_write_file(dir + "/alignments.txt", align_text);

    PairCounts counts = count_extracted(pairs, alignments, cfg.max_phrase_len);
    save_pair_counts(counts, dir + "/counts.txt");
    PhraseTable table = estimate_table(counts, fwd.ttable, bwd.ttable);
    PhraseTable pruned = prune(table, counts, cfg.prune_pvalue(counts.n_pairs));
    if (pruned.entries.empty()) {
      throw InputError("refine: pruning removed every phrase pair; lower prune_threshold");
    }
    save_phrase_table(pruned, dir + "/phrase_table.txt");

    ReorderingModel reo = estimate_reordering(pairs, alignments, cfg.max_phrase_len,
                                              cfg.reordering_alpha);
    ReorderingModel reo_kept;
    reo_kept.smoothing_alpha = reo.smoothing_alpha;
    for (const auto& [src, cands] : pruned.entries) {
      for (const auto& c : cands) {
        auto it = reo.table.find({src, c.target});
        if (it != reo.table.end()) reo_kept.table.insert(*it);
      }
    }
    save_reordering(reo_kept, dir + "/reordering.txt");

    TranslationSystem sys;
    sys.table = std::make_shared<PhraseTable>(std::move(pruned));
    sys.reordering = std::make_shared<ReorderingModel>(std::move(reo_kept));
    sys.lm = ctx.lm(!in_src);
    sys.distortion_limit = cfg.distortion_limit;
    sys.options_per_span = cfg.ttable_limit;
    sys.max_phrase_len = max_source_phrase_len(*sys.table);
    ctx.finish_weights(sys, direction, dir);
    ctx.eval_usmt(direction, iter);
  }

  static void unmt(PipelineContext& ctx, const std::string& direction, int iter,
                   uint64_t offset) {
    const auto& cfg = ctx.cfg;
    bool in_src = ctx.input_is_src(direction);
    std::string dir = ctx.unmt_dir(direction, iter);
    make_dirs(dir);

    // Back-translation: sample the output language, translate with the
    // opposite direction's latest system.
    std::vector<size_t> indices;
    auto samples = ctx.sample(!in_src, offset, cfg.sample_per_iteration, &indices);
    ctx.write_sampled(dir, samples, indices);

    std::string system_id;
    if (iter == 1) {
      TranslationSystem translator = ctx.usmt_system(opposite(direction), cfg.usmt_iterations);
      system_id = "usmt-" + opposite(direction) + "-" + iter_dir(cfg.usmt_iterations);
      auto decoded = decode_batch(samples, translator, cfg.beam, cfg.threads);
      std::string out;
      for (const auto& d : decoded) {
        out += render_tokens(d.tokens);
        out += '\n';
      }
      atomic_write_file(dir + "/translated.txt", out);
    } else {
      std::string model = ctx.unmt_dir(opposite(direction), iter - 1) + "/model";
      if (!file_exists(model + "/phrase_table.txt") && cfg.backend == "builtin") {
        throw InputError("missing unmt model: " + model);
      }
      system_id = "unmt-" + opposite(direction) + "-" + iter_dir(iter - 1);
      backend_translate(cfg.backend, model, dir + "/samples.txt", dir + "/translated.txt",
                        cfg.threads);
    }

    auto translated = load_sentences(dir + "/translated.txt");
    if (translated.size() != samples.size()) {
      throw BackendError("unmt: translated line count mismatch");
    }
    SyntheticCorpus synth;
    synth.pairs.resize(samples.size());
    auto synth_lm = ctx.lm(in_src);  // synthetic side is the input language
    parallel_for(samples.size(), cfg.threads, [&](size_t i) {
      SyntheticPair p;
      p.src = translated[i];
      p.tgt = samples[i];
      p.iteration = iter;
      p.system_id = system_id;
      p.direction = SynthDirection::back;
      p.cleanliness = cleanliness(*synth_lm, p.src);
      p.origin_index = i;
      synth.pairs[i] = std::move(p);
    });
    save_synthetic(synth, dir + "/synthetic");

    // Accumulate everything generated for this direction so far and keep the
    // cleanest alpha * N * iter pairs.
    SyntheticCorpus accumulated;
    for (int k = 1; k <= iter; ++k) {
      auto part = load_synthetic(ctx.unmt_dir(direction, k) + "/synthetic");
      for (auto& p : part.pairs) accumulated.pairs.push_back(std::move(p));
    }
    SyntheticCorpus filtered = filter_synthetic(accumulated, cfg.alpha,
                                                static_cast<uint64_t>(iter),
                                                cfg.sample_per_iteration, cfg.filter_invert);
    std::string train_src, train_tgt, meta;
    for (const auto& p : filtered.pairs) {
      train_src += render_tokens(p.src);
      train_src += '\n';
      train_tgt += render_tokens(p.tgt);
      train_tgt += '\n';
      meta += std::to_string(p.iteration);
      meta += '\t';
      meta += std::to_string(p.origin_index);
      meta += '\t';
      meta += format_double(p.cleanliness);
      meta += '\n';
    }
    atomic_write_file(dir + "/train.src", train_src);
    atomic_write_file(dir + "/train.tgt", train_tgt);
    atomic_write_file(dir + "/filtered.meta", meta);

    BackendParams params;
    params.ibm1_iterations = cfg.ibm1_iterations;
    params.max_phrase_len = cfg.max_phrase_len;
    params.beam = cfg.beam;
    params.distortion_limit = cfg.distortion_limit;
    params.threads = cfg.threads;
    backend_train(cfg.backend, dir + "/train.src", dir + "/train.tgt", dir + "/model", params);
    ctx.eval_unmt(direction, iter);
  }

  static void finalize(PipelineContext& ctx, const std::vector<std::string>& directions,
                       RunMode mode) {
    const auto& cfg = ctx.cfg;
    // Learning curves from the eval artifacts that exist.
    for (const auto& d : directions) {
      std::string curve;
      if (mode != RunMode::unmt_only) {
        for (int i = 0; i <= cfg.usmt_iterations; ++i) {
          std::string path = ctx.usmt_dir(d, i) + "/eval.txt";
          if (!file_exists(path)) continue;
          auto lines = read_lines(path);
          for (const auto& line : lines) {
            auto fields = split_ws(line);
            if (fields.size() == 2 && fields[0] == "bleu") {
              curve += "usmt\t" + std::to_string(i) + "\t" + fields[1] + "\n";
            }
          }
        }
      }
      if (mode != RunMode::usmt_only) {
        for (int i = 1; i <= cfg.unmt_iterations; ++i) {
          std::string path = ctx.unmt_dir(d, i) + "/eval.txt";
          if (!file_exists(path)) continue;
          for (const auto& line : read_lines(path)) {
            auto fields = split_ws(line);
            if (fields.size() == 2 && fields[0] == "bleu") {
              curve += "unmt\t" + std::to_string(i) + "\t" + fields[1] + "\n";
            }
          }
        }
      }
      if (!curve.empty()) {
        atomic_write_file(ctx.ws() + "/learning_curve_" + d + ".tsv", curve);
      }
    }

    // Manifest: provenance plus content digests over every artifact.
    namespace fs = std::filesystem;
    std::vector<std::string> rels;
    fs::path root(ctx.ws());
    for (auto it = fs::recursive_directory_iterator(root);
         it != fs::recursive_directory_iterator(); ++it) {
      if (!it->is_regular_file()) continue;
      std::string rel = fs::relative(it->path(), root).generic_string();
      if (rel == "manifest.txt" || rel.rfind("stages/", 0) == 0) continue;
      rels.push_back(rel);
    }
    std::sort(rels.begin(), rels.end());
    std::string manifest = "usmt-manifest v1\n";
    manifest += "seed " + std::to_string(cfg.seed) + "\n";
    manifest += "config " + fnv1a64_hex(render_config(cfg)) + "\n";
    for (const auto& d : directions) {
      if (mode != RunMode::unmt_only) {
        for (int i = 0; i <= cfg.usmt_iterations; ++i) {
          std::string rel = "usmt/" + d + "/" + iter_dir(i) + "/phrase_table.txt";
          if (file_exists(ctx.ws() + "/" + rel)) {
            manifest += "system usmt-" + d + "-" + iter_dir(i) + " provenance " +
                        provenance_name(i == 0 ? Provenance::induced
                                               : Provenance::estimated_from_parallel) +
                        " table " + rel + "\n";
          }
        }
      }
      if (mode != RunMode::usmt_only) {
        for (int i = 1; i <= cfg.unmt_iterations; ++i) {
          std::string rel = "unmt/" + d + "/" + iter_dir(i) + "/model";
          if (file_exists(ctx.ws() + "/" + rel)) {
            manifest += "system unmt-" + d + "-" + iter_dir(i) +
                        " provenance estimated-from-parallel model " + rel + "\n";
          }
        }
      }
    }
    for (const auto& rel : rels) {
      std::string content = read_file(ctx.ws() + "/" + rel);
      manifest += "artifact " + rel + " " + std::to_string(content.size()) + " " +
                  fnv1a64_hex(content) + "\n";
    }
    atomic_write_file(ctx.ws() + "/manifest.txt", manifest);
  }
};

// ---------------------------------------------------------------------------

PipelineRunner::PipelineRunner(PipelineConfig cfg, RunMode mode)
    : cfg_(std::move(cfg)), mode_(mode) {
  if (cfg_.workspace.empty()) throw ConfigError("config: workspace is required");
  ctx_ = std::make_shared<PipelineContext>(cfg_);
  build_plan();
}

void PipelineRunner::build_plan() {
  std::vector<std::string> directions;
  if (mode_ == RunMode::usmt_only && cfg_.refine_mode == "forward") {
    if (cfg_.directions == "both") directions = {"s2t", "t2s"};
    else directions = {cfg_.directions};
  } else {
    // Back-mode refinement and the UNMT loop both need the two directions.
    directions = {"s2t", "t2s"};
  }

  auto add = [&](std::string name, std::function<void(PipelineContext&)> fn) {
    auto st = std::make_shared<Stage>();
    st->name = std::move(name);
    st->fn = std::move(fn);
    stages_.push_back(st);
    stage_names_.push_back(stages_.back()->name);
  };

  uint64_t src_cursor = 0, tgt_cursor = 0;
  auto take = [&](bool src_side, uint64_t n) {
    auto& cursor = src_side ? src_cursor : tgt_cursor;
    uint64_t offset = cursor;
    cursor += n;
    return offset;
  };

  if (mode_ != RunMode::unmt_only) {
    add("prepare", [](PipelineContext& c) { PipelineStages::prepare(c); });
    add("lm-src", [](PipelineContext& c) { PipelineStages::train_side_lm(c, true); });
    add("lm-tgt", [](PipelineContext& c) { PipelineStages::train_side_lm(c, false); });
    if (cfg_.refine_mode == "forward") {
      for (const auto& d : directions) {
        add("iter0-" + d, [d](PipelineContext& c) { PipelineStages::iteration0(c, d); });
        for (int i = 1; i <= cfg_.usmt_iterations; ++i) {
          bool pool_src = ctx_->input_is_src(d);
          uint64_t offset = take(pool_src, cfg_.sample_per_iteration);
          add("refine-" + d + "-" + std::to_string(i),
              [d, i, pool_src, offset](PipelineContext& c) {
                PipelineStages::refine(c, d, i, pool_src, offset);
              });
        }
      }
    } else {
      for (const auto& d : directions) {
        add("iter0-" + d, [d](PipelineContext& c) { PipelineStages::iteration0(c, d); });
      }
      for (int i = 1; i <= cfg_.usmt_iterations; ++i) {
        for (const auto& d : directions) {
          bool pool_src = !ctx_->input_is_src(d);  // back: sample the output language
          uint64_t offset = take(pool_src, cfg_.sample_per_iteration);
          add("refine-" + d + "-" + std::to_string(i),
              [d, i, pool_src, offset](PipelineContext& c) {
                PipelineStages::refine(c, d, i, pool_src, offset);
              });
        }
      }
    }
  } else {
    // Resuming on top of an existing usmt workspace: keep sample cursors past
    // what the usmt stages consumed.
    if (cfg_.refine_mode == "forward") {
      src_cursor = static_cast<uint64_t>(cfg_.usmt_iterations) * cfg_.sample_per_iteration;
      tgt_cursor = src_cursor;
    } else {
      src_cursor = static_cast<uint64_t>(cfg_.usmt_iterations) * cfg_.sample_per_iteration;
      tgt_cursor = src_cursor;
    }
  }

  if (mode_ != RunMode::usmt_only) {
    if (mode_ == RunMode::full) {
      // usmt consumed per-pool samples above; cursors already advanced by
      // `take` for the stages that exist.
    }
    for (int i = 1; i <= cfg_.unmt_iterations; ++i) {
      for (const auto& d : std::vector<std::string>{"s2t", "t2s"}) {
        bool pool_src = !ctx_->input_is_src(d);
        uint64_t offset = take(pool_src, cfg_.sample_per_iteration);
        add("unmt-" + d + "-" + std::to_string(i), [d, i, offset](PipelineContext& c) {
          PipelineStages::unmt(c, d, i, offset);
        });
      }
    }
  }

  RunMode mode = mode_;
  add("finalize", [directions, mode](PipelineContext& c) {
    PipelineStages::finalize(c, directions, mode);
  });
}

void PipelineRunner::run(size_t max_stages) {
  make_dirs(cfg_.workspace + "/stages");
  size_t completed = 0;
  for (const auto& stage : stages_) {
    std::string marker = cfg_.workspace + "/stages/" + stage->name + ".done";
    if (!file_exists(marker)) {
      try {
        stage->fn(*ctx_);
      } catch (const Error& e) {
        throw Error("stage '" + stage->name + "': " + e.what());
      }
      atomic_write_file(marker, "ok\n");
    }
    ++completed;
    if (completed >= max_stages) return;
  }
}

std::string PipelineRunner::manifest_path() const {
  return cfg_.workspace + "/manifest.txt";
}

std::map<std::tuple<std::string, std::string, int>, double> PipelineRunner::learning_curve()
    const {
  std::map<std::tuple<std::string, std::string, int>, double> out;
  for (const auto& d : {std::string("s2t"), std::string("t2s")}) {
    std::string path = cfg_.workspace + "/learning_curve_" + d + ".tsv";
    if (!file_exists(path)) continue;
    for (const auto& line : read_lines(path)) {
      auto fields = split_on(line, '\t');
      if (fields.size() != 3) continue;
      out[{fields[0], d, static_cast<int>(parse_int(fields[1]))}] = parse_double(fields[2]);
    }
  }
  return out;
}

TranslationSystem PipelineRunner::usmt_system(const std::string& direction, int iteration) const {
  return ctx_->usmt_system(direction, iteration);
}

void run_usmt(const PipelineConfig& cfg) {
  PipelineRunner(cfg, RunMode::usmt_only).run();
}

void run_unmt(const PipelineConfig& cfg) {
  PipelineRunner(cfg, RunMode::unmt_only).run();
}

void run_pipeline(const PipelineConfig& cfg) {
  PipelineRunner(cfg, RunMode::full).run();
}

}  // namespace usmt
