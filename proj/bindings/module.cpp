#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "usmt/align.hpp"
#include "usmt/corpus.hpp"
#include "usmt/decoder.hpp"
#include "usmt/embedding.hpp"
#include "usmt/evaltune.hpp"
#include "usmt/fixture.hpp"
#include "usmt/induction.hpp"
#include "usmt/lm.hpp"
#include "usmt/pipeline.hpp"
#include "usmt/synthetic.hpp"
#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace py = pybind11;
using namespace usmt;

namespace {

std::vector<std::string> escape_all(std::vector<std::string> tokens) {
  for (auto& t : tokens) t = escape_token(t);
  return tokens;
}

Corpus corpus_from_python(const std::vector<std::string>& lines) {
  return corpus_from_lines(lines, "mono");
}

std::string detok(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += unescape_token(tokens[i]);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "unsupervised phrase-based MT pipeline core";

  py::register_exception<Error>(m, "UsmtError");

  m.def("tokenize", [](const std::string& line) { return tokenize(line); });

  m.def(
      "phrase_score",
      [](int64_t pair_freq, int64_t left, int64_t right, double delta) {
        return phrase_score(pair_freq, left, right, delta);
      },
      py::arg("pair_freq"), py::arg("left_freq"), py::arg("right_freq"), py::arg("delta") = 10.0);

  m.def(
      "collect_phrases",
      [](const std::vector<std::string>& lines, double delta, double threshold, int passes,
         int max_len) {
        CollectOptions opts;
        opts.delta = delta;
        opts.threshold = threshold;
        opts.passes = passes;
        opts.max_components = max_len;
        auto res = collect_phrases(corpus_from_python(lines), opts);
        std::vector<std::pair<std::string, int64_t>> inv;
        for (const auto& e : res.inventory.entries) inv.emplace_back(e.phrase, e.freq);
        std::vector<std::string> merged;
        for (const auto& s : res.merged.sentences) merged.push_back(join(s, " "));
        return std::make_pair(inv, merged);
      },
      py::arg("lines"), py::arg("delta") = 10.0, py::arg("threshold"), py::arg("passes") = 6,
      py::arg("max_len") = 6);

  m.def(
      "lexical_prob",
      [](const std::vector<std::vector<double>>& p) {
        if (p.empty()) throw InputError("lexical_prob: empty matrix");
        std::vector<std::string> src(p.size()), tgt(p[0].size());
        for (size_t i = 0; i < src.size(); ++i) src[i] = "s" + std::to_string(i);
        for (size_t j = 0; j < tgt.size(); ++j) tgt[j] = "t" + std::to_string(j);
        return lexical_prob(src, tgt, [&](const std::string& s, const std::string& t) {
          size_t i = static_cast<size_t>(std::stoul(s.substr(1)));
          size_t j = static_cast<size_t>(std::stoul(t.substr(1)));
          return p[i][j];
        });
      },
      py::arg("word_probs"), "Eq.-3 style lexical probability of a word-probability matrix");

  m.def("fisher_pvalue", &fisher_pvalue, py::arg("c_st"), py::arg("c_s"), py::arg("c_t"),
        py::arg("n"));
  m.def("filter_keep_count", &filter_keep_count, py::arg("alpha"), py::arg("n"),
        py::arg("iteration"));

  py::class_<EmbeddingSpace>(m, "EmbeddingSpace")
      .def_static(
          "load",
          [](const std::string& path, const std::string& language, size_t max_vocab) {
            return load_embeddings_file(path, language, max_vocab);
          },
          py::arg("path"), py::arg("language") = "mono", py::arg("max_vocab") = 0)
      .def_property_readonly("dim", &EmbeddingSpace::dim)
      .def("__len__", &EmbeddingSpace::size)
      .def("__contains__",
           [](const EmbeddingSpace& s, const std::string& tok) {
             return s.contains(escape_token(tok));
           })
      .def("vec",
           [](const EmbeddingSpace& s, const std::string& tok) {
             return s.vec(escape_token(tok));
           });

  m.def(
      "topk_candidates",
      [](const std::string& src_phrase, const std::vector<std::string>& candidates,
         const EmbeddingSpace& src_space, const EmbeddingSpace& tgt_space, size_t k,
         double beta) {
        PhraseInventory inv;
        for (const auto& c : candidates) inv.entries.push_back({escape_token(c), 1});
        auto ranked = topk_candidates(escape_token(src_phrase), inv, src_space, tgt_space, k, beta);
        std::vector<std::tuple<std::string, double, double>> out;
        for (const auto& item : ranked.items) {
          out.emplace_back(unescape_token(item.phrase), item.cosine, item.prob);
        }
        return out;
      },
      py::arg("source"), py::arg("candidates"), py::arg("src_space"), py::arg("tgt_space"),
      py::arg("k") = 300, py::arg("beta") = 30.0);

  py::class_<NGramModel>(m, "NGramModel")
      .def_static(
          "train",
          [](const std::vector<std::string>& lines, int order, const std::string& estimator,
             double add_k) {
            LmOptions opts;
            opts.order = order;
            opts.add_k = add_k;
            opts.estimator = estimator == "kn"      ? LmEstimator::kneser_ney
                             : estimator == "add-k" ? LmEstimator::add_k
                                                    : LmEstimator::kn_with_fallback;
            return train_lm(corpus_from_python(lines), opts);
          },
          py::arg("lines"), py::arg("order") = 4, py::arg("estimator") = "auto",
          py::arg("add_k") = 0.1)
      .def_static("load", [](const std::string& path) { return load_arpa_file(path); })
      .def("save", [](const NGramModel& m_, const std::string& path) { save_arpa_file(m_, path); })
      .def_property_readonly("order", &NGramModel::order)
      .def_property_readonly("vocab_size", &NGramModel::vocab_size)
      .def("score",
           [](const NGramModel& m_, const std::vector<std::string>& tokens) {
             return score_sentence(m_, escape_all(tokens));
           })
      .def("cleanliness", [](const NGramModel& m_, const std::vector<std::string>& tokens) {
        return cleanliness(m_, escape_all(tokens));
      });

  py::class_<Ibm1Result>(m, "Ibm1Result")
      .def_property_readonly("log_likelihood",
                             [](const Ibm1Result& r) { return r.log_likelihood; })
      .def("prob", [](const Ibm1Result& r, const std::string& src, const std::string& tgt) {
        return r.ttable.prob(escape_token(src), escape_token(tgt));
      });

  m.def(
      "train_ibm1",
      [](const std::vector<std::pair<std::string, std::string>>& pairs, int iterations,
         bool use_null) {
        ParallelCorpus corpus;
        for (const auto& [s, t] : pairs) {
          SentencePair p;
          p.src = escape_all(tokenize(s));
          p.tgt = escape_all(tokenize(t));
          corpus.push_back(std::move(p));
        }
        Ibm1Options opts;
        opts.iterations = iterations;
        opts.use_null = use_null;
        return train_ibm1(corpus, opts);
      },
      py::arg("pairs"), py::arg("iterations") = 5, py::arg("use_null") = true);

  m.def(
      "extract_phrases",
      [](const std::string& src, const std::string& tgt,
         const std::vector<std::pair<int, int>>& links, int max_len) {
        SentencePair pair;
        pair.src = escape_all(tokenize(src));
        pair.tgt = escape_all(tokenize(tgt));
        WordAlignment a;
        for (const auto& [i, j] : links) a.links.emplace(i, j);
        auto pairs = extract_phrases(pair, a, max_len);
        std::vector<std::pair<std::string, std::string>> out;
        for (auto& [s, t] : pairs) {
          out.emplace_back(detok(split_ws(s)), detok(split_ws(t)));
        }
        return out;
      },
      py::arg("src"), py::arg("tgt"), py::arg("links"), py::arg("max_len") = 6);

  m.def(
      "bleu",
      [](const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
         bool smoothed) {
        std::vector<std::vector<std::string>> h, r;
        for (const auto& line : hyp) h.push_back(escape_all(tokenize(line)));
        for (const auto& line : ref) r.push_back(escape_all(tokenize(line)));
        auto report = bleu(h, r, smoothed);
        py::dict d;
        d["bleu"] = report.bleu;
        d["precisions"] = report.precisions;
        d["brevity_penalty"] = report.brevity_penalty;
        d["hyp_len"] = report.hyp_len;
        d["ref_len"] = report.ref_len;
        return d;
      },
      py::arg("hypotheses"), py::arg("references"), py::arg("smoothed") = false);

  py::class_<TranslationSystem>(m, "TranslationSystem")
      .def_static(
          "from_files",
          [](const std::string& table, const std::string& lm, const std::string& weights,
             const std::string& reordering, const std::string& provenance, int distortion_limit) {
            TranslationSystem sys;
            sys.table = std::make_shared<PhraseTable>(
                load_phrase_table(table, provenance_from_name(provenance)));
            sys.lm = std::make_shared<NGramModel>(load_arpa_file(lm));
            if (!weights.empty()) sys.weights = load_weights(weights);
            if (!reordering.empty()) {
              sys.reordering = std::make_shared<ReorderingModel>(load_reordering(reordering));
            }
            sys.distortion_limit = distortion_limit;
            sys.max_phrase_len = max_source_phrase_len(*sys.table);
            return sys;
          },
          py::arg("table"), py::arg("lm"), py::arg("weights") = "", py::arg("reordering") = "",
          py::arg("provenance") = "estimated", py::arg("distortion_limit") = 6)
      .def(
          "decode",
          [](const TranslationSystem& sys, const std::string& line, size_t beam) {
            auto decoded = decode(escape_all(tokenize(line)), sys, beam);
            return detok(decoded.tokens);
          },
          py::arg("line"), py::arg("beam") = 20);

  m.def(
      "make_fixture",
      [](const std::string& out_dir, int vocab, int sentences, double noise, int dim,
         bool one_hot, uint64_t seed) {
        FixtureParams p;
        p.vocab = vocab;
        p.sentences = sentences;
        p.noise_sigma = noise;
        p.dim = dim;
        p.one_hot = one_hot;
        p.seed = seed;
        write_fixture(make_fixture(p), out_dir);
      },
      py::arg("out_dir"), py::arg("vocab") = 100, py::arg("sentences") = 1000,
      py::arg("noise") = 0.0, py::arg("dim") = 24, py::arg("one_hot") = true, py::arg("seed") = 1);

  m.def("run_pipeline", [](const std::string& config_path) {
    run_pipeline(load_config(config_path));
  });
}
