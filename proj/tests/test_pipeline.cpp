#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "usmt/backend.hpp"
#include "usmt/corpus.hpp"
#include "usmt/fixture.hpp"
#include "usmt/pipeline.hpp"
#include "usmt/synthetic.hpp"
#include "usmt/text.hpp"
#include "usmt/util.hpp"

using namespace usmt;

namespace {

std::string fresh_dir(const std::string& name) {
  std::string dir = "/tmp/usmt_ut_" + name;
  std::filesystem::remove_all(dir);
  make_dirs(dir);
  return dir;
}

TranslationSystem identity_system(const std::vector<std::string>& vocab) {
  auto table = std::make_shared<PhraseTable>();
  table->provenance = Provenance::induced;
  for (const auto& w : vocab) table->entries[w] = {{w, 1.0, 1.0, 1.0, 1.0}};
  std::vector<std::string> lines;
  for (const auto& w : vocab) lines.push_back(w);
  LmOptions opts;
  opts.order = 1;
  opts.estimator = LmEstimator::add_k;
  TranslationSystem sys;
  sys.table = table;
  sys.lm = std::make_shared<NGramModel>(train_lm(corpus_from_lines(lines, "x"), opts));
  sys.max_phrase_len = 1;
  return sys;
}

}  // namespace

TEST_CASE("generate_synthetic: identity system, provenance and cleanliness") {
  std::vector<std::string> vocab = {"a", "b", "c"};
  TranslationSystem sys = identity_system(vocab);
  std::vector<std::vector<std::string>> sents = {{"a", "b"}, {"c"}, {"b", "b", "a"}};

  auto forward = generate_synthetic(sys, sents, SynthDirection::forward, 3, "sys-x", *sys.lm,
                                    10, 1);
  REQUIRE(forward.pairs.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    const auto& p = forward.pairs[i];
    CHECK(p.src == sents[i]);
    CHECK(p.tgt == sents[i]);  // identity decode
    CHECK(p.iteration == 3);
    CHECK(p.system_id == "sys-x");
    CHECK(p.direction == SynthDirection::forward);
    CHECK(p.origin_index == i);
    CHECK(p.cleanliness == doctest::Approx(cleanliness(*sys.lm, p.tgt)).epsilon(1e-12));
  }

  auto back = generate_synthetic(sys, sents, SynthDirection::back, 1, "sys-y", *sys.lm, 10, 1);
  CHECK(back.pairs[0].tgt == sents[0]);  // human side is the target for back
  CHECK(back.pairs[0].cleanliness ==
        doctest::Approx(cleanliness(*sys.lm, back.pairs[0].src)).epsilon(1e-12));

  auto empty = generate_synthetic(sys, {}, SynthDirection::forward, 1, "s", *sys.lm, 10, 1);
  CHECK(empty.pairs.empty());
}

TEST_CASE("filter_keep_count follows the ceiling law") {
  CHECK(filter_keep_count(0.5, 3000000, 2) == 3000000);
  CHECK(filter_keep_count(1.0, 100, 3) == 300);
  CHECK(filter_keep_count(0.5, 3, 1) == 2);    // ceil(1.5)
  CHECK(filter_keep_count(0.3, 7, 1) == 3);    // ceil(2.1)
  CHECK(filter_keep_count(0.15, 20, 1) == 3);  // exactly 3.0
  CHECK_THROWS_AS(filter_keep_count(0.0, 10, 1), InputError);
  CHECK_THROWS_AS(filter_keep_count(1.5, 10, 1), InputError);

  // 50 randomized rational combinations against exact integer arithmetic.
  Rng rng(606);
  for (int trial = 0; trial < 50; ++trial) {
    uint64_t hundredths = 1 + rng.below(100);
    double alpha = static_cast<double>(hundredths) / 100.0;
    uint64_t n = 1 + rng.below(5000000);
    uint64_t iter = 1 + rng.below(6);
    uint64_t want = (hundredths * n * iter + 99) / 100;
    CHECK(filter_keep_count(alpha, n, iter) == want);
  }
}

TEST_CASE("filter_synthetic keeps the cleanest pairs with deterministic ties") {
  SyntheticCorpus acc;
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    SyntheticPair p;
    p.src = {"w"};
    p.tgt = {"w"};
    p.iteration = 1 + static_cast<int>(rng.below(3));
    p.origin_index = static_cast<uint64_t>(i);
    p.cleanliness = -10.0 * rng.uniform();
    if (i % 7 == 0) p.cleanliness = -5.0;  // forced ties
    acc.pairs.push_back(p);
  }
  uint64_t n = 40, iter = 2;
  auto kept = filter_synthetic(acc, 0.5, iter, n);
  REQUIRE(kept.pairs.size() == filter_keep_count(0.5, n, iter));

  // Sort oracle.
  auto order = acc.pairs;
  std::stable_sort(order.begin(), order.end(), [](const SyntheticPair& a, const SyntheticPair& b) {
    if (a.cleanliness != b.cleanliness) return a.cleanliness > b.cleanliness;
    if (a.iteration != b.iteration) return a.iteration < b.iteration;
    return a.origin_index < b.origin_index;
  });
  for (size_t i = 0; i < kept.pairs.size(); ++i) {
    CHECK(kept.pairs[i].origin_index == order[i].origin_index);
    CHECK(kept.pairs[i].cleanliness == order[i].cleanliness);
  }

  // alpha = 1 keeps everything (capped by the accumulation size).
  CHECK(filter_synthetic(acc, 1.0, 3, 1000).pairs.size() == acc.pairs.size());

  // Inverted ordering flips the kept set's extremes.
  auto inverted = filter_synthetic(acc, 0.1, 1, 40, true);
  CHECK(inverted.pairs[0].cleanliness <= kept.pairs[0].cleanliness);
}

TEST_CASE("synthetic corpus save/load round trip") {
  SyntheticCorpus corpus;
  SyntheticPair p;
  p.src = {"hello", "world"};
  p.tgt = {"hallo", "welt"};
  p.iteration = 2;
  p.system_id = "usmt-s2t-iter001";
  p.direction = SynthDirection::back;
  p.cleanliness = -1.25;
  p.origin_index = 42;
  corpus.pairs.push_back(p);
  std::string base = fresh_dir("synth") + "/synthetic";
  save_synthetic(corpus, base);
  auto loaded = load_synthetic(base);
  REQUIRE(loaded.pairs.size() == 1);
  CHECK(loaded.pairs[0].src == p.src);
  CHECK(loaded.pairs[0].tgt == p.tgt);
  CHECK(loaded.pairs[0].iteration == p.iteration);
  CHECK(loaded.pairs[0].system_id == p.system_id);
  CHECK(loaded.pairs[0].direction == p.direction);
  CHECK(loaded.pairs[0].cleanliness == p.cleanliness);
  CHECK(loaded.pairs[0].origin_index == p.origin_index);
}

TEST_CASE("config parsing: defaults, overrides and unknown keys") {
  auto cfg = parse_config({
      "# comment",
      "src_corpus = /data/src.txt",
      "tgt_corpus = /data/tgt.txt",
      "workspace = /tmp/ws",
      "merge_threshold = 0.001",
      "sample_per_iteration = 500",
      "alpha = 0.25",
      "seed = 9",
  });
  CHECK(cfg.src_corpus == "/data/src.txt");
  CHECK(cfg.sample_per_iteration == 500);
  CHECK(cfg.alpha == 0.25);
  CHECK(cfg.seed == 9);
  CHECK(cfg.delta == 10.0);
  CHECK(cfg.beta == 30.0);
  CHECK(cfg.topk == 300);
  CHECK(cfg.usmt_iterations == 4);
  CHECK(cfg.unmt_iterations == 4);
  CHECK(cfg.lm_order == 4);
  CHECK(cfg.prune_threshold == "singleton");

  CHECK_THROWS_WITH_AS(parse_config({"bogus_key = 1"}), doctest::Contains("unknown key"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config({"alpha = 2.0"}), ConfigError);
  CHECK_THROWS_AS(parse_config({"alpha"}), ConfigError);
  CHECK_THROWS_AS(parse_config({"refine_mode = sideways"}), ConfigError);
}

TEST_CASE("builtin backend: train/translate honors the line-count contract") {
  std::string dir = fresh_dir("backend");
  // Simple deterministic parallel data: a reversible word mapping.
  std::vector<std::string> src_lines, tgt_lines;
  Rng rng(4);
  std::vector<std::string> src_vocab = {"aa", "bb", "cc", "dd", "ee"};
  std::vector<std::string> tgt_vocab = {"AA", "BB", "CC", "DD", "EE"};
  for (int i = 0; i < 120; ++i) {
    std::string s, t;
    int len = 2 + static_cast<int>(rng.below(4));
    for (int k = 0; k < len; ++k) {
      size_t w = rng.below(src_vocab.size());
      if (k) {
        s += ' ';
        t += ' ';
      }
      s += src_vocab[w];
      t += tgt_vocab[w];
    }
    src_lines.push_back(s);
    tgt_lines.push_back(t);
  }
  write_lines(dir + "/train.src", src_lines);
  write_lines(dir + "/train.tgt", tgt_lines);

  BackendParams params;
  builtin_backend_train(dir + "/train.src", dir + "/train.tgt", dir + "/model", params);
  CHECK(file_exists(dir + "/model/phrase_table.txt"));
  CHECK(file_exists(dir + "/model/lm.arpa"));
  CHECK(file_exists(dir + "/model/weights.txt"));

  write_lines(dir + "/in.txt", {"aa bb", "", "cc dd ee"});
  builtin_backend_translate(dir + "/model", dir + "/in.txt", dir + "/out.txt", 1);
  auto out = read_lines(dir + "/out.txt");
  REQUIRE(out.size() == 3);
  CHECK(out[0] == "AA BB");
  CHECK(out[1].empty());
  CHECK(out[2] == "CC DD EE");

  // The dispatcher validates output line counts for external backends.
  CHECK_THROWS_AS(backend_translate("/nonexistent/backend", dir + "/model", dir + "/in.txt",
                                    dir + "/out2.txt", 1),
                  BackendError);
}

TEST_CASE("pipeline: end-to-end toy run with determinism and resume") {
  FixtureParams fp;
  fp.vocab = 40;
  fp.sentences = 700;
  fp.test_pairs = 25;
  fp.dev_pairs = 0;
  fp.one_hot = true;
  fp.seed = 21;
  Fixture fx = make_fixture(fp);
  std::string data = fresh_dir("pipe_data");
  write_fixture(fx, data);

  auto make_cfg = [&](const std::string& ws) {
    PipelineConfig cfg;
    cfg.src_corpus = data + "/src.txt";
    cfg.tgt_corpus = data + "/tgt.txt";
    cfg.src_embeddings = data + "/src.emb";
    cfg.tgt_embeddings = data + "/tgt.emb";
    cfg.test_src = data + "/test.src";
    cfg.test_tgt = data + "/test.tgt";
    cfg.workspace = ws;
    cfg.seed = 3;
    cfg.threads = 2;
    cfg.sample_per_iteration = 60;
    cfg.usmt_iterations = 1;
    cfg.unmt_iterations = 1;
    cfg.merge_threshold = 1e9;  // unigram-only phrases keep the toy fast
    cfg.phrase_passes = 1;
    cfg.topk = 8;
    cfg.word_topk = 8;
    cfg.lm_order = 2;
    cfg.beam = 10;
    cfg.tune_weights = false;
    cfg.ibm1_iterations = 3;
    return cfg;
  };

  std::string ws1 = fresh_dir("pipe_ws1");
  PipelineRunner r1(make_cfg(ws1), RunMode::full);
  r1.run();
  REQUIRE(file_exists(r1.manifest_path()));

  SUBCASE("identical config and seed give byte-identical manifests") {
    std::string ws2 = fresh_dir("pipe_ws2");
    auto cfg2 = make_cfg(ws2);
    PipelineRunner r2(cfg2, RunMode::full);
    r2.run();
    CHECK(read_file(r1.manifest_path()) == read_file(r2.manifest_path()));
  }

  SUBCASE("sampled line indices are disjoint across stages") {
    std::set<std::string> sample_files;
    namespace fs = std::filesystem;
    std::map<std::string, std::set<int64_t>> per_pool;
    for (auto it = fs::recursive_directory_iterator(ws1);
         it != fs::recursive_directory_iterator(); ++it) {
      if (!it->is_regular_file() || it->path().filename() != "samples.idx") continue;
      std::string rel = fs::relative(it->path(), fs::path(ws1)).generic_string();
      // usmt/s2t samples come from the src pool, unmt/s2t from the tgt pool.
      bool usmt = rel.rfind("usmt/", 0) == 0;
      bool s2t = rel.find("/s2t/") != std::string::npos;
      std::string pool = (usmt == s2t) ? "src" : "tgt";
      for (const auto& line : read_lines(it->path().string())) {
        int64_t idx = parse_int(line);
        CHECK(per_pool[pool].insert(idx).second);  // no repeats within a pool
      }
    }
    CHECK(per_pool.size() == 2);
  }

  SUBCASE("a run stopped after each stage resumes to the same manifest") {
    std::string reference = read_file(r1.manifest_path());
    size_t n_stages = r1.stage_names().size();
    for (size_t k = 1; k < n_stages; k += 2) {
      std::string ws = fresh_dir("pipe_resume_" + std::to_string(k));
      auto cfg = make_cfg(ws);
      {
        PipelineRunner partial(cfg, RunMode::full);
        partial.run(k);
        CHECK_FALSE(file_exists(partial.manifest_path()));
      }
      {
        PipelineRunner resumed(cfg, RunMode::full);
        resumed.run();
        CHECK(read_file(resumed.manifest_path()) == reference);
      }
    }
  }

  SUBCASE("pool exhaustion is reported with counts") {
    std::string ws = fresh_dir("pipe_exhaust");
    auto cfg = make_cfg(ws);
    cfg.sample_per_iteration = 100000;
    PipelineRunner r(cfg, RunMode::full);
    CHECK_THROWS_WITH_AS(r.run(), doctest::Contains("pool exhausted"), Error);
  }
}

TEST_CASE("unmt-run on a bare workspace demands usmt artifacts") {
  FixtureParams fp;
  fp.vocab = 20;
  fp.sentences = 200;
  fp.test_pairs = 5;
  fp.dev_pairs = 0;
  fp.seed = 5;
  Fixture fx = make_fixture(fp);
  std::string data = fresh_dir("unmt_data");
  write_fixture(fx, data);
  PipelineConfig cfg;
  cfg.src_corpus = data + "/src.txt";
  cfg.tgt_corpus = data + "/tgt.txt";
  cfg.src_embeddings = data + "/src.emb";
  cfg.tgt_embeddings = data + "/tgt.emb";
  cfg.workspace = fresh_dir("unmt_ws");
  cfg.sample_per_iteration = 20;
  cfg.usmt_iterations = 0;
  cfg.unmt_iterations = 1;
  cfg.merge_threshold = 1e9;
  PipelineRunner r(cfg, RunMode::unmt_only);
  CHECK_THROWS_WITH_AS(r.run(), doctest::Contains("missing usmt system"), Error);
}
