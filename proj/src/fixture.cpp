#include "usmt/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

namespace {

std::string word_name(const char* prefix, int i) {
  std::string n = std::to_string(i);
  while (n.size() < 3) n = "0" + n;
  return prefix + n;
}

struct Chain {
  std::vector<std::vector<int>> successors;
  std::vector<double> start_weights;  // cumulative

  int draw_start(Rng& rng) const {
    double u = rng.uniform() * start_weights.back();
    auto it = std::lower_bound(start_weights.begin(), start_weights.end(), u);
    return static_cast<int>(it - start_weights.begin());
  }

  int draw_next(Rng& rng, int word) const {
    const auto& succ = successors[static_cast<size_t>(word)];
    // Zipf-ish over the successor list.
    double total = 0.0;
    for (size_t r = 0; r < succ.size(); ++r) total += 1.0 / static_cast<double>(r + 1);
    double u = rng.uniform() * total;
    double acc = 0.0;
    for (size_t r = 0; r < succ.size(); ++r) {
      acc += 1.0 / static_cast<double>(r + 1);
      if (u <= acc) return succ[r];
    }
    return succ.back();
  }
};

Chain build_chain(int vocab, int successors, Rng& rng) {
  Chain chain;
  chain.successors.resize(static_cast<size_t>(vocab));
  std::vector<int> all(static_cast<size_t>(vocab));
  for (int i = 0; i < vocab; ++i) all[static_cast<size_t>(i)] = i;
  for (int w = 0; w < vocab; ++w) {
    std::vector<int> pool = all;
    rng.shuffle(pool);
    pool.resize(static_cast<size_t>(std::min(successors, vocab)));
    chain.successors[static_cast<size_t>(w)] = std::move(pool);
  }
  chain.start_weights.resize(static_cast<size_t>(vocab));
  double acc = 0.0;
  for (int i = 0; i < vocab; ++i) {
    acc += 1.0 / static_cast<double>(i + 1);
    chain.start_weights[static_cast<size_t>(i)] = acc;
  }
  return chain;
}

std::vector<int> sample_sentence(const Chain& chain, Rng& rng, int min_len, int max_len) {
  int len = min_len + static_cast<int>(rng.below(static_cast<uint64_t>(max_len - min_len + 1)));
  std::vector<int> out;
  out.reserve(static_cast<size_t>(len));
  int w = chain.draw_start(rng);
  out.push_back(w);
  for (int i = 1; i < len; ++i) {
    w = chain.draw_next(rng, w);
    out.push_back(w);
  }
  return out;
}

std::string render(const std::vector<int>& sent, const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < sent.size(); ++i) {
    if (i) out += ' ';
    out += words[static_cast<size_t>(sent[i])];
  }
  return out;
}

std::vector<double> unit_normal_vec(int dim, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(dim));
  double norm2 = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  double norm = std::sqrt(norm2);
  if (norm > 0) {
    for (auto& x : v) x /= norm;
  }
  return v;
}

}  // namespace

Fixture make_fixture(const FixtureParams& p) {
  if (p.vocab < 2 || p.sentences < 1) throw InputError("fixture: vocab/sentences too small");
  Rng rng(p.seed);
  Fixture fx;

  for (int i = 0; i < p.vocab; ++i) {
    fx.src_words.push_back(word_name("s", i));
    fx.tgt_words.push_back(word_name("t", i));
  }
  fx.cipher.resize(static_cast<size_t>(p.vocab));
  for (int i = 0; i < p.vocab; ++i) fx.cipher[static_cast<size_t>(i)] = i;
  {
    Rng r = rng.fork(1);
    fx.cipher.clear();
    for (int i = 0; i < p.vocab; ++i) fx.cipher.push_back(i);
    r.shuffle(fx.cipher);
  }

  Chain chain = build_chain(p.vocab, p.successors, rng);

  auto cipher_sent = [&](const std::vector<int>& sent) {
    std::vector<int> out(sent.size());
    for (size_t i = 0; i < sent.size(); ++i) {
      out[i] = fx.cipher[static_cast<size_t>(sent[i])];
    }
    return out;
  };

  // Monolingual corpora: independent samples from the same chain.
  Rng src_rng = rng.fork(2);
  std::vector<int> seen(static_cast<size_t>(p.vocab), 0);
  for (int i = 0; i < p.sentences; ++i) {
    auto s = sample_sentence(chain, src_rng, p.min_len, p.max_len);
    for (int w : s) ++seen[static_cast<size_t>(w)];
    fx.src_corpus.push_back(render(s, fx.src_words));
  }
  // Force full vocabulary coverage so induction and the LM see every word.
  for (int w = 0; w < p.vocab; ++w) {
    while (seen[static_cast<size_t>(w)] < 3) {
      std::vector<int> s{w};
      int cur = w;
      for (int k = 1; k < p.min_len; ++k) {
        cur = chain.draw_next(src_rng, cur);
        s.push_back(cur);
      }
      for (int x : s) ++seen[static_cast<size_t>(x)];
      fx.src_corpus.push_back(render(s, fx.src_words));
    }
  }

  Rng tgt_rng = rng.fork(3);
  std::fill(seen.begin(), seen.end(), 0);
  for (int i = 0; i < p.sentences; ++i) {
    auto s = sample_sentence(chain, tgt_rng, p.min_len, p.max_len);
    for (int w : s) ++seen[static_cast<size_t>(w)];
    fx.tgt_corpus.push_back(render(cipher_sent(s), fx.tgt_words));
  }
  for (int w = 0; w < p.vocab; ++w) {
    while (seen[static_cast<size_t>(w)] < 3) {
      std::vector<int> s{w};
      int cur = w;
      for (int k = 1; k < p.min_len; ++k) {
        cur = chain.draw_next(tgt_rng, cur);
        s.push_back(cur);
      }
      for (int x : s) ++seen[static_cast<size_t>(x)];
      fx.tgt_corpus.push_back(render(cipher_sent(s), fx.tgt_words));
    }
  }

  Rng eval_rng = rng.fork(4);
  for (int i = 0; i < p.test_pairs; ++i) {
    auto s = sample_sentence(chain, eval_rng, p.min_len, p.max_len);
    fx.test_src.push_back(render(s, fx.src_words));
    fx.test_tgt.push_back(render(cipher_sent(s), fx.tgt_words));
  }
  for (int i = 0; i < p.dev_pairs; ++i) {
    auto s = sample_sentence(chain, eval_rng, p.min_len, p.max_len);
    fx.dev_src.push_back(render(s, fx.src_words));
    fx.dev_tgt.push_back(render(cipher_sent(s), fx.tgt_words));
  }

  // Embeddings: the cipher twin of each source word shares (a noisy copy of)
  // its vector, so cosine ranking recovers the dictionary.
  Rng emb_rng = rng.fork(5);
  int dim = p.one_hot ? p.vocab : p.dim;
  fx.src_emb = EmbeddingSpace(dim, "src");
  fx.tgt_emb = EmbeddingSpace(dim, "tgt");
  std::vector<std::vector<double>> src_vecs(static_cast<size_t>(p.vocab));
  for (int i = 0; i < p.vocab; ++i) {
    if (p.one_hot) {
      std::vector<double> v(static_cast<size_t>(dim), 0.0);
      v[static_cast<size_t>(i)] = 1.0;
      src_vecs[static_cast<size_t>(i)] = std::move(v);
    } else {
      src_vecs[static_cast<size_t>(i)] = unit_normal_vec(dim, emb_rng);
    }
  }
  std::vector<std::vector<double>> tgt_vecs(static_cast<size_t>(p.vocab));
  for (int i = 0; i < p.vocab; ++i) {
    auto v = src_vecs[static_cast<size_t>(i)];
    if (p.noise_sigma > 0.0) {
      for (auto& x : v) x += p.noise_sigma * emb_rng.normal();
    }
    tgt_vecs[static_cast<size_t>(fx.cipher[static_cast<size_t>(i)])] = std::move(v);
  }
  for (int i = 0; i < p.vocab; ++i) {
    fx.src_emb.add(fx.src_words[static_cast<size_t>(i)], src_vecs[static_cast<size_t>(i)]);
    fx.tgt_emb.add(fx.tgt_words[static_cast<size_t>(i)], tgt_vecs[static_cast<size_t>(i)]);
  }
  return fx;
}

void write_fixture(const Fixture& fx, const std::string& dir) {
  make_dirs(dir);
  write_lines(dir + "/src.txt", fx.src_corpus);
  write_lines(dir + "/tgt.txt", fx.tgt_corpus);
  write_lines(dir + "/test.src", fx.test_src);
  write_lines(dir + "/test.tgt", fx.test_tgt);
  write_lines(dir + "/dev.src", fx.dev_src);
  write_lines(dir + "/dev.tgt", fx.dev_tgt);
  save_embeddings_file(fx.src_emb, dir + "/src.emb");
  save_embeddings_file(fx.tgt_emb, dir + "/tgt.emb");
}

}  // namespace usmt
