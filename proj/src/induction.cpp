#include "usmt/induction.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "usmt/util.hpp"

namespace usmt {

namespace {

// Stored lexical scores are floored at this value so phrase-table entries
// stay strictly positive (log-space safe); lexical_prob itself is exact.
constexpr double kMinStoredLex = 1e-30;

// Word-level translation distribution: softmax over the word_topk nearest
// target-vocabulary words. Words outside the candidate set have prob 0.
using WordDistro = std::unordered_map<std::string, double>;

WordDistro word_distro(const std::vector<double>& src_vec, const EmbeddingSpace& tgt_space,
                       size_t word_topk, double beta) {
  std::vector<std::pair<double, const std::string*>> scored;
  scored.reserve(tgt_space.size());
  for (const auto& tok : tgt_space.tokens()) {
    scored.emplace_back(cosine(src_vec, tgt_space.vec(tok)), &tok);
  }
  auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  };
  size_t keep = std::min(word_topk, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<ptrdiff_t>(keep), scored.end(),
                    better);
  scored.resize(keep);
  std::vector<double> cos(keep);
  for (size_t i = 0; i < keep; ++i) cos[i] = scored[i].first;
  auto probs = softmax_scaled(cos, beta);
  WordDistro d;
  d.reserve(keep);
  for (size_t i = 0; i < keep; ++i) d.emplace(*scored[i].second, probs[i]);
  return d;
}

std::vector<std::string> sorted_unique_components(const std::vector<std::string>& phrases) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& p : phrases) {
    for (auto& c : PhraseInventory::components(p)) {
      if (seen.insert(c).second) out.push_back(std::move(c));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double lexical_prob(
    const std::vector<std::string>& src_words, const std::vector<std::string>& tgt_words,
    const std::function<double(const std::string&, const std::string&)>& word_prob) {
  if (src_words.empty() || tgt_words.empty()) {
    throw InputError("lexical_prob: empty phrase");
  }
  double product = 1.0;
  for (const auto& s : src_words) {
    double best = 0.0;
    for (const auto& t : tgt_words) {
      best = std::max(best, word_prob(s, t));
    }
    product *= best;
  }
  return product / static_cast<double>(src_words.size());
}

std::string phrase_to_table_key(std::string_view phrase) {
  auto comps = PhraseInventory::components(phrase);
  return join(comps, " ");
}

PhraseInventory filter_inventory_by_vocab(const PhraseInventory& inv,
                                          const EmbeddingSpace& space) {
  PhraseInventory out;
  out.max_components = inv.max_components;
  for (const auto& e : inv.entries) {
    bool ok = true;
    for (const auto& c : PhraseInventory::components(e.phrase)) {
      if (!space.contains(c)) {
        ok = false;
        break;
      }
    }
    if (ok) out.entries.push_back(e);
  }
  return out;
}

PhraseTable induce_table(const PhraseInventory& src_inv, const PhraseInventory& tgt_inv,
                         const EmbeddingSpace& src_space, const EmbeddingSpace& tgt_space,
                         const InduceOptions& opts) {
  if (src_inv.entries.empty() || tgt_inv.entries.empty()) {
    throw InputError("induce_table: empty inventory");
  }

  PhraseMatrix tgt_matrix = build_phrase_matrix(tgt_inv, tgt_space);

  // Forward pass: k-best candidates per source phrase by cosine.
  std::vector<RankedCandidates> ranked(src_inv.entries.size());
  parallel_for(src_inv.entries.size(), opts.threads, [&](size_t i) {
    const auto& phrase = src_inv.entries[i].phrase;
    auto sv = phrase_embedding(phrase, src_space);
    ranked[i] = topk_from_matrix(phrase, sv, tgt_matrix, opts.k, opts.beta);
  });

  // Backward probabilities: for each target phrase, softmax over the source
  // phrases that retained it among their k-best.
  std::unordered_map<std::string, std::vector<std::pair<size_t, size_t>>> retainers;
  for (size_t i = 0; i < ranked.size(); ++i) {
    for (size_t j = 0; j < ranked[i].items.size(); ++j) {
      retainers[ranked[i].items[j].phrase].emplace_back(i, j);
    }
  }
  std::unordered_map<std::string, std::vector<double>> p_bwd_of;
  p_bwd_of.reserve(retainers.size());
  for (const auto& [tgt, sources] : retainers) {
    std::vector<double> cos(sources.size());
    for (size_t s = 0; s < sources.size(); ++s) {
      cos[s] = ranked[sources[s].first].items[sources[s].second].cosine;
    }
    p_bwd_of.emplace(tgt, softmax_scaled(cos, opts.beta));
  }
  std::unordered_map<std::string, std::unordered_map<std::string, double>> p_bwd;
  for (const auto& [tgt, sources] : retainers) {
    const auto& probs = p_bwd_of.at(tgt);
    auto& row = p_bwd[tgt];
    for (size_t s = 0; s < sources.size(); ++s) {
      row.emplace(ranked[sources[s].first].source, probs[s]);
    }
  }

  // Word-level distributions for the lexical scores, both directions.
  std::vector<std::string> src_phrases, tgt_phrases;
  for (const auto& e : src_inv.entries) src_phrases.push_back(e.phrase);
  for (const auto& [tgt, _] : retainers) tgt_phrases.push_back(tgt);
  std::sort(tgt_phrases.begin(), tgt_phrases.end());
  auto src_words = sorted_unique_components(src_phrases);
  auto tgt_words = sorted_unique_components(tgt_phrases);

  std::vector<WordDistro> fwd_distros(src_words.size());
  parallel_for(src_words.size(), opts.threads, [&](size_t i) {
    fwd_distros[i] = word_distro(src_space.vec(src_words[i]), tgt_space, opts.word_topk, opts.beta);
  });
  std::vector<WordDistro> bwd_distros(tgt_words.size());
  parallel_for(tgt_words.size(), opts.threads, [&](size_t i) {
    bwd_distros[i] = word_distro(tgt_space.vec(tgt_words[i]), src_space, opts.word_topk, opts.beta);
  });
  std::unordered_map<std::string, const WordDistro*> fwd_lookup, bwd_lookup;
  for (size_t i = 0; i < src_words.size(); ++i) fwd_lookup.emplace(src_words[i], &fwd_distros[i]);
  for (size_t i = 0; i < tgt_words.size(); ++i) bwd_lookup.emplace(tgt_words[i], &bwd_distros[i]);

  auto fwd_word_prob = [&](const std::string& s, const std::string& t) {
    const auto& d = *fwd_lookup.at(s);
    auto it = d.find(t);
    return it == d.end() ? 0.0 : it->second;
  };
  auto bwd_word_prob = [&](const std::string& t, const std::string& s) {
    const auto& d = *bwd_lookup.at(t);
    auto it = d.find(s);
    return it == d.end() ? 0.0 : it->second;
  };

  PhraseTable table;
  table.provenance = Provenance::induced;
  std::vector<std::pair<std::string, std::vector<PhraseTable::Candidate>>> rows(ranked.size());
  parallel_for(ranked.size(), opts.threads, [&](size_t i) {
    const auto& r = ranked[i];
    auto s_comps = PhraseInventory::components(r.source);
    std::vector<PhraseTable::Candidate> cands;
    cands.reserve(r.items.size());
    for (const auto& item : r.items) {
      auto t_comps = PhraseInventory::components(item.phrase);
      PhraseTable::Candidate c;
      c.target = phrase_to_table_key(item.phrase);
      c.p_fwd = item.prob;
      c.p_bwd = p_bwd.at(item.phrase).at(r.source);
      c.lex_fwd = std::max(lexical_prob(s_comps, t_comps, fwd_word_prob), kMinStoredLex);
      c.lex_bwd = std::max(lexical_prob(t_comps, s_comps, bwd_word_prob), kMinStoredLex);
      cands.push_back(std::move(c));
    }
    rows[i] = {phrase_to_table_key(r.source), std::move(cands)};
  });
  for (auto& [key, cands] : rows) {
    table.entries.emplace(std::move(key), std::move(cands));
  }
  return table;
}

}  // namespace usmt
