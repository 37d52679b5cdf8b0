#include "usmt/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

namespace {

std::vector<std::string> suffix(const std::vector<std::string>& words, size_t n) {
  if (n >= words.size()) return words;
  return std::vector<std::string>(words.end() - static_cast<ptrdiff_t>(n), words.end());
}

// Applies the vocabulary cap: words outside the top-cap by frequency (ties
// by lexicographic order) become <unk> before counting.
Corpus apply_vocab_cap(const Corpus& corpus, size_t cap) {
  if (cap == 0) return corpus;
  std::unordered_map<std::string, int64_t> freq;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s) ++freq[t];
  if (freq.size() <= cap) return corpus;
  std::vector<std::pair<std::string, int64_t>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  items.resize(cap);
  std::unordered_map<std::string, bool> keep;
  for (const auto& [w, _] : items) keep[w] = true;
  Corpus out;
  out.language = corpus.language;
  out.sentences = corpus.sentences;
  for (auto& s : out.sentences)
    for (auto& t : s)
      if (!keep.count(t)) t = kUnk;
  return out;
}

struct Discounts {
  double d1 = 0.0, d2 = 0.0, d3 = 0.0;

  double applied(int64_t count) const {
    if (count >= 3) return d3;
    if (count == 2) return d2;
    if (count == 1) return d1;
    return 0.0;
  }
};

}  // namespace

std::vector<std::unordered_map<std::string, int64_t>> raw_ngram_counts(const Corpus& corpus,
                                                                       int order) {
  std::vector<std::unordered_map<std::string, int64_t>> counts(static_cast<size_t>(order));
  for (const auto& sent : corpus.sentences) {
    std::vector<std::string> seq;
    seq.reserve(sent.size() + 2);
    seq.push_back(kBos);
    seq.insert(seq.end(), sent.begin(), sent.end());
    seq.push_back(kEos);
    for (size_t i = 0; i < seq.size(); ++i) {
      for (int m = 1; m <= order; ++m) {
        if (i + 1 < static_cast<size_t>(m)) break;
        std::vector<std::string> gram(seq.begin() + static_cast<ptrdiff_t>(i + 1 - static_cast<size_t>(m)),
                                      seq.begin() + static_cast<ptrdiff_t>(i + 1));
        ++counts[static_cast<size_t>(m - 1)][NGramModel::key(gram)];
      }
    }
  }
  return counts;
}

std::string NGramModel::key(const std::vector<std::string>& words) {
  return join(words, " ");
}

bool NGramModel::in_vocab(const std::string& token) const {
  return !tables_.empty() && tables_[0].count(token) > 0;
}

std::vector<std::string> NGramModel::vocabulary() const {
  std::vector<std::string> v;
  if (tables_.empty()) return v;
  v.reserve(tables_[0].size());
  for (const auto& [w, _] : tables_[0]) v.push_back(w);
  std::sort(v.begin(), v.end());
  return v;
}

size_t NGramModel::ngram_count(int order) const {
  return tables_[static_cast<size_t>(order - 1)].size();
}

double NGramModel::log10_prob(const std::vector<std::string>& context,
                              const std::string& word) const {
  int max_m = std::min<int>(order_, static_cast<int>(context.size()) + 1);
  double backed_off = 0.0;
  for (int m = max_m; m >= 1; --m) {
    auto ctx = suffix(context, static_cast<size_t>(m - 1));
    std::string k = ctx.empty() ? word : key(ctx) + " " + word;
    const auto& tbl = tables_[static_cast<size_t>(m - 1)];
    auto it = tbl.find(k);
    if (it != tbl.end()) return backed_off + it->second.lp;
    if (m > 1) {
      const auto& ctx_tbl = tables_[static_cast<size_t>(m - 2)];
      auto cit = ctx_tbl.find(key(ctx));
      if (cit != ctx_tbl.end()) backed_off += cit->second.bo;
    }
  }
  // word is outside the vocabulary; fall back to <unk>
  auto it = tables_[0].find(kUnk);
  if (it == tables_[0].end()) throw Error("model has no <unk> entry");
  return backed_off + it->second.lp;
}

namespace {

using CountTables = std::vector<std::unordered_map<std::string, int64_t>>;
using EntryTables = std::vector<std::unordered_map<std::string, NGramModel::Entry>>;

std::string drop_first_word(const std::string& k) {
  auto sp = k.find(' ');
  return sp == std::string::npos ? std::string() : k.substr(sp + 1);
}

std::string drop_last_word(const std::string& k) {
  auto sp = k.rfind(' ');
  return sp == std::string::npos ? std::string() : k.substr(0, sp);
}

std::string last_word(const std::string& k) {
  auto sp = k.rfind(' ');
  return sp == std::string::npos ? k : k.substr(sp + 1);
}

// Interpolated add-k. p_m(w|h) = (c(hw) + kV * p_{m-1}(w|h')) / (C(h) + kV)
// with kV = add_k * |V|; this factorization is exactly representable in
// backoff form with b(h) = kV / (C(h) + kV).
EntryTables estimate_add_k(const CountTables& counts, int order, double add_k) {
  std::unordered_map<std::string, int64_t> vocab_counts = counts[0];
  vocab_counts.emplace(kUnk, 0);
  double vsize = static_cast<double>(vocab_counts.size());
  double kv = add_k * vsize;

  // Continuation totals C(h) per context at each order.
  std::vector<std::unordered_map<std::string, int64_t>> ctx_totals(counts.size());
  for (size_t m = 1; m < counts.size(); ++m) {
    for (const auto& [k, c] : counts[m]) ctx_totals[m][drop_last_word(k)] += c;
  }
  int64_t unigram_total = 0;
  for (const auto& [w, c] : counts[0]) unigram_total += c;

  EntryTables tables(static_cast<size_t>(order));
  // Unigrams over the full vocabulary (including <unk> with count 0).
  std::unordered_map<std::string, double> prev_probs;
  for (const auto& [w, c] : vocab_counts) {
    double p = (static_cast<double>(c) + add_k) / (static_cast<double>(unigram_total) + kv);
    prev_probs[w] = p;
    tables[0][w].lp = std::log10(p);
  }
  for (int m = 2; m <= order; ++m) {
    auto& tbl = tables[static_cast<size_t>(m - 1)];
    std::unordered_map<std::string, double> cur_probs;
    for (const auto& [k, c] : counts[static_cast<size_t>(m - 1)]) {
      std::string h = drop_last_word(k);
      std::string w = last_word(k);
      std::string back_key = m == 2 ? w : drop_first_word(h) + " " + w;
      double lower = prev_probs.at(back_key);
      double total = static_cast<double>(ctx_totals[static_cast<size_t>(m - 1)].at(h));
      double p = (static_cast<double>(c) + kv * lower) / (total + kv);
      cur_probs[k] = p;
      tbl[k].lp = std::log10(p);
    }
    // Backoff weights attach to the context's entry one order down.
    auto& ctx_tbl = tables[static_cast<size_t>(m - 2)];
    for (const auto& [h, total] : ctx_totals[static_cast<size_t>(m - 1)]) {
      auto it = ctx_tbl.find(h);
      if (it != ctx_tbl.end()) {
        it->second.bo = std::log10(kv / (static_cast<double>(total) + kv));
      }
    }
    // Lower-order probs beyond this point come from cur_probs keyed by the
    // full m-gram; rebuild the lookup for the next order.
    prev_probs = std::move(cur_probs);
  }
  return tables;
}

// Interpolated modified Kneser-Ney (Chen & Goodman). Throws Error when any
// order's count-of-counts cannot produce valid discounts.
EntryTables estimate_kneser_ney(const CountTables& counts, int order) {
  size_t n = static_cast<size_t>(order);

  // Adjusted counts: highest order raw; lower orders use the number of
  // distinct left extensions, except n-grams starting with <s> which keep
  // raw counts (nothing can precede <s>).
  CountTables adjusted(n);
  adjusted[n - 1] = counts[n - 1];
  for (size_t m = n - 1; m >= 1; --m) {
    auto& adj = adjusted[m - 1];
    for (const auto& [k, c] : counts[m]) {
      (void)c;
      adj[drop_first_word(k)] += 1;
    }
    std::string bos_prefix = std::string(kBos);
    for (const auto& [k, c] : counts[m - 1]) {
      if (k == bos_prefix || k.rfind(bos_prefix + " ", 0) == 0) {
        adj[k] = c;
      } else if (!adj.count(k)) {
        // No left extension and does not start with <s>: can only happen when
        // this order is the highest in some degenerate setup; keep raw.
        adj[k] = c;
      }
    }
    if (m == 1) break;
  }

  // Per-order discounts from count-of-counts of adjusted counts.
  std::vector<Discounts> discounts(n);
  for (size_t m = 0; m < n; ++m) {
    int64_t n1 = 0, n2 = 0, n3 = 0, n4 = 0;
    for (const auto& [k, a] : adjusted[m]) {
      if (a == 1) ++n1;
      else if (a == 2) ++n2;
      else if (a == 3) ++n3;
      else if (a == 4) ++n4;
    }
    if (n1 == 0 || n2 == 0 || n3 == 0 || n4 == 0) {
      throw Error("kneser-ney: corpus too small for discount estimation at order " +
                  std::to_string(m + 1));
    }
    double y = static_cast<double>(n1) / (static_cast<double>(n1) + 2.0 * static_cast<double>(n2));
    Discounts d;
    d.d1 = 1.0 - 2.0 * y * static_cast<double>(n2) / static_cast<double>(n1);
    d.d2 = 2.0 - 3.0 * y * static_cast<double>(n3) / static_cast<double>(n2);
    d.d3 = 3.0 - 4.0 * y * static_cast<double>(n4) / static_cast<double>(n3);
    if (!(d.d1 >= 0.0 && d.d1 <= 1.0 && d.d2 >= 0.0 && d.d2 <= 2.0 && d.d3 >= 0.0 &&
          d.d3 <= 3.0)) {
      throw Error("kneser-ney: invalid discounts at order " + std::to_string(m + 1));
    }
    discounts[m] = d;
  }

  // Context totals and gamma numerators per order.
  std::vector<std::unordered_map<std::string, int64_t>> totals(n);
  std::vector<std::unordered_map<std::string, double>> gamma_num(n);
  for (size_t m = 1; m < n; ++m) {
    for (const auto& [k, a] : adjusted[m]) {
      std::string h = drop_last_word(k);
      totals[m][h] += a;
      gamma_num[m][h] += discounts[m].applied(a);
    }
  }
  int64_t a1_total = 0;
  double gamma1_num = 0.0;
  for (const auto& [w, a] : adjusted[0]) {
    a1_total += a;
    gamma1_num += discounts[0].applied(a);
  }

  std::unordered_map<std::string, int64_t> vocab_counts = counts[0];
  vocab_counts.emplace(kUnk, 0);
  double vsize = static_cast<double>(vocab_counts.size());

  EntryTables tables(n);
  std::unordered_map<std::string, double> prev_probs;
  double gamma1 = gamma1_num / static_cast<double>(a1_total);
  for (const auto& [w, c] : vocab_counts) {
    (void)c;
    auto it = adjusted[0].find(w);
    double a = it == adjusted[0].end() ? 0.0 : static_cast<double>(it->second);
    double disc = it == adjusted[0].end() ? 0.0 : discounts[0].applied(it->second);
    double p = std::max(a - disc, 0.0) / static_cast<double>(a1_total) + gamma1 / vsize;
    prev_probs[w] = p;
    tables[0][w].lp = std::log10(p);
  }

  for (size_t m = 2; m <= n; ++m) {
    auto& tbl = tables[m - 1];
    std::unordered_map<std::string, double> cur_probs;
    for (const auto& [k, a] : adjusted[m - 1]) {
      std::string h = drop_last_word(k);
      std::string w = last_word(k);
      std::string back_key = m == 2 ? w : drop_first_word(h) + " " + w;
      double total = static_cast<double>(totals[m - 1].at(h));
      double gamma = gamma_num[m - 1].at(h) / total;
      double disc = discounts[m - 1].applied(a);
      double p = std::max(static_cast<double>(a) - disc, 0.0) / total +
                 gamma * prev_probs.at(back_key);
      cur_probs[k] = p;
      tbl[k].lp = std::log10(p);
    }
    auto& ctx_tbl = tables[m - 2];
    for (const auto& [h, total] : totals[m - 1]) {
      auto it = ctx_tbl.find(h);
      if (it != ctx_tbl.end()) {
        it->second.bo = std::log10(gamma_num[m - 1].at(h) / static_cast<double>(total));
      }
    }
    prev_probs = std::move(cur_probs);
  }
  return tables;
}

}  // namespace

NGramModel train_lm(const Corpus& corpus, const LmOptions& opts) {
  if (corpus.sentences.empty()) throw InputError("train_lm: empty corpus");
  if (opts.order < 1) throw InputError("train_lm: order must be >= 1");

  Corpus capped = apply_vocab_cap(corpus, opts.vocab_cap);
  auto counts = raw_ngram_counts(capped, opts.order);

  switch (opts.estimator) {
    case LmEstimator::add_k:
      return NGramModel(opts.order, estimate_add_k(counts, opts.order, opts.add_k),
                        LmEstimator::add_k);
    case LmEstimator::kneser_ney:
      return NGramModel(opts.order, estimate_kneser_ney(counts, opts.order),
                        LmEstimator::kneser_ney);
    case LmEstimator::kn_with_fallback:
      try {
        return NGramModel(opts.order, estimate_kneser_ney(counts, opts.order),
                          LmEstimator::kneser_ney);
      } catch (const Error&) {
        return NGramModel(opts.order, estimate_add_k(counts, opts.order, opts.add_k),
                          LmEstimator::add_k);
      }
  }
  throw Error("train_lm: unknown estimator");
}

double score_sentence(const NGramModel& model, const std::vector<std::string>& tokens) {
  std::vector<std::string> context{kBos};
  double total = 0.0;
  for (const auto& raw : tokens) {
    std::string tok = model.in_vocab(raw) ? raw : kUnk;
    total += model.log10_prob(context, tok);
    context.push_back(tok);
    if (context.size() > static_cast<size_t>(model.order() - 1) && context.size() > 1) {
      context.erase(context.begin());
    }
  }
  total += model.log10_prob(context, kEos);
  return total;
}

double cleanliness(const NGramModel& model, const std::vector<std::string>& tokens) {
  return score_sentence(model, tokens) / (static_cast<double>(tokens.size()) + 1.0);
}

void save_arpa(const NGramModel& model, std::ostream& out) {
  out << "\\data\\\n";
  for (int m = 1; m <= model.order(); ++m) {
    out << "ngram " << m << "=" << model.ngram_count(m) << "\n";
  }
  for (int m = 1; m <= model.order(); ++m) {
    out << "\n\\" << m << "-grams:\n";
    const auto& tbl = model.table(m);
    std::vector<const std::string*> keys;
    keys.reserve(tbl.size());
    for (const auto& [k, e] : tbl) keys.push_back(&k);
    std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return *a < *b; });
    for (const auto* k : keys) {
      const auto& e = tbl.at(*k);
      out << format_double(e.lp) << '\t' << *k;
      if (m < model.order()) out << '\t' << format_double(e.bo);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

void save_arpa_file(const NGramModel& model, const std::string& path) {
  std::ostringstream ss;
  save_arpa(model, ss);
  atomic_write_file(path, ss.str());
}

NGramModel load_arpa(std::istream& in) {
  std::string line;
  // Find \data\ header.
  bool found = false;
  while (std::getline(in, line)) {
    if (trim(line) == "\\data\\") {
      found = true;
      break;
    }
  }
  if (!found) throw ParseError("arpa: missing \\data\\ header");
  std::vector<size_t> expected;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty()) break;
    auto fields = split_ws(t);
    if (fields.size() != 2 || fields[0] != "ngram") throw ParseError("arpa: bad count line");
    auto eq = fields[1].find('=');
    if (eq == std::string::npos) throw ParseError("arpa: bad count line");
    expected.push_back(static_cast<size_t>(parse_int(fields[1].substr(eq + 1))));
  }
  int order = static_cast<int>(expected.size());
  if (order < 1) throw ParseError("arpa: no ngram counts");

  std::vector<std::unordered_map<std::string, NGramModel::Entry>> tables(
      static_cast<size_t>(order));
  int current = 0;
  while (std::getline(in, line)) {
    auto t = std::string(trim(line));
    if (t.empty()) continue;
    if (t == "\\end\\") break;
    if (t.size() > 2 && t.front() == '\\' && t.back() == ':') {
      current = static_cast<int>(parse_int(t.substr(1, t.find('-') - 1)));
      if (current < 1 || current > order) throw ParseError("arpa: bad section header " + t);
      continue;
    }
    if (current == 0) throw ParseError("arpa: data before section header");
    auto fields = split_ws(t);
    size_t want = static_cast<size_t>(current) + 1;
    bool has_bo = fields.size() == want + 1;
    if (fields.size() != want && !has_bo) {
      throw ParseError("arpa: bad entry line '" + t + "'");
    }
    NGramModel::Entry e;
    e.lp = parse_double(fields[0]);
    if (has_bo) e.bo = parse_double(fields.back());
    std::string key;
    for (size_t i = 1; i <= static_cast<size_t>(current); ++i) {
      if (i > 1) key += ' ';
      key += fields[i];
    }
    tables[static_cast<size_t>(current - 1)][key] = e;
  }
  for (int m = 1; m <= order; ++m) {
    if (tables[static_cast<size_t>(m - 1)].size() != expected[static_cast<size_t>(m - 1)]) {
      throw ParseError("arpa: ngram " + std::to_string(m) + " count mismatch");
    }
  }
  return NGramModel(order, std::move(tables), LmEstimator::kn_with_fallback);
}

NGramModel load_arpa_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open arpa file: " + path);
  try {
    return load_arpa(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace usmt
