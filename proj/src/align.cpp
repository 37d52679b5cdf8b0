#include "usmt/align.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_set>

#include "usmt/corpus.hpp"
#include "usmt/induction.hpp"
#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

ParallelCorpus make_parallel(const std::vector<std::string>& src_lines,
                             const std::vector<std::string>& tgt_lines) {
  if (src_lines.size() != tgt_lines.size()) {
    throw InputError("parallel corpus: side line counts differ (" +
                     std::to_string(src_lines.size()) + " vs " +
                     std::to_string(tgt_lines.size()) + ")");
  }
  ParallelCorpus out;
  out.reserve(src_lines.size());
  for (size_t i = 0; i < src_lines.size(); ++i) {
    SentencePair p;
    p.src = tokenize(src_lines[i]);
    p.tgt = tokenize(tgt_lines[i]);
    for (auto& t : p.src) t = escape_token(t);
    for (auto& t : p.tgt) t = escape_token(t);
    if (p.src.empty() || p.tgt.empty()) continue;
    out.push_back(std::move(p));
  }
  return out;
}

ParallelCorpus load_parallel(const std::string& src_path, const std::string& tgt_path) {
  return make_parallel(read_lines(src_path), read_lines(tgt_path));
}

double TTable::prob(const std::string& src, const std::string& tgt) const {
  auto it = rows.find(src);
  if (it == rows.end()) return 0.0;
  auto jt = it->second.find(tgt);
  return jt == it->second.end() ? 0.0 : jt->second;
}

Ibm1Result train_ibm1(const ParallelCorpus& pairs, const Ibm1Options& opts) {
  if (pairs.empty()) throw InputError("train_ibm1: empty pair list");
  if (opts.iterations < 1) throw InputError("train_ibm1: iterations must be >= 1");

  // Candidate translations per source word: co-occurring target words.
  TTable t;
  for (const auto& p : pairs) {
    for (const auto& tw : p.tgt) {
      for (const auto& sw : p.src) t.rows[sw][tw] = 0.0;
      if (opts.use_null) t.rows[kNullWord][tw] = 0.0;
    }
  }
  for (auto& [sw, row] : t.rows) {
    double u = 1.0 / static_cast<double>(row.size());
    for (auto& [tw, v] : row) v = u;
  }

  Ibm1Result result;
  for (int iter = 0; iter < opts.iterations; ++iter) {
    std::unordered_map<std::string, std::unordered_map<std::string, double>> expected;
    std::unordered_map<std::string, double> row_totals;
    double ll = 0.0;
    for (const auto& p : pairs) {
      size_t slots = p.src.size() + (opts.use_null ? 1 : 0);
      for (const auto& tw : p.tgt) {
        double z = 0.0;
        for (const auto& sw : p.src) z += t.rows[sw][tw];
        if (opts.use_null) z += t.rows[kNullWord][tw];
        if (z <= 0.0) continue;
        ll += std::log(z / static_cast<double>(slots));
        for (const auto& sw : p.src) {
          double share = t.rows[sw][tw] / z;
          expected[sw][tw] += share;
          row_totals[sw] += share;
        }
        if (opts.use_null) {
          double share = t.rows[kNullWord][tw] / z;
          expected[kNullWord][tw] += share;
          row_totals[kNullWord] += share;
        }
      }
    }
    result.log_likelihood.push_back(ll);
    for (auto& [sw, row] : t.rows) {
      double total = row_totals[sw];
      if (total <= 0.0) continue;
      auto& exp_row = expected[sw];
      for (auto& [tw, v] : row) v = exp_row[tw] / total;
    }
  }
  result.ttable = std::move(t);
  return result;
}

WordAlignment viterbi_align(const TTable& ttable, const SentencePair& pair, bool use_null) {
  WordAlignment a;
  for (size_t j = 0; j < pair.tgt.size(); ++j) {
    double best = -1.0;
    size_t best_i = 0;
    for (size_t i = 0; i < pair.src.size(); ++i) {
      double p = ttable.prob(pair.src[i], pair.tgt[j]);
      if (p > best) {
        best = p;
        best_i = i;
      }
    }
    if (use_null && ttable.prob(kNullWord, pair.tgt[j]) > best) continue;
    if (best >= 0.0 && !pair.src.empty()) {
      a.links.emplace(static_cast<int>(best_i), static_cast<int>(j));
    }
  }
  return a;
}

WordAlignment symmetrize(const WordAlignment& fwd, const WordAlignment& bwd, int src_len,
                         int tgt_len) {
  auto check = [&](const WordAlignment& a, const char* name) {
    for (const auto& [i, j] : a.links) {
      if (i < 0 || i >= src_len || j < 0 || j >= tgt_len) {
        throw InputError(std::string("symmetrize: ") + name + " link (" + std::to_string(i) +
                         "," + std::to_string(j) + ") out of bounds");
      }
    }
  };
  check(fwd, "forward");
  check(bwd, "backward");

  std::set<std::pair<int, int>> inter, uni;
  std::set_intersection(fwd.links.begin(), fwd.links.end(), bwd.links.begin(), bwd.links.end(),
                        std::inserter(inter, inter.begin()));
  std::set_union(fwd.links.begin(), fwd.links.end(), bwd.links.begin(), bwd.links.end(),
                 std::inserter(uni, uni.begin()));

  std::set<std::pair<int, int>> result = inter;
  std::vector<bool> src_aligned(static_cast<size_t>(src_len), false);
  std::vector<bool> tgt_aligned(static_cast<size_t>(tgt_len), false);
  for (const auto& [i, j] : result) {
    src_aligned[static_cast<size_t>(i)] = true;
    tgt_aligned[static_cast<size_t>(j)] = true;
  }

  static const int kNeighbors[8][2] = {{-1, 0}, {0, -1}, {1, 0},  {0, 1},
                                       {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [i, j] : std::set<std::pair<int, int>>(result)) {
      for (const auto& d : kNeighbors) {
        int ni = i + d[0], nj = j + d[1];
        if (ni < 0 || ni >= src_len || nj < 0 || nj >= tgt_len) continue;
        auto cand = std::make_pair(ni, nj);
        if (result.count(cand) || !uni.count(cand)) continue;
        if (!src_aligned[static_cast<size_t>(ni)] || !tgt_aligned[static_cast<size_t>(nj)]) {
          result.insert(cand);
          src_aligned[static_cast<size_t>(ni)] = true;
          tgt_aligned[static_cast<size_t>(nj)] = true;
          changed = true;
        }
      }
    }
  }

  // final-and: union links whose both endpoints are still unaligned.
  for (const auto& link : uni) {
    if (!src_aligned[static_cast<size_t>(link.first)] &&
        !tgt_aligned[static_cast<size_t>(link.second)]) {
      result.insert(link);
      src_aligned[static_cast<size_t>(link.first)] = true;
      tgt_aligned[static_cast<size_t>(link.second)] = true;
    }
  }
  WordAlignment out;
  out.links = std::move(result);
  return out;
}

std::string render_alignment(const WordAlignment& a) {
  std::string out;
  bool first = true;
  for (const auto& [i, j] : a.links) {
    if (!first) out += ' ';
    out += std::to_string(i);
    out += '-';
    out += std::to_string(j);
    first = false;
  }
  return out;
}

WordAlignment parse_alignment(const std::string& line) {
  WordAlignment a;
  for (const auto& tok : split_ws(line)) {
    auto dash = tok.find('-');
    if (dash == std::string::npos) throw ParseError("alignment: bad link '" + tok + "'");
    a.links.emplace(static_cast<int>(parse_int(tok.substr(0, dash))),
                    static_cast<int>(parse_int(tok.substr(dash + 1))));
  }
  return a;
}

std::vector<SpanPair> extract_spans(const SentencePair& pair, const WordAlignment& alignment,
                                    int max_len) {
  int slen = static_cast<int>(pair.src.size());
  int tlen = static_cast<int>(pair.tgt.size());
  for (const auto& [i, j] : alignment.links) {
    if (i < 0 || i >= slen || j < 0 || j >= tlen) {
      throw InputError("extract: alignment link out of bounds");
    }
  }
  std::vector<bool> tgt_aligned(static_cast<size_t>(tlen), false);
  for (const auto& [i, j] : alignment.links) tgt_aligned[static_cast<size_t>(j)] = true;

  std::vector<SpanPair> out;
  for (int s1 = 0; s1 < slen; ++s1) {
    for (int s2 = s1; s2 < std::min(slen, s1 + max_len); ++s2) {
      int tmin = tlen, tmax = -1;
      for (const auto& [i, j] : alignment.links) {
        if (i >= s1 && i <= s2) {
          tmin = std::min(tmin, j);
          tmax = std::max(tmax, j);
        }
      }
      if (tmax < 0) continue;  // no aligned word in the source span
      // Consistency: links touching [tmin, tmax] must come from [s1, s2].
      bool consistent = true;
      for (const auto& [i, j] : alignment.links) {
        if (j >= tmin && j <= tmax && (i < s1 || i > s2)) {
          consistent = false;
          break;
        }
      }
      if (!consistent) continue;
      // Extend over unaligned boundary words on the target side.
      int lo = tmin;
      while (lo > 0 && !tgt_aligned[static_cast<size_t>(lo - 1)]) --lo;
      int hi = tmax;
      while (hi + 1 < tlen && !tgt_aligned[static_cast<size_t>(hi + 1)]) ++hi;
      for (int t1 = lo; t1 <= tmin; ++t1) {
        for (int t2 = tmax; t2 <= hi; ++t2) {
          if (t2 - t1 + 1 > max_len) continue;
          out.push_back({s1, s2, t1, t2});
        }
      }
    }
  }
  return out;
}

static std::string span_text(const std::vector<std::string>& words, int a, int b) {
  std::string out;
  for (int i = a; i <= b; ++i) {
    if (i > a) out += ' ';
    out += words[static_cast<size_t>(i)];
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> extract_phrases(const SentencePair& pair,
                                                                 const WordAlignment& alignment,
                                                                 int max_len) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& sp : extract_spans(pair, alignment, max_len)) {
    out.emplace_back(span_text(pair.src, sp.s1, sp.s2), span_text(pair.tgt, sp.t1, sp.t2));
  }
  return out;
}

PairCounts count_extracted(const ParallelCorpus& corpus,
                           const std::vector<WordAlignment>& alignments, int max_len) {
  if (corpus.size() != alignments.size()) {
    throw InputError("count_extracted: corpus and alignments differ in size");
  }
  PairCounts pc;
  pc.n_pairs = static_cast<int64_t>(corpus.size());
  for (size_t n = 0; n < corpus.size(); ++n) {
    const auto& pair = corpus[n];
    auto spans = extract_spans(pair, alignments[n], max_len);
    std::set<std::pair<std::string, std::string>> uniq;
    for (const auto& sp : spans) {
      auto key = std::make_pair(span_text(pair.src, sp.s1, sp.s2),
                                span_text(pair.tgt, sp.t1, sp.t2));
      ++pc.joint[key];
      ++pc.src_marginal[key.first];
      ++pc.tgt_marginal[key.second];
      uniq.insert(std::move(key));
    }
    for (const auto& key : uniq) ++pc.joint_sent[key];

    std::set<std::string> src_phrases, tgt_phrases;
    int slen = static_cast<int>(pair.src.size());
    for (int a = 0; a < slen; ++a)
      for (int b = a; b < std::min(slen, a + max_len); ++b)
        src_phrases.insert(span_text(pair.src, a, b));
    int tlen = static_cast<int>(pair.tgt.size());
    for (int a = 0; a < tlen; ++a)
      for (int b = a; b < std::min(tlen, a + max_len); ++b)
        tgt_phrases.insert(span_text(pair.tgt, a, b));
    for (const auto& s : src_phrases) ++pc.src_occ[s];
    for (const auto& t : tgt_phrases) ++pc.tgt_occ[t];
  }
  return pc;
}

void save_pair_counts(const PairCounts& counts, const std::string& path) {
  std::string out = "pairs " + std::to_string(counts.n_pairs) + "\n";
  for (const auto& [key, c] : counts.joint) {
    out += key.first;
    out += " ||| ";
    out += key.second;
    out += " ||| ";
    out += std::to_string(c);
    out += ' ';
    out += std::to_string(counts.joint_sent.at(key));
    out += ' ';
    out += std::to_string(counts.src_occ.at(key.first));
    out += ' ';
    out += std::to_string(counts.tgt_occ.at(key.second));
    out += '\n';
  }
  atomic_write_file(path, out);
}

PairCounts load_pair_counts(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw ParseError("pair counts: empty file");
  auto header = split_ws(lines[0]);
  if (header.size() != 2 || header[0] != "pairs") throw ParseError("pair counts: bad header");
  PairCounts pc;
  pc.n_pairs = parse_int(header[1]);
  for (size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    auto p1 = lines[n].find(" ||| ");
    auto p2 = lines[n].find(" ||| ", p1 + 5);
    if (p1 == std::string::npos || p2 == std::string::npos) {
      throw ParseError("pair counts line " + std::to_string(n + 1) + ": bad format");
    }
    std::string src = lines[n].substr(0, p1);
    std::string tgt = lines[n].substr(p1 + 5, p2 - p1 - 5);
    auto nums = split_ws(std::string_view(lines[n]).substr(p2 + 5));
    if (nums.size() != 4) {
      throw ParseError("pair counts line " + std::to_string(n + 1) + ": expected 4 counts");
    }
    auto key = std::make_pair(src, tgt);
    pc.joint[key] = parse_int(nums[0]);
    pc.joint_sent[key] = parse_int(nums[1]);
    pc.src_occ[src] = parse_int(nums[2]);
    pc.tgt_occ[tgt] = parse_int(nums[3]);
    pc.src_marginal[src] += pc.joint[key];
    pc.tgt_marginal[tgt] += pc.joint[key];
  }
  return pc;
}

PhraseTable estimate_table(const PairCounts& counts, const TTable& ttable_fwd,
                           const TTable& ttable_bwd) {
  if (counts.joint.empty()) throw InputError("estimate_table: no extracted pairs");
  constexpr double kMinStoredLex = 1e-30;
  PhraseTable table;
  table.provenance = Provenance::estimated_from_parallel;
  for (const auto& [key, c] : counts.joint) {
    const auto& [src, tgt] = key;
    PhraseTable::Candidate cand;
    cand.target = tgt;
    cand.p_fwd = static_cast<double>(c) / static_cast<double>(counts.src_marginal.at(src));
    cand.p_bwd = static_cast<double>(c) / static_cast<double>(counts.tgt_marginal.at(tgt));
    auto src_words = split_ws(src);
    auto tgt_words = split_ws(tgt);
    auto fwd = [&](const std::string& s, const std::string& t) { return ttable_fwd.prob(s, t); };
    auto bwd = [&](const std::string& t, const std::string& s) { return ttable_bwd.prob(t, s); };
    cand.lex_fwd = std::max(lexical_prob(src_words, tgt_words, fwd), kMinStoredLex);
    cand.lex_bwd = std::max(lexical_prob(tgt_words, src_words, bwd), kMinStoredLex);
    table.entries[src].push_back(std::move(cand));
  }
  for (auto& [src, cands] : table.entries) {
    std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
      if (a.p_fwd != b.p_fwd) return a.p_fwd > b.p_fwd;
      return a.target < b.target;
    });
  }
  return table;
}

const std::pair<ReorderingModel::Dist, ReorderingModel::Dist>* ReorderingModel::find(
    const std::string& src, const std::string& tgt) const {
  auto it = table.find({src, tgt});
  return it == table.end() ? nullptr : &it->second;
}

namespace {

Orientation word_orientation_prev(const WordAlignment& a, const SpanPair& sp, int slen,
                                  int tlen) {
  (void)tlen;
  if (sp.t1 == 0) {
    if (sp.s1 == 0) return kMonotone;
    if (sp.s2 == slen - 1) return kSwap;
    return kDiscontinuous;
  }
  if (a.links.count({sp.s1 - 1, sp.t1 - 1})) return kMonotone;
  if (a.links.count({sp.s2 + 1, sp.t1 - 1})) return kSwap;
  return kDiscontinuous;
}

Orientation word_orientation_next(const WordAlignment& a, const SpanPair& sp, int slen,
                                  int tlen) {
  if (sp.t2 == tlen - 1) {
    if (sp.s2 == slen - 1) return kMonotone;
    if (sp.s1 == 0) return kSwap;
    return kDiscontinuous;
  }
  if (a.links.count({sp.s2 + 1, sp.t2 + 1})) return kMonotone;
  if (a.links.count({sp.s1 - 1, sp.t2 + 1})) return kSwap;
  return kDiscontinuous;
}

}  // namespace

ReorderingModel estimate_reordering(const ParallelCorpus& corpus,
                                    const std::vector<WordAlignment>& alignments, int max_len,
                                    double smoothing_alpha) {
  if (corpus.size() != alignments.size()) {
    throw InputError("estimate_reordering: corpus and alignments differ in size");
  }
  std::map<std::pair<std::string, std::string>, std::array<std::array<int64_t, 3>, 2>> counts;
  for (size_t n = 0; n < corpus.size(); ++n) {
    const auto& pair = corpus[n];
    int slen = static_cast<int>(pair.src.size());
    int tlen = static_cast<int>(pair.tgt.size());
    for (const auto& sp : extract_spans(pair, alignments[n], max_len)) {
      auto key = std::make_pair(span_text(pair.src, sp.s1, sp.s2),
                                span_text(pair.tgt, sp.t1, sp.t2));
      auto& c = counts[key];
      ++c[0][word_orientation_prev(alignments[n], sp, slen, tlen)];
      ++c[1][word_orientation_next(alignments[n], sp, slen, tlen)];
    }
  }
  ReorderingModel model;
  model.smoothing_alpha = smoothing_alpha;
  for (const auto& [key, c] : counts) {
    std::pair<ReorderingModel::Dist, ReorderingModel::Dist> dists;
    for (int dir = 0; dir < 2; ++dir) {
      double total = 0.0;
      for (int o = 0; o < 3; ++o) total += static_cast<double>(c[static_cast<size_t>(dir)][static_cast<size_t>(o)]);
      auto& d = dir == 0 ? dists.first : dists.second;
      for (int o = 0; o < 3; ++o) {
        d.p[o] = (static_cast<double>(c[static_cast<size_t>(dir)][static_cast<size_t>(o)]) +
                  smoothing_alpha) /
                 (total + 3.0 * smoothing_alpha);
      }
    }
    model.table.emplace(key, dists);
  }
  return model;
}

void save_reordering(const ReorderingModel& model, const std::string& path) {
  std::string out;
  for (const auto& [key, dists] : model.table) {
    out += key.first;
    out += " ||| ";
    out += key.second;
    out += " |||";
    for (int o = 0; o < 3; ++o) {
      out += ' ';
      out += format_double(dists.first.p[o]);
    }
    for (int o = 0; o < 3; ++o) {
      out += ' ';
      out += format_double(dists.second.p[o]);
    }
    out += '\n';
  }
  atomic_write_file(path, out);
}

ReorderingModel load_reordering(const std::string& path) {
  ReorderingModel model;
  size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto p1 = line.find(" ||| ");
    auto p2 = line.find(" |||", p1 + 5);
    if (p1 == std::string::npos || p2 == std::string::npos) {
      throw ParseError("reordering line " + std::to_string(lineno) + ": bad format");
    }
    std::string src = line.substr(0, p1);
    std::string tgt = line.substr(p1 + 5, p2 - p1 - 5);
    auto nums = split_ws(std::string_view(line).substr(p2 + 4));
    if (nums.size() != 6) {
      throw ParseError("reordering line " + std::to_string(lineno) + ": expected 6 scores");
    }
    std::pair<ReorderingModel::Dist, ReorderingModel::Dist> dists;
    for (int o = 0; o < 3; ++o) dists.first.p[o] = parse_double(nums[static_cast<size_t>(o)]);
    for (int o = 0; o < 3; ++o) dists.second.p[o] = parse_double(nums[static_cast<size_t>(o) + 3]);
    model.table.emplace(std::make_pair(src, tgt), dists);
  }
  return model;
}

double fisher_pvalue(int64_t c_st, int64_t c_s, int64_t c_t, int64_t n) {
  if (c_st < 0 || c_s < 0 || c_t < 0 || n < 1 || c_st > std::min(c_s, c_t) ||
      std::max(c_s, c_t) > n) {
    throw InputError("fisher_pvalue: inconsistent contingency counts");
  }
  if (c_st == 0) return 1.0;
  auto lchoose = [](int64_t a, int64_t b) {
    return std::lgamma(static_cast<double>(a) + 1.0) - std::lgamma(static_cast<double>(b) + 1.0) -
           std::lgamma(static_cast<double>(a - b) + 1.0);
  };
  double denom = lchoose(n, c_t);
  int64_t k_max = std::min(c_s, c_t);
  // Hypergeometric upper tail; terms accumulated from the largest for
  // numerical stability.
  double log_terms_max = -std::numeric_limits<double>::infinity();
  std::vector<double> logs;
  logs.reserve(static_cast<size_t>(k_max - c_st + 1));
  for (int64_t k = c_st; k <= k_max; ++k) {
    if (c_t - k > n - c_s) continue;  // impossible table
    double lt = lchoose(c_s, k) + lchoose(n - c_s, c_t - k) - denom;
    logs.push_back(lt);
    log_terms_max = std::max(log_terms_max, lt);
  }
  if (logs.empty()) return 0.0;
  double sum = 0.0;
  for (double lt : logs) sum += std::exp(lt - log_terms_max);
  double p = std::exp(log_terms_max) * sum;
  return std::min(p, 1.0);
}

double singleton_pvalue(int64_t n) {
  return fisher_pvalue(1, 1, 1, n);
}

double singleton_threshold(int64_t n) {
  return singleton_pvalue(n) * (1.0 - 1e-6);
}

PhraseTable prune(const PhraseTable& table, const PairCounts& counts, double threshold_pvalue) {
  if (table.provenance == Provenance::induced) {
    throw InputError("prune: induced tables carry no co-occurrence statistics");
  }
  PhraseTable out;
  out.provenance = table.provenance;
  for (const auto& [src, cands] : table.entries) {
    std::vector<PhraseTable::Candidate> kept;
    for (const auto& c : cands) {
      auto key = std::make_pair(src, c.target);
      auto it = counts.joint_sent.find(key);
      if (it == counts.joint_sent.end()) {
        throw InputError("prune: no counts for pair '" + src + "' ||| '" + c.target + "'");
      }
      double p = fisher_pvalue(it->second, counts.src_occ.at(src), counts.tgt_occ.at(c.target),
                               counts.n_pairs);
      if (p <= threshold_pvalue) kept.push_back(c);
    }
    if (!kept.empty()) out.entries.emplace(src, std::move(kept));
  }
  return out;
}

}  // namespace usmt
