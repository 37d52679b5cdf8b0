#include "usmt/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <unordered_map>

#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

namespace {

constexpr size_t kMaxWords = 256;

struct Coverage {
  std::array<uint64_t, 4> bits{};

  bool test(size_t i) const { return (bits[i >> 6] >> (i & 63)) & 1ull; }
  void set(size_t i) { bits[i >> 6] |= 1ull << (i & 63); }
  bool range_free(int a, int b) const {
    for (int i = a; i <= b; ++i)
      if (test(static_cast<size_t>(i))) return false;
    return true;
  }
  int count() const {
    int n = 0;
    for (uint64_t w : bits) n += __builtin_popcountll(w);
    return n;
  }
  bool operator==(const Coverage& o) const { return bits == o.bits; }
  bool operator<(const Coverage& o) const { return bits < o.bits; }
};

struct Option {
  int s1 = 0, s2 = 0;
  std::vector<std::string> target;
  double lp_fwd = 0.0, llex_fwd = 0.0, lp_bwd = 0.0, llex_bwd = 0.0;
  bool oov = false;
  ReorderingModel::Dist l2r, r2l;  // uniform when absent
};

struct Hypothesis {
  int parent = -1;
  const Option* option = nullptr;
  Coverage coverage;
  int last_s1 = -1, last_end = -1;
  std::vector<std::string> lm_context;
  FeatureVector features;
  double score = 0.0;
  double priority = 0.0;  // score + future cost
  std::string target;     // full target prefix, for deterministic ties
};

Orientation orient_prev(int prev_s1, int prev_end, int s1, int s2, int src_len) {
  if (prev_end < 0) {
    if (s1 == 0) return kMonotone;
    if (s2 == src_len - 1) return kSwap;
    return kDiscontinuous;
  }
  if (s1 == prev_end + 1) return kMonotone;
  if (s2 == prev_s1 - 1) return kSwap;
  return kDiscontinuous;
}

Orientation orient_next(int prev_s1, int prev_end, int s1, int s2) {
  if (s1 == prev_end + 1) return kMonotone;
  if (s2 == prev_s1 - 1) return kSwap;
  return kDiscontinuous;
}

Orientation orient_final(int last_s1, int last_end, int src_len) {
  if (last_end == src_len - 1) return kMonotone;
  if (last_s1 == 0) return kSwap;
  return kDiscontinuous;
}

// LM context update shared by decoding, future costs and trace re-scoring;
// OOV tokens are scored and carried as <unk>, matching score_sentence.
double lm_extend(const NGramModel& lm, std::vector<std::string>& ctx, const std::string& token) {
  std::string tok = lm.in_vocab(token) ? token : kUnk;
  double lp = lm.log10_prob(ctx, tok);
  ctx.push_back(tok);
  size_t keep = lm.order() > 1 ? static_cast<size_t>(lm.order() - 1) : 1;
  while (ctx.size() > keep) ctx.erase(ctx.begin());
  return lp;
}

struct OptionGrid {
  // options[s1] holds all options starting at s1.
  std::vector<std::vector<Option>> starts;
};

OptionGrid collect_options(const std::vector<std::string>& source,
                           const TranslationSystem& system) {
  int n = static_cast<int>(source.size());
  OptionGrid grid;
  grid.starts.resize(static_cast<size_t>(n));
  int max_len = std::min(system.max_phrase_len, n);
  for (int s1 = 0; s1 < n; ++s1) {
    std::string key;
    for (int s2 = s1; s2 < std::min(n, s1 + max_len); ++s2) {
      if (s2 > s1) key += ' ';
      key += source[static_cast<size_t>(s2)];
      const auto* cands = system.table->find(key);
      if (!cands) continue;
      size_t limit = std::min(system.options_per_span, cands->size());
      for (size_t ci = 0; ci < limit; ++ci) {
        const auto& c = (*cands)[ci];
        Option opt;
        opt.s1 = s1;
        opt.s2 = s2;
        opt.target = split_ws(c.target);
        opt.lp_fwd = std::log10(c.p_fwd);
        opt.llex_fwd = std::log10(c.lex_fwd);
        opt.lp_bwd = std::log10(c.p_bwd);
        opt.llex_bwd = std::log10(c.lex_bwd);
        if (system.reordering_active()) {
          if (const auto* d = system.reordering->find(key, c.target)) {
            opt.l2r = d->first;
            opt.r2l = d->second;
          }
        }
        grid.starts[static_cast<size_t>(s1)].push_back(std::move(opt));
      }
    }
    // Copy-through for words with no single-word entry.
    if (!system.table->find(source[static_cast<size_t>(s1)])) {
      Option opt;
      opt.s1 = s1;
      opt.s2 = s1;
      opt.target = {source[static_cast<size_t>(s1)]};
      opt.oov = true;
      grid.starts[static_cast<size_t>(s1)].push_back(std::move(opt));
    }
  }
  return grid;
}

double option_static_score(const Option& opt, const TranslationSystem& system) {
  const auto& w = system.weights;
  double s = w.p_fwd * opt.lp_fwd + w.lex_fwd * opt.llex_fwd + w.p_bwd * opt.lp_bwd +
             w.lex_bwd * opt.llex_bwd;
  s += w.word_penalty * static_cast<double>(opt.target.size());
  s += w.phrase_penalty;
  if (opt.oov) s += w.oov;
  std::vector<std::string> ctx;
  double lm_lp = 0.0;
  for (const auto& t : opt.target) lm_lp += lm_extend(*system.lm, ctx, t);
  return s + w.lm * lm_lp;
}

// Best achievable score per uncovered span, combining per-span bests by
// dynamic programming. Distortion and reordering are ignored here; with an
// unbounded beam future costs do not affect the result.
std::vector<std::vector<double>> future_costs(const std::vector<std::string>& source,
                                              const OptionGrid& grid,
                                              const TranslationSystem& system) {
  int n = static_cast<int>(source.size());
  constexpr double kNegInf = -1e18;
  std::vector<std::vector<double>> fc(static_cast<size_t>(n),
                                      std::vector<double>(static_cast<size_t>(n), kNegInf));
  for (int s1 = 0; s1 < n; ++s1) {
    for (const auto& opt : grid.starts[static_cast<size_t>(s1)]) {
      double sc = option_static_score(opt, system);
      auto& cell = fc[static_cast<size_t>(s1)][static_cast<size_t>(opt.s2)];
      cell = std::max(cell, sc);
    }
  }
  for (int len = 2; len <= n; ++len) {
    for (int s1 = 0; s1 + len - 1 < n; ++s1) {
      int s2 = s1 + len - 1;
      auto& cell = fc[static_cast<size_t>(s1)][static_cast<size_t>(s2)];
      for (int m = s1; m < s2; ++m) {
        double split = fc[static_cast<size_t>(s1)][static_cast<size_t>(m)] +
                       fc[static_cast<size_t>(m + 1)][static_cast<size_t>(s2)];
        cell = std::max(cell, split);
      }
    }
  }
  return fc;
}

double future_of(const Coverage& cov, int n, const std::vector<std::vector<double>>& fc) {
  double total = 0.0;
  int i = 0;
  while (i < n) {
    if (cov.test(static_cast<size_t>(i))) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < n && !cov.test(static_cast<size_t>(j + 1))) ++j;
    total += fc[static_cast<size_t>(i)][static_cast<size_t>(j)];
    i = j + 1;
  }
  return total;
}

std::string recomb_key(const Hypothesis& h, bool reordering_active) {
  std::string key;
  key.reserve(64);
  key.append(reinterpret_cast<const char*>(h.coverage.bits.data()), sizeof(h.coverage.bits));
  key += '|';
  key += std::to_string(h.last_end);
  key += '|';
  for (const auto& t : h.lm_context) {
    key += t;
    key += ' ';
  }
  if (reordering_active) {
    key += '|';
    key += std::to_string(h.last_s1);
    if (h.option) {
      key.append(reinterpret_cast<const char*>(h.option->r2l.p), sizeof(h.option->r2l.p));
    }
  }
  return key;
}

bool hyp_better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.target < b.target;
}

struct SearchResult {
  bool found = false;
  Hypothesis best;
  std::vector<Hypothesis> arena_best_chain;  // trace reconstruction storage
  std::vector<TraceStep> trace;
};

DecodedSentence run_search(const std::vector<std::string>& source,
                           const TranslationSystem& system, size_t beam, int distortion_limit,
                           bool* found) {
  int n = static_cast<int>(source.size());
  const auto& w = system.weights;
  bool reo = system.reordering_active();

  OptionGrid grid = collect_options(source, system);
  auto fc = future_costs(source, grid, system);

  std::vector<Hypothesis> arena;
  arena.reserve(1024);
  Hypothesis init;
  init.lm_context = {kBos};
  init.priority = future_of(init.coverage, n, fc);
  arena.push_back(init);

  std::vector<std::vector<int>> stacks(static_cast<size_t>(n) + 1);
  stacks[0].push_back(0);

  auto prune_stack = [&](std::vector<int>& stack) {
    // Recombine, then histogram-prune to the beam size.
    std::unordered_map<std::string, int> best;
    best.reserve(stack.size() * 2);
    std::vector<int> kept;
    for (int idx : stack) {
      std::string key = recomb_key(arena[static_cast<size_t>(idx)], reo);
      auto [it, inserted] = best.emplace(key, idx);
      if (inserted) continue;
      if (hyp_better(arena[static_cast<size_t>(idx)], arena[static_cast<size_t>(it->second)])) {
        it->second = idx;
      }
    }
    kept.reserve(best.size());
    for (const auto& [k, idx] : best) kept.push_back(idx);
    std::sort(kept.begin(), kept.end(), [&](int a, int b) {
      const auto& ha = arena[static_cast<size_t>(a)];
      const auto& hb = arena[static_cast<size_t>(b)];
      if (ha.priority != hb.priority) return ha.priority > hb.priority;
      if (ha.target != hb.target) return ha.target < hb.target;
      return ha.coverage < hb.coverage;
    });
    if (kept.size() > beam) kept.resize(beam);
    stack = std::move(kept);
  };

  for (int covered = 0; covered < n; ++covered) {
    prune_stack(stacks[static_cast<size_t>(covered)]);
    for (int hyp_idx : stacks[static_cast<size_t>(covered)]) {
      for (int s1 = 0; s1 < n; ++s1) {
        {
          const auto& h = arena[static_cast<size_t>(hyp_idx)];
          int jump = std::abs(s1 - h.last_end - 1);
          if (jump > distortion_limit) continue;
          if (h.coverage.test(static_cast<size_t>(s1))) continue;
        }
        for (const auto& opt : grid.starts[static_cast<size_t>(s1)]) {
          const auto& h = arena[static_cast<size_t>(hyp_idx)];
          if (!h.coverage.range_free(opt.s1, opt.s2)) continue;

          Hypothesis nh;
          nh.parent = hyp_idx;
          nh.option = &opt;
          nh.coverage = h.coverage;
          for (int i = opt.s1; i <= opt.s2; ++i) nh.coverage.set(static_cast<size_t>(i));
          nh.last_s1 = opt.s1;
          nh.last_end = opt.s2;
          nh.features = h.features;
          nh.features.p_fwd += opt.lp_fwd;
          nh.features.lex_fwd += opt.llex_fwd;
          nh.features.p_bwd += opt.lp_bwd;
          nh.features.lex_bwd += opt.llex_bwd;
          nh.features.word_penalty += static_cast<double>(opt.target.size());
          nh.features.phrase_penalty += 1.0;
          if (opt.oov) nh.features.oov += 1.0;
          int jump = std::abs(opt.s1 - h.last_end - 1);
          if (h.last_end >= 0) nh.features.distortion += static_cast<double>(jump);
          if (reo) {
            Orientation o = orient_prev(h.last_s1, h.last_end, opt.s1, opt.s2, n);
            nh.features.reordering[o] += std::log10(opt.l2r.p[o]);
            if (h.option) {
              Orientation o2 = orient_next(h.last_s1, h.last_end, opt.s1, opt.s2);
              nh.features.reordering[3 + o2] += std::log10(h.option->r2l.p[o2]);
            }
          }
          nh.lm_context = h.lm_context;
          for (const auto& t : opt.target) {
            nh.features.lm += lm_extend(*system.lm, nh.lm_context, t);
          }
          nh.target = h.target;
          for (const auto& t : opt.target) {
            if (!nh.target.empty()) nh.target += ' ';
            nh.target += t;
          }

          int total_covered = nh.coverage.count();
          if (total_covered == n) {
            // Completion: end-of-sentence transition and the last phrase's
            // right-to-left orientation.
            nh.features.lm += system.lm->log10_prob(nh.lm_context, kEos);
            if (reo) {
              Orientation o = orient_final(opt.s1, opt.s2, n);
              nh.features.reordering[3 + o] += std::log10(opt.r2l.p[o]);
            }
          }
          nh.score = nh.features.dot(w, reo);
          nh.priority = nh.score + future_of(nh.coverage, n, fc);
          arena.push_back(std::move(nh));
          stacks[static_cast<size_t>(total_covered)].push_back(
              static_cast<int>(arena.size()) - 1);
        }
      }
    }
  }

  prune_stack(stacks[static_cast<size_t>(n)]);
  if (stacks[static_cast<size_t>(n)].empty()) {
    // No complete hypothesis within the distortion limit; pick the best
    // finished one by score.
    *found = false;
    return {};
  }
  int best_idx = stacks[static_cast<size_t>(n)][0];
  for (int idx : stacks[static_cast<size_t>(n)]) {
    if (hyp_better(arena[static_cast<size_t>(idx)], arena[static_cast<size_t>(best_idx)])) {
      best_idx = idx;
    }
  }

  DecodedSentence out;
  const auto& best = arena[static_cast<size_t>(best_idx)];
  out.score = best.score;
  out.features = best.features;
  out.tokens = split_ws(best.target);
  std::vector<const Hypothesis*> chain;
  for (int idx = best_idx; idx > 0; idx = arena[static_cast<size_t>(idx)].parent) {
    chain.push_back(&arena[static_cast<size_t>(idx)]);
  }
  std::reverse(chain.begin(), chain.end());
  for (const auto* h : chain) {
    TraceStep step;
    step.s1 = h->option->s1;
    step.s2 = h->option->s2;
    step.target = h->option->target;
    step.oov = h->option->oov;
    out.trace.push_back(std::move(step));
  }
  *found = true;
  return out;
}

}  // namespace

double FeatureVector::dot(const FeatureWeights& w, bool reordering_active) const {
  double s = w.p_fwd * p_fwd + w.lex_fwd * lex_fwd + w.p_bwd * p_bwd + w.lex_bwd * lex_bwd +
             w.lm * lm + w.word_penalty * word_penalty + w.phrase_penalty * phrase_penalty +
             w.distortion * distortion + w.oov * oov;
  if (reordering_active) {
    for (size_t i = 0; i < 6; ++i) s += w.reordering[i] * reordering[i];
  }
  return s;
}

int max_source_phrase_len(const PhraseTable& table) {
  int best = 1;
  for (const auto& [src, cands] : table.entries) {
    best = std::max(best, static_cast<int>(std::count(src.begin(), src.end(), ' ')) + 1);
  }
  return best;
}

DecodedSentence decode(const std::vector<std::string>& source, const TranslationSystem& system,
                       size_t beam) {
  if (beam < 1) throw InputError("decode: beam must be >= 1");
  if (source.empty()) {
    DecodedSentence out;
    std::vector<std::string> ctx{kBos};
    out.features.lm = system.lm->log10_prob(ctx, kEos);
    out.score = out.features.dot(system.weights, system.reordering_active());
    return out;
  }
  if (source.size() > kMaxWords) {
    // Decode in chunks; artifacts at desk scale never get here, but decoding
    // must stay total.
    DecodedSentence merged;
    for (size_t off = 0; off < source.size(); off += kMaxWords) {
      std::vector<std::string> chunk(
          source.begin() + static_cast<ptrdiff_t>(off),
          source.begin() + static_cast<ptrdiff_t>(std::min(source.size(), off + kMaxWords)));
      auto part = decode(chunk, system, beam);
      for (auto& step : part.trace) {
        step.s1 += static_cast<int>(off);
        step.s2 += static_cast<int>(off);
        merged.trace.push_back(std::move(step));
      }
      merged.tokens.insert(merged.tokens.end(), part.tokens.begin(), part.tokens.end());
    }
    merged.features = score_features(source, merged.trace, system);
    merged.score = merged.features.dot(system.weights, system.reordering_active());
    return merged;
  }

  bool found = false;
  DecodedSentence out = run_search(source, system, beam, system.distortion_limit, &found);
  if (!found) {
    out = run_search(source, system, beam, 0, &found);
  }
  if (!found) throw Error("decode: monotone search failed (internal error)");
  return out;
}

std::vector<DecodedSentence> decode_batch(const std::vector<std::vector<std::string>>& sources,
                                          const TranslationSystem& system, size_t beam,
                                          unsigned threads) {
  std::vector<DecodedSentence> out(sources.size());
  parallel_for(sources.size(), threads, [&](size_t i) { out[i] = decode(sources[i], system, beam); });
  return out;
}

FeatureVector score_features(const std::vector<std::string>& source,
                             const std::vector<TraceStep>& trace,
                             const TranslationSystem& system) {
  int n = static_cast<int>(source.size());
  std::vector<bool> covered(static_cast<size_t>(n), false);
  for (const auto& step : trace) {
    if (step.s1 < 0 || step.s2 < step.s1 || step.s2 >= n) {
      throw InputError("score_features: span out of bounds");
    }
    for (int i = step.s1; i <= step.s2; ++i) {
      if (covered[static_cast<size_t>(i)]) throw InputError("score_features: overlapping spans");
      covered[static_cast<size_t>(i)] = true;
    }
  }
  for (bool c : covered) {
    if (!c) throw InputError("score_features: source not fully covered");
  }

  bool reo = system.reordering_active();
  FeatureVector f;
  std::vector<std::string> ctx{kBos};
  int prev_s1 = -1, prev_end = -1;
  ReorderingModel::Dist prev_r2l;
  bool have_prev = false;
  for (const auto& step : trace) {
    std::string key;
    for (int i = step.s1; i <= step.s2; ++i) {
      if (i > step.s1) key += ' ';
      key += source[static_cast<size_t>(i)];
    }
    std::string tgt = join(step.target, " ");
    ReorderingModel::Dist l2r, r2l;
    if (step.oov) {
      if (step.s2 != step.s1 || tgt != key || system.table->find(key)) {
        throw InputError("score_features: invalid OOV step for '" + key + "'");
      }
      f.oov += 1.0;
    } else {
      const auto* cands = system.table->find(key);
      const PhraseTable::Candidate* match = nullptr;
      if (cands) {
        for (const auto& c : *cands) {
          if (c.target == tgt) {
            match = &c;
            break;
          }
        }
      }
      if (!match) {
        throw InputError("score_features: no table entry '" + key + "' ||| '" + tgt + "'");
      }
      f.p_fwd += std::log10(match->p_fwd);
      f.lex_fwd += std::log10(match->lex_fwd);
      f.p_bwd += std::log10(match->p_bwd);
      f.lex_bwd += std::log10(match->lex_bwd);
      if (reo) {
        if (const auto* d = system.reordering->find(key, tgt)) {
          l2r = d->first;
          r2l = d->second;
        }
      }
    }
    f.word_penalty += static_cast<double>(step.target.size());
    f.phrase_penalty += 1.0;
    if (prev_end >= 0) {
      f.distortion += static_cast<double>(std::abs(step.s1 - prev_end - 1));
    }
    if (reo) {
      Orientation o = orient_prev(prev_s1, prev_end, step.s1, step.s2, n);
      f.reordering[o] += std::log10(l2r.p[o]);
      if (have_prev) {
        Orientation o2 = orient_next(prev_s1, prev_end, step.s1, step.s2);
        f.reordering[3 + o2] += std::log10(prev_r2l.p[o2]);
      }
    }
    for (const auto& t : step.target) f.lm += lm_extend(*system.lm, ctx, t);
    prev_s1 = step.s1;
    prev_end = step.s2;
    prev_r2l = r2l;
    have_prev = true;
  }
  f.lm += system.lm->log10_prob(ctx, kEos);
  if (reo && have_prev) {
    Orientation o = orient_final(prev_s1, prev_end, n);
    f.reordering[3 + o] += std::log10(prev_r2l.p[o]);
  }
  return f;
}

std::string render_trace(const std::vector<TraceStep>& trace) {
  std::string out;
  for (size_t i = 0; i < trace.size(); ++i) {
    if (i) out += '\t';
    out += std::to_string(trace[i].s1);
    out += '-';
    out += std::to_string(trace[i].s2);
    out += ':';
    out += join(trace[i].target, " ");
  }
  return out;
}

std::string render_weights(const FeatureWeights& w) {
  std::string out;
  auto emit = [&](const char* name, double v) {
    out += name;
    out += ' ';
    out += format_double(v);
    out += '\n';
  };
  emit("p_fwd", w.p_fwd);
  emit("lex_fwd", w.lex_fwd);
  emit("p_bwd", w.p_bwd);
  emit("lex_bwd", w.lex_bwd);
  emit("lm", w.lm);
  emit("word_penalty", w.word_penalty);
  emit("phrase_penalty", w.phrase_penalty);
  emit("distortion", w.distortion);
  emit("oov", w.oov);
  static const char* reo_names[6] = {"reo_l2r_mono", "reo_l2r_swap", "reo_l2r_disc",
                                     "reo_r2l_mono", "reo_r2l_swap", "reo_r2l_disc"};
  for (size_t i = 0; i < 6; ++i) emit(reo_names[i], w.reordering[i]);
  return out;
}

void save_weights(const FeatureWeights& w, const std::string& path) {
  atomic_write_file(path, render_weights(w));
}

FeatureWeights parse_weights(const std::vector<std::string>& lines) {
  FeatureWeights w;
  size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto fields = split_ws(t);
    if (fields.size() != 2) {
      throw ParseError("weights line " + std::to_string(lineno) + ": expected 'name value'");
    }
    double v = parse_double(fields[1]);
    const std::string& name = fields[0];
    if (name == "p_fwd") w.p_fwd = v;
    else if (name == "lex_fwd") w.lex_fwd = v;
    else if (name == "p_bwd") w.p_bwd = v;
    else if (name == "lex_bwd") w.lex_bwd = v;
    else if (name == "lm") w.lm = v;
    else if (name == "word_penalty") w.word_penalty = v;
    else if (name == "phrase_penalty") w.phrase_penalty = v;
    else if (name == "distortion") w.distortion = v;
    else if (name == "oov") w.oov = v;
    else if (name == "reo_l2r_mono") w.reordering[0] = v;
    else if (name == "reo_l2r_swap") w.reordering[1] = v;
    else if (name == "reo_l2r_disc") w.reordering[2] = v;
    else if (name == "reo_r2l_mono") w.reordering[3] = v;
    else if (name == "reo_r2l_swap") w.reordering[4] = v;
    else if (name == "reo_r2l_disc") w.reordering[5] = v;
    else throw ParseError("weights line " + std::to_string(lineno) + ": unknown weight '" + name + "'");
  }
  return w;
}

FeatureWeights load_weights(const std::string& path) {
  return parse_weights(read_lines(path));
}

}  // namespace usmt
