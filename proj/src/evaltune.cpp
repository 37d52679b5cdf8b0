#include "usmt/evaltune.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

BleuReport bleu(const std::vector<std::vector<std::string>>& hypotheses,
                const std::vector<std::vector<std::string>>& references, bool smoothed) {
  if (hypotheses.size() != references.size()) {
    throw InputError("bleu: hypothesis/reference sentence counts differ (" +
                     std::to_string(hypotheses.size()) + " vs " +
                     std::to_string(references.size()) + ")");
  }
  bool any_ref = false;
  for (const auto& r : references) {
    if (!r.empty()) {
      any_ref = true;
      break;
    }
  }
  if (references.empty() || !any_ref) throw InputError("bleu: no non-empty reference");

  std::array<int64_t, 4> matches{0, 0, 0, 0};
  std::array<int64_t, 4> totals{0, 0, 0, 0};
  int64_t hyp_len = 0, ref_len = 0;

  for (size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& hyp = hypotheses[s];
    const auto& ref = references[s];
    hyp_len += static_cast<int64_t>(hyp.size());
    ref_len += static_cast<int64_t>(ref.size());
    for (size_t n = 1; n <= 4; ++n) {
      if (hyp.size() < n) break;
      std::map<std::vector<std::string>, int64_t> ref_grams;
      if (ref.size() >= n) {
        for (size_t i = 0; i + n <= ref.size(); ++i) {
          ++ref_grams[std::vector<std::string>(ref.begin() + static_cast<ptrdiff_t>(i),
                                               ref.begin() + static_cast<ptrdiff_t>(i + n))];
        }
      }
      std::map<std::vector<std::string>, int64_t> hyp_grams;
      for (size_t i = 0; i + n <= hyp.size(); ++i) {
        ++hyp_grams[std::vector<std::string>(hyp.begin() + static_cast<ptrdiff_t>(i),
                                             hyp.begin() + static_cast<ptrdiff_t>(i + n))];
      }
      for (const auto& [gram, c] : hyp_grams) {
        totals[n - 1] += c;
        auto it = ref_grams.find(gram);
        if (it != ref_grams.end()) matches[n - 1] += std::min(c, it->second);
      }
    }
  }

  BleuReport report;
  report.hyp_len = hyp_len;
  report.ref_len = ref_len;
  double log_sum = 0.0;
  bool zero = false;
  for (size_t n = 0; n < 4; ++n) {
    double p;
    if (totals[n] == 0) {
      // No n-grams of this order were attempted; vacuously perfect.
      p = 1.0;
    } else if (matches[n] == 0) {
      p = smoothed && n > 0
              ? (static_cast<double>(matches[n]) + 1.0) / (static_cast<double>(totals[n]) + 1.0)
              : 0.0;
    } else {
      p = static_cast<double>(matches[n]) / static_cast<double>(totals[n]);
    }
    report.precisions[n] = p;
    if (p == 0.0) zero = true;
    else log_sum += std::log(p);
  }
  report.brevity_penalty =
      (hyp_len < ref_len && hyp_len > 0)
          ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
          : (hyp_len == 0 ? 0.0 : 1.0);
  report.bleu = zero || hyp_len == 0
                    ? 0.0
                    : report.brevity_penalty * std::exp(log_sum / 4.0) * 100.0;
  return report;
}

std::string render_bleu(const BleuReport& r) {
  std::string out;
  out += "bleu " + format_double(r.bleu) + "\n";
  for (size_t n = 0; n < 4; ++n) {
    out += "precision" + std::to_string(n + 1) + " " + format_double(r.precisions[n]) + "\n";
  }
  out += "brevity_penalty " + format_double(r.brevity_penalty) + "\n";
  out += "hyp_len " + std::to_string(r.hyp_len) + "\n";
  out += "ref_len " + std::to_string(r.ref_len) + "\n";
  return out;
}

namespace {

double evaluate_weights(const TranslationSystem& base, const FeatureWeights& w,
                        const std::vector<std::vector<std::string>>& dev_src,
                        const std::vector<std::vector<std::string>>& dev_ref,
                        const TuneOptions& opts) {
  TranslationSystem sys = base;
  sys.weights = w;
  auto decoded = decode_batch(dev_src, sys, opts.beam, opts.threads);
  std::vector<std::vector<std::string>> hyps;
  hyps.reserve(decoded.size());
  for (auto& d : decoded) hyps.push_back(std::move(d.tokens));
  return bleu(hyps, dev_ref, opts.smoothed_bleu).bleu;
}

struct Coordinate {
  const char* name;
  double FeatureWeights::* scalar = nullptr;
  int reo_index = -1;
};

}  // namespace

TuneResult tune(const TranslationSystem& system,
                const std::vector<std::vector<std::string>>& dev_src,
                const std::vector<std::vector<std::string>>& dev_ref, const TuneOptions& opts) {
  if (dev_src.empty() || dev_src.size() != dev_ref.size()) {
    throw InputError("tune: dev set empty or mismatched");
  }
  std::vector<Coordinate> coords = {
      {"p_fwd", &FeatureWeights::p_fwd},
      {"lex_fwd", &FeatureWeights::lex_fwd},
      {"p_bwd", &FeatureWeights::p_bwd},
      {"lex_bwd", &FeatureWeights::lex_bwd},
      {"lm", &FeatureWeights::lm},
      {"word_penalty", &FeatureWeights::word_penalty},
      {"phrase_penalty", &FeatureWeights::phrase_penalty},
      {"distortion", &FeatureWeights::distortion},
      {"oov", &FeatureWeights::oov},
  };
  if (system.reordering_active()) {
    static const char* reo_names[6] = {"reo_l2r_mono", "reo_l2r_swap", "reo_l2r_disc",
                                       "reo_r2l_mono", "reo_r2l_swap", "reo_r2l_disc"};
    for (int i = 0; i < 6; ++i) coords.push_back({reo_names[i], nullptr, i});
  }
  if (opts.budget < static_cast<int>(coords.size())) {
    throw InputError("tune: budget must cover at least one evaluation per feature");
  }

  TuneResult result;
  result.weights = system.weights;
  result.dev_bleu = evaluate_weights(system, result.weights, dev_src, dev_ref, opts);
  result.log += "initial\t-\t-\t" + format_double(result.dev_bleu) + "\n";

  int budget = opts.budget;
  auto get = [](const FeatureWeights& w, const Coordinate& c) {
    return c.scalar ? w.*(c.scalar) : w.reordering[static_cast<size_t>(c.reo_index)];
  };
  auto set = [](FeatureWeights& w, const Coordinate& c, double v) {
    if (c.scalar) w.*(c.scalar) = v;
    else w.reordering[static_cast<size_t>(c.reo_index)] = v;
  };

  for (int cycle = 1; budget > 0; ++cycle) {
    bool improved = false;
    for (const auto& coord : coords) {
      if (budget <= 0) break;
      double current = get(result.weights, coord);
      double best_value = current;
      double best_bleu = result.dev_bleu;
      for (double v : opts.grid) {
        if (v == current) continue;
        if (budget <= 0) break;
        FeatureWeights w = result.weights;
        set(w, coord, v);
        double b = evaluate_weights(system, w, dev_src, dev_ref, opts);
        --budget;
        if (b > best_bleu) {
          best_bleu = b;
          best_value = v;
        }
      }
      if (best_value != current) {
        set(result.weights, coord, best_value);
        result.dev_bleu = best_bleu;
        improved = true;
        result.log += std::to_string(cycle) + "\t" + coord.name + "\t" +
                      format_double(best_value) + "\t" + format_double(best_bleu) + "\n";
      }
    }
    if (!improved) break;
  }
  return result;
}

}  // namespace usmt
