#include "usmt/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

const char* synth_direction_name(SynthDirection d) {
  return d == SynthDirection::forward ? "forward" : "back";
}

SynthDirection synth_direction_from_name(const std::string& name) {
  if (name == "forward") return SynthDirection::forward;
  if (name == "back") return SynthDirection::back;
  throw ParseError("unknown synthetic direction: '" + name + "'");
}

SyntheticCorpus generate_synthetic(const TranslationSystem& system,
                                   const std::vector<std::vector<std::string>>& sentences,
                                   SynthDirection direction, int iteration,
                                   const std::string& system_id, const NGramModel& synth_lm,
                                   size_t beam, unsigned threads, uint64_t origin_base) {
  SyntheticCorpus out;
  if (sentences.empty()) return out;
  auto decoded = decode_batch(sentences, system, beam, threads);
  out.pairs.resize(sentences.size());
  parallel_for(sentences.size(), threads, [&](size_t i) {
    SyntheticPair p;
    if (direction == SynthDirection::forward) {
      p.src = sentences[i];
      p.tgt = decoded[i].tokens;
      p.cleanliness = cleanliness(synth_lm, p.tgt);
    } else {
      p.src = decoded[i].tokens;
      p.tgt = sentences[i];
      p.cleanliness = cleanliness(synth_lm, p.src);
    }
    p.iteration = iteration;
    p.system_id = system_id;
    p.direction = direction;
    p.origin_index = origin_base + i;
    out.pairs[i] = std::move(p);
  });
  return out;
}

uint64_t filter_keep_count(double alpha, uint64_t n, uint64_t iteration) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("filter: alpha must be in (0,1]");
  double x = alpha * static_cast<double>(n) * static_cast<double>(iteration);
  double eps = std::max(1e-9, x * 1e-12);
  double c = std::ceil(x - eps);
  return c <= 0.0 ? 0 : static_cast<uint64_t>(c);
}

SyntheticCorpus filter_synthetic(const SyntheticCorpus& accumulated, double alpha,
                                 uint64_t iteration, uint64_t n, bool invert) {
  if (accumulated.pairs.empty()) throw InputError("filter_synthetic: nothing accumulated");
  uint64_t keep = std::min<uint64_t>(filter_keep_count(alpha, n, iteration),
                                     accumulated.pairs.size());
  std::vector<size_t> order(accumulated.pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto& pa = accumulated.pairs[a];
    const auto& pb = accumulated.pairs[b];
    double ca = invert ? -pa.cleanliness : pa.cleanliness;
    double cb = invert ? -pb.cleanliness : pb.cleanliness;
    if (ca != cb) return ca > cb;
    if (pa.iteration != pb.iteration) return pa.iteration < pb.iteration;
    return pa.origin_index < pb.origin_index;
  });
  SyntheticCorpus out;
  out.pairs.reserve(keep);
  for (uint64_t i = 0; i < keep; ++i) out.pairs.push_back(accumulated.pairs[order[i]]);
  return out;
}

static std::string render_raw(const std::vector<std::string>& tokens) {
  std::string line;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) line += ' ';
    line += unescape_token(tokens[i]);
  }
  return line;
}

void save_synthetic(const SyntheticCorpus& corpus, const std::string& base_path) {
  std::string src, tgt, meta;
  for (const auto& p : corpus.pairs) {
    src += render_raw(p.src);
    src += '\n';
    tgt += render_raw(p.tgt);
    tgt += '\n';
    meta += std::to_string(p.iteration);
    meta += '\t';
    meta += p.system_id;
    meta += '\t';
    meta += synth_direction_name(p.direction);
    meta += '\t';
    meta += format_double(p.cleanliness);
    meta += '\t';
    meta += std::to_string(p.origin_index);
    meta += '\n';
  }
  atomic_write_file(base_path + ".src", src);
  atomic_write_file(base_path + ".tgt", tgt);
  atomic_write_file(base_path + ".meta", meta);
}

SyntheticCorpus load_synthetic(const std::string& base_path) {
  auto src_lines = read_lines(base_path + ".src");
  auto tgt_lines = read_lines(base_path + ".tgt");
  auto meta_lines = read_lines(base_path + ".meta");
  if (src_lines.size() != tgt_lines.size() || src_lines.size() != meta_lines.size()) {
    throw ParseError("synthetic corpus: side files disagree at " + base_path);
  }
  SyntheticCorpus out;
  out.pairs.reserve(src_lines.size());
  for (size_t i = 0; i < src_lines.size(); ++i) {
    SyntheticPair p;
    p.src = split_ws(src_lines[i]);
    p.tgt = split_ws(tgt_lines[i]);
    for (auto& t : p.src) t = escape_token(t);
    for (auto& t : p.tgt) t = escape_token(t);
    auto fields = split_on(meta_lines[i], '\t');
    if (fields.size() != 5) {
      throw ParseError("synthetic meta line " + std::to_string(i + 1) + ": expected 5 fields");
    }
    p.iteration = static_cast<int>(parse_int(fields[0]));
    p.system_id = fields[1];
    p.direction = synth_direction_from_name(fields[2]);
    p.cleanliness = parse_double(fields[3]);
    p.origin_index = static_cast<uint64_t>(parse_int(fields[4]));
    out.pairs.push_back(std::move(p));
  }
  return out;
}

}  // namespace usmt
