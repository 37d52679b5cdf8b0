#include "usmt/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "usmt/text.hpp"
#include "usmt/util.hpp"

namespace usmt {

const std::vector<double>& EmbeddingSpace::vec(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) {
    throw OovError("token not in " + language_ + " embedding space: '" + token + "'");
  }
  return vectors_[it->second];
}

void EmbeddingSpace::add(const std::string& token, std::vector<double> v) {
  if (dim_ == 0) dim_ = static_cast<int>(v.size());
  if (static_cast<int>(v.size()) != dim_) {
    throw InputError("embedding dimension mismatch for token '" + token + "'");
  }
  if (index_.count(token)) throw InputError("duplicate token '" + token + "'");
  for (double x : v) {
    if (!std::isfinite(x)) throw InputError("non-finite component for token '" + token + "'");
  }
  index_.emplace(token, vectors_.size());
  tokens_.push_back(token);
  vectors_.push_back(std::move(v));
}

EmbeddingSpace load_embeddings(std::istream& in, std::string language, size_t max_vocab) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("embeddings: empty stream");
  auto header = split_ws(line);
  if (header.size() != 2) throw ParseError("embeddings line 1: header must be 'V D'");
  int64_t vocab = 0, dim = 0;
  try {
    vocab = parse_int(header[0]);
    dim = parse_int(header[1]);
  } catch (const ParseError&) {
    throw ParseError("embeddings line 1: header must be 'V D'");
  }
  if (vocab < 1 || dim < 1) throw ParseError("embeddings line 1: V and D must be positive");

  EmbeddingSpace space(static_cast<int>(dim), std::move(language));
  for (int64_t i = 0; i < vocab; ++i) {
    size_t lineno = static_cast<size_t>(i) + 2;
    if (!std::getline(in, line)) {
      throw ParseError("embeddings line " + std::to_string(lineno) + ": unexpected end of stream");
    }
    auto fields = split_ws(line);
    if (fields.size() != static_cast<size_t>(dim) + 1) {
      throw ParseError("embeddings line " + std::to_string(lineno) + ": expected token plus " +
                       std::to_string(dim) + " components, got " +
                       std::to_string(fields.empty() ? 0 : fields.size() - 1));
    }
    std::string token = escape_token(fields[0]);
    if (space.contains(token)) {
      throw ParseError("embeddings line " + std::to_string(lineno) + ": duplicate token '" +
                       fields[0] + "'");
    }
    std::vector<double> v(static_cast<size_t>(dim));
    for (int64_t d = 0; d < dim; ++d) {
      try {
        v[static_cast<size_t>(d)] = parse_double(fields[static_cast<size_t>(d) + 1]);
      } catch (const ParseError&) {
        throw ParseError("embeddings line " + std::to_string(lineno) +
                         ": non-numeric component '" + fields[static_cast<size_t>(d) + 1] + "'");
      }
      if (!std::isfinite(v[static_cast<size_t>(d)])) {
        throw ParseError("embeddings line " + std::to_string(lineno) + ": non-finite component");
      }
    }
    space.add(token, std::move(v));
    if (max_vocab > 0 && space.size() >= max_vocab) break;
  }
  return space;
}

EmbeddingSpace load_embeddings_file(const std::string& path, std::string language,
                                    size_t max_vocab) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embeddings file: " + path);
  try {
    return load_embeddings(in, std::move(language), max_vocab);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_embeddings(const EmbeddingSpace& space, std::ostream& out) {
  out << space.size() << ' ' << space.dim() << '\n';
  for (const auto& token : space.tokens()) {
    out << unescape_token(token);
    for (double x : space.vec(token)) out << ' ' << format_double(x);
    out << '\n';
  }
}

void save_embeddings_file(const EmbeddingSpace& space, const std::string& path) {
  std::ostringstream ss;
  save_embeddings(space, ss);
  atomic_write_file(path, ss.str());
}

std::vector<double> phrase_embedding(std::string_view phrase, const EmbeddingSpace& space) {
  auto comps = PhraseInventory::components(phrase);
  if (comps.empty()) throw InputError("phrase_embedding: empty phrase");
  std::vector<double> sum(static_cast<size_t>(space.dim()), 0.0);
  for (const auto& c : comps) {
    const auto& v = space.vec(c);
    for (size_t d = 0; d < sum.size(); ++d) sum[d] += v[d];
  }
  return sum;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InputError("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error("cosine undefined for zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> softmax_scaled(const std::vector<double>& cosines, double beta) {
  if (cosines.empty()) throw InputError("softmax over empty candidate set");
  if (!(beta > 0.0)) throw InputError("softmax: beta must be positive");
  double m = beta * cosines[0];
  for (double c : cosines) m = std::max(m, beta * c);
  std::vector<double> p(cosines.size());
  double z = 0.0;
  for (size_t i = 0; i < cosines.size(); ++i) {
    p[i] = std::exp(beta * cosines[i] - m);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> translation_prob(const std::string& src_phrase,
                                     const std::vector<std::string>& candidates,
                                     const EmbeddingSpace& src_space,
                                     const EmbeddingSpace& tgt_space, double beta) {
  auto sv = phrase_embedding(src_phrase, src_space);
  std::vector<double> cos(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    cos[i] = cosine(sv, phrase_embedding(candidates[i], tgt_space));
  }
  return softmax_scaled(cos, beta);
}

PhraseMatrix build_phrase_matrix(const PhraseInventory& inv, const EmbeddingSpace& space) {
  PhraseMatrix m;
  m.phrases.reserve(inv.entries.size());
  m.vectors.reserve(inv.entries.size());
  m.norms.reserve(inv.entries.size());
  for (const auto& e : inv.entries) {
    auto v = phrase_embedding(e.phrase, space);
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    m.phrases.push_back(e.phrase);
    m.vectors.push_back(std::move(v));
    m.norms.push_back(std::sqrt(n2));
  }
  return m;
}

RankedCandidates topk_from_matrix(const std::string& src_phrase,
                                  const std::vector<double>& src_vec, const PhraseMatrix& targets,
                                  size_t k, double beta) {
  if (targets.phrases.empty()) throw InputError("topk: empty target inventory");
  double sn = 0.0;
  for (double x : src_vec) sn += x * x;
  sn = std::sqrt(sn);
  if (sn == 0.0) throw Error("cosine undefined for zero-norm vector");

  std::vector<std::pair<double, size_t>> scored(targets.phrases.size());
  for (size_t i = 0; i < targets.phrases.size(); ++i) {
    if (targets.norms[i] == 0.0) throw Error("cosine undefined for zero-norm vector");
    const auto& tv = targets.vectors[i];
    double dot = 0.0;
    for (size_t d = 0; d < src_vec.size(); ++d) dot += src_vec[d] * tv[d];
    scored[i] = {dot / (sn * targets.norms[i]), i};
  }
  auto better = [&](const std::pair<double, size_t>& a, const std::pair<double, size_t>& b) {
    if (a.first != b.first) return a.first > b.first;
    return targets.phrases[a.second] < targets.phrases[b.second];
  };
  size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<ptrdiff_t>(keep), scored.end(),
                    better);
  scored.resize(keep);

  RankedCandidates out;
  out.source = src_phrase;
  std::vector<double> cos(keep);
  for (size_t i = 0; i < keep; ++i) cos[i] = scored[i].first;
  auto probs = softmax_scaled(cos, beta);
  out.items.resize(keep);
  for (size_t i = 0; i < keep; ++i) {
    out.items[i] = {targets.phrases[scored[i].second], cos[i], probs[i]};
  }
  return out;
}

RankedCandidates topk_candidates(const std::string& src_phrase, const PhraseInventory& tgt_inv,
                                 const EmbeddingSpace& src_space, const EmbeddingSpace& tgt_space,
                                 size_t k, double beta) {
  auto matrix = build_phrase_matrix(tgt_inv, tgt_space);
  auto sv = phrase_embedding(src_phrase, src_space);
  return topk_from_matrix(src_phrase, sv, matrix, k, beta);
}

}  // namespace usmt
