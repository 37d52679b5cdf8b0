#include "usmt/corpus.hpp"

#include <algorithm>

#include "usmt/util.hpp"

namespace usmt {

size_t Corpus::token_count() const {
  size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

size_t Corpus::component_count() const {
  size_t n = 0;
  for (const auto& s : sentences)
    for (const auto& t : s) n += static_cast<size_t>(PhraseInventory::component_count(t));
  return n;
}

std::vector<std::string> tokenize(std::string_view line) {
  return split_ws(line);
}

Corpus corpus_from_lines(const std::vector<std::string>& lines, std::string language) {
  Corpus c;
  c.language = std::move(language);
  c.sentences.reserve(lines.size());
  for (const auto& line : lines) {
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    for (auto& t : toks) t = escape_token(t);
    c.sentences.push_back(std::move(toks));
  }
  return c;
}

Corpus load_corpus(const std::string& path, std::string language) {
  return corpus_from_lines(read_lines(path), std::move(language));
}

std::string FrequencyTable::pair_key(std::string_view left, std::string_view right) {
  std::string k;
  k.reserve(left.size() + right.size() + 1);
  k.append(left);
  k += '\t';
  k.append(right);
  return k;
}

int64_t FrequencyTable::count(const std::string& token) const {
  auto it = unigrams.find(token);
  return it == unigrams.end() ? 0 : it->second;
}

int64_t FrequencyTable::pair_count(const std::string& left, const std::string& right) const {
  auto it = pairs.find(pair_key(left, right));
  return it == pairs.end() ? 0 : it->second;
}

FrequencyTable count(const Corpus& corpus) {
  if (corpus.sentences.empty()) throw InputError("count: empty corpus");
  FrequencyTable ft;
  for (const auto& sent : corpus.sentences) {
    for (size_t i = 0; i < sent.size(); ++i) {
      ++ft.unigrams[sent[i]];
      ++ft.total_tokens;
      if (i + 1 < sent.size()) ++ft.pairs[FrequencyTable::pair_key(sent[i], sent[i + 1])];
    }
  }
  return ft;
}

double phrase_score(int64_t pair_freq, int64_t left_freq, int64_t right_freq, double delta) {
  if (left_freq <= 0 || right_freq <= 0) {
    throw InputError("phrase_score: marginal frequencies must be positive");
  }
  return (static_cast<double>(pair_freq) - delta) /
         (static_cast<double>(left_freq) * static_cast<double>(right_freq));
}

std::vector<std::string> PhraseInventory::components(std::string_view phrase) {
  return split_on(phrase, '_');
}

int PhraseInventory::component_count(std::string_view phrase) {
  return static_cast<int>(std::count(phrase.begin(), phrase.end(), '_')) + 1;
}

CollectResult collect_phrases(const Corpus& corpus, const CollectOptions& opts) {
  if (opts.passes < 1) throw InputError("collect_phrases: passes must be >= 1");
  if (!(opts.threshold > 0.0)) throw InputError("collect_phrases: threshold must be > 0");

  Corpus current = corpus;
  for (int pass = 0; pass < opts.passes; ++pass) {
    FrequencyTable ft = count(current);
    bool merged_any = false;
    Corpus next;
    next.language = current.language;
    next.sentences.reserve(current.sentences.size());
    for (const auto& sent : current.sentences) {
      std::vector<std::string> out;
      out.reserve(sent.size());
      size_t i = 0;
      while (i < sent.size()) {
        bool merge = false;
        if (i + 1 < sent.size()) {
          int comps = PhraseInventory::component_count(sent[i]) +
                      PhraseInventory::component_count(sent[i + 1]);
          if (comps <= opts.max_components) {
            double score = phrase_score(ft.pair_count(sent[i], sent[i + 1]),
                                        ft.count(sent[i]), ft.count(sent[i + 1]), opts.delta);
            merge = score > opts.threshold;
          }
        }
        if (merge) {
          out.push_back(sent[i] + "_" + sent[i + 1]);
          merged_any = true;
          i += 2;
        } else {
          out.push_back(sent[i]);
          i += 1;
        }
      }
      next.sentences.push_back(std::move(out));
    }
    current = std::move(next);
    if (!merged_any) break;
  }

  FrequencyTable final_counts = count(current);
  PhraseInventory inv;
  inv.max_components = opts.max_components;
  inv.entries.reserve(final_counts.unigrams.size());
  for (const auto& [unit, freq] : final_counts.unigrams) {
    inv.entries.push_back({unit, freq});
  }
  std::sort(inv.entries.begin(), inv.entries.end(), [](const auto& a, const auto& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    return a.phrase < b.phrase;
  });
  if (opts.max_phrases > 0 && inv.entries.size() > opts.max_phrases) {
    inv.entries.resize(opts.max_phrases);
  }
  return {std::move(inv), std::move(current)};
}

void save_inventory(const PhraseInventory& inv, const std::string& path) {
  std::string content;
  for (const auto& e : inv.entries) {
    content += e.phrase;
    content += '\t';
    content += std::to_string(e.freq);
    content += '\n';
  }
  atomic_write_file(path, content);
}

PhraseInventory load_inventory(const std::string& path) {
  PhraseInventory inv;
  int max_comps = 1;
  size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("inventory " + path + ":" + std::to_string(lineno) + ": missing tab");
    }
    PhraseInventory::Entry e;
    e.phrase = line.substr(0, tab);
    e.freq = parse_int(std::string_view(line).substr(tab + 1));
    max_comps = std::max(max_comps, PhraseInventory::component_count(e.phrase));
    inv.entries.push_back(std::move(e));
  }
  inv.max_components = max_comps;
  return inv;
}

std::string render_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& sent : corpus.sentences) {
    out += join(sent, " ");
    out += '\n';
  }
  return out;
}

}  // namespace usmt
