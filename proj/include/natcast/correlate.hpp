#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "natcast/core.hpp"
#include "natcast/errors.hpp"

namespace natcast {

struct CorpusEntry {
  std::string term;
  RegionSeries raw;
  ZScoredSeries z; // population z-scores of `raw`, precomputed at build
};

/// An immutable searchable collection of term series sharing one region
/// universe. region_order is the sorted region codes; every entry covers
/// exactly that set and every stored z equals zscore(raw).
struct TermCorpus {
  std::vector<CorpusEntry> terms;
  std::vector<std::string> region_order;

  std::size_t size() const { return terms.size(); }
};

struct RankedTerm {
  std::string term;
  double r = 0.0;
  ZScoredSeries z_series;
};

/// Term-selection policy. `allow_stems` / `block_stems` are lowercase word
/// stems matched as prefixes of the term's words; an empty allow list
/// admits everything not blocked. min_r of 0 means no correlation
/// threshold.
struct SelectionConfig {
  std::size_t max_terms = 5;
  std::vector<std::string> allow_stems;
  std::vector<std::string> block_stems;
  bool dedup_plural = true;
  double min_r = 0.0;
};

namespace detail {

inline std::string fold_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::vector<std::string> words_of(std::string_view term) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : term) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

inline bool any_word_has_stem(const std::vector<std::string>& words,
                              const std::vector<std::string>& stems) {
  for (const auto& w : words)
    for (const auto& s : stems)
      if (!s.empty() && w.starts_with(s)) return true;
  return false;
}

/// True when the two (case-folded) terms are identical after stripping one
/// trailing "s" or "es" from either one.
inline bool plural_siblings(std::string_view a, std::string_view b) {
  const std::string fa = fold_case(a);
  const std::string fb = fold_case(b);
  auto strip = [](const std::string& t, std::size_t n) {
    return t.size() > n ? t.substr(0, t.size() - n) : std::string{};
  };
  for (std::size_t n : {std::size_t{1}, std::size_t{2}}) {
    const std::string suffix = n == 1 ? "s" : "es";
    if (fa.ends_with(suffix) && strip(fa, n) == fb) return true;
    if (fb.ends_with(suffix) && strip(fb, n) == fa) return true;
  }
  return fa == fb;
}

inline void sort_ranked(std::vector<RankedTerm>& ranked) {
  std::sort(ranked.begin(), ranked.end(), [](const RankedTerm& a, const RankedTerm& b) {
    if (a.r != b.r) return a.r > b.r;
    return a.term < b.term;
  });
}

} // namespace detail

/// Builds a searchable corpus from (term, series) pairs. All series must
/// share one region set and be non-degenerate; term names must be unique
/// under case folding. Z-scores are precomputed once here so queries can
/// run as plain dot products.
inline TermCorpus build_corpus(const std::vector<std::pair<std::string, RegionSeries>>& entries) {
  TermCorpus corpus;
  if (entries.empty()) throw DimensionError("build_corpus: empty corpus");

  corpus.region_order = region_codes(entries.front().second.values);

  std::set<std::string> seen;
  for (const auto& [term, series] : entries) {
    if (!seen.insert(detail::fold_case(term)).second)
      throw DuplicateError("build_corpus: duplicate term '" + term + "'");

    auto codes = region_codes(series.values);
    if (codes != corpus.region_order) {
      std::vector<std::string> diff;
      std::set_symmetric_difference(codes.begin(), codes.end(), corpus.region_order.begin(),
                                    corpus.region_order.end(), std::back_inserter(diff));
      throw RegionMismatchError("build_corpus: term '" + term +
                                    "' covers a different region set (" +
                                    std::to_string(diff.size()) + " codes differ)",
                                diff);
    }
    validate_region_series(series);

    CorpusEntry entry;
    entry.term = term;
    entry.raw = series;
    try {
      entry.z = zscore(series);
    } catch (const DegenerateSeriesError&) {
      throw DegenerateSeriesError("build_corpus: term '" + term + "' has a constant series");
    }
    entry.z.variable_name = term;
    entry.raw.variable_name = term;
    corpus.terms.push_back(std::move(entry));
  }
  return corpus;
}

/// Exact top-k correlation search: ranks every corpus term by Pearson r
/// against the target, descending, ties broken by term name. r is computed
/// through the dot-product-of-z-scores identity; the target is z-scored
/// once per query. Returns min(k, corpus size) entries.
inline std::vector<RankedTerm> top_k_correlated(const TermCorpus& corpus,
                                                const RegionSeries& target, std::size_t k = 50) {
  if (k == 0) throw DimensionError("top_k_correlated: k must be positive");

  std::vector<double> target_vals;
  target_vals.reserve(corpus.region_order.size());
  std::vector<std::string> missing;
  for (const auto& region : corpus.region_order) {
    auto it = target.values.find(region);
    if (it == target.values.end())
      missing.push_back(region);
    else
      target_vals.push_back(it->second);
  }
  if (!missing.empty())
    throw RegionMismatchError("top_k_correlated: target '" + target.variable_name +
                                  "' is missing " + std::to_string(missing.size()) +
                                  " corpus regions",
                              missing);

  std::vector<double> zt;
  try {
    zt = zscore(target_vals);
  } catch (const DegenerateSeriesError&) {
    throw DegenerateSeriesError("top_k_correlated: target '" + target.variable_name +
                                "' is constant");
  }

  const double n = static_cast<double>(zt.size());
  std::vector<RankedTerm> ranked;
  ranked.reserve(corpus.terms.size());
  for (const auto& entry : corpus.terms) {
    double dot = 0.0;
    std::size_t i = 0;
    for (const auto& [_, zv] : entry.z.values) dot += zt[i++] * zv;
    ranked.push_back(RankedTerm{entry.term, std::clamp(dot / n, -1.0, 1.0), entry.z});
  }
  detail::sort_ranked(ranked);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

/// Walks a ranked list in order and keeps terms that pass the lexicon
/// predicate, skipping the lower-correlated member of any singular/plural
/// pair when dedup_plural is set. Stops at max_terms or list end. An empty
/// result is valid (the dropped-variable case).
inline std::vector<RankedTerm> select_terms(std::span<const RankedTerm> ranked,
                                            const SelectionConfig& cfg) {
  if (cfg.max_terms < 1) throw ConfigError("select_terms: max_terms must be >= 1");
  std::vector<RankedTerm> selected;
  for (const auto& cand : ranked) {
    if (selected.size() >= cfg.max_terms) break;
    if (cfg.min_r != 0.0 && cand.r < cfg.min_r) continue;

    const auto words = detail::words_of(cand.term);
    if (detail::any_word_has_stem(words, cfg.block_stems)) continue;
    if (!cfg.allow_stems.empty() && !detail::any_word_has_stem(words, cfg.allow_stems)) continue;

    if (cfg.dedup_plural) {
      bool sibling_present = false;
      for (const auto& s : selected)
        if (detail::plural_siblings(cand.term, s.term)) {
          sibling_present = true;
          break;
        }
      if (sibling_present) continue; // the earlier (higher-r) sibling wins
    }
    selected.push_back(cand);
  }
  return selected;
}

} // namespace natcast
