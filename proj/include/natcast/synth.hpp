#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "natcast/core.hpp"
#include "natcast/correlate.hpp"
#include "natcast/csv.hpp"
#include "natcast/errors.hpp"
#include "natcast/io.hpp"
#include "natcast/transfer.hpp"

#include <json.hpp>

namespace natcast {

/// Parameters for the synthetic fixture generator. Planted terms are
/// affine functions of the target intensity plus Gaussian noise of
/// `noise_level` standard deviations (per-term correlation with the
/// target is about 1/sqrt(1 + noise_level^2)); the remaining terms are
/// independent noise. Trends volumes for planted terms track the yearly
/// national truth the same way with `trend_noise`.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_regions = 51;
  std::size_t n_terms = 200;
  std::size_t n_planted = 3;
  double noise_level = 0.6;
  std::string variable = "GenSynth";
  double mean_intensity = 54.0;
  double std_intensity = 6.5;
  double scale = 1000.0;
  int first_year = 2010;
  std::size_t n_years = 6;
  double trend_noise = 0.4;
};

struct PlantedTermInfo {
  std::string term;
  double slope = 0.0;
  double offset = 0.0;
};

struct SynthData {
  SynthConfig config;
  FertilityVariable ground_truth;  // per-region counts
  RegionSeries intensity;          // target series the terms were planted on
  std::vector<std::pair<std::string, RegionSeries>> corpus_entries; // planted first
  std::vector<MonthlyTermVolume> trends;
  FertilityVariable yearly_truth;  // same schema with years as region codes
  std::vector<PlantedTermInfo> planted;
  std::vector<std::string> lexicon; // allow-stems covering the planted vocabulary
};

namespace detail {

inline const std::vector<std::string>& planted_vocab() {
  static const std::vector<std::string> v{
      "pregnancy workout",      "baby tummy",      "nursing cover",  "potty training",
      "crib reviews",           "prenatal vitamins", "baby monitor", "stroller wheels",
      "breast milk storage",    "newborn sleep schedule", "diaper sizes", "ovulation calendar"};
  return v;
}

inline const std::vector<std::string>& noise_vocab() {
  static const std::vector<std::string> v{
      "mortgage rates",    "car insurance quotes", "tax refund status", "weather radar",
      "football scores",   "diy deck plans",       "used trucks",       "lottery numbers",
      "stock screener",    "antivirus download",   "slow cooker recipe", "flight tracker",
      "resume templates",  "guitar tuner",         "crossword answers", "fuel prices"};
  return v;
}

inline std::vector<std::string> synth_lexicon_stems() {
  return {"pregnan", "baby",   "nursing", "potty",     "crib",  "prenatal", "stroller",
          "milk",    "newborn", "diaper",  "ovulation", "birth", "fertility"};
}

inline std::string vocab_name(const std::vector<std::string>& vocab, std::size_t i) {
  const std::string& base = vocab[i % vocab.size()];
  const std::size_t cycle = i / vocab.size();
  return cycle == 0 ? base : base + " " + std::to_string(cycle + 1);
}

inline std::string synth_region_code(std::size_t i, std::size_t n) {
  std::size_t width = 2;
  for (std::size_t v = n; v >= 100; v /= 10) ++width;
  std::string digits = std::to_string(i + 1);
  return "R" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

} // namespace detail

inline SynthData synth_generate(const SynthConfig& cfg) {
  if (cfg.n_planted > cfg.n_terms)
    throw ConfigError("synth: n_planted exceeds n_terms");
  if (cfg.n_regions < 3) throw ConfigError("synth: need at least 3 regions");
  if (cfg.n_years < 2) throw ConfigError("synth: need at least 2 years");
  if (cfg.noise_level < 0.0 || cfg.trend_noise < 0.0)
    throw ConfigError("synth: noise levels must be >= 0");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> slope_dist(0.5, 2.0);
  std::uniform_real_distribution<double> offset_dist(-1.0, 1.0);
  std::uniform_int_distribution<long long> women_dist(200000, 2000000);

  SynthData data;
  data.config = cfg;
  data.lexicon = detail::synth_lexicon_stems();

  // regions and ground-truth counts; the realized intensity comes from the
  // rounded counts so planted correlations are exact at zero noise
  std::vector<std::string> regions;
  for (std::size_t i = 0; i < cfg.n_regions; ++i)
    regions.push_back(detail::synth_region_code(i, cfg.n_regions));

  data.ground_truth.name = cfg.variable;
  for (const auto& region : regions) {
    const double women = static_cast<double>(women_dist(rng));
    const double wanted = std::max(0.1 * cfg.mean_intensity,
                                   cfg.mean_intensity + cfg.std_intensity * gauss(rng));
    const double births = std::llround(wanted * women / cfg.scale);
    data.ground_truth.births[region] = births;
    data.ground_truth.women_15_50[region] = women;
  }
  data.intensity = fertility_intensity(data.ground_truth, cfg.scale);

  auto u = zscore(data.intensity).values; // standardized target, by region

  // term series: planted ones are affine in the target plus noise
  for (std::size_t t = 0; t < cfg.n_terms; ++t) {
    const bool is_planted = t < cfg.n_planted;
    const std::string name =
        is_planted ? detail::vocab_name(detail::planted_vocab(), t)
                   : detail::vocab_name(detail::noise_vocab(), t - cfg.n_planted);
    RegionSeries series;
    series.variable_name = name;
    if (is_planted) {
      PlantedTermInfo info;
      info.term = name;
      info.slope = slope_dist(rng);
      info.offset = offset_dist(rng);
      for (const auto& region : regions)
        series.values[region] =
            info.slope * (u.at(region) + cfg.noise_level * gauss(rng)) + info.offset;
      data.planted.push_back(info);
    } else {
      for (const auto& region : regions) series.values[region] = gauss(rng);
    }
    data.corpus_entries.emplace_back(name, std::move(series));
  }

  // yearly national truth: a random walk around the spatial intensity level
  std::uniform_int_distribution<long long> national_women(50000000, 80000000);
  data.yearly_truth.name = cfg.variable;
  double level = cfg.mean_intensity + cfg.std_intensity * gauss(rng);
  std::vector<int> years;
  for (std::size_t yi = 0; yi < cfg.n_years; ++yi) {
    const int year = cfg.first_year + static_cast<int>(yi);
    years.push_back(year);
    level = std::max(0.1 * cfg.mean_intensity, level + 0.5 * cfg.std_intensity * gauss(rng));
    const double women = static_cast<double>(national_women(rng));
    data.yearly_truth.births[std::to_string(year)] = std::llround(level * women / cfg.scale);
    data.yearly_truth.women_15_50[std::to_string(year)] = women;
  }
  auto truth_intensity = fertility_intensity(data.yearly_truth, cfg.scale);
  auto truth_z = zscore(truth_intensity).values; // keyed by year string

  // monthly volumes: planted terms track the yearly truth, others drift
  std::uniform_real_distribution<double> term_scale(10.0, 1000.0);
  std::uniform_real_distribution<double> month_weight(0.5, 1.5);
  for (std::size_t t = 0; t < cfg.n_terms; ++t) {
    const bool is_planted = t < cfg.n_planted;
    MonthlyTermVolume vol;
    vol.term = data.corpus_entries[t].first;
    const double s = term_scale(rng);
    for (int year : years) {
      const double base = is_planted
                              ? 10.0 + truth_z.at(std::to_string(year)) +
                                    cfg.trend_noise * gauss(rng)
                              : 10.0 + gauss(rng);
      const double yearly = s * std::max(0.5, base);
      double weights[12];
      double total = 0.0;
      for (auto& w : weights) total += (w = month_weight(rng));
      for (int mo = 1; mo <= 12; ++mo)
        vol.samples[{year, mo}] = yearly * weights[mo - 1] / total;
    }
    data.trends.push_back(std::move(vol));
  }
  return data;
}

/// Emits the generated fixture in the toolkit's file formats plus a JSON
/// manifest recording the planted terms and their true affine parameters.
/// Writes ground_truth.csv, corpus.csv (export-shaped, ranked by r),
/// trends.csv, trends_truth.csv, lexicon.txt and manifest.json.
inline void write_synth_files(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  csv::write_file((dir / "ground_truth.csv").string(),
                  ground_truth_to_csv(std::vector<FertilityVariable>{data.ground_truth}));

  auto corpus = build_corpus(data.corpus_entries);
  auto ranked = top_k_correlated(corpus, data.intensity, corpus.size());
  csv::write_file((dir / "corpus.csv").string(), ranked_terms_to_csv(ranked, corpus.region_order));

  auto sorted_trends = data.trends;
  std::sort(sorted_trends.begin(), sorted_trends.end(),
            [](const MonthlyTermVolume& a, const MonthlyTermVolume& b) { return a.term < b.term; });
  csv::write_file((dir / "trends.csv").string(), trends_to_csv(sorted_trends));

  csv::write_file((dir / "trends_truth.csv").string(),
                  ground_truth_to_csv(std::vector<FertilityVariable>{data.yearly_truth}));

  std::string lex = "# allow-stems for the synthetic planted vocabulary\n";
  for (const auto& stem : data.lexicon) lex += stem + "\n";
  csv::write_file((dir / "lexicon.txt").string(), lex);

  nlohmann::json manifest;
  manifest["seed"] = data.config.seed;
  manifest["n_regions"] = data.config.n_regions;
  manifest["n_terms"] = data.config.n_terms;
  manifest["n_planted"] = data.config.n_planted;
  manifest["noise_level"] = data.config.noise_level;
  manifest["trend_noise"] = data.config.trend_noise;
  manifest["variable"] = data.config.variable;
  manifest["scale"] = data.config.scale;
  manifest["mean_intensity"] = data.config.mean_intensity;
  manifest["std_intensity"] = data.config.std_intensity;
  manifest["first_year"] = data.config.first_year;
  manifest["n_years"] = data.config.n_years;
  manifest["planted"] = nlohmann::json::array();
  for (const auto& p : data.planted)
    manifest["planted"].push_back({{"term", p.term}, {"slope", p.slope}, {"offset", p.offset}});
  csv::write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

} // namespace natcast
