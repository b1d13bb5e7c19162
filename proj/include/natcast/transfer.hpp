#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "natcast/core.hpp"
#include "natcast/errors.hpp"
#include "natcast/regress.hpp"

namespace natcast {

/// National monthly search volume for one term, keyed by (year, month).
struct MonthlyTermVolume {
  std::string term;
  std::map<std::pair<int, int>, double> samples;
};

/// Per-term national yearly volumes with each term column z-normalized
/// across the years. A year here plays the role a region plays in the
/// spatial fit.
struct AnnualTermMatrix {
  std::vector<int> years;
  std::vector<std::string> terms;
  std::vector<double> z_values; // row-major, years.size() x terms.size()

  double at(std::size_t year_idx, std::size_t term_idx) const {
    return z_values[year_idx * terms.size() + term_idx];
  }
};

/// Sums the 12 monthly volumes of every year present in the samples.
/// Any year with missing months is an error naming the gaps.
inline std::map<int, double> annualize(const MonthlyTermVolume& m) {
  std::map<int, std::pair<double, unsigned>> acc; // year -> (sum, month bitmask)
  for (const auto& [key, volume] : m.samples) {
    const auto& [year, month] = key;
    if (month < 1 || month > 12)
      throw ParseError("term '" + m.term + "': month " + std::to_string(month) +
                       " out of range for year " + std::to_string(year));
    if (volume < 0.0)
      throw Error("term '" + m.term + "': negative volume in " + std::to_string(year));
    auto& [sum, mask] = acc[year];
    sum += volume;
    mask |= 1u << (month - 1);
  }
  std::map<int, double> out;
  for (const auto& [year, entry] : acc) {
    const auto& [sum, mask] = entry;
    if (mask != 0xFFFu) {
      std::vector<int> missing;
      for (int mo = 1; mo <= 12; ++mo)
        if (!(mask & (1u << (mo - 1)))) missing.push_back(mo);
      std::string list;
      for (int mo : missing) list += (list.empty() ? "" : ", ") + std::to_string(mo);
      throw IncompleteYearError("term '" + m.term + "': year " + std::to_string(year) +
                                    " is missing month(s) " + list,
                                year, missing);
    }
    out[year] = sum;
  }
  return out;
}

/// Annualizes every term over the requested years and z-normalizes each
/// term's yearly vector. Every term must cover every requested year with
/// all 12 months; a term constant across the years is an error.
inline AnnualTermMatrix build_annual_matrix(std::span<const MonthlyTermVolume> volumes,
                                            std::span<const int> years) {
  if (years.size() < 2)
    throw DimensionError("build_annual_matrix: need at least 2 years");
  AnnualTermMatrix out;
  out.years.assign(years.begin(), years.end());

  std::vector<std::vector<double>> columns;
  for (const auto& m : volumes) {
    // restrict to the requested years before the completeness check so
    // unrelated partial years in the input do not block the build
    MonthlyTermVolume wanted;
    wanted.term = m.term;
    for (const auto& [key, volume] : m.samples)
      if (std::find(years.begin(), years.end(), key.first) != years.end())
        wanted.samples.emplace(key, volume);
    auto sums = annualize(wanted);

    std::vector<double> yearly;
    for (int year : years) {
      auto it = sums.find(year);
      if (it == sums.end())
        throw IncompleteYearError("term '" + m.term + "': no volume data for year " +
                                      std::to_string(year),
                                  year, {});
      yearly.push_back(it->second);
    }
    try {
      columns.push_back(zscore(yearly));
    } catch (const DegenerateSeriesError&) {
      throw DegenerateSeriesError("term '" + m.term + "' has a constant yearly volume");
    }
    out.terms.push_back(m.term);
  }

  out.z_values.resize(out.years.size() * out.terms.size());
  for (std::size_t y = 0; y < out.years.size(); ++y)
    for (std::size_t t = 0; t < out.terms.size(); ++t)
      out.z_values[y * out.terms.size() + t] = columns[t][y];
  return out;
}

/// Applies a spatially fitted model to the yearly matrix, one prediction
/// per year. Only the across-year shape of the output is meaningful; its
/// absolute level is an artifact of the per-term normalization.
inline std::vector<double> apply_spatial_model(const FittedModel& m, const AnnualTermMatrix& a) {
  std::vector<std::size_t> idx;
  std::vector<double> coef;
  for (const auto& [term, c] : m.coefficients) {
    if (c == 0.0) continue;
    auto it = std::find(a.terms.begin(), a.terms.end(), term);
    if (it == a.terms.end())
      throw DimensionError("apply_spatial_model: no yearly column for term '" + term + "'");
    idx.push_back(static_cast<std::size_t>(it - a.terms.begin()));
    coef.push_back(c);
  }
  std::vector<double> out;
  out.reserve(a.years.size());
  for (std::size_t y = 0; y < a.years.size(); ++y) {
    double fit = m.intercept;
    for (std::size_t k = 0; k < idx.size(); ++k) fit += coef[k] * a.at(y, idx[k]);
    out.push_back(fit);
  }
  return out;
}

/// Pearson r between the predicted and true yearly series.
inline double trend_correlation(std::span<const double> predicted,
                                std::span<const double> truth) {
  return pearson_r(predicted, truth);
}

/// Divides by the maximum so the largest value is exactly 1.0. Requires a
/// positive maximum; series that cannot satisfy that are reported
/// unscaled by the TrendReport assembly instead.
inline std::vector<double> rescale_max1(std::span<const double> series) {
  if (series.empty()) throw DimensionError("rescale_max1: empty series");
  const double mx = *std::max_element(series.begin(), series.end());
  if (!(mx > 0.0)) throw RescaleError("rescale_max1: maximum is not positive");
  std::vector<double> out(series.begin(), series.end());
  for (auto& v : out) v /= mx; // mx/mx is exactly 1.0 in IEEE arithmetic
  return out;
}

/// Yearly predictions vs truth for one variable, with plot-ready rescaled
/// copies. When a series has no positive maximum it is carried unscaled
/// and flagged; correlation always uses the unscaled series.
struct TrendReport {
  std::string variable;
  std::vector<int> years;
  std::vector<double> predicted;
  std::vector<double> truth;
  double r = 0.0;
  std::vector<double> predicted_rescaled;
  std::vector<double> truth_rescaled;
  bool predicted_rescale_ok = true;
  bool truth_rescale_ok = true;
};

inline TrendReport make_trend_report(std::string variable, std::vector<int> years,
                                     std::vector<double> predicted, std::vector<double> truth) {
  if (years.size() != predicted.size() || years.size() != truth.size())
    throw DimensionError("trend report: years, predictions and truth differ in length");
  TrendReport report;
  report.variable = std::move(variable);
  report.years = std::move(years);
  report.predicted = std::move(predicted);
  report.truth = std::move(truth);
  report.r = trend_correlation(report.predicted, report.truth);
  try {
    report.predicted_rescaled = rescale_max1(report.predicted);
  } catch (const RescaleError&) {
    report.predicted_rescaled = report.predicted;
    report.predicted_rescale_ok = false;
  }
  try {
    report.truth_rescaled = rescale_max1(report.truth);
  } catch (const RescaleError&) {
    report.truth_rescaled = report.truth;
    report.truth_rescale_ok = false;
  }
  return report;
}

} // namespace natcast
