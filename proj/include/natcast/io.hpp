#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "natcast/core.hpp"
#include "natcast/correlate.hpp"
#include "natcast/csv.hpp"
#include "natcast/errors.hpp"
#include "natcast/eval.hpp"
#include "natcast/regress.hpp"
#include "natcast/transfer.hpp"

namespace natcast {

// ---------------------------------------------------------------------------
// ground truth: region,variable,births,women_15_50

struct GroundTruth {
  std::vector<FertilityVariable> variables; // sorted by name
  std::vector<std::string> warnings;
};

inline GroundTruth read_ground_truth(std::istream& in, const std::string& source = "<stream>") {
  auto rows = csv::read_rows(in);
  if (rows.empty()) throw ParseError(source + ": empty file");
  const std::vector<std::string> expected{"region", "variable", "births", "women_15_50"};
  if (rows.front().fields != expected)
    throw ParseError(source + ": expected header region,variable,births,women_15_50",
                     rows.front().line_no);

  std::map<std::string, FertilityVariable> by_name;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.fields.size() != 4)
      throw ParseError(source + ": expected 4 fields, got " + std::to_string(row.fields.size()),
                       row.line_no);
    const std::string& region = row.fields[0];
    const std::string& variable = row.fields[1];
    if (region.empty() || variable.empty())
      throw ParseError(source + ": empty region or variable", row.line_no);
    if (!seen.emplace(region, variable).second)
      throw DuplicateError(source + ": duplicate record for (" + region + ", " + variable +
                           ") at line " + std::to_string(row.line_no));
    double births, women;
    try {
      births = detail::parse_double(row.fields[2], "births");
      women = detail::parse_double(row.fields[3], "women_15_50");
    } catch (const ParseError& e) {
      throw ParseError(source + ": " + e.what(), row.line_no);
    }
    if (births < 0.0)
      throw ParseError(source + ": negative births for region '" + region + "'", row.line_no);
    if (women <= 0.0)
      throw ParseError(source + ": non-positive women_15_50 for region '" + region + "'",
                       row.line_no);
    auto& var = by_name[variable];
    var.name = variable;
    var.births[region] = births;
    var.women_15_50[region] = women;
  }

  GroundTruth out;
  for (auto& [_, var] : by_name) out.variables.push_back(std::move(var));
  if (out.variables.empty())
    out.warnings.push_back(source + ": no data rows (header only)");
  return out;
}

inline GroundTruth read_ground_truth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_ground_truth(in, path);
}

inline std::string ground_truth_to_csv(std::span<const FertilityVariable> variables) {
  std::string out = "region,variable,births,women_15_50\n";
  for (const auto& var : variables)
    for (const auto& [region, births] : var.births)
      out += csv::join({region, var.name, detail::format_double(births),
                        detail::format_double(var.women_15_50.at(region))});
  return out;
}

// ---------------------------------------------------------------------------
// correlate-style export: term,r,<region1>,<region2>,...
// Each data row carries the term, its stored correlation with the export's
// target, and the z-scored per-region series.

struct CorrelateExportRow {
  std::string term;
  double stored_r = 0.0;
  ZScoredSeries z;
};

struct CorrelateExport {
  std::vector<std::string> region_order;
  std::vector<CorrelateExportRow> rows;
};

/// Ingest tolerance for the z-score invariant of export rows. Looser than
/// the internal 1e-9 because external exports round their decimals; rows
/// beyond this are rejected (a 1/(n-1)-divisor export fails under the
/// default population check — pass its divisor instead).
inline constexpr double kExportZTol = 1e-3;

inline CorrelateExport read_correlate_export(std::istream& in,
                                             const std::string& source = "<stream>",
                                             StdDivisor divisor = StdDivisor::population) {
  auto rows = csv::read_rows(in);
  if (rows.empty()) throw ParseError(source + ": empty file");
  const auto& header = rows.front().fields;
  if (header.size() < 4 || header[0] != "term" || header[1] != "r")
    throw ParseError(source + ": expected header term,r,<region>,... with at least 2 regions",
                     rows.front().line_no);

  CorrelateExport out;
  out.region_order.assign(header.begin() + 2, header.end());
  std::set<std::string> unique(out.region_order.begin(), out.region_order.end());
  if (unique.size() != out.region_order.size())
    throw DuplicateError(source + ": duplicate region column in header");

  std::set<std::string> seen_terms;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.fields.size() != header.size())
      throw ParseError(source + ": expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(row.fields.size()),
                       row.line_no);
    CorrelateExportRow entry;
    entry.term = row.fields[0];
    if (entry.term.empty()) throw ParseError(source + ": empty term", row.line_no);
    if (!seen_terms.insert(detail::fold_case(entry.term)).second)
      throw DuplicateError(source + ": duplicate term '" + entry.term + "' at line " +
                           std::to_string(row.line_no));
    try {
      entry.stored_r = detail::parse_double(row.fields[1], "r");
    } catch (const ParseError& e) {
      throw ParseError(source + ": " + e.what(), row.line_no);
    }

    std::vector<double> values(out.region_order.size());
    for (std::size_t c = 0; c < values.size(); ++c) {
      try {
        values[c] = detail::parse_double(row.fields[c + 2], "z-score");
      } catch (const ParseError& e) {
        throw ParseError(source + ": " + e.what(), row.line_no);
      }
    }
    const double m = mean(values);
    const double sd = stddev(values, divisor);
    if (std::abs(m) > kExportZTol || std::abs(sd - 1.0) > kExportZTol)
      throw ParseError(source + ": term '" + entry.term + "' fails the z-score invariant (mean " +
                           detail::format_double(m) + ", std " + detail::format_double(sd) +
                           "); check the std divisor of the export",
                       row.line_no);

    entry.z.variable_name = entry.term;
    for (std::size_t c = 0; c < values.size(); ++c) entry.z.values[out.region_order[c]] = values[c];
    out.rows.push_back(std::move(entry));
  }
  return out;
}

inline CorrelateExport read_correlate_export(const std::string& path,
                                             StdDivisor divisor = StdDivisor::population) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_correlate_export(in, path, divisor);
}

/// Serializes ranked terms in the export shape (term, r, one z column per
/// region in region_order).
inline std::string ranked_terms_to_csv(std::span<const RankedTerm> ranked,
                                       std::span<const std::string> region_order) {
  std::vector<std::string> header{"term", "r"};
  header.insert(header.end(), region_order.begin(), region_order.end());
  std::string out = csv::join(header);
  for (const auto& rt : ranked) {
    std::vector<std::string> fields{rt.term, detail::format_double(rt.r)};
    for (const auto& region : region_order)
      fields.push_back(detail::format_double(rt.z_series.values.at(region)));
    out += csv::join(fields);
  }
  return out;
}

/// Builds a searchable corpus from export rows: the stored z-series become
/// the raw series (z-scoring is idempotent up to floating point).
inline TermCorpus corpus_from_export(const CorrelateExport& exp) {
  std::vector<std::pair<std::string, RegionSeries>> entries;
  entries.reserve(exp.rows.size());
  for (const auto& row : exp.rows)
    entries.emplace_back(row.term, RegionSeries{row.term, row.z.values});
  return build_corpus(entries);
}

/// Recomputes each row's correlation against the target and reports terms
/// whose stored r deviates by more than `tol` — a consistency check for
/// exports claimed to match a given target.
struct ExportCrossCheck {
  std::string term;
  double stored_r = 0.0;
  double recomputed_r = 0.0;
};

inline std::vector<ExportCrossCheck> crosscheck_export_r(const CorrelateExport& exp,
                                                         const RegionSeries& target,
                                                         double tol = 0.01) {
  std::vector<double> tvals;
  tvals.reserve(exp.region_order.size());
  for (const auto& region : exp.region_order) {
    auto it = target.values.find(region);
    if (it == target.values.end())
      throw RegionMismatchError("cross-check: target is missing region '" + region + "'",
                                {region});
    tvals.push_back(it->second);
  }
  std::vector<ExportCrossCheck> mismatches;
  for (const auto& row : exp.rows) {
    std::vector<double> zvals;
    zvals.reserve(exp.region_order.size());
    for (const auto& region : exp.region_order) zvals.push_back(row.z.values.at(region));
    const double r = pearson_r(zvals, tvals);
    if (std::abs(r - row.stored_r) > tol)
      mismatches.push_back(ExportCrossCheck{row.term, row.stored_r, r});
  }
  return mismatches;
}

// ---------------------------------------------------------------------------
// trends: month,term,volume with month as YYYY-MM

inline std::pair<int, int> parse_year_month(std::string_view s, std::size_t line_no) {
  if (s.size() != 7 || s[4] != '-')
    throw ParseError("bad month '" + std::string(s) + "', expected YYYY-MM", line_no);
  const int year = static_cast<int>(detail::parse_int(s.substr(0, 4), "year"));
  const int month = static_cast<int>(detail::parse_int(s.substr(5, 2), "month"));
  if (month < 1 || month > 12)
    throw ParseError("bad month '" + std::string(s) + "': month out of range", line_no);
  return {year, month};
}

inline std::vector<MonthlyTermVolume> read_trends_monthly(std::istream& in,
                                                          const std::string& source = "<stream>") {
  auto rows = csv::read_rows(in);
  if (rows.empty()) throw ParseError(source + ": empty file");
  const std::vector<std::string> expected{"month", "term", "volume"};
  if (rows.front().fields != expected)
    throw ParseError(source + ": expected header month,term,volume", rows.front().line_no);

  std::map<std::string, MonthlyTermVolume> by_term;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.fields.size() != 3)
      throw ParseError(source + ": expected 3 fields, got " + std::to_string(row.fields.size()),
                       row.line_no);
    std::pair<int, int> ym;
    double volume;
    try {
      ym = parse_year_month(row.fields[0], row.line_no);
      volume = detail::parse_double(row.fields[2], "volume");
    } catch (const ParseError& e) {
      throw ParseError(source + ": " + e.what(), row.line_no);
    }
    const std::string& term = row.fields[1];
    if (term.empty()) throw ParseError(source + ": empty term", row.line_no);
    if (volume < 0.0)
      throw ParseError(source + ": negative volume for term '" + term + "'", row.line_no);
    auto& entry = by_term[term];
    entry.term = term;
    if (!entry.samples.emplace(ym, volume).second)
      throw DuplicateError(source + ": duplicate (term, month) for '" + term + "' at line " +
                           std::to_string(row.line_no));
  }
  std::vector<MonthlyTermVolume> out;
  out.reserve(by_term.size());
  for (auto& [_, v] : by_term) out.push_back(std::move(v));
  return out;
}

inline std::vector<MonthlyTermVolume> read_trends_monthly(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_trends_monthly(in, path);
}

inline std::string trends_to_csv(std::span<const MonthlyTermVolume> volumes) {
  std::string out = "month,term,volume\n";
  for (const auto& v : volumes)
    for (const auto& [ym, volume] : v.samples) {
      char month[8];
      std::snprintf(month, sizeof(month), "%04d-%02d", ym.first, ym.second);
      out += csv::join({month, v.term, detail::format_double(volume)});
    }
  return out;
}

// ---------------------------------------------------------------------------
// report writers

inline std::string evaluation_to_csv(std::span<const EvaluationReport> reports) {
  std::string out = "variable,family,r,rmse,smape_pct\n";
  for (const auto& rep : reports)
    out += csv::join({rep.variable, family_name(rep.family), detail::format_double(rep.metrics.r),
                      detail::format_double(rep.metrics.rmse),
                      detail::format_double(rep.metrics.smape_pct)});
  return out;
}

/// Fig.-1-shaped data: one row per year plus a trailing scalar r row.
/// A rescale_warning row follows when a series had no positive maximum
/// and was emitted unscaled.
inline std::string trend_report_to_csv(const TrendReport& report) {
  std::string out = "year,predicted,truth,predicted_rescaled,truth_rescaled\n";
  for (std::size_t i = 0; i < report.years.size(); ++i)
    out += csv::join({std::to_string(report.years[i]), detail::format_double(report.predicted[i]),
                      detail::format_double(report.truth[i]),
                      detail::format_double(report.predicted_rescaled[i]),
                      detail::format_double(report.truth_rescaled[i])});
  out += csv::join({"r", detail::format_double(report.r), "", "", ""});
  if (!report.predicted_rescale_ok) out += csv::join({"rescale_warning", "predicted", "", "", ""});
  if (!report.truth_rescale_ok) out += csv::join({"rescale_warning", "truth", "", "", ""});
  return out;
}

// ---------------------------------------------------------------------------
// lexicon: one lowercase stem per line, '#' comments

inline std::vector<std::string> read_lexicon(std::istream& in) {
  std::vector<std::string> stems;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t");
    stems.push_back(detail::fold_case(line.substr(begin, end - begin + 1)));
  }
  return stems;
}

inline std::vector<std::string> read_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_lexicon(in);
}

// ---------------------------------------------------------------------------
// model files

inline void save_model(const std::string& path, const FittedModel& m) {
  csv::write_file(path, serialize_model(m));
}

inline FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

} // namespace natcast
