#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "natcast/errors.hpp"

namespace natcast {

/// Tolerance policy shared by all modules: absolute for normalized
/// quantities (z-scores, correlations), relative elsewhere.
inline constexpr double kNormalizedAbsTol = 1e-9;
inline constexpr double kRelTol = 1e-9;

/// A series is degenerate when popstd < kDegenerateStdTol * max(1, |mean|).
inline constexpr double kDegenerateStdTol = 1e-12;

/// Standard-deviation divisor convention. The toolkit normalizes with the
/// population (1/n) divisor; `sample` exists so externally produced
/// z-score files using 1/(n-1) can be validated against their own
/// convention on ingest.
enum class StdDivisor { population, sample };

/// One real value per region, keyed by region code. Region codes are
/// opaque text; nothing assumes a particular universe (fixtures use the
/// 51 U.S. state codes, the temporal transfer reuses years as codes).
struct RegionSeries {
  std::string variable_name;
  std::map<std::string, double> values;
};

/// Raw counts for one fertility category: births in the category and the
/// female population aged 15-50, per region.
struct FertilityVariable {
  std::string name;
  std::map<std::string, double> births;
  std::map<std::string, double> women_15_50;
};

/// A series normalized to mean 0 and standard deviation 1 across its
/// regions. Instances produced by zscore() satisfy the invariant to
/// within kNormalizedAbsTol; instances read from external files are
/// gated at the looser ingest tolerance (see io.hpp).
struct ZScoredSeries {
  std::string variable_name;
  std::map<std::string, double> values;
};

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double stddev(std::span<const double> x, StdDivisor divisor = StdDivisor::population) {
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double denom = divisor == StdDivisor::population
                           ? static_cast<double>(x.size())
                           : static_cast<double>(x.size() - 1);
  return std::sqrt(ss / denom);
}

inline double popstd(std::span<const double> x) { return stddev(x, StdDivisor::population); }

inline bool is_degenerate(std::span<const double> x) {
  return popstd(x) < kDegenerateStdTol * std::max(1.0, std::abs(mean(x)));
}

/// Checks the RegionSeries invariants: at least 3 regions, all values
/// finite. Region uniqueness is structural (map keys).
inline void validate_region_series(const RegionSeries& s) {
  if (s.values.size() < 3)
    throw DimensionError("series '" + s.variable_name + "' has " +
                         std::to_string(s.values.size()) +
                         " regions; at least 3 are required");
  for (const auto& [region, value] : s.values)
    if (!std::isfinite(value))
      throw Error("series '" + s.variable_name + "' has a non-finite value at region '" +
                  region + "'");
}

inline std::vector<std::string> region_codes(const std::map<std::string, double>& values) {
  std::vector<std::string> out;
  out.reserve(values.size());
  for (const auto& [region, _] : values) out.push_back(region);
  return out;
}

inline std::vector<double> series_values(const std::map<std::string, double>& values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& [_, v] : values) out.push_back(v);
  return out;
}

/// Fertility intensity: scale * births / women_15_50 per region. The
/// default scale of 1000 puts values on the per-mille scale used in
/// reports. Homogeneous: scaling both counts leaves the output unchanged.
inline RegionSeries fertility_intensity(const FertilityVariable& v, double scale = 1000.0) {
  RegionSeries out;
  out.variable_name = v.name;
  for (const auto& [region, births] : v.births) {
    if (births < 0.0)
      throw Error("variable '" + v.name + "': negative birth count at region '" + region + "'");
    auto it = v.women_15_50.find(region);
    if (it == v.women_15_50.end())
      throw RegionMismatchError("variable '" + v.name + "': no women_15_50 denominator for region '" +
                                    region + "'",
                                {region});
    if (it->second <= 0.0)
      throw Error("variable '" + v.name + "': non-positive denominator at region '" + region + "'");
    out.values[region] = scale * births / it->second;
  }
  return out;
}

/// Z-scores a vector: (x - mean) / std with the configured divisor
/// (population 1/n by default). Throws DegenerateSeriesError on
/// (numerically) constant input.
inline std::vector<double> zscore(std::span<const double> x,
                                  StdDivisor divisor = StdDivisor::population) {
  if (x.size() < 2) throw DimensionError("zscore needs at least 2 elements");
  const double m = mean(x);
  const double sd = stddev(x, divisor);
  if (popstd(x) < kDegenerateStdTol * std::max(1.0, std::abs(m)))
    throw DegenerateSeriesError("cannot z-score a constant series");
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x) out.push_back((v - m) / sd);
  return out;
}

inline ZScoredSeries zscore(const RegionSeries& s, StdDivisor divisor = StdDivisor::population) {
  std::vector<double> vals = series_values(s.values);
  std::vector<double> z;
  try {
    z = zscore(vals, divisor);
  } catch (const DegenerateSeriesError&) {
    throw DegenerateSeriesError("cannot z-score constant series '" + s.variable_name + "'");
  }
  ZScoredSeries out;
  out.variable_name = s.variable_name;
  std::size_t i = 0;
  for (const auto& [region, _] : s.values) out.values[region] = z[i++];
  return out;
}

namespace detail {

/// Shortest round-trip decimal form (what std::to_chars produces); reading
/// it back with parse_double recovers the exact same bits.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParseError(context + ": bad number '" + std::string(s) + "'");
  return v;
}

inline long long parse_int(std::string_view s, const std::string& context) {
  long long v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParseError(context + ": bad integer '" + std::string(s) + "'");
  return v;
}

/// Product-moment correlation without the final clamp to [-1, 1].
inline double pearson_raw(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("pearson_r: length mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  if (a.size() < 2) throw DimensionError("pearson_r needs at least 2 elements");
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const double n = static_cast<double>(a.size());
  if (std::sqrt(saa / n) < kDegenerateStdTol * std::max(1.0, std::abs(ma)) ||
      std::sqrt(sbb / n) < kDegenerateStdTol * std::max(1.0, std::abs(mb)))
    throw DegenerateSeriesError("pearson_r: constant input series");
  return sab / std::sqrt(saa * sbb);
}

} // namespace detail

/// Pearson product-moment correlation, clamped to [-1, 1] against
/// floating-point overshoot. Equals (1/n) * dot(zscore(a), zscore(b)).
inline double pearson_r(std::span<const double> a, std::span<const double> b) {
  return std::clamp(detail::pearson_raw(a, b), -1.0, 1.0);
}

} // namespace natcast
