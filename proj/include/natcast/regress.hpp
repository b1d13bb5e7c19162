#pragma once

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "natcast/core.hpp"
#include "natcast/errors.hpp"

namespace natcast {

/// Feature matrix: one row per region, one column per term, entries
/// z-scored across rows. The intercept column of ones is implicit and
/// always present in fits. Row subsets taken for cross-validation folds
/// keep the full-data z-scores (columns of a fold are therefore not
/// exactly re-normalized; fits do not rely on unit column norms).
struct DesignMatrix {
  std::vector<std::string> regions; // row order
  std::vector<std::string> terms;   // column order
  std::vector<double> values;       // row-major, regions.size() x terms.size()

  std::size_t n_rows() const { return regions.size(); }
  std::size_t n_cols() const { return terms.size(); }

  double at(std::size_t i, std::size_t j) const { return values[i * terms.size() + j]; }

  std::optional<std::size_t> col_index(std::string_view term) const {
    for (std::size_t j = 0; j < terms.size(); ++j)
      if (terms[j] == term) return j;
    return std::nullopt;
  }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(n_rows());
    for (std::size_t i = 0; i < n_rows(); ++i) out[i] = at(i, j);
    return out;
  }

  DesignMatrix drop_row(std::size_t row) const {
    DesignMatrix out;
    out.terms = terms;
    out.regions.reserve(n_rows() - 1);
    out.values.reserve(values.size() - n_cols());
    for (std::size_t i = 0; i < n_rows(); ++i) {
      if (i == row) continue;
      out.regions.push_back(regions[i]);
      for (std::size_t j = 0; j < n_cols(); ++j) out.values.push_back(at(i, j));
    }
    return out;
  }
};

/// Checks that every column is z-scored across rows (mean 0, population
/// std 1) within `tol`. Applied when a matrix is built from full-data
/// z-scores, not to CV fold subsets.
inline void validate_design(const DesignMatrix& X, double tol = 1e-6) {
  for (std::size_t j = 0; j < X.n_cols(); ++j) {
    auto col = X.column(j);
    if (std::abs(mean(col)) > tol || std::abs(popstd(col) - 1.0) > tol)
      throw Error("design column '" + X.terms[j] + "' is not z-scored across rows");
  }
}

/// Aligns a RegionSeries to the design's row order.
inline std::vector<double> align_to_rows(const DesignMatrix& X, const RegionSeries& y) {
  std::vector<double> out;
  out.reserve(X.n_rows());
  std::vector<std::string> missing;
  for (const auto& region : X.regions) {
    auto it = y.values.find(region);
    if (it == y.values.end())
      missing.push_back(region);
    else
      out.push_back(it->second);
  }
  if (!missing.empty())
    throw RegionMismatchError("series '" + y.variable_name + "' does not cover " +
                                  std::to_string(missing.size()) + " design rows",
                              missing);
  return out;
}

enum class ModelFamily { constant, ols_single, ols_multi, lasso };

inline std::string family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::constant: return "constant";
    case ModelFamily::ols_single: return "ols-single";
    case ModelFamily::ols_multi: return "ols-multi";
    case ModelFamily::lasso: return "lasso";
  }
  return "?";
}

inline ModelFamily family_from_name(std::string_view name) {
  if (name == "constant") return ModelFamily::constant;
  if (name == "ols-single") return ModelFamily::ols_single;
  if (name == "ols-multi") return ModelFamily::ols_multi;
  if (name == "lasso") return ModelFamily::lasso;
  throw ConfigError("unknown model family '" + std::string(name) + "'");
}

struct FittedModel {
  ModelFamily family = ModelFamily::constant;
  double intercept = 0.0;
  std::map<std::string, double> coefficients;
  double lambda = 0.0;      // lasso only
  std::string variable;     // optional label carried through reports

  std::set<std::string> active_terms() const {
    std::set<std::string> out;
    for (const auto& [term, coef] : coefficients)
      if (coef != 0.0) out.insert(term);
    return out;
  }
};

inline FittedModel fit_constant(std::span<const double> y) {
  if (y.empty()) throw DimensionError("fit_constant: empty series");
  FittedModel m;
  m.family = ModelFamily::constant;
  m.intercept = mean(y);
  return m;
}

inline FittedModel fit_constant(const RegionSeries& y) {
  auto m = fit_constant(std::span<const double>(series_values(y.values)));
  m.variable = y.variable_name;
  return m;
}

namespace detail {

/// Least squares via column-pivoted Householder QR (no normal equations).
/// `a` is column-major m x p and is destroyed. Throws SingularDesignError
/// naming the dependent columns when rank < p.
inline std::vector<double> qr_least_squares(std::vector<double>& a, std::size_t m, std::size_t p,
                                            std::vector<double>& y,
                                            const std::vector<std::string>& col_names) {
  assert(y.size() == m);
  std::vector<std::size_t> perm(p);
  for (std::size_t j = 0; j < p; ++j) perm[j] = j;

  auto col = [&](std::size_t j) { return a.data() + j * m; };
  auto subnorm = [&](std::size_t j, std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < m; ++i) s += col(j)[i] * col(j)[i];
    return std::sqrt(s);
  };

  double scale_ref = 0.0;
  std::size_t rank = std::min(m, p);
  for (std::size_t k = 0; k < std::min(m, p); ++k) {
    std::size_t pivot = k;
    double best = subnorm(k, k);
    for (std::size_t j = k + 1; j < p; ++j) {
      const double nj = subnorm(j, k);
      if (nj > best) {
        best = nj;
        pivot = j;
      }
    }
    if (pivot != k) {
      for (std::size_t i = 0; i < m; ++i) std::swap(col(k)[i], col(pivot)[i]);
      std::swap(perm[k], perm[pivot]);
    }
    if (k == 0) scale_ref = best;
    const double rank_tol = static_cast<double>(std::max(m, p)) *
                            std::numeric_limits<double>::epsilon() * scale_ref;
    if (best <= std::max(rank_tol, 1e-13 * scale_ref)) {
      rank = k;
      break;
    }

    // Householder reflector for column k, rows k..m
    double* x = col(k);
    const double alpha = x[k] >= 0.0 ? -best : best;
    x[k] -= alpha; // x now holds v
    double vtv = 0.0;
    for (std::size_t i = k; i < m; ++i) vtv += x[i] * x[i];
    for (std::size_t j = k + 1; j < p; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < m; ++i) dot += x[i] * col(j)[i];
      const double f = 2.0 * dot / vtv;
      for (std::size_t i = k; i < m; ++i) col(j)[i] -= f * x[i];
    }
    double ydot = 0.0;
    for (std::size_t i = k; i < m; ++i) ydot += x[i] * y[i];
    const double fy = 2.0 * ydot / vtv;
    for (std::size_t i = k; i < m; ++i) y[i] -= fy * x[i];
    x[k] = alpha; // diagonal of R
  }

  if (rank < p) {
    std::vector<std::string> dependent;
    for (std::size_t j = rank; j < p; ++j) dependent.push_back(col_names[perm[j]]);
    std::sort(dependent.begin(), dependent.end());
    std::string msg = "singular design; dependent column(s):";
    for (const auto& c : dependent) msg += " '" + c + "'";
    throw SingularDesignError(msg, dependent);
  }

  std::vector<double> beta_perm(p, 0.0);
  for (std::size_t ii = p; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t j = ii + 1; j < p; ++j) s -= col(j)[ii] * beta_perm[j];
    beta_perm[ii] = s / col(ii)[ii];
  }
  std::vector<double> beta(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) beta[perm[j]] = beta_perm[j];
  return beta;
}

/// (1/n) * dot(column j of X, r). Shared by lambda_max and the coordinate
/// descent sweep so the lambda >= lambda_max null model is bit-exact.
inline double gradient_j(const DesignMatrix& X, std::size_t j, std::span<const double> r) {
  double s = 0.0;
  for (std::size_t i = 0; i < X.n_rows(); ++i) s += X.at(i, j) * r[i];
  return s / static_cast<double>(X.n_rows());
}

inline double soft_threshold(double z, double lambda) {
  const double m = std::abs(z) - lambda;
  return m > 0.0 ? (z > 0.0 ? m : -m) : 0.0;
}

#ifndef NDEBUG
inline double lasso_objective(std::span<const double> r, std::span<const double> beta,
                              double lambda) {
  double sse = 0.0;
  for (double v : r) sse += v * v;
  double l1 = 0.0;
  for (double b : beta) l1 += std::abs(b);
  return sse / (2.0 * static_cast<double>(r.size())) + lambda * l1;
}
#endif

struct LassoState {
  std::vector<double> beta; // slopes, one per design column
  double intercept = 0.0;
};

struct LassoDiagnostics {
  std::size_t sweeps = 0;
  double last_max_change = 0.0;
};

/// Cyclic coordinate descent with soft-thresholding; the intercept is
/// unpenalized. Updates `state` in place (cold callers pass zeros, path
/// callers warm-start from the previous lambda). Converged when the max
/// coefficient change in a sweep drops below tolerance * max(1, max|beta|).
inline LassoDiagnostics lasso_cd(const DesignMatrix& X, std::span<const double> y, double lambda,
                                 std::size_t max_sweeps, double tolerance, LassoState& state) {
  const std::size_t n = X.n_rows();
  const std::size_t p = X.n_cols();
  if (y.size() != n) throw DimensionError("fit_lasso: y length does not match design rows");
  if (lambda < 0.0) throw ConfigError("fit_lasso: lambda must be >= 0");
  if (state.beta.size() != p) state.beta.assign(p, 0.0);

  std::vector<double> nu(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += X.at(i, j) * X.at(i, j);
    nu[j] = s / static_cast<double>(n);
  }

  bool warm = false;
  for (double b : state.beta)
    if (b != 0.0) warm = true;
  if (!warm && state.intercept == 0.0) state.intercept = mean(y);

  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fit = state.intercept;
    for (std::size_t j = 0; j < p; ++j)
      if (state.beta[j] != 0.0) fit += state.beta[j] * X.at(i, j);
    r[i] = y[i] - fit;
  }

#ifndef NDEBUG
  double prev_obj = lasso_objective(r, state.beta, lambda);
#endif

  LassoDiagnostics diag;
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (nu[j] <= 0.0) continue; // identically-zero column stays out
      const double g = gradient_j(X, j, r) + nu[j] * state.beta[j];
      const double bnew = soft_threshold(g, lambda) / nu[j];
      const double d = bnew - state.beta[j];
      if (d != 0.0) {
        for (std::size_t i = 0; i < n; ++i) r[i] -= d * X.at(i, j);
        state.beta[j] = bnew;
        max_change = std::max(max_change, std::abs(d));
      }
    }
    const double d0 = mean(r);
    if (d0 != 0.0) {
      state.intercept += d0;
      for (double& ri : r) ri -= d0;
      max_change = std::max(max_change, std::abs(d0));
    }

#ifndef NDEBUG
    const double obj = lasso_objective(r, state.beta, lambda);
    assert(obj <= prev_obj + 1e-10 * std::max(1.0, std::abs(prev_obj)) &&
           "lasso objective increased across a sweep");
    prev_obj = obj;
#endif

    diag.sweeps = sweep;
    diag.last_max_change = max_change;
    double max_beta = std::abs(state.intercept);
    for (double b : state.beta) max_beta = std::max(max_beta, std::abs(b));
    if (max_change < tolerance * std::max(1.0, max_beta)) return diag;
  }
  throw ConvergenceError("fit_lasso: no convergence after " + std::to_string(max_sweeps) +
                             " sweeps (last max coefficient change " +
                             std::to_string(diag.last_max_change) + ")",
                         diag.sweeps, diag.last_max_change);
}

} // namespace detail

/// Ordinary least squares with intercept over the named columns (all
/// design columns when `columns` is empty), solved by column-pivoted
/// Householder QR. Family defaults to ols-single for one column,
/// ols-multi otherwise.
inline FittedModel fit_ols(const DesignMatrix& X, std::span<const double> y,
                           std::vector<std::string> columns = {},
                           std::optional<ModelFamily> family = std::nullopt) {
  if (y.size() != X.n_rows()) throw DimensionError("fit_ols: y length does not match design rows");
  if (columns.empty()) columns = X.terms;
  const std::size_t m = X.n_rows();
  const std::size_t p = columns.size() + 1;
  if (m < p)
    throw DimensionError("fit_ols: " + std::to_string(m) + " rows cannot identify " +
                         std::to_string(p) + " parameters");

  std::vector<std::string> col_names;
  col_names.reserve(p);
  col_names.push_back("(intercept)");
  std::vector<double> a(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i) a[i] = 1.0;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    auto j = X.col_index(columns[c]);
    if (!j) throw DimensionError("fit_ols: design has no column '" + columns[c] + "'");
    col_names.push_back(columns[c]);
    for (std::size_t i = 0; i < m; ++i) a[(c + 1) * m + i] = X.at(i, *j);
  }

  std::vector<double> rhs(y.begin(), y.end());
  auto beta = detail::qr_least_squares(a, m, p, rhs, col_names);

  FittedModel model;
  model.family = family.value_or(columns.size() == 1 ? ModelFamily::ols_single
                                                     : ModelFamily::ols_multi);
  model.intercept = beta[0];
  for (std::size_t c = 0; c < columns.size(); ++c) model.coefficients[columns[c]] = beta[c + 1];
  return model;
}

/// Smallest penalty at which every slope is zero:
/// max_j |(1/n) sum_i x_ij (y_i - ybar)|.
inline double lambda_max(const DesignMatrix& X, std::span<const double> y) {
  if (y.size() != X.n_rows())
    throw DimensionError("lambda_max: y length does not match design rows");
  const double ybar = mean(y);
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - ybar;
  double lmax = 0.0;
  for (std::size_t j = 0; j < X.n_cols(); ++j)
    lmax = std::max(lmax, std::abs(detail::gradient_j(X, j, r)));
  return lmax;
}

/// Log-spaced grid from lambda_max down to ratio * lambda_max, strictly
/// decreasing.
inline std::vector<double> lambda_grid(const DesignMatrix& X, std::span<const double> y,
                                       std::size_t n_points = 100, double ratio = 1e-4) {
  if (n_points < 1) throw ConfigError("lambda_grid: need at least one point");
  if (ratio <= 0.0 || ratio >= 1.0) throw ConfigError("lambda_grid: ratio must be in (0, 1)");
  const double lmax = lambda_max(X, y);
  if (lmax <= 0.0)
    throw DegenerateSeriesError("lambda_grid: target is uncorrelated-constant (lambda_max = 0)");
  std::vector<double> grid;
  grid.reserve(n_points);
  if (n_points == 1) {
    grid.push_back(lmax);
    return grid;
  }
  for (std::size_t i = 0; i < n_points; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n_points - 1);
    grid.push_back(lmax * std::pow(ratio, t));
  }
  return grid;
}

struct LassoOptions {
  std::size_t max_sweeps = 10000;
  double tolerance = 1e-7;
};

/// L1-penalized least squares: minimizes
///   (1/(2n)) sum_i (y_i - b0 - x_i . b)^2 + lambda * sum_j |b_j|
/// with the intercept unpenalized, by cyclic coordinate descent.
/// Coefficients below 1e-12 in magnitude are snapped to exact zero.
inline FittedModel fit_lasso(const DesignMatrix& X, std::span<const double> y, double lambda,
                             const LassoOptions& opts = {}) {
  detail::LassoState state;
  detail::lasso_cd(X, y, lambda, opts.max_sweeps, opts.tolerance, state);

  FittedModel model;
  model.family = ModelFamily::lasso;
  model.lambda = lambda;
  model.intercept = state.intercept;
  for (std::size_t j = 0; j < X.n_cols(); ++j) {
    const double b = std::abs(state.beta[j]) < 1e-12 ? 0.0 : state.beta[j];
    model.coefficients[X.terms[j]] = b;
  }
  return model;
}

/// Inner leave-one-out CV over a lambda grid, warm-started along the path
/// (largest lambda first). Returns the lambda with minimal held-out RMSE;
/// ties go to the larger lambda (the sparser model).
inline double select_lambda(const DesignMatrix& X, std::span<const double> y,
                            std::span<const double> grid, const LassoOptions& opts = {}) {
  if (grid.empty()) throw ConfigError("select_lambda: empty grid");
  if (X.n_rows() < 3) throw DimensionError("select_lambda: need at least 3 rows");

  std::vector<double> path(grid.begin(), grid.end());
  std::sort(path.begin(), path.end(), std::greater<>());

  const std::size_t n = X.n_rows();
  std::vector<std::vector<double>> pred(path.size(), std::vector<double>(n, 0.0));
  std::vector<double> ytr(n - 1);
  for (std::size_t hold = 0; hold < n; ++hold) {
    DesignMatrix Xtr = X.drop_row(hold);
    std::size_t w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (i != hold) ytr[w++] = y[i];

    detail::LassoState state;
    for (std::size_t gi = 0; gi < path.size(); ++gi) {
      detail::lasso_cd(Xtr, ytr, path[gi], opts.max_sweeps, opts.tolerance, state);
      double fit = state.intercept;
      for (std::size_t j = 0; j < X.n_cols(); ++j)
        if (state.beta[j] != 0.0) fit += state.beta[j] * X.at(hold, j);
      pred[gi][hold] = fit;
    }
  }

  std::size_t best = 0;
  double best_rmse = std::numeric_limits<double>::infinity();
  for (std::size_t gi = 0; gi < path.size(); ++gi) {
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = pred[gi][i] - y[i];
      sse += d * d;
    }
    const double rm = std::sqrt(sse / static_cast<double>(n));
    if (rm < best_rmse) { // strict: ties keep the earlier, larger lambda
      best_rmse = rm;
      best = gi;
    }
  }
  return path[best];
}

/// Evaluates the model on every design row: intercept + sum of active
/// coefficients times the named columns.
inline RegionSeries predict(const FittedModel& m, const DesignMatrix& X) {
  std::vector<std::size_t> idx;
  std::vector<double> coef;
  for (const auto& [term, c] : m.coefficients) {
    if (c == 0.0) continue;
    auto j = X.col_index(term);
    if (!j) throw DimensionError("predict: design has no column '" + term + "'");
    idx.push_back(*j);
    coef.push_back(c);
  }
  RegionSeries out;
  out.variable_name = m.variable;
  for (std::size_t i = 0; i < X.n_rows(); ++i) {
    double fit = m.intercept;
    for (std::size_t k = 0; k < idx.size(); ++k) fit += coef[k] * X.at(i, idx[k]);
    out.values[X.regions[i]] = fit;
  }
  return out;
}

/// Max violation of the lasso stationarity conditions at the fitted
/// coefficients: for active j, |g_j - lambda * sign(b_j)|; for inactive j,
/// max(0, |g_j| - lambda), where g_j = (1/n) x_j . residual.
inline double lasso_kkt_violation(const DesignMatrix& X, std::span<const double> y,
                                  const FittedModel& m) {
  const std::size_t n = X.n_rows();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fit = m.intercept;
    for (std::size_t j = 0; j < X.n_cols(); ++j) {
      auto it = m.coefficients.find(X.terms[j]);
      if (it != m.coefficients.end() && it->second != 0.0) fit += it->second * X.at(i, j);
    }
    r[i] = y[i] - fit;
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < X.n_cols(); ++j) {
    const double g = detail::gradient_j(X, j, r);
    auto it = m.coefficients.find(X.terms[j]);
    const double b = it == m.coefficients.end() ? 0.0 : it->second;
    const double viol = b != 0.0 ? std::abs(g - (b > 0.0 ? m.lambda : -m.lambda))
                                 : std::max(0.0, std::abs(g) - m.lambda);
    worst = std::max(worst, viol);
  }
  return worst;
}

/// Flat key-value model format: family, variable, intercept, lambda, then
/// one `coef <term> = <value>` line per coefficient, sorted by term.
inline std::string serialize_model(const FittedModel& m) {
  std::string out;
  out += "family = " + family_name(m.family) + "\n";
  if (!m.variable.empty()) out += "variable = " + m.variable + "\n";
  out += "intercept = " + detail::format_double(m.intercept) + "\n";
  out += "lambda = " + detail::format_double(m.lambda) + "\n";
  for (const auto& [term, coef] : m.coefficients)
    out += "coef " + term + " = " + detail::format_double(coef) + "\n";
  return out;
}

inline FittedModel parse_model(std::string_view text) {
  FittedModel m;
  bool have_family = false, have_intercept = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto sep = line.rfind(" = ");
    if (sep == std::string_view::npos)
      throw ParseError("model: missing ' = ' separator", line_no);
    std::string_view key = line.substr(0, sep);
    std::string_view value = line.substr(sep + 3);
    if (key == "family") {
      m.family = family_from_name(value);
      have_family = true;
    } else if (key == "variable") {
      m.variable = std::string(value);
    } else if (key == "intercept") {
      m.intercept = detail::parse_double(value, "model intercept");
      have_intercept = true;
    } else if (key == "lambda") {
      m.lambda = detail::parse_double(value, "model lambda");
    } else if (key.starts_with("coef ")) {
      m.coefficients[std::string(key.substr(5))] = detail::parse_double(value, "model coefficient");
    } else {
      throw ParseError("model: unknown key '" + std::string(key) + "'", line_no);
    }
  }
  if (!have_family || !have_intercept)
    throw ParseError("model: family and intercept are required");
  return m;
}

} // namespace natcast
