#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "natcast/core.hpp"
#include "natcast/errors.hpp"
#include "natcast/regress.hpp"

namespace natcast {

/// Root mean square error: sqrt((1/n) sum (pred - truth)^2).
inline double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw DimensionError("rmse: length mismatch (" + std::to_string(pred.size()) + " vs " +
                         std::to_string(truth.size()) + ")");
  if (pred.empty()) throw DimensionError("rmse: empty input");
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(pred.size()));
}

/// Symmetric mean absolute percentage error in percent, range [0, 100]:
/// (100/n) sum |pred - truth| / (|pred| + |truth|). Note the denominator
/// has no /2 factor. A (0, 0) pair contributes 0 (a perfect prediction
/// of zero).
inline double smape(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw DimensionError("smape: length mismatch (" + std::to_string(pred.size()) + " vs " +
                         std::to_string(truth.size()) + ")");
  if (pred.empty()) throw DimensionError("smape: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double denom = std::abs(pred[i]) + std::abs(truth[i]);
    if (denom > 0.0) acc += std::abs(pred[i] - truth[i]) / denom;
  }
  return 100.0 * acc / static_cast<double>(pred.size());
}

struct Metrics {
  double r = 0.0;
  double rmse = 0.0;
  double smape_pct = 0.0;
};

struct HeldOutPair {
  double truth = 0.0;
  double prediction = 0.0;
};

/// Per-fold held-out predictions plus the three summary metrics for one
/// (variable, family) pair. Metrics are always recomputable from
/// held_out; compute_metrics() is the single code path for both.
struct EvaluationReport {
  std::string variable;
  ModelFamily family = ModelFamily::constant;
  std::map<std::string, HeldOutPair> held_out; // region -> (truth, prediction)
  Metrics metrics;
};

/// Pearson r over held-out (prediction, truth) pairs, with the degenerate
/// convention: a (numerically) constant prediction vector scores 0, which
/// is what a constant baseline produces under LOOCV reporting.
inline double predictive_r(std::span<const double> pred, std::span<const double> truth) {
  if (popstd(pred) < kNormalizedAbsTol * std::max(1.0, std::abs(mean(pred)))) return 0.0;
  return pearson_r(pred, truth);
}

inline Metrics compute_metrics(const std::map<std::string, HeldOutPair>& held_out) {
  std::vector<double> pred, truth;
  pred.reserve(held_out.size());
  truth.reserve(held_out.size());
  for (const auto& [_, pair] : held_out) {
    truth.push_back(pair.truth);
    pred.push_back(pair.prediction);
  }
  Metrics m;
  m.r = predictive_r(pred, truth);
  m.rmse = rmse(pred, truth);
  m.smape_pct = smape(pred, truth);
  return m;
}

inline double predictive_r(const EvaluationReport& report) {
  return compute_metrics(report.held_out).r;
}

/// Cross-validated lambda search settings for the lasso family.
struct LassoCvOptions {
  std::size_t grid_points = 100;
  double grid_ratio = 1e-4;
  LassoOptions solver;
};

/// What to fit inside each LOOCV fold. For ols_single without a fixed
/// term, each fold picks the training column most correlated (in absolute
/// value) with the fold's training target; for lasso, each fold reruns
/// the inner lambda selection on its own training set (no leakage).
struct FamilySpec {
  ModelFamily family = ModelFamily::ols_multi;
  std::optional<std::string> fixed_term; // ols_single only
  LassoCvOptions lasso;
};

namespace detail {

/// Index of the training column with the largest absolute correlation to
/// y; degenerate columns are skipped. First column wins ties.
inline std::size_t best_correlated_column(const DesignMatrix& X, std::span<const double> y) {
  std::size_t best = X.n_cols();
  double best_score = -1.0;
  for (std::size_t j = 0; j < X.n_cols(); ++j) {
    auto col = X.column(j);
    double score;
    try {
      score = std::abs(pearson_r(col, y));
    } catch (const DegenerateSeriesError&) {
      continue;
    }
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  if (best == X.n_cols())
    throw DegenerateSeriesError("no usable column for single-term selection");
  return best;
}

inline FittedModel fit_family(const DesignMatrix& X, std::span<const double> y,
                              const FamilySpec& spec) {
  switch (spec.family) {
    case ModelFamily::constant:
      return fit_constant(y);
    case ModelFamily::ols_multi:
      return fit_ols(X, y, {}, ModelFamily::ols_multi);
    case ModelFamily::ols_single: {
      const std::string term = spec.fixed_term
                                   ? *spec.fixed_term
                                   : X.terms[best_correlated_column(X, y)];
      return fit_ols(X, y, {term}, ModelFamily::ols_single);
    }
    case ModelFamily::lasso: {
      auto grid = lambda_grid(X, y, spec.lasso.grid_points, spec.lasso.grid_ratio);
      const double lambda = select_lambda(X, y, grid, spec.lasso.solver);
      return fit_lasso(X, y, lambda, spec.lasso.solver);
    }
  }
  throw ConfigError("fit_family: unknown family");
}

inline double predict_row(const FittedModel& m, const DesignMatrix& X, std::size_t row) {
  double fit = m.intercept;
  for (const auto& [term, coef] : m.coefficients) {
    if (coef == 0.0) continue;
    auto j = X.col_index(term);
    if (!j) throw DimensionError("predict: design has no column '" + term + "'");
    fit += coef * X.at(row, *j);
  }
  return fit;
}

} // namespace detail

/// Leave-one-out cross-validation: for every region, fit the family on
/// the other regions (re-running any inner selection on that training set
/// alone) and predict the held-out region. Metrics are computed over the
/// assembled held-out pairs in region order.
inline EvaluationReport loocv(const DesignMatrix& X, const RegionSeries& y,
                              const FamilySpec& spec) {
  const std::size_t n = X.n_rows();
  if (n < 3) throw DimensionError("loocv: need at least 3 regions");
  auto yv = align_to_rows(X, y);

  EvaluationReport report;
  report.variable = y.variable_name;
  report.family = spec.family;

  std::vector<double> ytr(n - 1);
  for (std::size_t hold = 0; hold < n; ++hold) {
    DesignMatrix Xtr = X.drop_row(hold);
    std::size_t w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (i != hold) ytr[w++] = yv[i];

    FittedModel m;
    try {
      m = detail::fit_family(Xtr, ytr, spec);
    } catch (const Error& e) {
      throw Error("loocv: fold holding out region '" + X.regions[hold] + "' failed: " + e.what());
    }
    report.held_out[X.regions[hold]] = HeldOutPair{yv[hold], detail::predict_row(m, X, hold)};
  }
  report.metrics = compute_metrics(report.held_out);
  return report;
}

/// Picks the best family by predictive r among the candidate reports; the
/// constant baseline is never a candidate. Ties break by lower RMSE, then
/// by lasso > ols-multi > ols-single.
inline ModelFamily choose_model(std::span<const EvaluationReport> reports) {
  auto rank = [](ModelFamily f) {
    switch (f) {
      case ModelFamily::lasso: return 3;
      case ModelFamily::ols_multi: return 2;
      case ModelFamily::ols_single: return 1;
      case ModelFamily::constant: return 0;
    }
    return -1;
  };
  const EvaluationReport* best = nullptr;
  for (const auto& report : reports) {
    if (report.family == ModelFamily::constant) continue;
    if (!best) {
      best = &report;
      continue;
    }
    const auto& b = *best;
    if (report.metrics.r > b.metrics.r ||
        (report.metrics.r == b.metrics.r &&
         (report.metrics.rmse < b.metrics.rmse ||
          (report.metrics.rmse == b.metrics.rmse && rank(report.family) > rank(b.family)))))
      best = &report;
  }
  if (!best) throw ConfigError("choose_model: no candidate reports (constant is excluded)");
  return best->family;
}

} // namespace natcast
