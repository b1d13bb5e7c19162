#include "natcast/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"

using namespace natcast;

namespace {

DesignMatrix make_design(std::mt19937_64& g, std::size_t n, std::size_t p) {
  DesignMatrix X;
  for (std::size_t i = 0; i < n; ++i) X.regions.push_back(ntest::region_code(i));
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < p; ++j) {
    X.terms.push_back("t" + std::to_string(j));
    cols.push_back(zscore(ntest::random_vector(g, n)));
  }
  X.values.resize(n * p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) X.values[i * p + j] = cols[j][i];
  return X;
}

RegionSeries series_for(const DesignMatrix& X, const std::vector<double>& vals,
                        const std::string& name = "y") {
  RegionSeries s;
  s.variable_name = name;
  for (std::size_t i = 0; i < X.n_rows(); ++i) s.values[X.regions[i]] = vals[i];
  return s;
}

// Independent double-loop re-implementation of the LOOCV harness: rebuilds
// every training fold by hand and calls the same public fit entry points.
// Guards fold assembly and cross-fold state, bit for bit.
std::map<std::string, double> naive_loocv_predictions(const DesignMatrix& X,
                                                      const RegionSeries& y,
                                                      const FamilySpec& spec) {
  auto yv = align_to_rows(X, y);
  const std::size_t n = X.n_rows();
  const std::size_t p = X.n_cols();
  std::map<std::string, double> out;
  for (std::size_t hold = 0; hold < n; ++hold) {
    DesignMatrix Xtr;
    Xtr.terms = X.terms;
    std::vector<double> ytr;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == hold) continue;
      Xtr.regions.push_back(X.regions[i]);
      for (std::size_t j = 0; j < p; ++j) Xtr.values.push_back(X.at(i, j));
      ytr.push_back(yv[i]);
    }

    FittedModel m;
    switch (spec.family) {
      case ModelFamily::constant:
        m = fit_constant(std::span<const double>(ytr));
        break;
      case ModelFamily::ols_multi:
        m = fit_ols(Xtr, ytr, {}, ModelFamily::ols_multi);
        break;
      case ModelFamily::ols_single: {
        std::string term;
        if (spec.fixed_term) {
          term = *spec.fixed_term;
        } else {
          double best = -1.0;
          for (std::size_t j = 0; j < p; ++j) {
            const double score = std::abs(pearson_r(Xtr.column(j), ytr));
            if (score > best) {
              best = score;
              term = Xtr.terms[j];
            }
          }
        }
        m = fit_ols(Xtr, ytr, {term}, ModelFamily::ols_single);
        break;
      }
      case ModelFamily::lasso: {
        auto grid = lambda_grid(Xtr, ytr, spec.lasso.grid_points, spec.lasso.grid_ratio);
        m = fit_lasso(Xtr, ytr, select_lambda(Xtr, ytr, grid, spec.lasso.solver),
                      spec.lasso.solver);
        break;
      }
    }
    double fit = m.intercept;
    for (const auto& [term, coef] : m.coefficients)
      if (coef != 0.0) fit += coef * X.at(hold, *X.col_index(term));
    out[X.regions[hold]] = fit;
  }
  return out;
}

} // namespace

TEST(Rmse, HandComputedValues) {
  std::vector<double> zeros{0.0, 0.0};
  std::vector<double> truth{3.0, 4.0};
  EXPECT_NEAR(rmse(zeros, truth), std::sqrt(12.5), 1e-12);
  EXPECT_NEAR(rmse(zeros, truth), 3.5355339059327378, 1e-12);
  EXPECT_DOUBLE_EQ(rmse(truth, truth), 0.0);
}

TEST(Rmse, HomogeneityAndErrors) {
  std::vector<double> a{1.0, 2.0, 5.0};
  std::vector<double> b{0.5, 2.5, 4.0};
  auto a1000 = a, b1000 = b;
  for (auto& v : a1000) v *= 1000.0;
  for (auto& v : b1000) v *= 1000.0;
  EXPECT_NEAR(rmse(a1000, b1000), 1000.0 * rmse(a, b), 1e-9);

  std::vector<double> bad{1.0};
  EXPECT_THROW(rmse(a, bad), DimensionError);
}

TEST(Smape, HandComputedValues) {
  std::vector<double> p{3.0};
  std::vector<double> t{1.0};
  EXPECT_NEAR(smape(p, t), 50.0, 1e-12);

  std::vector<double> same{2.0, 7.0};
  EXPECT_DOUBLE_EQ(smape(same, same), 0.0);

  std::vector<double> one{1.0};
  std::vector<double> minus{-1.0};
  EXPECT_DOUBLE_EQ(smape(one, minus), 100.0);
}

TEST(Smape, ZeroPairConventionAndScaleInvariance) {
  std::vector<double> p{0.0, 3.0};
  std::vector<double> t{0.0, 1.0};
  EXPECT_NEAR(smape(p, t), 25.0, 1e-12); // (0 + 0.5) / 2 * 100

  auto g = ntest::rng(200);
  auto a = ntest::random_vector(g, 20, 10.0, 2.0);
  auto b = ntest::random_vector(g, 20, 10.0, 2.0);
  auto a5 = a, b5 = b;
  for (auto& v : a5) v *= 5.0;
  for (auto& v : b5) v *= 5.0;
  EXPECT_NEAR(smape(a5, b5), smape(a, b), 1e-10);
}

TEST(Metrics, PermutationInvariance) {
  auto g = ntest::rng(201);
  auto a = ntest::random_vector(g, 15, 5.0, 2.0);
  auto b = ntest::random_vector(g, 15, 5.0, 2.0);
  std::vector<std::size_t> idx(15);
  for (std::size_t i = 0; i < 15; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), g);
  std::vector<double> ap, bp;
  for (auto i : idx) {
    ap.push_back(a[i]);
    bp.push_back(b[i]);
  }
  EXPECT_NEAR(rmse(ap, bp), rmse(a, b), 1e-12);
  EXPECT_NEAR(smape(ap, bp), smape(a, b), 1e-12);
}

TEST(PredictiveR, DegenerateConventionAndPerfect) {
  std::vector<double> flat{2.0, 2.0, 2.0};
  std::vector<double> t{1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(predictive_r(flat, t), 0.0);
  EXPECT_DOUBLE_EQ(predictive_r(t, t), 1.0);
}

TEST(Loocv, ThreeRegionLeaveOneOutMeansByHand) {
  DesignMatrix X;
  X.regions = {"A", "B", "C"};
  RegionSeries y{"v", {{"A", 1.0}, {"B", 2.0}, {"C", 3.0}}};
  auto report = loocv(X, y, FamilySpec{ModelFamily::constant});
  EXPECT_DOUBLE_EQ(report.held_out.at("A").prediction, 2.5);
  EXPECT_DOUBLE_EQ(report.held_out.at("B").prediction, 2.0);
  EXPECT_DOUBLE_EQ(report.held_out.at("C").prediction, 1.5);
  // leave-one-out means are a decreasing affine function of the truth
  EXPECT_DOUBLE_EQ(report.metrics.r, -1.0);
}

TEST(Loocv, NoiselessLinearSignalScoresPerfectly) {
  auto g = ntest::rng(202);
  auto X = make_design(g, 12, 3);
  std::vector<double> yv(12);
  for (std::size_t i = 0; i < 12; ++i) yv[i] = 5.0 + 2.0 * X.at(i, 1);
  auto report = loocv(X, series_for(X, yv), FamilySpec{ModelFamily::ols_multi});
  EXPECT_NEAR(report.metrics.r, 1.0, 1e-9);
  EXPECT_NEAR(report.metrics.rmse, 0.0, 1e-9);
  EXPECT_NEAR(report.metrics.smape_pct, 0.0, 1e-9);
}

TEST(Loocv, ConstantFamilyRmseMatchesHandRolledOracle) {
  // 5-region instance: independently re-derive the held-out means
  DesignMatrix X;
  X.regions = {"A", "B", "C", "D", "E"};
  std::vector<double> yv{50.0, 52.0, 55.0, 58.0, 61.0};
  auto report = loocv(X, series_for(X, yv), FamilySpec{ModelFamily::constant});

  std::vector<double> pred, truth;
  for (std::size_t hold = 0; hold < 5; ++hold) {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
      if (i != hold) s += yv[i];
    pred.push_back(s / 4.0);
    truth.push_back(yv[hold]);
  }
  EXPECT_DOUBLE_EQ(report.metrics.rmse, rmse(pred, truth));
  EXPECT_DOUBLE_EQ(report.metrics.smape_pct, smape(pred, truth));
}

TEST(Loocv, MatchesNaiveDoubleLoopBitForBit) {
  auto g = ntest::rng(203);
  for (int rep = 0; rep < 8; ++rep) {
    const std::size_t n = 5 + rep % 6;
    auto X = make_design(g, n, 2);
    auto noise = ntest::random_vector(g, n, 0.0, 0.5);
    std::vector<double> yv(n);
    for (std::size_t i = 0; i < n; ++i) yv[i] = 10.0 + 1.5 * X.at(i, 0) + noise[i];
    auto y = series_for(X, yv);

    for (auto family : {ModelFamily::constant, ModelFamily::ols_single, ModelFamily::ols_multi,
                        ModelFamily::lasso}) {
      FamilySpec spec;
      spec.family = family;
      spec.lasso.grid_points = 10;
      spec.lasso.grid_ratio = 1e-2;
      auto report = loocv(X, y, spec);
      auto naive = naive_loocv_predictions(X, y, spec);
      for (const auto& [region, pair] : report.held_out) {
        EXPECT_EQ(pair.prediction, naive.at(region))
            << "family " << family_name(family) << " region " << region;
      }
    }
  }
}

TEST(Loocv, FoldsCarryNoCrossFoldState) {
  auto g = ntest::rng(204);
  auto X = make_design(g, 8, 2);
  auto noise = ntest::random_vector(g, 8, 0.0, 0.3);
  std::vector<double> yv(8);
  for (std::size_t i = 0; i < 8; ++i) yv[i] = 5.0 + X.at(i, 1) + noise[i];
  auto y = series_for(X, yv);

  FamilySpec spec;
  spec.family = ModelFamily::lasso;
  spec.lasso.grid_points = 12;
  spec.lasso.grid_ratio = 1e-2;
  auto report = loocv(X, y, spec);

  // recompute one fold standalone: identical bits mean no carried state
  for (std::size_t hold : {std::size_t{0}, std::size_t{3}, std::size_t{7}}) {
    DesignMatrix Xtr = X.drop_row(hold);
    std::vector<double> ytr;
    for (std::size_t i = 0; i < 8; ++i)
      if (i != hold) ytr.push_back(yv[i]);
    auto grid = lambda_grid(Xtr, ytr, 12, 1e-2);
    auto m = fit_lasso(Xtr, ytr, select_lambda(Xtr, ytr, grid), {});
    double fit = m.intercept;
    for (const auto& [term, coef] : m.coefficients)
      if (coef != 0.0) fit += coef * X.at(hold, *X.col_index(term));
    EXPECT_EQ(report.held_out.at(X.regions[hold]).prediction, fit);
  }
}

TEST(Loocv, ReportSelfConsistency) {
  auto g = ntest::rng(205);
  auto X = make_design(g, 10, 2);
  auto yv = ntest::random_vector(g, 10, 54.0, 6.5);
  auto report = loocv(X, series_for(X, yv), FamilySpec{ModelFamily::ols_multi});
  auto recomputed = compute_metrics(report.held_out);
  EXPECT_EQ(recomputed.r, report.metrics.r);
  EXPECT_EQ(recomputed.rmse, report.metrics.rmse);
  EXPECT_EQ(recomputed.smape_pct, report.metrics.smape_pct);
}

TEST(Loocv, PropagatesFoldErrorsWithRegion) {
  DesignMatrix X;
  X.regions = {"A", "B", "C", "D"};
  X.terms = {"t0"};
  X.values = zscore(std::vector<double>{1.0, 4.0, 2.0, 3.0});
  RegionSeries y{"v", {{"A", 5.0}, {"B", 5.0}, {"C", 5.0}, {"D", 9.0}}};
  // holding out D leaves a constant training target: lasso cannot grid it
  FamilySpec spec;
  spec.family = ModelFamily::lasso;
  try {
    loocv(X, y, spec);
    FAIL() << "expected Error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("region 'D'"), std::string::npos);
  }
}

TEST(ChooseModel, PredictiveRWithPaperTieBreaks) {
  auto make = [](ModelFamily f, double r, double rm) {
    EvaluationReport rep;
    rep.family = f;
    rep.metrics = Metrics{r, rm, 0.0};
    return rep;
  };
  std::vector<EvaluationReport> reports{make(ModelFamily::lasso, 0.90, 2.8),
                                        make(ModelFamily::ols_multi, 0.89, 2.9),
                                        make(ModelFamily::ols_single, 0.87, 3.2),
                                        make(ModelFamily::constant, 0.0, 6.4)};
  EXPECT_EQ(choose_model(reports), ModelFamily::lasso);

  std::vector<EvaluationReport> tie{make(ModelFamily::ols_multi, 0.83, 3.6),
                                    make(ModelFamily::lasso, 0.83, 3.6)};
  EXPECT_EQ(choose_model(tie), ModelFamily::lasso);

  std::vector<EvaluationReport> single_best{make(ModelFamily::ols_single, 0.9, 1.0),
                                            make(ModelFamily::ols_multi, 0.8, 2.0),
                                            make(ModelFamily::lasso, 0.7, 2.0)};
  EXPECT_EQ(choose_model(single_best), ModelFamily::ols_single);

  std::vector<EvaluationReport> only_constant{make(ModelFamily::constant, 0.0, 1.0)};
  EXPECT_THROW(choose_model(only_constant), ConfigError);
}
