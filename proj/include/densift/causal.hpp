#pragma once

// Doubly robust ATE estimation with dimension-reduced kernel nuisances:
// two-fold cross-fitting, trimming, the Hajek variant, per-observation scores
// for inference, and propensity-subclass balance t-tests.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "densift/cde.hpp"
#include "densift/cv_refine.hpp"
#include "densift/dataset.hpp"
#include "densift/dependence.hpp"
#include "densift/errors.hpp"
#include "densift/rng.hpp"

namespace densift {

struct TrimRule {
  double lower = 0.1;
  double upper = 0.9;

  void validate() const {
    if (!(lower > 0.0 && upper < 1.0 && lower < upper))
      throw InvalidConfig("trim bounds must satisfy 0 < lower < upper < 1");
  }
  bool keeps(double m) const { return m >= lower && m <= upper; }
};

// psi_i = [g1 - g0] + D(y - g1)/m - (1-D)(y - g0)/(1-m)
inline std::vector<double> dr_scores(const std::vector<double>& y, const std::vector<int>& d,
                                     const std::vector<double>& m_hat,
                                     const std::vector<double>& g0_hat,
                                     const std::vector<double>& g1_hat) {
  std::size_t n = y.size();
  std::vector<double> psi(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (m_hat[i] <= 0.0 || m_hat[i] >= 1.0)
      throw PropensityBoundary("propensity at or beyond {0,1} on a kept observation");
    double diff = g1_hat[i] - g0_hat[i];
    double t1 = d[i] ? (y[i] - g1_hat[i]) / m_hat[i] : 0.0;
    double t0 = d[i] ? 0.0 : (y[i] - g0_hat[i]) / (1.0 - m_hat[i]);
    psi[i] = diff + t1 - t0;
  }
  return psi;
}

enum class PsiVariant { psi1, psi2, psi3, psi4 };

inline const char* to_string(PsiVariant v) {
  switch (v) {
    case PsiVariant::psi1: return "psi1";
    case PsiVariant::psi2: return "psi2";
    case PsiVariant::psi3: return "psi3";
    default: return "psi4";
  }
}

struct AteConfig {
  PsiVariant variant = PsiVariant::psi3;
  std::uint64_t split_seed = 1;
  TrimRule trim{0.1, 0.9};
  bool hajek = false;
  bool dml_swap = false;  // fit on each fold, score the other, pool the scores
  std::size_t p_tilde_init = 5;
  std::size_t p_tilde_cap = 10;
  bool protect_w = true;
  std::vector<double> scale_grid{0.5, 1.0, 2.0};
  std::vector<double> reg_scale_grid{0.5, 1.0, 2.0};
  KernelFamily family = KernelFamily::gaussian;
  int order = 2;
  double screen_scale = 1.0;
};

struct AteResult {
  double psi_hat = 0.0;
  double se = 0.0;
  std::pair<double, double> ci95{0.0, 0.0};
  std::size_t n_scored = 0;
  std::size_t n_effective = 0;  // kept after trimming
  double trim_fraction = 0.0;
  std::vector<double> scores;   // per kept observation
  std::vector<double> m_hat;    // per scored observation (pre-trim)
  std::vector<double> kept_m;   // propensities on the kept observations
  std::vector<int> kept_d;      // treatment labels on the kept observations
  double m_min = 1.0, m_max = 0.0;
  long zero_mass_fallbacks = 0;
  std::vector<std::string> selected_propensity_covariates;
  std::vector<std::string> warnings;
};

namespace detail {

struct FoldNuisances {
  std::vector<double> m, g0, g1, y;
  std::vector<int> d;
};

// Nadaraya-Watson regression model on `cols` with rate n^{-1/(p_c + 2r)}
// bandwidths; the multiplicative scale is picked by leave-one-out squared
// error over the configured grid.
inline CdeModel fit_regression(std::shared_ptr<const Dataset> train,
                               const std::vector<std::size_t>& cols,
                               const std::vector<double>& scale_grid,
                               KernelFamily family, int order, EvalTally* tally) {
  CondVars vars;
  for (std::size_t c : cols) {
    if (train->cols[c].kind == ColumnKind::continuous)
      vars.cont.push_back(c);
    else
      vars.disc.push_back(c);
  }
  double den = static_cast<double>(vars.cont.size()) + 2.0 * order;
  const std::vector<double>& y = train->cols[train->response_col()].values;
  std::vector<int> arm = train->treatment_indicator();

  double best_err = std::numeric_limits<double>::infinity();
  std::optional<CdeModel> best;
  for (double c : scale_grid) {
    KernelSpec spec = rot_bandwidths(*train, vars, den, c, family, order);
    spec.h_y = smooth_out;  // regression does not smooth the response
    CdeModel model(train, vars.cont, vars.disc, spec, train->response_col(),
                   train->treatment_col());
    double err = 0.0;
    for (std::size_t i = 0; i < train->n; ++i) {
      double pred = model.regress_loo(i, y, arm[i], tally);
      double r = y[i] - pred;
      err += r * r;
    }
    if (err < best_err) {
      best_err = err;
      best = std::move(model);
    }
  }
  return *best;
}

}  // namespace detail

// Fits nuisances on `train_rows`, scores `test_rows`. Variant rules:
//   psi1: propensity and regressions on the full covariate set (rule-of-thumb
//         bandwidths) -- the curse-of-dimensionality baseline;
//   psi2: dimension-reduced propensity, full-set regressions;
//   psi3/psi4: dimension-reduced propensity and regressions (both kernel-based
//         here, so the two variants coincide).
inline detail::FoldNuisances score_fold(const Dataset& data,
                                        const std::vector<std::size_t>& train_rows,
                                        const std::vector<std::size_t>& test_rows,
                                        const AteConfig& cfg, AteResult& diag) {
  auto train = std::make_shared<const Dataset>(data.subset(train_rows));
  Dataset test = data.subset(test_rows);
  std::vector<int> train_arm = train->treatment_indicator();
  long n1 = std::count(train_arm.begin(), train_arm.end(), 1);
  if (n1 == 0 || n1 == static_cast<long>(train->n))
    throw DegenerateTreatment("one treatment arm is empty in the training fold");

  EvalTally tally;
  std::vector<std::size_t> full_set;
  {
    CondVars w = w_cond_vars(*train);
    full_set = w.cont;
    full_set.insert(full_set.end(), w.disc.begin(), w.disc.end());
    for (std::size_t c : train->candidates()) full_set.push_back(c);
  }

  // Propensity model
  std::optional<CdeModel> m_model;
  std::vector<std::size_t> reduced_set;
  if (cfg.variant == PsiVariant::psi1) {
    CondVars vars;
    for (std::size_t c : full_set) {
      if (train->cols[c].kind == ColumnKind::continuous)
        vars.cont.push_back(c);
      else
        vars.disc.push_back(c);
    }
    double den = static_cast<double>(vars.cont.size()) + 2.0 * cfg.order;
    KernelSpec spec = rot_bandwidths(*train, vars, den, 1.0, cfg.family, cfg.order);
    spec.h_y = smooth_out;
    m_model.emplace(train, vars.cont, vars.disc, spec, std::nullopt,
                    train->treatment_col());
    reduced_set = full_set;
  } else {
    DependenceConfig dep;
    dep.reference = ReferenceMode::binary_treatment;
    dep.family = cfg.family;
    dep.order = cfg.order;
    dep.scale = cfg.screen_scale;
    IterationOutcome it = iterate_procedure(train, dep, cfg.p_tilde_init, cfg.p_tilde_cap,
                                            cfg.protect_w, cfg.scale_grid);
    if (it.sparsity_doubt)
      diag.warnings.push_back("SparsityDoubt: p_tilde cap reached with no covariate smoothed out");
    m_model.emplace(it.model);
    reduced_set = it.model.selected_cols();
    for (std::size_t c : reduced_set)
      diag.selected_propensity_covariates.push_back(train->cols[c].name);
  }

  // Outcome regressions
  std::vector<std::size_t> g_set;
  if (cfg.variant == PsiVariant::psi1 || cfg.variant == PsiVariant::psi2) {
    g_set = full_set;
  } else {
    g_set = reduced_set;  // dual dimension reduction
  }
  CdeModel g_model = (cfg.variant == PsiVariant::psi1 || cfg.variant == PsiVariant::psi2)
                         ? [&] {
                             CondVars vars;
                             for (std::size_t c : g_set) {
                               if (train->cols[c].kind == ColumnKind::continuous)
                                 vars.cont.push_back(c);
                               else
                                 vars.disc.push_back(c);
                             }
                             double den =
                                 static_cast<double>(vars.cont.size()) + 2.0 * cfg.order;
                             KernelSpec spec =
                                 rot_bandwidths(*train, vars, den, 1.0, cfg.family, cfg.order);
                             spec.h_y = smooth_out;
                             return CdeModel(train, vars.cont, vars.disc, spec,
                                             train->response_col(), train->treatment_col());
                           }()
                         : detail::fit_regression(train, g_set, cfg.reg_scale_grid,
                                                  cfg.family, cfg.order, &tally);

  const std::vector<double>& y_train = train->cols[train->response_col()].values;
  detail::FoldNuisances out;
  std::size_t nt = test.n;
  out.m.resize(nt);
  out.g0.resize(nt);
  out.g1.resize(nt);
  out.y.resize(nt);
  out.d = test.treatment_indicator();
  const std::vector<double>& y_test = test.cols[test.response_col()].values;
  parallel_for(0, nt, [&](std::size_t i) {
    out.m[i] = m_model->propensity_at_row(test, i, &tally);
    out.g0[i] = g_model.regress_at_row(test, i, y_train, 0, &tally);
    out.g1[i] = g_model.regress_at_row(test, i, y_train, 1, &tally);
    out.y[i] = y_test[i];
  });
  diag.zero_mass_fallbacks += tally.zero_mass_fallbacks.load();
  return out;
}

inline AteResult ate(const Dataset& data, const AteConfig& cfg) {
  cfg.trim.validate();
  AteResult res;
  std::size_t n = data.n;
  if (n < 4) throw TooFewObservations("need at least 4 observations");

  Rng rng(cfg.split_seed, 0x5eedULL);
  std::vector<std::size_t> perm = rng.permutation(n);
  std::size_t half = (n + 1) / 2;
  std::vector<std::size_t> fold1(perm.begin(), perm.begin() + half);
  std::vector<std::size_t> fold2(perm.begin() + half, perm.end());

  std::vector<detail::FoldNuisances> parts;
  parts.push_back(score_fold(data, fold1, fold2, cfg, res));
  if (cfg.dml_swap) parts.push_back(score_fold(data, fold2, fold1, cfg, res));

  std::vector<double> y, m, g0, g1;
  std::vector<int> d;
  for (const auto& p : parts) {
    y.insert(y.end(), p.y.begin(), p.y.end());
    m.insert(m.end(), p.m.begin(), p.m.end());
    g0.insert(g0.end(), p.g0.begin(), p.g0.end());
    g1.insert(g1.end(), p.g1.begin(), p.g1.end());
    d.insert(d.end(), p.d.begin(), p.d.end());
  }
  res.n_scored = y.size();
  res.m_hat = m;
  for (double v : m) {
    res.m_min = std::min(res.m_min, v);
    res.m_max = std::max(res.m_max, v);
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (cfg.trim.keeps(m[i])) kept.push_back(i);
  res.n_effective = kept.size();
  res.trim_fraction =
      1.0 - static_cast<double>(kept.size()) / static_cast<double>(y.size());
  long kept1 = 0, kept0 = 0;
  for (std::size_t i : kept) (d[i] ? kept1 : kept0)++;
  if (kept1 == 0 || kept0 == 0)
    throw DegenerateTreatment("one treatment arm is empty after trimming");

  auto pick = [&](const std::vector<double>& v) {
    std::vector<double> out(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) out[k] = v[kept[k]];
    return out;
  };
  std::vector<double> yk = pick(y), mk = pick(m), g0k = pick(g0), g1k = pick(g1);
  std::vector<int> dk(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) dk[k] = d[kept[k]];
  res.kept_m = mk;
  res.kept_d = dk;

  if (cfg.hajek) {
    // IPW residual terms normalized by the arm-specific weight sums
    double w1 = 0.0, w0 = 0.0;
    std::size_t nk = kept.size();
    for (std::size_t i = 0; i < nk; ++i) {
      if (mk[i] <= 0.0 || mk[i] >= 1.0)
        throw PropensityBoundary("propensity at or beyond {0,1} on a kept observation");
      w1 += dk[i] / mk[i];
      w0 += (1 - dk[i]) / (1.0 - mk[i]);
    }
    res.scores.resize(nk);
    double nn = static_cast<double>(nk);
    for (std::size_t i = 0; i < nk; ++i) {
      double t1 = dk[i] ? nn * (yk[i] - g1k[i]) / (mk[i] * w1) : 0.0;
      double t0 = dk[i] ? 0.0 : nn * (yk[i] - g0k[i]) / ((1.0 - mk[i]) * w0);
      res.scores[i] = (g1k[i] - g0k[i]) + t1 - t0;
    }
  } else {
    res.scores = dr_scores(yk, dk, mk, g0k, g1k);
  }

  double mean = column_mean(res.scores);
  double sd = column_sd(res.scores);
  res.psi_hat = mean;
  res.se = sd / std::sqrt(static_cast<double>(res.scores.size()));
  res.ci95 = {mean - 1.96 * res.se, mean + 1.96 * res.se};
  if (res.trim_fraction > 0.0)
    res.warnings.push_back(
        "trimming removed " + std::to_string(res.trim_fraction) +
        " of scored observations; the estimate targets the trimmed subpopulation");
  return res;
}

// ---------------------------------------------------------------------------
// Double-robustness identity check on a synthetic randomized design.

struct DrSynthetic {
  Dataset data;
  std::vector<double> m_true, g0_true, g1_true;
  double psi = 1.0;  // E[Y(1) - Y(0)] = E[1 + Z1] = 1
};

// Z1 ~ N(0,1), Z2 ~ Bernoulli(0.5); m(z) = logistic(z1);
// Y(0) = Z1^2 + e, Y(1) = 1 + Z1 + Z1^2 + e.
inline DrSynthetic gen_dr_synthetic(std::size_t n, std::uint64_t seed, int rep = 0) {
  Rng rng(seed, 0xd0bbULL, static_cast<std::uint64_t>(rep));
  DrSynthetic out;
  std::vector<double> z1(n), y(n), d_raw(n), z2(n);
  out.m_true.resize(n);
  out.g0_true.resize(n);
  out.g1_true.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    z1[i] = rng.normal();
    z2[i] = rng.bernoulli(0.5);
    out.m_true[i] = 1.0 / (1.0 + std::exp(-z1[i]));
    int d = rng.bernoulli(out.m_true[i]);
    d_raw[i] = d;
    out.g0_true[i] = z1[i] * z1[i];
    out.g1_true[i] = 1.0 + z1[i] + z1[i] * z1[i];
    y[i] = (d ? out.g1_true[i] : out.g0_true[i]) + rng.normal();
  }
  out.data.n = n;
  out.data.cols.push_back(make_continuous_column("Z1", ColumnRole::candidate, std::move(z1)));
  out.data.cols.push_back(make_discrete_column("Z2", ColumnRole::candidate, z2));
  out.data.cols.push_back(make_discrete_column("D", ColumnRole::treatment, d_raw));
  out.data.cols.push_back(make_continuous_column("Y", ColumnRole::response, std::move(y)));
  return out;
}

struct DrCheckReport {
  double psi_hat = 0.0;
  double bias = 0.0;
  bool wrong_g = false, wrong_m = false;
};

// Replaces the flagged nuisance with a deliberately misspecified one (g = 0,
// or m = marginal treated share) and keeps the true counterpart for the other
// side; the DR identity keeps the estimator consistent when exactly one side
// is wrong.
inline DrCheckReport double_robustness_check(const DrSynthetic& s, bool wrong_g,
                                             bool wrong_m) {
  const Dataset& data = s.data;
  std::vector<int> d = data.treatment_indicator();
  std::vector<double> y = data.cols[data.response_col()].values;
  std::vector<double> m = s.m_true, g0 = s.g0_true, g1 = s.g1_true;
  if (wrong_m) {
    double p = 0.0;
    for (int v : d) p += v;
    p /= static_cast<double>(d.size());
    std::fill(m.begin(), m.end(), p);
  }
  if (wrong_g) {
    std::fill(g0.begin(), g0.end(), 0.0);
    std::fill(g1.begin(), g1.end(), 0.0);
  }
  std::vector<double> psi = dr_scores(y, d, m, g0, g1);
  DrCheckReport rep;
  rep.wrong_g = wrong_g;
  rep.wrong_m = wrong_m;
  rep.psi_hat = column_mean(psi);
  rep.bias = rep.psi_hat - s.psi;
  return rep;
}

// ---------------------------------------------------------------------------
// Covariate balance within propensity-score subclasses.

struct BalanceEntry {
  double p_value = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;  // NA when an arm has fewer than 2 observations
  std::size_t n1 = 0, n0 = 0;
};

struct BalanceTable {
  std::vector<double> edges;
  std::vector<std::size_t> covariates;           // dataset column indices
  std::vector<std::vector<BalanceEntry>> cells;  // [subclass][covariate]
};

inline double welch_p_value(const std::vector<double>& a, const std::vector<double>& b) {
  double m1 = column_mean(a), m0 = column_mean(b);
  double v1 = column_sd(a), v0 = column_sd(b);
  v1 *= v1;
  v0 *= v0;
  double n1 = static_cast<double>(a.size()), n0 = static_cast<double>(b.size());
  double se2 = v1 / n1 + v0 / n0;
  if (se2 <= 0.0) return m1 == m0 ? 1.0 : 0.0;
  double t = (m1 - m0) / std::sqrt(se2);
  double nu = se2 * se2 /
              (v1 * v1 / (n1 * n1 * (n1 - 1.0)) + v0 * v0 / (n0 * n0 * (n0 - 1.0)));
  boost::math::students_t_distribution<double> dist(nu);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline BalanceTable balance_test(const Dataset& data, const std::vector<double>& m_hat,
                                 const std::vector<double>& edges,
                                 const std::vector<std::size_t>& covariates) {
  if (edges.size() < 2) throw InvalidConfig("need at least two subclass edges");
  std::vector<int> d = data.treatment_indicator();
  BalanceTable tab;
  tab.edges = edges;
  tab.covariates = covariates;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    double lo = edges[s], hi = edges[s + 1];
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.n; ++i) {
      bool last = (s + 2 == edges.size());
      if (m_hat[i] >= lo && (m_hat[i] < hi || (last && m_hat[i] <= hi)))
        rows.push_back(i);
    }
    std::vector<BalanceEntry> row_entries;
    for (std::size_t c : covariates) {
      std::vector<double> a, b;
      for (std::size_t i : rows)
        (d[i] ? a : b).push_back(data.cols[c].numeric(i));
      BalanceEntry e;
      e.n1 = a.size();
      e.n0 = b.size();
      if (a.size() >= 2 && b.size() >= 2) {
        e.p_value = welch_p_value(a, b);
        e.valid = true;
      }
      row_entries.push_back(e);
    }
    tab.cells.push_back(std::move(row_entries));
  }
  return tab;
}

}  // namespace densift
