#pragma once

// Naive reference implementations used as test oracles. They evaluate the
// displayed formulas directly (triple loops, quadrature) and stay independent
// of the cumsum / matrix-product pipelines they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "densift/dataset.hpp"
#include "densift/dependence.hpp"
#include "densift/kernels.hpp"
#include "densift/rng.hpp"

namespace oracles {

using densift::ColumnKind;
using densift::ColumnRole;
using densift::CondVars;
using densift::Dataset;
using densift::KernelSpec;
using densift::Rng;

inline double aa_literal(int a, int b, double lambda, int r_l) {
  return a == b ? 1.0 - lambda : lambda / static_cast<double>(r_l - 1);
}

// Raw weight b_{ji} between conditioning row j and data row i, literal product.
inline double naive_weight(const Dataset& d, const CondVars& vars, const KernelSpec& spec,
                           std::size_t j, std::size_t i, const double* y_override) {
  double b = 1.0;
  for (std::size_t l = 0; l < vars.cont.size(); ++l) {
    const auto& w = d.cols[vars.cont[l]].values;
    b *= densift::kernel_eval(w[j] - w[i], spec.family, spec.order, spec.h_c[l]);
  }
  for (std::size_t l = 0; l < vars.disc.size(); ++l) {
    const auto& w = d.cols[vars.disc[l]].codes;
    b *= aa_literal(w[j], w[i], spec.lambda_d[l], spec.atom_counts[l]);
  }
  if (vars.response) {
    const auto& y = d.cols[*vars.response].values;
    double yj = y_override ? *y_override : y[j];
    b *= densift::kernel_eval(yj - y[i], spec.family, spec.order, spec.h_y);
  }
  return b;
}

// F_n(x | cond row j) by direct summation.
inline double naive_cdf_at(const Dataset& d, std::size_t x_col, const CondVars& vars,
                           const KernelSpec& spec, std::size_t j, double x,
                           const double* y_override) {
  const densift::Column& xc = d.cols[x_col];
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < d.n; ++i) {
    double b = naive_weight(d, vars, spec, j, i, y_override);
    den += b;
    double xi = xc.kind == ColumnKind::continuous ? xc.values[i]
                                                  : static_cast<double>(xc.codes[i]);
    if (xi <= x) num += b;
  }
  return den > 0.0 ? num / den : 0.0;
}

inline bool naive_row_ok(const Dataset& d, const CondVars& vars, const KernelSpec& spec,
                         std::size_t j, const std::vector<double>& refs) {
  double den = 0.0;
  for (std::size_t i = 0; i < d.n; ++i) den += naive_weight(d, vars, spec, j, i, nullptr);
  if (!(den > 0.0)) return false;
  for (double r : refs) {
    double dr = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) dr += naive_weight(d, vars, spec, j, i, &r);
    if (!(dr > 0.0)) return false;
  }
  return true;
}

// rho by the direct formula: mean over j of max over sample points and
// references of |F(x_i | y_j, w_j) - F(x_i | y*, w_j)|.
inline double naive_rho(const Dataset& d, std::size_t x_col, const CondVars& vars,
                        const KernelSpec& spec, const std::vector<double>& refs) {
  const densift::Column& xc = d.cols[x_col];
  double total = 0.0;
  for (std::size_t j = 0; j < d.n; ++j) {
    if (!naive_row_ok(d, vars, spec, j, refs)) continue;  // zero-fallback rows add 0
    double best = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
      double xi = xc.kind == ColumnKind::continuous ? xc.values[i]
                                                    : static_cast<double>(xc.codes[i]);
      double f = naive_cdf_at(d, x_col, vars, spec, j, xi, nullptr);
      for (double r : refs) {
        double fr = naive_cdf_at(d, x_col, vars, spec, j, xi, &r);
        best = std::max(best, std::abs(f - fr));
      }
    }
    total += best;
  }
  return total / static_cast<double>(d.n);
}

// Binary-treatment rho: per-arm indicator-weighted CDFs, direct loops.
inline double naive_rho_binary(const Dataset& d, std::size_t x_col, const CondVars& vars,
                               const KernelSpec& spec, const std::vector<int>& arm) {
  const densift::Column& xc = d.cols[x_col];
  double total = 0.0;
  for (std::size_t j = 0; j < d.n; ++j) {
    double den1 = 0.0, den0 = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
      double b = naive_weight(d, vars, spec, j, i, nullptr);
      (arm[i] ? den1 : den0) += b;
    }
    if (!(den1 > 0.0) || !(den0 > 0.0)) continue;
    double best = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
      double xi = xc.kind == ColumnKind::continuous ? xc.values[i]
                                                    : static_cast<double>(xc.codes[i]);
      double n1 = 0.0, n0 = 0.0;
      for (std::size_t k = 0; k < d.n; ++k) {
        double xk = xc.kind == ColumnKind::continuous ? xc.values[k]
                                                      : static_cast<double>(xc.codes[k]);
        if (xk > xi) continue;
        double b = naive_weight(d, vars, spec, j, k, nullptr);
        (arm[k] ? n1 : n0) += b;
      }
      best = std::max(best, std::abs(n1 / den1 - n0 / den0));
    }
    total += best;
  }
  return total / static_cast<double>(d.n);
}

// Trapezoid quadrature of the response self-convolution integral
// int K_h(a - y) K_h(b - y) dy.
inline double quad_conv(double a, double b, densift::KernelFamily fam, int order, double h,
                        double y_lo, double y_hi, std::size_t points = 6000) {
  double lo = std::min(a, b) - 12.0 * h, hi = std::max(a, b) + 12.0 * h;
  lo = std::min(lo, y_lo - 12.0 * h);
  hi = std::max(hi, y_hi + 12.0 * h);
  double step = (hi - lo) / static_cast<double>(points);
  double s = 0.0;
  for (std::size_t k = 0; k <= points; ++k) {
    double y = lo + step * static_cast<double>(k);
    double v = densift::kernel_eval(a - y, fam, order, h) *
               densift::kernel_eval(b - y, fam, order, h);
    s += (k == 0 || k == points) ? 0.5 * v : v;
  }
  return s * step;
}

struct NaiveCvParts {
  double cv = 0.0;
  long dropped = 0;
};

// Direct, unoptimized CV = I_n1 - 2 I_n2 with leave-one-out sums and the
// convolution integral evaluated by quadrature; mirrors the ridge guard.
inline NaiveCvParts naive_cv(const Dataset& d, const std::vector<std::size_t>& cont_cols,
                             const std::vector<double>& h_cont,
                             const std::vector<std::size_t>& disc_cols,
                             const std::vector<double>& lambda,
                             const std::vector<int>& atoms, std::size_t y_col, double h_y,
                             densift::KernelFamily fam, int order) {
  std::size_t n = d.n;
  const auto& y = d.cols[y_col].values;
  double y_lo = *std::min_element(y.begin(), y.end());
  double y_hi = *std::max_element(y.begin(), y.end());
  auto p_of = [&](std::size_t i, std::size_t j) {
    double p = 1.0;
    for (std::size_t l = 0; l < cont_cols.size(); ++l) {
      const auto& x = d.cols[cont_cols[l]].values;
      p *= densift::kernel_eval(x[i] - x[j], fam, order, h_cont[l]);
    }
    for (std::size_t l = 0; l < disc_cols.size(); ++l) {
      const auto& x = d.cols[disc_cols[l]].codes;
      p *= aa_literal(x[i], x[j], lambda[l], atoms[l]);
    }
    return p;
  };
  std::vector<double> s(n), g(n), fy(n);
  for (std::size_t i = 0; i < n; ++i) {
    double si = 0.0, fyi = 0.0, gi = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double pij = p_of(i, j);
      si += pij;
      fyi += pij * densift::kernel_eval(y[j] - y[i], fam, order, h_y);
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i) continue;
        gi += pij * p_of(i, k) * quad_conv(y[j], y[k], fam, order, h_y, y_lo, y_hi);
      }
    }
    s[i] = si;
    fy[i] = fyi;
    g[i] = gi;
  }
  double mx = 0.0, mean = 0.0;
  for (double v : s) {
    mx = std::max(mx, v);
    mean += v;
  }
  mean /= static_cast<double>(n);
  double delta = 1e-12 * mx;
  NaiveCvParts out;
  double i1 = 0.0, i2 = 0.0;
  long kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] < 1e-10 * mean) {
      ++out.dropped;
      continue;
    }
    double den = s[i] + delta;
    i1 += g[i] / (den * den);
    i2 += fy[i] / den;
    ++kept;
  }
  out.cv = (i1 - 2.0 * i2) / static_cast<double>(kept);
  return out;
}

// Binary least-squares CV for the conditional pmf, direct loops.
inline double naive_cv_binary(const Dataset& d, const std::vector<std::size_t>& cont_cols,
                              const std::vector<double>& h_cont,
                              const std::vector<std::size_t>& disc_cols,
                              const std::vector<double>& lambda,
                              const std::vector<int>& atoms, const std::vector<int>& arm,
                              densift::KernelFamily fam, int order) {
  std::size_t n = d.n;
  auto p_of = [&](std::size_t i, std::size_t j) {
    double p = 1.0;
    for (std::size_t l = 0; l < cont_cols.size(); ++l) {
      const auto& x = d.cols[cont_cols[l]].values;
      p *= densift::kernel_eval(x[i] - x[j], fam, order, h_cont[l]);
    }
    for (std::size_t l = 0; l < disc_cols.size(); ++l) {
      const auto& x = d.cols[disc_cols[l]].codes;
      p *= aa_literal(x[i], x[j], lambda[l], atoms[l]);
    }
    return p;
  };
  std::vector<double> s(n), s1(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = 0.0, t = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double pij = p_of(i, j);
      a += pij;
      if (arm[j]) t += pij;
    }
    s[i] = a;
    s1[i] = t;
  }
  double mx = 0.0, mean = 0.0;
  for (double v : s) {
    mx = std::max(mx, v);
    mean += v;
  }
  mean /= static_cast<double>(n);
  double delta = 1e-12 * mx;
  double i1 = 0.0, i2 = 0.0;
  long kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] < 1e-10 * mean) continue;
    double den = s[i] + delta;
    double f1 = s1[i] / den, f0 = (s[i] - s1[i]) / den;
    i1 += f1 * f1 + f0 * f0;
    i2 += arm[i] ? f1 : f0;
    ++kept;
  }
  return (i1 - 2.0 * i2) / static_cast<double>(kept);
}

// Random mixed-column dataset for oracle batteries: one response (or binary
// treatment), q_c continuous + q_d discrete pre-selected covariates, and
// `candidates` candidate columns alternating continuous/discrete.
inline Dataset random_instance(Rng& rng, std::size_t n, int q_c, int q_d, int candidates,
                               bool binary_treatment) {
  Dataset d;
  d.n = n;
  for (int c = 0; c < candidates; ++c) {
    if (c % 2 == 0) {
      std::vector<double> v(n);
      for (double& x : v) x = rng.normal();
      d.cols.push_back(densift::make_continuous_column("X" + std::to_string(c),
                                                       ColumnRole::candidate, v));
    } else {
      std::vector<double> v(n);
      for (double& x : v) x = std::floor(rng.uniform(0.0, 3.0));
      v[0] = 0.0;  // keep at least two atoms at tiny n
      v[1] = 1.0;
      d.cols.push_back(densift::make_discrete_column("X" + std::to_string(c),
                                                     ColumnRole::candidate, v));
    }
  }
  for (int c = 0; c < q_c; ++c) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    d.cols.push_back(densift::make_continuous_column("Wc" + std::to_string(c),
                                                     ColumnRole::preselected_w, v));
  }
  for (int c = 0; c < q_d; ++c) {
    std::vector<double> v(n);
    for (double& x : v) x = std::floor(rng.uniform(0.0, 2.0));
    v[0] = 0.0;
    v[1] = 1.0;
    d.cols.push_back(densift::make_discrete_column("Wd" + std::to_string(c),
                                                   ColumnRole::preselected_w, v));
  }
  {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    d.cols.push_back(densift::make_continuous_column("Y", ColumnRole::response, v));
  }
  if (binary_treatment) {
    std::vector<double> v(n);
    v[0] = 0.0;  // both arms nonempty
    v[1] = 1.0;
    for (std::size_t i = 2; i < n; ++i) v[i] = rng.bernoulli(0.5);
    d.cols.push_back(densift::make_discrete_column("D", ColumnRole::treatment, v));
  }
  return d;
}

}  // namespace oracles
