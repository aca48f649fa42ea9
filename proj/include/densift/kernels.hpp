#pragma once

// Kernel functions, rule-of-thumb bandwidths, and the pairwise weight-matrix
// machinery shared by the dependence measure, the CV criterion, and the
// post-selection estimators.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "densift/dataset.hpp"
#include "densift/errors.hpp"
#include "densift/parallel.hpp"

namespace densift {

enum class KernelFamily { gaussian, epanechnikov };

// Sentinel for an "infinite" continuous bandwidth: the covariate receives
// uniform weight 1 for every pair, which removes its influence entirely.
inline constexpr double smooth_out = std::numeric_limits<double>::infinity();

inline bool is_smooth_out(double h) { return std::isinf(h) && h > 0; }

inline double lambda_cap(int r_l) {
  return static_cast<double>(r_l - 1) / static_cast<double>(r_l);
}

namespace detail {

inline double gauss_pdf(double u) {
  return std::exp(-0.5 * u * u) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
}

inline double base_kernel(double u, KernelFamily family, int order) {
  if (family == KernelFamily::gaussian) {
    if (order == 2) return gauss_pdf(u);
    // fourth order: (3/2 - u^2/2) phi(u)
    return (1.5 - 0.5 * u * u) * gauss_pdf(u);
  }
  double a = std::abs(u);
  return a <= 1.0 ? 0.75 * (1.0 - a * a) : 0.0;
}

// Self-convolution (K*K)(v) = int K(t) K(v - t) dt, closed forms.
inline double base_conv(double v, KernelFamily family, int order) {
  if (family == KernelFamily::gaussian) {
    double g = std::exp(-0.25 * v * v) / (2.0 * std::sqrt(std::numbers::pi));
    if (order == 2) return g;
    double v2 = v * v;
    return g * (27.0 / 16.0 - (7.0 / 16.0) * v2 + v2 * v2 / 64.0);
  }
  double a = std::abs(v);
  if (a >= 2.0) return 0.0;
  double d = 2.0 - a;
  return (3.0 / 160.0) * d * d * d * (a * a + 6.0 * a + 4.0);
}

}  // namespace detail

inline void check_kernel_order(KernelFamily family, int order) {
  if (order != 2 && order != 4)
    throw InvalidConfig("kernel order must be 2 or 4");
  if (family == KernelFamily::epanechnikov && order != 2)
    throw InvalidConfig("epanechnikov kernel is only available at order 2");
}

// K_h(u) = K(u/h)/h; the smooth-out sentinel yields uniform weight 1.
inline double kernel_eval(double u, KernelFamily family, int order, double h) {
  if (is_smooth_out(h)) return 1.0;
  if (!(h > 0.0) || std::isnan(h))
    throw InvalidBandwidth("bandwidth must be positive, got " + std::to_string(h));
  return detail::base_kernel(u / h, family, order) / h;
}

// int K_h(a - y) K_h(b - y) dy as a function of v = a - b.
inline double kernel_conv_eval(double v, KernelFamily family, int order, double h) {
  if (is_smooth_out(h)) return 1.0;
  if (!(h > 0.0) || std::isnan(h))
    throw InvalidBandwidth("bandwidth must be positive, got " + std::to_string(h));
  return detail::base_conv(v / h, family, order) / h;
}

// Aitchison-Aitken kernel for discrete atoms on an alphabet of size r_l.
inline double aitchison_aitken(int w1, int w2, double lambda, int r_l) {
  if (r_l < 2) throw InvalidBandwidth("discrete kernel needs at least 2 atoms");
  if (lambda < 0.0 || lambda > lambda_cap(r_l) + 1e-15)
    throw InvalidBandwidth("lambda out of [0, (r_l-1)/r_l]");
  return w1 == w2 ? 1.0 - lambda : lambda / static_cast<double>(r_l - 1);
}

// Bandwidths for one conditioning block. h_c / lambda_d / atom_counts are
// aligned with the continuous / discrete column lists they were built for.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  int order = 2;
  double h_y = smooth_out;
  std::vector<double> h_c;
  std::vector<double> lambda_d;
  std::vector<int> atom_counts;

  void validate() const {
    check_kernel_order(family, order);
    auto check_h = [](double h) {
      if (is_smooth_out(h)) return;
      if (!(h > 0.0) || std::isnan(h)) throw InvalidBandwidth("non-positive bandwidth");
    };
    check_h(h_y);
    for (double h : h_c) check_h(h);
    if (lambda_d.size() != atom_counts.size())
      throw InvalidConfig("lambda_d and atom_counts must align");
    for (std::size_t l = 0; l < lambda_d.size(); ++l) {
      if (lambda_d[l] < 0.0 || lambda_d[l] > lambda_cap(atom_counts[l]) + 1e-15)
        throw InvalidBandwidth("lambda out of range for its atom count");
    }
  }
};

// Conditioning variables addressed by dataset column index; `response` is
// smoothed with h_y, continuous columns with h_c, discrete with lambda_d.
struct CondVars {
  std::optional<std::size_t> response;
  std::vector<std::size_t> cont;
  std::vector<std::size_t> disc;
};

// Rate-optimal rule-of-thumb bandwidths:
//   h_l      = scale * sd(col_l) * n^{-1/exponent_den}
//   lambda_l = min(scale * n^{-r/exponent_den}, (r_l-1)/r_l)
// exponent_den is the caller's rate denominator, e.g. 2r+q^c+1 for screening
// with a continuous response, 2r+q^c for a binary treatment, and
// p^c_I+1+2r / p^c_I+2r in the refinement stage.
inline KernelSpec rot_bandwidths(const Dataset& data, const CondVars& vars,
                                 double exponent_den, double scale = 1.0,
                                 KernelFamily family = KernelFamily::gaussian,
                                 int order = 2) {
  if (!(exponent_den > 0)) throw InvalidConfig("exponent_den must be positive");
  KernelSpec spec;
  spec.family = family;
  spec.order = order;
  double n = static_cast<double>(data.n);
  double rate_h = std::pow(n, -1.0 / exponent_den);
  double rate_l = std::pow(n, -static_cast<double>(order) / exponent_den);
  auto h_for = [&](std::size_t col) {
    double sd = column_sd(data.cols[col].values);
    if (!(sd > 0.0))
      throw DegenerateColumn("zero-variance continuous column '" + data.cols[col].name + "'");
    return scale * sd * rate_h;
  };
  if (vars.response) spec.h_y = h_for(*vars.response);
  for (std::size_t col : vars.cont) spec.h_c.push_back(h_for(col));
  for (std::size_t col : vars.disc) {
    int r_l = data.cols[col].n_atoms;
    if (r_l < 2) throw DegenerateColumn("discrete column '" + data.cols[col].name +
                                        "' has fewer than 2 atoms");
    spec.lambda_d.push_back(std::min(scale * rate_l, lambda_cap(r_l)));
    spec.atom_counts.push_back(r_l);
  }
  return spec;
}

// n x n product of the continuous and discrete kernel factors over the
// conditioning covariates (no response factor), row j = conditioning point.
inline std::vector<double> pairwise_factor_matrix(const Dataset& data,
                                                  const CondVars& vars,
                                                  const KernelSpec& spec) {
  std::size_t n = data.n;
  std::vector<double> f(n * n, 1.0);
  for (std::size_t l = 0; l < vars.cont.size(); ++l) {
    double h = spec.h_c[l];
    if (is_smooth_out(h)) continue;
    const std::vector<double>& x = data.cols[vars.cont[l]].values;
    KernelFamily fam = spec.family;
    int order = spec.order;
    parallel_for(0, n, [&](std::size_t j) {
      double* row = f.data() + j * n;
      double xj = x[j];
      for (std::size_t i = 0; i < n; ++i)
        row[i] *= kernel_eval(xj - x[i], fam, order, h);
    });
  }
  for (std::size_t l = 0; l < vars.disc.size(); ++l) {
    double lambda = spec.lambda_d[l];
    int r_l = spec.atom_counts[l];
    double match = 1.0 - lambda;
    double miss = lambda / static_cast<double>(r_l - 1);
    if (lambda < 0.0 || lambda > lambda_cap(r_l) + 1e-15)
      throw InvalidBandwidth("lambda out of range");
    const std::vector<int>& x = data.cols[vars.disc[l]].codes;
    parallel_for(0, n, [&](std::size_t j) {
      double* row = f.data() + j * n;
      int xj = x[j];
      for (std::size_t i = 0; i < n; ++i) row[i] *= (xj == x[i] ? match : miss);
    });
  }
  return f;
}

struct WeightMatrix {
  std::size_t n = 0;
  std::vector<double> w;          // flat row-major n*n
  std::vector<double> row_sums;   // pre-normalization row masses
  bool normalized = false;

  double operator()(std::size_t j, std::size_t i) const { return w[j * n + i]; }
};

// Normalized weights omega_ji = b_ji / b_j. per eq. of the conditional CDF.
// When `ref_response` is set, the response coordinate of every conditioning
// row is replaced by that value. A row with exactly zero mass throws.
inline WeightMatrix weight_matrix(const Dataset& data, const CondVars& vars,
                                  const KernelSpec& spec,
                                  std::optional<double> ref_response = std::nullopt) {
  spec.validate();
  WeightMatrix out;
  out.n = data.n;
  out.w = pairwise_factor_matrix(data, vars, spec);
  if (vars.response) {
    const std::vector<double>& y = data.cols[*vars.response].values;
    parallel_for(0, data.n, [&](std::size_t j) {
      double* row = out.w.data() + j * data.n;
      double yj = ref_response ? *ref_response : y[j];
      for (std::size_t i = 0; i < data.n; ++i)
        row[i] *= kernel_eval(yj - y[i], spec.family, spec.order, spec.h_y);
    });
  }
  out.row_sums.resize(data.n);
  for (std::size_t j = 0; j < data.n; ++j) {
    const double* row = out.w.data() + j * data.n;
    double s = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) s += row[i];
    if (s == 0.0)
      throw ZeroMassRow("conditioning row " + std::to_string(j) + " has zero kernel mass");
    out.row_sums[j] = s;
  }
  parallel_for(0, data.n, [&](std::size_t j) {
    double* row = out.w.data() + j * data.n;
    double inv = 1.0 / out.row_sums[j];
    for (std::size_t i = 0; i < data.n; ++i) row[i] *= inv;
  });
  out.normalized = true;
  return out;
}

}  // namespace densift
