#pragma once

// Least-squares cross-validation criterion with leave-one-out kernel
// estimators, and the discrete search over binary selection vectors at
// rate-optimal bandwidths that replaces the continuous CV-ISE optimization.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "densift/cde.hpp"
#include "densift/dataset.hpp"
#include "densift/errors.hpp"
#include "densift/kernels.hpp"
#include "densift/parallel.hpp"
#include "densift/screening.hpp"

namespace densift {

enum class ResponseMode { continuous_y, binary_d };

// Binary inclusion mask over the p-tilde working covariates, continuous block
// first, then the discrete block.
struct SelectionVector {
  std::vector<std::uint8_t> bits;
  std::size_t s1 = 0;  // size of the continuous block

  int included_cont() const {
    int c = 0;
    for (std::size_t l = 0; l < s1; ++l) c += bits[l];
    return c;
  }
  int included_disc() const {
    int c = 0;
    for (std::size_t l = s1; l < bits.size(); ++l) c += bits[l];
    return c;
  }
  int popcount() const { return included_cont() + included_disc(); }
};

// (h for Y, h_1..h_s1, lambda_1..lambda_s2); excluded continuous covariates sit
// at the smooth-out sentinel, excluded discrete ones at (r_l-1)/r_l.
struct BandwidthVector {
  std::optional<double> h_y;
  std::vector<double> h_cont;
  std::vector<double> lambda_disc;
  std::vector<int> atom_counts;
};

// The p-tilde working set in selection-vector order, with protection flags for
// the pre-selected covariates.
struct RefineInput {
  std::vector<std::size_t> cont_cols;
  std::vector<std::size_t> disc_cols;
  std::vector<std::uint8_t> cont_is_w;
  std::vector<std::uint8_t> disc_is_w;

  std::size_t p_tilde() const { return cont_cols.size() + disc_cols.size(); }
};

inline RefineInput make_refine_input(const Dataset& data, const ScreeningOutcome& screened) {
  RefineInput in;
  CondVars w = w_cond_vars(data);
  for (std::size_t c : w.cont) {
    in.cont_cols.push_back(c);
    in.cont_is_w.push_back(1);
  }
  for (std::size_t c : w.disc) {
    in.disc_cols.push_back(c);
    in.disc_is_w.push_back(1);
  }
  for (std::size_t c : screened.retained) {
    if (data.cols[c].kind == ColumnKind::continuous) {
      in.cont_cols.push_back(c);
      in.cont_is_w.push_back(0);
    } else {
      in.disc_cols.push_back(c);
      in.disc_is_w.push_back(0);
    }
  }
  return in;
}

inline double refine_exponent_den(int included_cont, ResponseMode mode, int order) {
  double den = static_cast<double>(included_cont) + 2.0 * order;
  if (mode == ResponseMode::continuous_y) den += 1.0;
  return den;
}

// Rate-optimal bandwidths for one selection vector, one entry per scale:
// included coordinates at c * sd * n^{-1/den} (lambda at c * n^{-r/den} capped),
// excluded coordinates at their upper-extreme sentinels.
inline std::vector<BandwidthVector> optimal_bandwidths_for(
    const SelectionVector& I, const Dataset& data, const RefineInput& in,
    ResponseMode mode, const std::vector<double>& scale_grid, int order = 2,
    std::optional<std::size_t> response_col = std::nullopt) {
  if (scale_grid.empty()) throw InvalidConfig("scale grid is empty");
  double den = refine_exponent_den(I.included_cont(), mode, order);
  double n = static_cast<double>(data.n);
  double rate_h = std::pow(n, -1.0 / den);
  double rate_l = std::pow(n, -static_cast<double>(order) / den);
  std::vector<BandwidthVector> out;
  out.reserve(scale_grid.size());
  for (double c : scale_grid) {
    BandwidthVector bw;
    if (mode == ResponseMode::continuous_y) {
      std::size_t yc = response_col ? *response_col : data.response_col();
      double sd = column_sd(data.cols[yc].values);
      if (!(sd > 0.0)) throw DegenerateColumn("response has zero variance");
      bw.h_y = c * sd * rate_h;
    }
    for (std::size_t l = 0; l < in.cont_cols.size(); ++l) {
      if (!I.bits[l]) {
        bw.h_cont.push_back(smooth_out);
        continue;
      }
      double sd = column_sd(data.cols[in.cont_cols[l]].values);
      if (!(sd > 0.0))
        throw DegenerateColumn("zero-variance covariate '" + data.cols[in.cont_cols[l]].name + "'");
      bw.h_cont.push_back(c * sd * rate_h);
    }
    for (std::size_t l = 0; l < in.disc_cols.size(); ++l) {
      int r_l = data.cols[in.disc_cols[l]].n_atoms;
      bw.atom_counts.push_back(r_l);
      double cap = lambda_cap(r_l);
      bw.lambda_disc.push_back(I.bits[in.cont_cols.size() + l]
                                   ? std::min(c * rate_l, cap)
                                   : cap);
    }
    out.push_back(std::move(bw));
  }
  return out;
}

struct CvDiagnostics {
  long dropped = 0;  // observations removed by the near-zero-mass guard
};

namespace detail {

// Product kernel matrix over the working covariates. Coordinates at their
// upper extremes contribute an exactly constant factor and are skipped; the CV
// criterion is scale-free in P, so constants do not change it.
inline std::vector<double> product_kernel_matrix(const Dataset& data, const RefineInput& in,
                                                 const BandwidthVector& bw,
                                                 KernelFamily family, int order) {
  std::size_t n = data.n;
  std::vector<double> p(n * n, 1.0);
  for (std::size_t l = 0; l < in.cont_cols.size(); ++l) {
    double h = bw.h_cont[l];
    if (is_smooth_out(h)) continue;
    const std::vector<double>& x = data.cols[in.cont_cols[l]].values;
    for (std::size_t j = 0; j < n; ++j) {
      double* row = p.data() + j * n;
      double xj = x[j];
      for (std::size_t i = 0; i < n; ++i)
        row[i] *= kernel_eval(xj - x[i], family, order, h);
    }
  }
  for (std::size_t l = 0; l < in.disc_cols.size(); ++l) {
    int r_l = bw.atom_counts[l];
    double lambda = bw.lambda_disc[l];
    if (lambda >= lambda_cap(r_l) - 1e-15) continue;  // exactly uniform
    double match = 1.0 - lambda;
    double miss = lambda / static_cast<double>(r_l - 1);
    const std::vector<int>& x = data.cols[in.disc_cols[l]].codes;
    for (std::size_t j = 0; j < n; ++j) {
      double* row = p.data() + j * n;
      int xj = x[j];
      for (std::size_t i = 0; i < n; ++i) row[i] *= (xj == x[i] ? match : miss);
    }
  }
  return p;
}

struct RidgeGuard {
  double delta = 0.0;
  std::vector<std::uint8_t> keep;
  long dropped = 0;

  RidgeGuard(const std::vector<double>& s) : keep(s.size(), 1) {
    double mx = 0.0, mean = 0.0;
    for (double v : s) {
      mx = std::max(mx, v);
      mean += v;
    }
    mean /= static_cast<double>(s.size());
    delta = 1e-12 * mx;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] < 1e-10 * mean) {
        keep[i] = 0;
        ++dropped;
      }
    }
  }
};

}  // namespace detail

// CV = I_n1 - 2 I_n2 with leave-one-out estimators,
//   I_n1 = mean_i G_-i(x_i) / f_-i(x_i)^2,   I_n2 = mean_i f_-i(x_i, y_i) / f_-i(x_i),
// where the response self-convolution integral uses the closed kernel form.
inline double cv_value(const Dataset& data, const RefineInput& in, const BandwidthVector& bw,
                       KernelFamily family = KernelFamily::gaussian, int order = 2,
                       CvDiagnostics* diag = nullptr,
                       std::optional<std::size_t> response_col = std::nullopt) {
  std::size_t n = data.n;
  if (n < 3) throw TooFewObservations("cross-validation needs n >= 3");
  if (!bw.h_y) throw InvalidConfig("continuous-response CV needs a response bandwidth");
  double h_y = *bw.h_y;
  const std::vector<double>& y =
      data.cols[response_col ? *response_col : data.response_col()].values;

  std::vector<double> p = detail::product_kernel_matrix(data, in, bw, family, order);
  std::vector<double> conv(n * n), ky(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    double yj = y[j];
    double* cr = conv.data() + j * n;
    double* kr = ky.data() + j * n;
    for (std::size_t i = 0; i < n; ++i) {
      cr[i] = kernel_conv_eval(yj - y[i], family, order, h_y);
      kr[i] = kernel_eval(yj - y[i], family, order, h_y);
    }
  }

  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> P(p.data(), n, n), C(conv.data(), n, n);
  Mat M = P * C;  // M_ik = sum_j P_ij C_jk

  std::vector<double> t(n), s(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* pr = p.data() + i * n;
    const double* mr = M.data() + i * n;
    const double* cr = conv.data() + i * n;
    const double* kr = ky.data() + i * n;
    double t_full = 0.0, q_i = 0.0, s_full = 0.0, u_full = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      t_full += mr[k] * pr[k];
      q_i += pr[k] * cr[k];
      s_full += pr[k];
      u_full += pr[k] * kr[k];
    }
    double pii = pr[i];
    t[i] = t_full - 2.0 * pii * q_i + pii * pii * cr[i];
    s[i] = s_full - pii;
    u[i] = u_full - pii * kr[i];
  }

  detail::RidgeGuard guard(s);
  if (diag) diag->dropped = guard.dropped;
  double i1 = 0.0, i2 = 0.0;
  long kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!guard.keep[i]) continue;
    double den = s[i] + guard.delta;
    i1 += t[i] / (den * den);
    i2 += u[i] / den;
    ++kept;
  }
  if (kept == 0) throw ZeroMassRow("every observation lost its leave-one-out mass");
  return (i1 - 2.0 * i2) / static_cast<double>(kept);
}

// Binary-response analogue: least-squares CV for the conditional pmf,
//   I_n1 = mean_i sum_d f_-i(d | x_i)^2,   I_n2 = mean_i f_-i(D_i | x_i);
// the response needs no kernel smoothing.
inline double cv_value_binary(const Dataset& data, const RefineInput& in,
                              const BandwidthVector& bw,
                              KernelFamily family = KernelFamily::gaussian, int order = 2,
                              CvDiagnostics* diag = nullptr) {
  std::size_t n = data.n;
  if (n < 3) throw TooFewObservations("cross-validation needs n >= 3");
  std::vector<int> arm = data.treatment_indicator();
  long n1 = std::count(arm.begin(), arm.end(), 1);
  if (n1 == 0 || n1 == static_cast<long>(n))
    throw DegenerateTreatment("one treatment arm is empty");

  std::vector<double> p = detail::product_kernel_matrix(data, in, bw, family, order);
  std::vector<double> s(n), s1(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* pr = p.data() + i * n;
    double all = 0.0, treated = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      all += pr[k];
      if (arm[k]) treated += pr[k];
    }
    s[i] = all - pr[i];
    s1[i] = treated - (arm[i] ? pr[i] : 0.0);
  }

  detail::RidgeGuard guard(s);
  if (diag) diag->dropped = guard.dropped;
  double i1 = 0.0, i2 = 0.0;
  long kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!guard.keep[i]) continue;
    double den = s[i] + guard.delta;
    double f1 = s1[i] / den;
    double f0 = (s[i] - s1[i]) / den;
    i1 += f1 * f1 + f0 * f0;
    i2 += arm[i] ? f1 : f0;
    ++kept;
  }
  if (kept == 0) throw ZeroMassRow("every observation lost its leave-one-out mass");
  return (i1 - 2.0 * i2) / static_cast<double>(kept);
}

struct CvEntry {
  SelectionVector I;
  double scale = 1.0;
  BandwidthVector bw;
  double cv = 0.0;
  long dropped = 0;
};

struct CvOutcome {
  CvEntry best;
  std::vector<CvEntry> table;          // all evaluated (I, scale) pairs
  int smoothed_out_screened = 0;       // screened (non-W) covariates excluded by best
  RefineInput input;
};

namespace detail {

// Total order on (CV, popcount, lexicographic bits, scale): ties go to sparser
// selections, then lower lexicographic I.
inline bool cv_entry_better(const CvEntry& a, const CvEntry& b) {
  if (a.cv != b.cv) return a.cv < b.cv;
  int pa = a.I.popcount(), pb = b.I.popcount();
  if (pa != pb) return pa < pb;
  if (a.I.bits != b.I.bits) return a.I.bits < b.I.bits;
  return a.scale < b.scale;
}

}  // namespace detail

inline CvOutcome refine(const Dataset& data, const ScreeningOutcome& screened,
                        ResponseMode mode, bool protect_w = true,
                        std::vector<double> scale_grid = {0.5, 1.0, 2.0},
                        KernelFamily family = KernelFamily::gaussian, int order = 2,
                        std::size_t p_cap = 20) {
  RefineInput in = make_refine_input(data, screened);
  std::size_t p = in.p_tilde();
  if (p > p_cap)
    throw SearchTooLarge("p_tilde = " + std::to_string(p) + " exceeds the 2^p cap of " +
                         std::to_string(p_cap));
  if (scale_grid.empty()) throw InvalidConfig("scale grid is empty");

  std::vector<std::size_t> free_pos;
  std::vector<std::uint8_t> forced(p, 0);
  for (std::size_t l = 0; l < in.cont_cols.size(); ++l) {
    if (protect_w && in.cont_is_w[l]) forced[l] = 1;
    else free_pos.push_back(l);
  }
  for (std::size_t l = 0; l < in.disc_cols.size(); ++l) {
    std::size_t pos = in.cont_cols.size() + l;
    if (protect_w && in.disc_is_w[l]) forced[pos] = 1;
    else free_pos.push_back(pos);
  }

  std::size_t n_masks = std::size_t{1} << free_pos.size();
  CvOutcome out;
  out.input = in;
  out.table.resize(n_masks * scale_grid.size());

  parallel_for(0, n_masks, [&](std::size_t mask) {
    SelectionVector I;
    I.bits.assign(forced.begin(), forced.end());
    I.s1 = in.cont_cols.size();
    for (std::size_t k = 0; k < free_pos.size(); ++k)
      if (mask & (std::size_t{1} << k)) I.bits[free_pos[k]] = 1;
    std::vector<BandwidthVector> bws =
        optimal_bandwidths_for(I, data, in, mode, scale_grid, order);
    for (std::size_t si = 0; si < scale_grid.size(); ++si) {
      CvEntry e;
      e.I = I;
      e.scale = scale_grid[si];
      e.bw = bws[si];
      CvDiagnostics diag;
      e.cv = (mode == ResponseMode::continuous_y)
                 ? cv_value(data, in, e.bw, family, order, &diag)
                 : cv_value_binary(data, in, e.bw, family, order, &diag);
      e.dropped = diag.dropped;
      out.table[mask * scale_grid.size() + si] = std::move(e);
    }
  });

  std::size_t best = 0;
  for (std::size_t k = 1; k < out.table.size(); ++k)
    if (detail::cv_entry_better(out.table[k], out.table[best])) best = k;
  out.best = out.table[best];

  for (std::size_t l = 0; l < in.cont_cols.size(); ++l)
    if (!in.cont_is_w[l] && !out.best.I.bits[l]) ++out.smoothed_out_screened;
  for (std::size_t l = 0; l < in.disc_cols.size(); ++l)
    if (!in.disc_is_w[l] && !out.best.I.bits[in.cont_cols.size() + l])
      ++out.smoothed_out_screened;
  return out;
}

// Model over the refine working set at the chosen bandwidths. Excluded
// covariates stay in the spec at their sentinels, which leaves them without
// influence on any prediction.
inline CdeModel make_model(std::shared_ptr<const Dataset> train, const CvOutcome& cv,
                           ResponseMode mode, KernelFamily family = KernelFamily::gaussian,
                           int order = 2) {
  KernelSpec spec;
  spec.family = family;
  spec.order = order;
  spec.h_y = cv.best.bw.h_y ? *cv.best.bw.h_y : smooth_out;
  spec.h_c = cv.best.bw.h_cont;
  spec.lambda_d = cv.best.bw.lambda_disc;
  spec.atom_counts = cv.best.bw.atom_counts;
  std::optional<std::size_t> response, treatment;
  if (mode == ResponseMode::continuous_y)
    response = train->response_col();
  else
    treatment = train->treatment_col();
  return CdeModel(std::move(train), cv.input.cont_cols, cv.input.disc_cols, spec,
                  response, treatment);
}

struct IterationStep {
  std::size_t p_tilde;
  ScreeningOutcome screening;
  CvOutcome cv;
};

struct IterationOutcome {
  CdeModel model;
  ScreeningOutcome screening;
  CvOutcome cv;
  bool sparsity_doubt = false;   // hit the p-tilde cap with nothing smoothed out
  std::vector<std::size_t> p_tilde_path;
};

// Steps 1-4 of the procedure: screen, refine, and grow p-tilde until at least
// one screened covariate is smoothed out (or the cap is reached).
inline IterationOutcome iterate_procedure(std::shared_ptr<const Dataset> data,
                                          const DependenceConfig& dep_cfg,
                                          std::size_t p_tilde_init,
                                          std::size_t p_tilde_cap = 10,
                                          bool protect_w = true,
                                          std::vector<double> scale_grid = {0.5, 1.0, 2.0},
                                          std::size_t search_cap = 20) {
  ResponseMode mode = dep_cfg.reference == ReferenceMode::binary_treatment
                          ? ResponseMode::binary_d
                          : ResponseMode::continuous_y;
  CondVars w = w_cond_vars(*data);
  std::size_t q = w.cont.size() + w.disc.size();
  if (p_tilde_init < q + 1)
    throw InvalidPTilde("p_tilde_init must be at least q_c + q_d + 1");
  std::size_t n_cand = data->candidates().size();

  std::vector<std::size_t> path;
  for (std::size_t p_tilde = p_tilde_init;; ++p_tilde) {
    path.push_back(p_tilde);
    ScreeningOutcome sc = screen(*data, dep_cfg, p_tilde);
    CvOutcome cv = refine(*data, sc, mode, protect_w, scale_grid, dep_cfg.family,
                          dep_cfg.order, search_cap);
    bool exhausted = (p_tilde - q) >= n_cand;
    bool at_cap = p_tilde >= p_tilde_cap;
    if (cv.smoothed_out_screened >= 1 || at_cap || exhausted) {
      bool doubt = at_cap && cv.smoothed_out_screened == 0;
      IterationOutcome out{make_model(data, cv, mode, dep_cfg.family, dep_cfg.order),
                           std::move(sc), std::move(cv), doubt, path};
      return out;
    }
  }
}

}  // namespace densift
