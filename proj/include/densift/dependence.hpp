#pragma once

// Conditional dependence measure: kernel-smoothed conditional CDFs, the
// Kolmogorov-Smirnov statistic against reference response values, and the
// O(n^2) four-step pipeline (weights -> sort -> cumsum -> max).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "densift/dataset.hpp"
#include "densift/errors.hpp"
#include "densift/kernels.hpp"
#include "densift/parallel.hpp"

namespace densift {

enum class ReferenceMode { median, quantiles, binary_treatment };

struct DependenceConfig {
  ReferenceMode reference = ReferenceMode::median;
  std::vector<double> quantile_probs{0.25, 0.5, 0.75};
  KernelFamily family = KernelFamily::gaussian;
  int order = 2;
  double scale = 1.0;
  bool keep_lambdas = false;

  void validate() const {
    check_kernel_order(family, order);
    if (reference == ReferenceMode::quantiles) {
      if (quantile_probs.empty()) throw InvalidConfig("quantile list is empty");
      double prev = 0.0;
      for (double p : quantile_probs) {
        if (!(p > 0.0 && p < 1.0)) throw InvalidConfig("quantile probs must lie in (0,1)");
        if (p <= prev) throw InvalidConfig("quantile probs must be sorted and distinct");
        prev = p;
      }
    }
    if (!(scale > 0.0)) throw InvalidConfig("bandwidth scale must be positive");
  }
};

struct DependenceResult {
  std::vector<double> rho;                      // per candidate, aligned with input order
  std::vector<std::vector<double>> lambdas;     // per-observation KS values (optional)
  long zero_mass_rows = 0;                      // conditioning rows handled by the zero fallback
  double elapsed_seconds = 0.0;
  std::size_t weight_cells = 0;                 // kernel-weight cells materialized
};

namespace detail {

// Sort permutation of a candidate column plus the positions where the sorted
// value changes; the CDF is evaluated only after absorbing a full tie group.
struct SortedCandidate {
  std::vector<std::uint32_t> perm;
  std::vector<std::uint32_t> group_end;  // exclusive end index of each tie group

  template <typename T>
  static SortedCandidate build(const std::vector<T>& x) {
    SortedCandidate s;
    std::size_t n = x.size();
    s.perm.resize(n);
    std::iota(s.perm.begin(), s.perm.end(), 0u);
    std::stable_sort(s.perm.begin(), s.perm.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x[a] < x[b]; });
    for (std::size_t i = 1; i <= n; ++i) {
      if (i == n || x[s.perm[i]] != x[s.perm[i - 1]])
        s.group_end.push_back(static_cast<std::uint32_t>(i));
    }
    return s;
  }
};

inline SortedCandidate sort_candidate(const Column& x) {
  return x.kind == ColumnKind::continuous ? SortedCandidate::build(x.values)
                                          : SortedCandidate::build(x.codes);
}

}  // namespace detail

// Shared weight matrices of the pipeline's step 1; built once per (Y, W) or
// (D, W) block and reused read-only across all candidate columns.
class DependenceEngine {
 public:
  // Continuous-response mode. `refs` holds the reference response values.
  DependenceEngine(const Dataset& data, std::size_t response_col,
                   const CondVars& w_vars, const KernelSpec& spec,
                   std::vector<double> refs)
      : n_(data.n), refs_(std::move(refs)) {
    spec.validate();
    if (refs_.empty()) throw InvalidConfig("reference set is empty");
    const std::vector<double>& y = data.cols[response_col].values;
    std::vector<double> factor = pairwise_factor_matrix(data, w_vars, spec);
    b_main_ = factor;
    parallel_for(0, n_, [&](std::size_t j) {
      double* row = b_main_.data() + j * n_;
      for (std::size_t i = 0; i < n_; ++i)
        row[i] *= kernel_eval(y[j] - y[i], spec.family, spec.order, spec.h_y);
    });
    b_ref_.resize(refs_.size());
    for (std::size_t k = 0; k < refs_.size(); ++k) {
      b_ref_[k] = factor;
      double yk = refs_[k];
      parallel_for(0, n_, [&](std::size_t j) {
        double* row = b_ref_[k].data() + j * n_;
        for (std::size_t i = 0; i < n_; ++i)
          row[i] *= kernel_eval(yk - y[i], spec.family, spec.order, spec.h_y);
      });
    }
    finalize_totals();
  }

  // Binary-treatment mode: the two CDFs are the arm-indicator-weighted kernel
  // CDFs; no response smoothing.
  DependenceEngine(const Dataset& data, const std::vector<int>& arm,
                   const CondVars& w_vars, const KernelSpec& spec)
      : n_(data.n), arm_(arm), binary_(true) {
    spec.validate();
    long n1 = std::count(arm_.begin(), arm_.end(), 1);
    if (n1 == 0 || n1 == static_cast<long>(n_))
      throw DegenerateTreatment("one treatment arm is empty");
    b_main_ = pairwise_factor_matrix(data, w_vars, spec);
    finalize_totals();
  }

  std::size_t n() const { return n_; }
  long zero_mass_rows() const { return zero_rows_; }
  std::size_t weight_cells() const {
    return n_ * n_ * (1 + b_ref_.size());
  }

  // KS statistic per conditioning row for one candidate column; rows whose
  // kernel mass vanished contribute 0 and are tallied.
  std::vector<double> lambdas_for(const Column& x) const {
    detail::SortedCandidate sc = detail::sort_candidate(x);
    std::vector<double> out(n_, 0.0);
    if (binary_) {
      parallel_for(0, n_, [&](std::size_t j) { out[j] = lambda_row_binary(sc, j); });
    } else {
      parallel_for(0, n_, [&](std::size_t j) { out[j] = lambda_row(sc, j); });
    }
    return out;
  }

  double rho_for(const Column& x) const {
    std::vector<double> lam = lambdas_for(x);
    double s = 0.0;
    for (double v : lam) s += v;
    return s / static_cast<double>(n_);
  }

 private:
  void finalize_totals() {
    tot_main_.assign(n_, 0.0);
    row_ok_.assign(n_, 1);
    if (binary_) {
      tot_arm1_.assign(n_, 0.0);
      tot_arm0_.assign(n_, 0.0);
      for (std::size_t j = 0; j < n_; ++j) {
        const double* row = b_main_.data() + j * n_;
        double s1 = 0.0, s0 = 0.0;
        for (std::size_t i = 0; i < n_; ++i) (arm_[i] ? s1 : s0) += row[i];
        tot_arm1_[j] = s1;
        tot_arm0_[j] = s0;
        if (!(s1 > 0.0) || !(s0 > 0.0)) row_ok_[j] = 0;
      }
    } else {
      tot_ref_.assign(b_ref_.size(), std::vector<double>(n_, 0.0));
      for (std::size_t j = 0; j < n_; ++j) {
        const double* row = b_main_.data() + j * n_;
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += row[i];
        tot_main_[j] = s;
        if (!(s > 0.0)) row_ok_[j] = 0;
        for (std::size_t k = 0; k < b_ref_.size(); ++k) {
          const double* rr = b_ref_[k].data() + j * n_;
          double sr = 0.0;
          for (std::size_t i = 0; i < n_; ++i) sr += rr[i];
          tot_ref_[k][j] = sr;
          if (!(sr > 0.0)) row_ok_[j] = 0;
        }
      }
    }
    zero_rows_ = std::count(row_ok_.begin(), row_ok_.end(), 0);
  }

  double lambda_row(const detail::SortedCandidate& sc, std::size_t j) const {
    if (!row_ok_[j]) return 0.0;
    const double* bm = b_main_.data() + j * n_;
    double inv_main = 1.0 / tot_main_[j];
    std::size_t n_ref = b_ref_.size();
    double cum_main = 0.0;
    double cum_ref[8];
    const double* br[8];
    double inv_ref[8];
    for (std::size_t k = 0; k < n_ref; ++k) {
      cum_ref[k] = 0.0;
      br[k] = b_ref_[k].data() + j * n_;
      inv_ref[k] = 1.0 / tot_ref_[k][j];
    }
    double best = 0.0;
    std::size_t pos = 0;
    for (std::uint32_t ge : sc.group_end) {
      for (; pos < ge; ++pos) {
        std::uint32_t i = sc.perm[pos];
        cum_main += bm[i];
        for (std::size_t k = 0; k < n_ref; ++k) cum_ref[k] += br[k][i];
      }
      double fm = cum_main * inv_main;
      for (std::size_t k = 0; k < n_ref; ++k) {
        double d = std::abs(fm - cum_ref[k] * inv_ref[k]);
        if (d > best) best = d;
      }
    }
    return std::min(best, 1.0);
  }

  double lambda_row_binary(const detail::SortedCandidate& sc, std::size_t j) const {
    if (!row_ok_[j]) return 0.0;
    const double* row = b_main_.data() + j * n_;
    double inv1 = 1.0 / tot_arm1_[j];
    double inv0 = 1.0 / tot_arm0_[j];
    double c1 = 0.0, c0 = 0.0, best = 0.0;
    std::size_t pos = 0;
    for (std::uint32_t ge : sc.group_end) {
      for (; pos < ge; ++pos) {
        std::uint32_t i = sc.perm[pos];
        (arm_[i] ? c1 : c0) += row[i];
      }
      double d = std::abs(c1 * inv1 - c0 * inv0);
      if (d > best) best = d;
    }
    return std::min(best, 1.0);
  }

  std::size_t n_;
  std::vector<double> refs_;
  std::vector<double> b_main_;
  std::vector<std::vector<double>> b_ref_;
  std::vector<double> tot_main_;
  std::vector<std::vector<double>> tot_ref_;
  std::vector<int> arm_;
  std::vector<double> tot_arm1_, tot_arm0_;
  std::vector<std::uint8_t> row_ok_;
  long zero_rows_ = 0;
  bool binary_ = false;
};

// (q^c, q^d) of the pre-selected block, and the W columns split by kind.
inline CondVars w_cond_vars(const Dataset& data) {
  CondVars vars;
  for (std::size_t c : data.preselected()) {
    if (data.cols[c].kind == ColumnKind::continuous)
      vars.cont.push_back(c);
    else
      vars.disc.push_back(c);
  }
  return vars;
}

// Screening-rate denominator: 2r + q^c + 1 with a continuous response, 2r + q^c
// when conditioning only on W (binary treatment).
inline double screening_exponent_den(const Dataset& data, const DependenceConfig& cfg) {
  std::size_t q_c = w_cond_vars(data).cont.size();
  double den = 2.0 * cfg.order + static_cast<double>(q_c);
  if (cfg.reference != ReferenceMode::binary_treatment) den += 1.0;
  return den;
}

inline std::vector<double> reference_values(const Dataset& data, std::size_t response_col,
                                            const DependenceConfig& cfg) {
  const std::vector<double>& y = data.cols[response_col].values;
  std::vector<double> refs;
  if (cfg.reference == ReferenceMode::median) {
    refs.push_back(quantile_type7(y, 0.5));
  } else {
    for (double p : cfg.quantile_probs) refs.push_back(quantile_type7(y, p));
  }
  return refs;
}

inline DependenceEngine build_dependence_engine(const Dataset& data,
                                                const DependenceConfig& cfg) {
  cfg.validate();
  CondVars vars = w_cond_vars(data);
  double den = screening_exponent_den(data, cfg);
  if (cfg.reference == ReferenceMode::binary_treatment) {
    KernelSpec spec = rot_bandwidths(data, vars, den, cfg.scale, cfg.family, cfg.order);
    return DependenceEngine(data, data.treatment_indicator(), vars, spec);
  }
  std::size_t response = data.response_col();
  if (data.cols[response].kind != ColumnKind::continuous)
    throw InvalidResponse("response must be continuous outside binary-treatment mode");
  CondVars with_y = vars;
  with_y.response = response;
  KernelSpec spec = rot_bandwidths(data, with_y, den, cfg.scale, cfg.family, cfg.order);
  return DependenceEngine(data, response, vars, spec,
                          reference_values(data, response, cfg));
}

// rho for every candidate column, sharing the step-1 weight matrices.
inline DependenceResult rho_all(const Dataset& data,
                                const std::vector<std::size_t>& candidate_cols,
                                const DependenceConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  DependenceEngine engine = build_dependence_engine(data, cfg);
  DependenceResult res;
  res.rho.resize(candidate_cols.size());
  if (cfg.keep_lambdas) res.lambdas.resize(candidate_cols.size());
  for (std::size_t c = 0; c < candidate_cols.size(); ++c) {
    const Column& x = data.cols[candidate_cols[c]];
    if (cfg.keep_lambdas) {
      res.lambdas[c] = engine.lambdas_for(x);
      double s = 0.0;
      for (double v : res.lambdas[c]) s += v;
      res.rho[c] = s / static_cast<double>(data.n);
    } else {
      res.rho[c] = engine.rho_for(x);
    }
  }
  res.zero_mass_rows = engine.zero_mass_rows();
  res.weight_cells = engine.weight_cells();
  res.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline double rho_hat(const Dataset& data, std::size_t x_col, const DependenceConfig& cfg) {
  return rho_all(data, {x_col}, cfg).rho[0];
}

inline double rho_hat_binary(const Dataset& data, std::size_t x_col,
                             const DependenceConfig& cfg_in = {}) {
  DependenceConfig cfg = cfg_in;
  cfg.reference = ReferenceMode::binary_treatment;
  return rho_all(data, {x_col}, cfg).rho[0];
}

// Conditional CDF of one column as a step function, evaluated through one row
// of the weight construction. `response_value` substitutes the response
// coordinate of the conditioning row when given (e.g. a reference y*).
struct StepCdf {
  std::vector<double> x;  // distinct sorted values
  std::vector<double> F;  // CDF at each value; final entry is exactly 1

  double at(double q) const {
    std::size_t k = std::upper_bound(x.begin(), x.end(), q) - x.begin();
    return k == 0 ? 0.0 : F[k - 1];
  }
};

inline StepCdf conditional_cdf(const Dataset& data, std::size_t x_col,
                               const CondVars& vars, const KernelSpec& spec,
                               std::size_t cond_row,
                               std::optional<double> response_value = std::nullopt) {
  spec.validate();
  std::size_t n = data.n;
  std::vector<double> b(n, 1.0);
  for (std::size_t l = 0; l < vars.cont.size(); ++l) {
    const std::vector<double>& w = data.cols[vars.cont[l]].values;
    for (std::size_t i = 0; i < n; ++i)
      b[i] *= kernel_eval(w[cond_row] - w[i], spec.family, spec.order, spec.h_c[l]);
  }
  for (std::size_t l = 0; l < vars.disc.size(); ++l) {
    const std::vector<int>& w = data.cols[vars.disc[l]].codes;
    for (std::size_t i = 0; i < n; ++i)
      b[i] *= aitchison_aitken(w[cond_row], w[i], spec.lambda_d[l], spec.atom_counts[l]);
  }
  if (vars.response) {
    const std::vector<double>& y = data.cols[*vars.response].values;
    double yj = response_value ? *response_value : y[cond_row];
    for (std::size_t i = 0; i < n; ++i)
      b[i] *= kernel_eval(yj - y[i], spec.family, spec.order, spec.h_y);
  }
  double total = 0.0;
  for (double v : b) total += v;
  if (!(total > 0.0)) throw ZeroMassRow("zero kernel mass at conditioning point");

  const Column& x = data.cols[x_col];
  detail::SortedCandidate sc = detail::sort_candidate(x);
  StepCdf cdf;
  double cum = 0.0;
  std::size_t pos = 0;
  for (std::uint32_t ge : sc.group_end) {
    for (; pos < ge; ++pos) cum += b[sc.perm[pos]];
    cdf.x.push_back(x.kind == ColumnKind::continuous
                        ? x.values[sc.perm[ge - 1]]
                        : static_cast<double>(x.codes[sc.perm[ge - 1]]));
    cdf.F.push_back(cum / total);
  }
  if (!cdf.F.empty()) cdf.F.back() = 1.0;
  return cdf;
}

// KS distance for one conditioning row against explicit reference response
// values: max over sample points and references.
inline double lambda_hat(const Dataset& data, std::size_t x_col, const CondVars& vars,
                         const KernelSpec& spec, std::size_t cond_row,
                         const std::vector<double>& refs) {
  if (refs.empty()) throw InvalidConfig("reference set is empty");
  StepCdf own = conditional_cdf(data, x_col, vars, spec, cond_row);
  double best = 0.0;
  for (double r : refs) {
    StepCdf ref = conditional_cdf(data, x_col, vars, spec, cond_row, r);
    for (std::size_t k = 0; k < own.F.size(); ++k)
      best = std::max(best, std::abs(own.F[k] - ref.F[k]));
  }
  return std::min(best, 1.0);
}

}  // namespace densift
