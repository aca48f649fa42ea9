#pragma once

// Post-selection kernel estimators on a selected covariate set: conditional
// density, propensity score, and Nadaraya-Watson outcome regression, each with
// a leave-one-out variant for CV and cross-fit diagnostics.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "densift/dataset.hpp"
#include "densift/errors.hpp"
#include "densift/kernels.hpp"

namespace densift {

// Counts query points rescued by the unconditional fallback. Queries made
// without a tally throw ZeroMassQuery instead.
struct EvalTally {
  std::atomic<long> zero_mass_fallbacks{0};
};

class CdeModel {
 public:
  CdeModel(std::shared_ptr<const Dataset> train, std::vector<std::size_t> cont_cols,
           std::vector<std::size_t> disc_cols, KernelSpec spec,
           std::optional<std::size_t> response_col = std::nullopt,
           std::optional<std::size_t> treatment_col = std::nullopt)
      : train_(std::move(train)),
        cont_cols_(std::move(cont_cols)),
        disc_cols_(std::move(disc_cols)),
        spec_(std::move(spec)),
        response_col_(response_col) {
    spec_.validate();
    if (spec_.h_c.size() != cont_cols_.size() || spec_.lambda_d.size() != disc_cols_.size())
      throw InvalidConfig("kernel spec does not match the selected covariate lists");
    if (treatment_col) arm_ = train_->treatment_indicator();
  }

  const Dataset& train() const { return *train_; }
  const KernelSpec& spec() const { return spec_; }
  const std::vector<std::size_t>& cont_cols() const { return cont_cols_; }
  const std::vector<std::size_t>& disc_cols() const { return disc_cols_; }

  // Covariates whose bandwidths are not at the upper extremes.
  std::vector<std::size_t> selected_cols() const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < cont_cols_.size(); ++l)
      if (!is_smooth_out(spec_.h_c[l])) out.push_back(cont_cols_[l]);
    for (std::size_t l = 0; l < disc_cols_.size(); ++l)
      if (spec_.lambda_d[l] < lambda_cap(spec_.atom_counts[l]) - 1e-12)
        out.push_back(disc_cols_[l]);
    return out;
  }

  // Kernel weight of every training point at the query covariate values.
  // Aligned with cont_cols()/disc_cols(); `skip` drops one training index.
  std::vector<double> weights_at(const std::vector<double>& xc, const std::vector<int>& xd,
                                 std::optional<std::size_t> skip = std::nullopt) const {
    std::size_t n = train_->n;
    std::vector<double> w(n, 1.0);
    for (std::size_t l = 0; l < cont_cols_.size(); ++l) {
      double h = spec_.h_c[l];
      if (is_smooth_out(h)) continue;
      const std::vector<double>& col = train_->cols[cont_cols_[l]].values;
      for (std::size_t i = 0; i < n; ++i)
        w[i] *= kernel_eval(col[i] - xc[l], spec_.family, spec_.order, h);
    }
    for (std::size_t l = 0; l < disc_cols_.size(); ++l) {
      double lambda = spec_.lambda_d[l];
      double match = 1.0 - lambda;
      double miss = lambda / static_cast<double>(spec_.atom_counts[l] - 1);
      const std::vector<int>& col = train_->cols[disc_cols_[l]].codes;
      for (std::size_t i = 0; i < n; ++i) w[i] *= (col[i] == xd[l] ? match : miss);
    }
    if (skip) w[*skip] = 0.0;
    return w;
  }

  std::vector<double> weights_for_row(const Dataset& qd, std::size_t qrow,
                                      std::optional<std::size_t> skip = std::nullopt) const {
    return weights_at(query_cont(qd, qrow), query_disc(qd, qrow), skip);
  }

  std::vector<double> query_cont(const Dataset& qd, std::size_t qrow) const {
    std::vector<double> xc(cont_cols_.size());
    for (std::size_t l = 0; l < cont_cols_.size(); ++l)
      xc[l] = qd.cols[cont_cols_[l]].values[qrow];
    return xc;
  }

  std::vector<int> query_disc(const Dataset& qd, std::size_t qrow) const {
    std::vector<int> xd(disc_cols_.size());
    for (std::size_t l = 0; l < disc_cols_.size(); ++l)
      xd[l] = qd.cols[disc_cols_[l]].codes[qrow];
    return xd;
  }

  // f(y | x): ratio of the joint to the marginal kernel sums.
  double density_at(double y, const std::vector<double>& xc, const std::vector<int>& xd,
                    EvalTally* tally = nullptr,
                    std::optional<std::size_t> skip = std::nullopt) const {
    const std::vector<double>& yv = response();
    std::vector<double> w = weights_at(xc, xd, skip);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      den += w[i];
      num += w[i] * kernel_eval(yv[i] - y, spec_.family, spec_.order, spec_.h_y);
    }
    if (den > 0.0) return num / den;
    on_zero_mass(tally);
    // unconditional 1-D KDE, honoring `skip`
    double s = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < yv.size(); ++i) {
      if (skip && i == *skip) continue;
      s += kernel_eval(yv[i] - y, spec_.family, spec_.order, spec_.h_y);
      ++m;
    }
    return m ? s / static_cast<double>(m) : 0.0;
  }

  double density_at_row(double y, const Dataset& qd, std::size_t qrow,
                        EvalTally* tally = nullptr) const {
    return density_at(y, query_cont(qd, qrow), query_disc(qd, qrow), tally);
  }

  double density_loo(std::size_t i, EvalTally* tally = nullptr) const {
    return density_at(response()[i], query_cont(*train_, i), query_disc(*train_, i),
                      tally, i);
  }

  // m(x) = kernel-weighted share of D = 1; needs a nonnegative kernel.
  double propensity_at(const std::vector<double>& xc, const std::vector<int>& xd,
                       EvalTally* tally = nullptr,
                       std::optional<std::size_t> skip = std::nullopt) const {
    require_arm();
    if (spec_.order != 2)
      throw InvalidConfig("propensity estimation requires a second-order kernel");
    std::vector<double> w = weights_at(xc, xd, skip);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      den += w[i];
      if (arm_[i]) num += w[i];
    }
    if (den > 0.0) return num / den;
    on_zero_mass(tally);
    double s = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < arm_.size(); ++i) {
      if (skip && i == *skip) continue;
      s += arm_[i];
      ++m;
    }
    return m ? s / static_cast<double>(m) : 0.0;
  }

  double propensity_at_row(const Dataset& qd, std::size_t qrow,
                           EvalTally* tally = nullptr) const {
    return propensity_at(query_cont(qd, qrow), query_disc(qd, qrow), tally);
  }

  double propensity_loo(std::size_t i, EvalTally* tally = nullptr) const {
    return propensity_at(query_cont(*train_, i), query_disc(*train_, i), tally, i);
  }

  // Nadaraya-Watson conditional mean of `resp`, optionally within one arm.
  double regress_at(const std::vector<double>& xc, const std::vector<int>& xd,
                    const std::vector<double>& resp, std::optional<int> arm,
                    EvalTally* tally = nullptr,
                    std::optional<std::size_t> skip = std::nullopt) const {
    if (arm) require_arm();
    std::vector<double> w = weights_at(xc, xd, skip);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (arm && arm_[i] != *arm) continue;
      den += w[i];
      num += w[i] * resp[i];
    }
    if (den > 0.0) return num / den;
    on_zero_mass(tally);
    double s = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < resp.size(); ++i) {
      if (arm && arm_[i] != *arm) continue;
      if (skip && i == *skip) continue;
      s += resp[i];
      ++m;
    }
    if (m == 0) throw DegenerateTreatment("no training observations in the requested arm");
    return s / static_cast<double>(m);
  }

  double regress_at_row(const Dataset& qd, std::size_t qrow, const std::vector<double>& resp,
                        std::optional<int> arm, EvalTally* tally = nullptr) const {
    return regress_at(query_cont(qd, qrow), query_disc(qd, qrow), resp, arm, tally);
  }

  double regress_loo(std::size_t i, const std::vector<double>& resp, std::optional<int> arm,
                     EvalTally* tally = nullptr) const {
    return regress_at(query_cont(*train_, i), query_disc(*train_, i), resp, arm, tally, i);
  }

 private:
  const std::vector<double>& response() const {
    if (!response_col_) throw InvalidConfig("model was fitted without a response column");
    return train_->cols[*response_col_].values;
  }

  void require_arm() const {
    if (arm_.empty()) throw InvalidConfig("model was fitted without a treatment column");
  }

  void on_zero_mass(EvalTally* tally) const {
    if (!tally) throw ZeroMassQuery("zero kernel mass at query point");
    tally->zero_mass_fallbacks.fetch_add(1, std::memory_order_relaxed);
  }

  std::shared_ptr<const Dataset> train_;
  std::vector<std::size_t> cont_cols_;
  std::vector<std::size_t> disc_cols_;
  KernelSpec spec_;
  std::optional<std::size_t> response_col_;
  std::vector<int> arm_;
};

}  // namespace densift
