#pragma once

// Stage one of the procedure: rank candidate covariates by rho and retain the
// top block alongside the pre-selected covariates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "densift/dependence.hpp"

namespace densift {

struct ScreeningOutcome {
  std::vector<std::size_t> ranked;       // candidate column indices, rho descending
  std::vector<double> rho_ranked;        // aligned with `ranked`
  std::vector<std::size_t> retained;     // top p_tilde - q_c - q_d candidates
  std::size_t p_tilde = 0;
  double threshold_value = 0.0;          // C n^{-r/den} log n diagnostic
  std::vector<std::size_t> above_threshold;
  DependenceResult dependence;
};

// Indices whose rho clears C n^{-r/exponent_den} log n. Diagnostic only; the
// operational rule is the top block below.
inline std::vector<std::size_t> threshold_set(const std::vector<double>& rho,
                                              const std::vector<std::size_t>& cols,
                                              double C, std::size_t n, int r,
                                              double exponent_den,
                                              double* threshold_out = nullptr) {
  if (!(C > 0.0)) throw InvalidConfig("threshold constant C must be positive");
  double nn = static_cast<double>(n);
  double thr = C * std::pow(nn, -static_cast<double>(r) / exponent_den) * std::log(nn);
  if (threshold_out) *threshold_out = thr;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < rho.size(); ++k)
    if (rho[k] >= thr) out.push_back(cols[k]);
  return out;
}

inline ScreeningOutcome screen(const Dataset& data, const DependenceConfig& cfg,
                               std::size_t p_tilde, double threshold_C = 1.0) {
  std::vector<std::size_t> cand = data.candidates();
  CondVars w = w_cond_vars(data);
  std::size_t q = w.cont.size() + w.disc.size();
  if (p_tilde <= q)
    throw InvalidPTilde("p_tilde must exceed the number of pre-selected covariates");
  std::size_t keep = p_tilde - q;
  if (cand.size() < keep)
    throw InvalidPTilde("fewer candidates than p_tilde - q_c - q_d");

  ScreeningOutcome out;
  out.p_tilde = p_tilde;
  out.dependence = rho_all(data, cand, cfg);

  std::vector<std::size_t> order(cand.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // descending rho; ties broken by lower column index
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out.dependence.rho[a] != out.dependence.rho[b])
      return out.dependence.rho[a] > out.dependence.rho[b];
    return cand[a] < cand[b];
  });
  for (std::size_t k : order) {
    out.ranked.push_back(cand[k]);
    out.rho_ranked.push_back(out.dependence.rho[k]);
  }
  out.retained.assign(out.ranked.begin(), out.ranked.begin() + keep);

  double den = screening_exponent_den(data, cfg);
  std::vector<double> rho_by_rank = out.rho_ranked;
  out.above_threshold = threshold_set(rho_by_rank, out.ranked, threshold_C, data.n,
                                      cfg.order, den, &out.threshold_value);
  return out;
}

}  // namespace densift
