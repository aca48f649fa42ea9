// densift command-line tool: variable screening, CV refinement, conditional
// density / propensity estimation, doubly robust ATE estimation, and the
// simulation studies, all emitting a single JSON report.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "densift/densift.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using densift::json;

std::string iso_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct Common {
  std::string csv_path, manifest_path, config_path, out_path;
  densift::RunConfig cfg;
  std::vector<std::string> warnings;

  void load_config() {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw densift::InvalidConfig("cannot open config '" + config_path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw densift::InvalidConfig("config is not valid JSON: " + std::string(e.what()));
    }
    densift::apply_config_json(cfg, j);
  }
};

void emit(const Common& c, std::uint64_t seed, const json& result,
          const std::vector<std::string>& warnings) {
  json doc;
  doc["meta"]["version"] = kVersion;
  doc["meta"]["seed"] = seed;
  doc["meta"]["config_echo"] = densift::config_echo(c.cfg);
  doc["meta"]["timestamp"] = iso_timestamp();
  doc["warnings"] = warnings;
  doc["result"] = result;
  if (c.out_path.empty()) {
    densift::dump_json(doc, std::cout);
  } else {
    std::ofstream out(c.out_path);
    if (!out) throw densift::DataError("cannot write '" + c.out_path + "'");
    densift::dump_json(doc, out);
  }
}

densift::Dataset load_data(Common& c, densift::IngestReport* report) {
  densift::Dataset d = densift::ingest(c.csv_path, c.manifest_path, report);
  if (report && report->dropped_rows > 0)
    c.warnings.push_back("dropped " + std::to_string(report->dropped_rows) +
                         " rows with missing values in used columns");
  return d;
}

bool wants_binary(const densift::Dataset& d, const std::string& reference) {
  if (reference == "treatment") return true;
  if (reference == "median" || reference == "quantiles") return false;
  // auto: treatment screening when the manifest has a treatment column and no
  // continuous response
  bool has_t = !d.by_role(densift::ColumnRole::treatment).empty();
  bool has_y = !d.by_role(densift::ColumnRole::response).empty();
  return has_t && !has_y;
}

densift::DependenceConfig dep_config(const Common& c, const densift::Dataset& d,
                                     const std::string& reference) {
  densift::DependenceConfig dep = c.cfg.dependence(wants_binary(d, reference));
  if (reference == "quantiles") dep.reference = densift::ReferenceMode::quantiles;
  if (reference == "median") dep.reference = densift::ReferenceMode::median;
  return dep;
}

json screening_json(const densift::Dataset& d, const densift::ScreeningOutcome& sc) {
  json out;
  json ranked = json::array();
  for (std::size_t k = 0; k < sc.ranked.size(); ++k) {
    json e;
    e["column"] = d.cols[sc.ranked[k]].name;
    e["rho"] = sc.rho_ranked[k];
    ranked.push_back(e);
  }
  out["ranked"] = ranked;
  json retained = json::array();
  for (std::size_t c : sc.retained) retained.push_back(d.cols[c].name);
  out["retained"] = retained;
  out["p_tilde"] = sc.p_tilde;
  out["threshold_value"] = sc.threshold_value;
  json above = json::array();
  for (std::size_t c : sc.above_threshold) above.push_back(d.cols[c].name);
  out["above_threshold"] = above;
  out["zero_mass_rows"] = sc.dependence.zero_mass_rows;
  return out;
}

json bandwidths_json(const densift::Dataset& d, const densift::RefineInput& in,
                     const densift::BandwidthVector& bw) {
  json out;
  if (bw.h_y) out["response_h"] = *bw.h_y;
  json cont = json::array(), disc = json::array();
  for (std::size_t l = 0; l < in.cont_cols.size(); ++l) {
    json e;
    e["column"] = d.cols[in.cont_cols[l]].name;
    if (densift::is_smooth_out(bw.h_cont[l]))
      e["h"] = "smooth_out";
    else
      e["h"] = bw.h_cont[l];
    cont.push_back(e);
  }
  for (std::size_t l = 0; l < in.disc_cols.size(); ++l) {
    json e;
    e["column"] = d.cols[in.disc_cols[l]].name;
    e["lambda"] = bw.lambda_disc[l];
    e["lambda_cap"] = densift::lambda_cap(bw.atom_counts[l]);
    disc.push_back(e);
  }
  out["continuous"] = cont;
  out["discrete"] = disc;
  return out;
}

json refine_json(const densift::Dataset& d, const densift::CvOutcome& cv,
                 bool include_table) {
  json out;
  json bits = json::array();
  for (std::uint8_t b : cv.best.I.bits) bits.push_back(static_cast<int>(b));
  out["selection_vector"] = bits;
  out["cv_value"] = cv.best.cv;
  out["scale"] = cv.best.scale;
  out["smoothed_out_screened"] = cv.smoothed_out_screened;
  out["bandwidths"] = bandwidths_json(d, cv.input, cv.best.bw);
  json selected = json::array();
  for (std::size_t l = 0; l < cv.input.cont_cols.size(); ++l)
    if (cv.best.I.bits[l]) selected.push_back(d.cols[cv.input.cont_cols[l]].name);
  for (std::size_t l = 0; l < cv.input.disc_cols.size(); ++l)
    if (cv.best.I.bits[cv.input.cont_cols.size() + l])
      selected.push_back(d.cols[cv.input.disc_cols[l]].name);
  out["selected"] = selected;
  out["evaluations"] = cv.table.size();
  if (include_table) {
    json table = json::array();
    for (const densift::CvEntry& e : cv.table) {
      json row;
      json eb = json::array();
      for (std::uint8_t b : e.I.bits) eb.push_back(static_cast<int>(b));
      row["selection_vector"] = eb;
      row["scale"] = e.scale;
      row["cv"] = e.cv;
      row["dropped"] = e.dropped;
      table.push_back(row);
    }
    out["cv_table"] = table;
  }
  return out;
}

// Reorders query columns to the training layout and recodes discrete atoms
// with the training coding.
densift::Dataset align_columns(const densift::Dataset& train, const densift::Dataset& query) {
  densift::Dataset out;
  out.n = query.n;
  for (const densift::Column& tc : train.cols) {
    std::size_t qi = query.find(tc.name);
    const densift::Column& qc = query.cols[qi];
    if (qc.kind != tc.kind)
      throw densift::ManifestMismatch("column '" + tc.name + "' kind mismatch");
    densift::Column c = tc;
    if (tc.kind == densift::ColumnKind::continuous) {
      c.values = qc.values;
      c.codes.clear();
    } else {
      c.codes.resize(query.n);
      for (std::size_t i = 0; i < query.n; ++i) {
        const std::string& lab = qc.atom_labels[qc.codes[i]];
        auto it = std::find(tc.atom_labels.begin(), tc.atom_labels.end(), lab);
        if (it == tc.atom_labels.end())
          throw densift::ManifestMismatch("atom '" + lab + "' of column '" + tc.name +
                                          "' was not seen in training data");
        c.codes[i] = static_cast<int>(it - tc.atom_labels.begin());
      }
      c.values.clear();
    }
    out.cols.push_back(std::move(c));
  }
  return out;
}

int classify_exit(const std::exception& e) {
  if (dynamic_cast<const densift::ConfigError*>(&e)) return 1;
  if (dynamic_cast<const densift::DataError*>(&e)) return 2;
  if (dynamic_cast<const densift::NumericError*>(&e)) return 3;
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel-smoothed conditional dependence screening, CV refinement, "
               "dimension-reduced density / propensity estimation, and doubly "
               "robust ATE estimation"};
  app.require_subcommand(1);

  Common c;
  std::string reference = "auto";
  std::uint64_t seed = 1;
  int threads = 0;

  auto add_common = [&](CLI::App* sub, bool needs_csv) {
    if (needs_csv) {
      sub->add_option("--csv", c.csv_path, "input CSV file")->required();
      sub->add_option("--manifest", c.manifest_path, "column-role manifest JSON")->required();
    }
    sub->add_option("--config", c.config_path, "config JSON file");
    sub->add_option("--out", c.out_path, "write the JSON report here (default stdout)");
    sub->add_option("--threads", threads, "worker threads (env DENSIFT_THREADS as fallback)");
    sub->add_option("--scale", c.cfg.screen_scale, "bandwidth scale for screening");
    sub->add_option("--p-tilde", c.cfg.p_tilde, "screened working-set size");
    sub->add_option("--p-tilde-cap", c.cfg.p_tilde_cap, "iteration cap on p_tilde");
    sub->add_flag("--no-protect-w", [&](std::int64_t) { c.cfg.protect_w = false; },
                  "let the CV search also smooth out pre-selected covariates");
    sub->add_option("--reference", reference,
                    "screening reference: auto | median | quantiles | treatment");
  };

  // ---- screen
  auto* s_screen = app.add_subcommand("screen", "rank candidates by the dependence measure");
  add_common(s_screen, true);
  double threshold_C = 1.0;
  s_screen->add_option("--threshold-C", threshold_C, "diagnostic threshold constant");

  // ---- refine
  auto* s_refine = app.add_subcommand("refine", "screen then run the discrete CV search");
  add_common(s_refine, true);
  bool do_iterate = false;
  bool dump_table = false;
  s_refine->add_flag("--iterate", do_iterate, "grow p_tilde until a covariate smooths out");
  s_refine->add_flag("--cv-table", dump_table, "include the full CV table in the report");

  // ---- cde
  auto* s_cde = app.add_subcommand("cde", "fit and evaluate the conditional density");
  add_common(s_cde, true);
  std::string queries_path;
  std::string y_grid_arg;
  s_cde->add_option("--queries", queries_path, "CSV of query rows (default: training rows)");
  s_cde->add_option("--y-grid", y_grid_arg, "response grid as min,max,count");

  // ---- pscore
  auto* s_pscore = app.add_subcommand("pscore", "fit and evaluate the propensity score");
  add_common(s_pscore, true);
  s_pscore->add_option("--queries", queries_path, "CSV of query rows (default: training rows)");

  // ---- ate
  auto* s_ate = app.add_subcommand("ate", "doubly robust ATE with dimension-reduced nuisances");
  add_common(s_ate, true);
  std::string variant = "psi3";
  std::string trim_arg;
  std::string balance_edges_arg;
  bool no_balance = false;
  s_ate->add_option("--variant", variant, "psi1 | psi2 | psi3 | psi4");
  s_ate->add_option("--trim", trim_arg, "trim bounds as lower,upper");
  s_ate->add_option("--split-seed", c.cfg.split_seed, "two-fold split seed");
  s_ate->add_flag("--hajek", c.cfg.hajek, "Hajek-normalized IPW residual terms");
  s_ate->add_flag("--dml-swap", c.cfg.dml_swap, "swap folds and pool the scores");
  s_ate->add_option("--balance-edges", balance_edges_arg,
                    "propensity subclass edges, comma separated");
  s_ate->add_flag("--no-balance", no_balance, "skip the balance table");

  // ---- simulate
  auto* s_sim = app.add_subcommand("simulate", "run a design study");
  add_common(s_sim, false);
  int design = 1, p = 20, reps = 100;
  std::size_t sim_n = 1000;
  std::string study = "screen", method = "median", variants_arg = "psi3";
  s_sim->add_option("--design", design, "design 1-6")->required();
  s_sim->add_option("--n", sim_n, "sample size")->required();
  s_sim->add_option("--p", p, "number of candidate covariates")->required();
  s_sim->add_option("--reps", reps, "replications")->required();
  s_sim->add_option("--seed", seed, "RNG seed")->required();
  s_sim->add_option("--study", study, "screen | refine | ate");
  s_sim->add_option("--method", method, "median | quantile (designs 1-3)");
  s_sim->add_option("--variant", variants_arg, "comma-separated psi variants for ate studies");

  CLI11_PARSE(app, argc, argv);

  try {
    c.load_config();
    if (threads > 0) c.cfg.threads = threads;
    if (c.cfg.threads > 0) densift::set_thread_count(c.cfg.threads);
    c.cfg.validate();

    if (*s_screen) {
      densift::IngestReport rep;
      densift::Dataset d = load_data(c, &rep);
      densift::DependenceConfig dep = dep_config(c, d, reference);
      densift::ScreeningOutcome sc = densift::screen(d, dep, c.cfg.p_tilde, threshold_C);
      json result;
      result["n"] = d.n;
      result["dropped_rows"] = rep.dropped_rows;
      result["screening"] = screening_json(d, sc);
      emit(c, seed, result, c.warnings);
    } else if (*s_refine) {
      densift::IngestReport rep;
      densift::Dataset d = load_data(c, &rep);
      densift::DependenceConfig dep = dep_config(c, d, reference);
      bool binary = dep.reference == densift::ReferenceMode::binary_treatment;
      densift::ResponseMode mode =
          binary ? densift::ResponseMode::binary_d : densift::ResponseMode::continuous_y;
      json result;
      result["n"] = d.n;
      result["dropped_rows"] = rep.dropped_rows;
      if (do_iterate) {
        auto shared = std::make_shared<const densift::Dataset>(std::move(d));
        densift::IterationOutcome it = densift::iterate_procedure(
            shared, dep, c.cfg.p_tilde, c.cfg.p_tilde_cap, c.cfg.protect_w, c.cfg.scale_grid);
        if (it.sparsity_doubt)
          c.warnings.push_back("SparsityDoubt: p_tilde cap reached with no covariate smoothed out");
        result["screening"] = screening_json(*shared, it.screening);
        result["refine"] = refine_json(*shared, it.cv, dump_table);
        result["p_tilde_path"] = it.p_tilde_path;
        result["sparsity_doubt"] = it.sparsity_doubt;
      } else {
        densift::ScreeningOutcome sc = densift::screen(d, dep, c.cfg.p_tilde);
        densift::CvOutcome cv = densift::refine(d, sc, mode, c.cfg.protect_w,
                                                c.cfg.scale_grid, dep.family, dep.order);
        result["screening"] = screening_json(d, sc);
        result["refine"] = refine_json(d, cv, dump_table);
      }
      emit(c, seed, result, c.warnings);
    } else if (*s_cde || *s_pscore) {
      bool pscore = static_cast<bool>(*s_pscore);
      densift::IngestReport rep;
      densift::Dataset d = load_data(c, &rep);
      densift::DependenceConfig dep = dep_config(c, d, pscore ? "treatment" : reference);
      if (pscore) dep.reference = densift::ReferenceMode::binary_treatment;
      auto shared = std::make_shared<const densift::Dataset>(std::move(d));
      densift::IterationOutcome it = densift::iterate_procedure(
          shared, dep, c.cfg.p_tilde, c.cfg.p_tilde_cap, c.cfg.protect_w, c.cfg.scale_grid);
      if (it.sparsity_doubt)
        c.warnings.push_back("SparsityDoubt: p_tilde cap reached with no covariate smoothed out");
      densift::Dataset queries;
      if (queries_path.empty()) {
        queries = *shared;
      } else {
        std::ifstream qin(queries_path);
        if (!qin) throw densift::DataError("cannot open queries '" + queries_path + "'");
        densift::Manifest manifest = densift::load_manifest(c.manifest_path);
        queries = align_columns(*shared, densift::ingest_rows(densift::parse_csv(qin), manifest));
      }
      densift::EvalTally tally;
      json result;
      result["n"] = shared->n;
      result["dropped_rows"] = rep.dropped_rows;
      result["screening"] = screening_json(*shared, it.screening);
      result["refine"] = refine_json(*shared, it.cv, false);
      if (pscore) {
        json m = json::array();
        for (std::size_t i = 0; i < queries.n; ++i)
          m.push_back(it.model.propensity_at_row(queries, i, &tally));
        result["m_hat"] = m;
      } else {
        const auto& yv = shared->cols[shared->response_col()].values;
        double lo = *std::min_element(yv.begin(), yv.end());
        double hi = *std::max_element(yv.begin(), yv.end());
        std::size_t count = 50;
        if (!y_grid_arg.empty()) {
          if (std::sscanf(y_grid_arg.c_str(), "%lf,%lf,%zu", &lo, &hi, &count) != 3)
            throw densift::InvalidConfig("--y-grid expects min,max,count");
        }
        json grid = json::array(), dens = json::array();
        std::vector<double> ys(count);
        for (std::size_t k = 0; k < count; ++k) {
          ys[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
          grid.push_back(ys[k]);
        }
        for (std::size_t i = 0; i < queries.n; ++i) {
          json row = json::array();
          for (double y : ys) row.push_back(it.model.density_at_row(y, queries, i, &tally));
          dens.push_back(row);
        }
        result["y_grid"] = grid;
        result["density"] = dens;
      }
      result["zero_mass_fallbacks"] = tally.zero_mass_fallbacks.load();
      emit(c, seed, result, c.warnings);
    } else if (*s_ate) {
      densift::IngestReport rep;
      densift::Dataset d = load_data(c, &rep);
      densift::AteConfig acfg;
      if (variant == "psi1") acfg.variant = densift::PsiVariant::psi1;
      else if (variant == "psi2") acfg.variant = densift::PsiVariant::psi2;
      else if (variant == "psi3") acfg.variant = densift::PsiVariant::psi3;
      else if (variant == "psi4") acfg.variant = densift::PsiVariant::psi4;
      else throw densift::InvalidConfig("unknown variant '" + variant + "'");
      if (!trim_arg.empty()) {
        if (std::sscanf(trim_arg.c_str(), "%lf,%lf", &c.cfg.trim.lower, &c.cfg.trim.upper) != 2)
          throw densift::InvalidConfig("--trim expects lower,upper");
      }
      acfg.trim = c.cfg.trim;
      acfg.split_seed = c.cfg.split_seed;
      acfg.hajek = c.cfg.hajek;
      acfg.dml_swap = c.cfg.dml_swap;
      acfg.p_tilde_init = c.cfg.p_tilde;
      acfg.p_tilde_cap = c.cfg.p_tilde_cap;
      acfg.protect_w = c.cfg.protect_w;
      acfg.scale_grid = c.cfg.scale_grid;
      acfg.family = c.cfg.family;
      acfg.order = c.cfg.order;
      acfg.screen_scale = c.cfg.screen_scale;
      densift::AteResult res = densift::ate(d, acfg);
      for (const std::string& w : res.warnings) c.warnings.push_back(w);

      json result;
      result["n"] = d.n;
      result["dropped_rows"] = rep.dropped_rows;
      result["variant"] = variant;
      result["hajek"] = acfg.hajek;
      result["dml_swap"] = acfg.dml_swap;
      result["psi_hat"] = res.psi_hat;
      result["se"] = res.se;
      result["ci95"] = {res.ci95.first, res.ci95.second};
      result["n_scored"] = res.n_scored;
      result["n_effective"] = res.n_effective;
      result["trim_fraction"] = res.trim_fraction;
      result["m_range"] = {res.m_min, res.m_max};
      result["zero_mass_fallbacks"] = res.zero_mass_fallbacks;
      result["selected_propensity_covariates"] = res.selected_propensity_covariates;

      if (!no_balance) {
        // full-sample propensity fit for the subclass balance diagnostics
        densift::DependenceConfig dep = c.cfg.dependence(true);
        auto shared = std::make_shared<const densift::Dataset>(d);
        densift::IterationOutcome it = densift::iterate_procedure(
            shared, dep, c.cfg.p_tilde, c.cfg.p_tilde_cap, c.cfg.protect_w, c.cfg.scale_grid);
        densift::EvalTally tally;
        std::vector<double> m_hat(d.n);
        for (std::size_t i = 0; i < d.n; ++i)
          m_hat[i] = it.model.propensity_at_row(*shared, i, &tally);
        std::vector<double> edges;
        if (!balance_edges_arg.empty()) {
          std::stringstream ss(balance_edges_arg);
          std::string tok;
          while (std::getline(ss, tok, ',')) edges.push_back(std::stod(tok));
        } else {
          for (double e = c.cfg.trim.lower; e < c.cfg.trim.upper + 1e-9; e += 0.2)
            edges.push_back(std::min(e, c.cfg.trim.upper));
          if (edges.back() < c.cfg.trim.upper) edges.push_back(c.cfg.trim.upper);
        }
        std::vector<std::size_t> covs = it.model.selected_cols();
        densift::BalanceTable tab = densift::balance_test(*shared, m_hat, edges, covs);
        json bal;
        bal["edges"] = tab.edges;
        json names = json::array();
        for (std::size_t cc : tab.covariates) names.push_back(shared->cols[cc].name);
        bal["covariates"] = names;
        json cells = json::array();
        for (const auto& rowcells : tab.cells) {
          json row = json::array();
          for (const densift::BalanceEntry& e : rowcells) {
            if (e.valid) row.push_back(e.p_value);
            else row.push_back(nullptr);
          }
          cells.push_back(row);
        }
        bal["p_values"] = cells;
        result["balance"] = bal;
      }
      emit(c, c.cfg.split_seed, result, c.warnings);
    } else if (*s_sim) {
      densift::DesignSpec spec;
      spec.design = design;
      spec.n = sim_n;
      spec.p = p;
      spec.seed = seed;
      spec.reps = reps;
      json result;
      result["design"] = design;
      result["n"] = sim_n;
      result["p"] = p;
      result["reps"] = reps;
      result["study"] = study;
      densift::ReferenceMode m = method == "quantile" ? densift::ReferenceMode::quantiles
                                                      : densift::ReferenceMode::median;
      if (study == "screen") {
        densift::MetricsReport r =
            densift::run_screening_study(spec, m, c.cfg.p_tilde, c.cfg.screen_scale);
        result["method"] = design >= 4 ? "binary" : method;
        for (const auto& [k, v] : r.crr) result["crr"][k] = v;
        result["all_crr"] = r.all_crr;
      } else if (study == "refine") {
        densift::MetricsReport r = densift::run_refine_study(
            spec, m, c.cfg.p_tilde, c.cfg.p_tilde_cap, c.cfg.protect_w, c.cfg.screen_scale,
            c.cfg.scale_grid);
        result["method"] = design >= 4 ? "binary" : method;
        result["exact_recovery"] = r.exact_recovery;
      } else if (study == "ate") {
        std::vector<densift::PsiVariant> vs;
        std::stringstream ss(variants_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          if (tok == "psi1") vs.push_back(densift::PsiVariant::psi1);
          else if (tok == "psi2") vs.push_back(densift::PsiVariant::psi2);
          else if (tok == "psi3") vs.push_back(densift::PsiVariant::psi3);
          else if (tok == "psi4") vs.push_back(densift::PsiVariant::psi4);
          else throw densift::InvalidConfig("unknown variant '" + tok + "'");
        }
        densift::AteConfig acfg;
        acfg.trim = densift::TrimRule{0.1, 0.9};
        acfg.p_tilde_init = c.cfg.p_tilde;
        acfg.p_tilde_cap = c.cfg.p_tilde_cap;
        acfg.protect_w = c.cfg.protect_w;
        acfg.scale_grid = c.cfg.scale_grid;
        acfg.hajek = c.cfg.hajek;
        acfg.dml_swap = c.cfg.dml_swap;
        acfg.screen_scale = c.cfg.screen_scale;
        densift::MetricsReport r = densift::run_ate_study(spec, vs, acfg);
        for (const auto& [name, vm] : r.ate) {
          result["ate"][name]["bias"] = vm.bias;
          result["ate"][name]["rmse"] = vm.rmse;
          result["ate"][name]["il"] = vm.il;
          result["ate"][name]["cp"] = vm.cp;
        }
        result["mean_trim_fraction"] = r.mean_trim_fraction;
        result["zero_mass_fallbacks"] = r.zero_mass_fallbacks;
      } else {
        throw densift::InvalidConfig("unknown study '" + study + "'");
      }
      emit(c, seed, result, c.warnings);
    }
    return 0;
  } catch (const densift::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const densift::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const densift::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify_exit(e);
  }
}
