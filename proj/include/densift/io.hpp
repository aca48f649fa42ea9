#pragma once

// CSV ingestion against a column-role manifest, deterministic JSON report
// emission, and the run configuration shared by the CLI subcommands.

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "densift/causal.hpp"
#include "densift/dataset.hpp"
#include "densift/dependence.hpp"
#include "densift/errors.hpp"

namespace densift {

using nlohmann::json;

// ---------------------------------------------------------------------------
// CSV

// RFC-4180-style parser: quoted fields, doubled quotes, CR/LF line ends.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(row);
    row.clear();
    any = false;
  };
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      any = true;
      continue;
    }
    switch (c) {
      case '"': quoted = true; any = true; break;
      case ',': end_field(); any = true; break;
      case '\r': break;
      case '\n':
        if (any || !field.empty() || !row.empty()) end_row();
        break;
      default: field.push_back(c); any = true;
    }
  }
  if (any || !field.empty() || !row.empty()) end_row();
  return rows;
}

inline bool is_missing_cell(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan";
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  ColumnRole role = ColumnRole::candidate;
};

struct Manifest {
  std::vector<ManifestEntry> columns;
  int max_atoms = 20;
};

inline ColumnKind parse_kind(const std::string& s) {
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "discrete") return ColumnKind::discrete;
  throw ManifestMismatch("unknown column kind '" + s + "'");
}

inline ColumnRole parse_role(const std::string& s) {
  if (s == "candidate") return ColumnRole::candidate;
  if (s == "preselected_w") return ColumnRole::preselected_w;
  if (s == "response") return ColumnRole::response;
  if (s == "treatment") return ColumnRole::treatment;
  if (s == "ignore") return ColumnRole::ignore;
  throw ManifestMismatch("unknown column role '" + s + "'");
}

inline Manifest parse_manifest(const json& j) {
  Manifest m;
  if (!j.contains("columns") || !j["columns"].is_array())
    throw ManifestMismatch("manifest needs a 'columns' array");
  for (const json& e : j["columns"]) {
    ManifestEntry me;
    me.name = e.at("name").get<std::string>();
    me.kind = parse_kind(e.at("kind").get<std::string>());
    me.role = parse_role(e.value("role", std::string("candidate")));
    m.columns.push_back(std::move(me));
  }
  if (j.contains("max_atoms")) m.max_atoms = j["max_atoms"].get<int>();
  if (m.max_atoms < 2) throw ManifestMismatch("max_atoms must be at least 2");
  return m;
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ManifestMismatch("cannot open manifest '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ManifestMismatch("manifest is not valid JSON: " + std::string(e.what()));
  }
  return parse_manifest(j);
}

// ---------------------------------------------------------------------------
// Ingestion

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t dropped_rows = 0;
};

inline Dataset ingest_rows(const std::vector<std::vector<std::string>>& rows,
                           const Manifest& manifest, IngestReport* report = nullptr) {
  if (rows.empty()) throw DataError("CSV has no header row");
  const std::vector<std::string>& header = rows[0];
  std::map<std::string, const ManifestEntry*> by_name;
  for (const ManifestEntry& e : manifest.columns) {
    if (!by_name.emplace(e.name, &e).second)
      throw ManifestMismatch("duplicate manifest entry '" + e.name + "'");
  }
  for (const ManifestEntry& e : manifest.columns) {
    if (std::find(header.begin(), header.end(), e.name) == header.end())
      throw ManifestMismatch("manifest names column '" + e.name + "' which is not in the CSV");
  }
  std::vector<const ManifestEntry*> entries;
  for (const std::string& h : header) {
    auto it = by_name.find(h);
    if (it == by_name.end())
      throw ManifestMismatch("CSV column '" + h + "' is not covered by the manifest");
    entries.push_back(it->second);
  }

  // Drop rows with missing cells in any used (non-ignored) column.
  std::vector<std::size_t> keep;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size())
      throw ParseError(r, rows[r].size(), "wrong field count");
    bool ok = true;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (entries[c]->role == ColumnRole::ignore) continue;
      if (is_missing_cell(rows[r][c])) {
        ok = false;
        break;
      }
    }
    if (ok) keep.push_back(r);
  }
  if (report) {
    report->rows_read = rows.size() - 1;
    report->dropped_rows = rows.size() - 1 - keep.size();
  }

  Dataset ds;
  ds.n = keep.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    const ManifestEntry& e = *entries[c];
    if (e.role == ColumnRole::ignore) continue;
    if (e.kind == ColumnKind::continuous) {
      std::vector<double> vals;
      vals.reserve(keep.size());
      for (std::size_t r : keep) {
        const std::string& cell = rows[r][c];
        char* end = nullptr;
        double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() || *end != '\0')
          throw ParseError(r, c, "not a number: '" + cell + "'");
        vals.push_back(v);
      }
      ds.cols.push_back(make_continuous_column(e.name, e.role, std::move(vals)));
    } else {
      // Atoms are the distinct spellings; ordered numerically when they all
      // parse as numbers, lexicographically otherwise.
      std::vector<std::string> raw;
      raw.reserve(keep.size());
      for (std::size_t r : keep) raw.push_back(rows[r][c]);
      std::vector<std::string> atoms(raw);
      std::sort(atoms.begin(), atoms.end());
      atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
      bool all_numeric = true;
      std::vector<double> nums;
      for (const std::string& a : atoms) {
        char* end = nullptr;
        double v = std::strtod(a.c_str(), &end);
        if (end == a.c_str() || *end != '\0') {
          all_numeric = false;
          break;
        }
        nums.push_back(v);
      }
      if (all_numeric) {
        std::vector<std::size_t> order(atoms.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return nums[a] < nums[b]; });
        std::vector<std::string> sorted;
        for (std::size_t k : order) sorted.push_back(atoms[k]);
        atoms = std::move(sorted);
      }
      if (static_cast<int>(atoms.size()) > manifest.max_atoms)
        throw ManifestMismatch("discrete column '" + e.name + "' has " +
                               std::to_string(atoms.size()) + " atoms (max_atoms = " +
                               std::to_string(manifest.max_atoms) + ")");
      if (atoms.size() < 2)
        throw DegenerateColumn("discrete column '" + e.name + "' has fewer than 2 atoms");
      std::map<std::string, int> code;
      for (std::size_t k = 0; k < atoms.size(); ++k) code[atoms[k]] = static_cast<int>(k);
      Column col;
      col.name = e.name;
      col.kind = ColumnKind::discrete;
      col.role = e.role;
      col.n_atoms = static_cast<int>(atoms.size());
      col.atom_labels = atoms;
      col.codes.reserve(raw.size());
      for (const std::string& cell : raw) col.codes.push_back(code[cell]);
      ds.cols.push_back(std::move(col));
    }
  }
  return ds;
}

inline Dataset ingest(const std::string& csv_path, const std::string& manifest_path,
                      IngestReport* report = nullptr) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open CSV '" + csv_path + "'");
  Manifest manifest = load_manifest(manifest_path);
  return ingest_rows(parse_csv(in), manifest, report);
}

inline void write_csv(const Dataset& ds, std::ostream& out) {
  for (std::size_t c = 0; c < ds.cols.size(); ++c)
    out << (c ? "," : "") << ds.cols[c].name;
  out << "\n";
  char buf[64];
  for (std::size_t r = 0; r < ds.n; ++r) {
    for (std::size_t c = 0; c < ds.cols.size(); ++c) {
      if (c) out << ",";
      const Column& col = ds.cols[c];
      if (col.kind == ColumnKind::continuous) {
        std::snprintf(buf, sizeof buf, "%.17g", col.values[r]);
        out << buf;
      } else {
        out << col.atom_labels[col.codes[r]];
      }
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// JSON emission: decimal doubles with 17 significant digits, keys in sorted
// order, so identical runs produce identical bytes.

namespace detail {

inline void dump_json_string(const std::string& s, std::ostream& out) {
  out << '"';
  for (char c : s) {
    switch (c) {
      case '"': out << "\\\""; break;
      case '\\': out << "\\\\"; break;
      case '\n': out << "\\n"; break;
      case '\r': out << "\\r"; break;
      case '\t': out << "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out << buf;
        } else {
          out << c;
        }
    }
  }
  out << '"';
}

inline void dump_json_value(const json& j, std::ostream& out, int indent, int depth) {
  auto pad = [&](int d) {
    out << "\n";
    for (int k = 0; k < d * indent; ++k) out << ' ';
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out << ',';
        first = false;
        pad(depth + 1);
        dump_json_string(it.key(), out);
        out << ": ";
        dump_json_value(it.value(), out, indent, depth + 1);
      }
      pad(depth);
      out << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      out << '[';
      bool first = true;
      for (const json& v : j) {
        if (!first) out << ',';
        first = false;
        pad(depth + 1);
        dump_json_value(v, out, indent, depth + 1);
      }
      pad(depth);
      out << ']';
      return;
    }
    case json::value_t::string:
      dump_json_string(j.get<std::string>(), out);
      return;
    case json::value_t::boolean:
      out << (j.get<bool>() ? "true" : "false");
      return;
    case json::value_t::number_integer:
      out << j.get<std::int64_t>();
      return;
    case json::value_t::number_unsigned:
      out << j.get<std::uint64_t>();
      return;
    case json::value_t::number_float: {
      double v = j.get<double>();
      if (std::isnan(v) || std::isinf(v)) {
        out << "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf;
      return;
    }
    default:
      out << "null";
  }
}

}  // namespace detail

inline void dump_json(const json& j, std::ostream& out, int indent = 2) {
  detail::dump_json_value(j, out, indent, 0);
  out << "\n";
}

inline std::string dump_json(const json& j, int indent = 2) {
  std::ostringstream ss;
  dump_json(j, ss, indent);
  return ss.str();
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  KernelFamily family = KernelFamily::gaussian;
  int order = 2;
  double screen_scale = 1.0;
  std::vector<double> scale_grid{0.5, 1.0, 2.0};
  ReferenceMode reference = ReferenceMode::median;
  std::vector<double> quantile_probs{0.25, 0.5, 0.75};
  std::size_t p_tilde = 5;
  std::size_t p_tilde_cap = 10;
  bool protect_w = true;
  TrimRule trim{0.05, 0.95};  // CSV-analysis default; simulations use [0.1, 0.9]
  std::uint64_t split_seed = 1;
  bool hajek = false;
  bool dml_swap = false;
  double threshold_C = 1.0;
  int threads = 0;

  void validate() const {
    check_kernel_order(family, order);
    if (!(screen_scale > 0)) throw InvalidConfig("scale must be positive");
    if (scale_grid.empty()) throw InvalidConfig("scale grid must be nonempty");
    for (double s : scale_grid)
      if (!(s > 0)) throw InvalidConfig("scale grid entries must be positive");
    trim.validate();
    if (p_tilde < 2) throw InvalidConfig("p_tilde must be at least 2");
    if (p_tilde_cap < p_tilde) throw InvalidConfig("p_tilde_cap must be >= p_tilde");
  }

  DependenceConfig dependence(bool binary) const {
    DependenceConfig d;
    d.reference = binary ? ReferenceMode::binary_treatment : reference;
    d.quantile_probs = quantile_probs;
    d.family = family;
    d.order = order;
    d.scale = screen_scale;
    return d;
  }
};

inline void apply_config_json(RunConfig& cfg, const json& j) {
  if (j.contains("kernel")) {
    std::string k = j["kernel"].get<std::string>();
    if (k == "gaussian") cfg.family = KernelFamily::gaussian;
    else if (k == "epanechnikov") cfg.family = KernelFamily::epanechnikov;
    else throw InvalidConfig("unknown kernel family '" + k + "'");
  }
  if (j.contains("order")) cfg.order = j["order"].get<int>();
  if (j.contains("scale")) cfg.screen_scale = j["scale"].get<double>();
  if (j.contains("scale_grid")) cfg.scale_grid = j["scale_grid"].get<std::vector<double>>();
  if (j.contains("reference")) {
    std::string r = j["reference"].get<std::string>();
    if (r == "median") cfg.reference = ReferenceMode::median;
    else if (r == "quantiles") cfg.reference = ReferenceMode::quantiles;
    else throw InvalidConfig("unknown reference mode '" + r + "'");
  }
  if (j.contains("quantile_probs"))
    cfg.quantile_probs = j["quantile_probs"].get<std::vector<double>>();
  if (j.contains("p_tilde")) cfg.p_tilde = j["p_tilde"].get<std::size_t>();
  if (j.contains("p_tilde_cap")) cfg.p_tilde_cap = j["p_tilde_cap"].get<std::size_t>();
  if (j.contains("protect_w")) cfg.protect_w = j["protect_w"].get<bool>();
  if (j.contains("trim_lower")) cfg.trim.lower = j["trim_lower"].get<double>();
  if (j.contains("trim_upper")) cfg.trim.upper = j["trim_upper"].get<double>();
  if (j.contains("split_seed")) cfg.split_seed = j["split_seed"].get<std::uint64_t>();
  if (j.contains("hajek")) cfg.hajek = j["hajek"].get<bool>();
  if (j.contains("dml_swap")) cfg.dml_swap = j["dml_swap"].get<bool>();
  if (j.contains("threshold_C")) cfg.threshold_C = j["threshold_C"].get<double>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  cfg.validate();
}

inline json config_echo(const RunConfig& cfg) {
  json j;
  j["kernel"] = cfg.family == KernelFamily::gaussian ? "gaussian" : "epanechnikov";
  j["order"] = cfg.order;
  j["scale"] = cfg.screen_scale;
  j["scale_grid"] = cfg.scale_grid;
  j["reference"] = cfg.reference == ReferenceMode::quantiles ? "quantiles" : "median";
  j["quantile_probs"] = cfg.quantile_probs;
  j["p_tilde"] = cfg.p_tilde;
  j["p_tilde_cap"] = cfg.p_tilde_cap;
  j["protect_w"] = cfg.protect_w;
  j["trim_lower"] = cfg.trim.lower;
  j["trim_upper"] = cfg.trim.upper;
  j["split_seed"] = cfg.split_seed;
  j["hajek"] = cfg.hajek;
  j["dml_swap"] = cfg.dml_swap;
  j["threshold_C"] = cfg.threshold_C;
  j["threads"] = cfg.threads;
  return j;
}

}  // namespace densift
