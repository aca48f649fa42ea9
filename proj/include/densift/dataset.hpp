#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "densift/errors.hpp"

namespace densift {

enum class ColumnKind { continuous, discrete };

enum class ColumnRole { candidate, preselected_w, response, treatment, ignore };

inline const char* to_string(ColumnKind k) {
  return k == ColumnKind::continuous ? "continuous" : "discrete";
}

inline const char* to_string(ColumnRole r) {
  switch (r) {
    case ColumnRole::candidate: return "candidate";
    case ColumnRole::preselected_w: return "preselected_w";
    case ColumnRole::response: return "response";
    case ColumnRole::treatment: return "treatment";
    default: return "ignore";
  }
}

// One typed column. Continuous columns carry `values`; discrete columns carry
// atom codes 0..n_atoms-1 plus the original atom spellings for reporting.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  ColumnRole role = ColumnRole::candidate;
  std::vector<double> values;
  std::vector<int> codes;
  std::vector<std::string> atom_labels;
  int n_atoms = 0;

  std::size_t size() const {
    return kind == ColumnKind::continuous ? values.size() : codes.size();
  }

  // Numeric view used by balance tests and CSV round-trips: continuous value,
  // or the atom label when it parses as a number, else the code.
  double numeric(std::size_t i) const {
    if (kind == ColumnKind::continuous) return values[i];
    const std::string& lab = atom_labels[codes[i]];
    char* end = nullptr;
    double v = std::strtod(lab.c_str(), &end);
    if (end && *end == '\0' && end != lab.c_str()) return v;
    return static_cast<double>(codes[i]);
  }
};

// Recode raw numeric values into a discrete column; atoms are the distinct
// values observed in the full sample, sorted ascending.
inline Column make_discrete_column(std::string name, ColumnRole role,
                                   const std::vector<double>& raw) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::discrete;
  c.role = role;
  std::vector<double> atoms(raw);
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  c.n_atoms = static_cast<int>(atoms.size());
  c.codes.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    c.codes[i] = static_cast<int>(
        std::lower_bound(atoms.begin(), atoms.end(), raw[i]) - atoms.begin());
  }
  c.atom_labels.reserve(atoms.size());
  for (double a : atoms) {
    double r = std::round(a);
    if (r == a && std::abs(a) < 1e15) {
      c.atom_labels.push_back(std::to_string(static_cast<long long>(r)));
    } else {
      c.atom_labels.push_back(std::to_string(a));
    }
  }
  return c;
}

inline Column make_continuous_column(std::string name, ColumnRole role,
                                     std::vector<double> values) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::continuous;
  c.role = role;
  c.values = std::move(values);
  return c;
}

struct Dataset {
  std::size_t n = 0;
  std::vector<Column> cols;

  const Column& col(std::size_t i) const { return cols[i]; }

  std::vector<std::size_t> by_role(ColumnRole role) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i].role == role) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> candidates() const { return by_role(ColumnRole::candidate); }
  std::vector<std::size_t> preselected() const { return by_role(ColumnRole::preselected_w); }

  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i].name == name) return i;
    throw ManifestMismatch("no column named '" + name + "'");
  }

  std::size_t response_col() const {
    auto v = by_role(ColumnRole::response);
    if (v.size() != 1) throw InvalidResponse("expected exactly one response column");
    return v[0];
  }

  std::size_t treatment_col() const {
    auto v = by_role(ColumnRole::treatment);
    if (v.size() != 1) throw InvalidResponse("expected exactly one treatment column");
    return v[0];
  }

  // Treatment as 0/1; the column must be discrete with exactly two atoms or a
  // continuous column holding only 0 and 1.
  std::vector<int> treatment_indicator() const {
    const Column& d = cols[treatment_col()];
    std::vector<int> out(n);
    if (d.kind == ColumnKind::discrete) {
      if (d.n_atoms != 2)
        throw InvalidResponse("treatment column must be binary, found " +
                              std::to_string(d.n_atoms) + " atoms");
      for (std::size_t i = 0; i < n; ++i) out[i] = d.codes[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (d.values[i] != 0.0 && d.values[i] != 1.0)
          throw InvalidResponse("treatment column must contain only 0/1");
        out[i] = static_cast<int>(d.values[i]);
      }
    }
    return out;
  }

  // Row subset, preserving column metadata (atom counts stay as observed in
  // the full sample).
  Dataset subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.n = rows.size();
    out.cols.reserve(cols.size());
    for (const Column& c : cols) {
      Column s;
      s.name = c.name;
      s.kind = c.kind;
      s.role = c.role;
      s.n_atoms = c.n_atoms;
      s.atom_labels = c.atom_labels;
      if (c.kind == ColumnKind::continuous) {
        s.values.reserve(rows.size());
        for (std::size_t r : rows) s.values.push_back(c.values[r]);
      } else {
        s.codes.reserve(rows.size());
        for (std::size_t r : rows) s.codes.push_back(c.codes[r]);
      }
      out.cols.push_back(std::move(s));
    }
    return out;
  }
};

inline double column_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double column_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = column_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Type-7 sample quantile (linear interpolation between order statistics).
inline double quantile_type7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return std::nan("");
  if (v.size() == 1) return v[0];
  double h = (static_cast<double>(v.size()) - 1.0) * p;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace densift
