#pragma once

// Long-format panel container. Units are identified by strings, periods by
// integers; each unit belongs permanently to the treated or the control
// group. A dataset always carries the treatment onset reference period t*
// (the last period before treatment can take effect), with the invariant
// t_min <= t* < t_max so at least one post period exists.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "msedid/csv.hpp"
#include "msedid/errors.hpp"

namespace msedid {

struct Observation {
  std::string unit;
  int time = 0;
  bool treated = false;
  double outcome = 0.0;
};

// Column names for long-format CSV files plus the t* to stamp on loaded
// datasets. treated accepts 0/1 or true/false.
struct CsvSchema {
  std::string unit = "unit";
  std::string time = "time";
  std::string treated = "treated";
  std::string outcome = "outcome";
  int t_star = -1;
};

struct ValidationReport {
  bool is_balanced = true;
  std::vector<std::pair<std::string, int>> missing_cells;  // (unit, time)
  long n_treated = 0;
  long n_control = 0;
  int t_min = 0;
  int t_max = 0;
};

class PanelDataset {
 public:
  static PanelDataset from_observations(const std::vector<Observation>& obs,
                                        int t_star) {
    if (obs.empty()) throw PanelError("empty input: no observations");

    PanelDataset ds;
    std::unordered_map<std::string, int> unit_of;
    std::set<int> period_set;
    for (const auto& o : obs) {
      auto [it, inserted] = unit_of.emplace(o.unit, static_cast<int>(ds.unit_ids_.size()));
      if (inserted) {
        ds.unit_ids_.push_back(o.unit);
        ds.unit_treated_.push_back(o.treated ? 1 : 0);
      } else if ((ds.unit_treated_[it->second] != 0) != o.treated) {
        throw PanelError("unit '" + o.unit + "' has inconsistent treated flags");
      }
      period_set.insert(o.time);
    }
    ds.periods_.assign(period_set.begin(), period_set.end());

    const size_t nu = ds.unit_ids_.size();
    const size_t np = ds.periods_.size();
    ds.y_.assign(nu * np, std::numeric_limits<double>::quiet_NaN());
    ds.present_.assign(nu * np, 0);
    for (const auto& o : obs) {
      size_t u = static_cast<size_t>(unit_of[o.unit]);
      size_t p = static_cast<size_t>(ds.period_index_checked(o.time));
      size_t cell = u * np + p;
      if (ds.present_[cell])
        throw PanelError("duplicate observation for unit '" + o.unit + "' at time " +
                         std::to_string(o.time));
      ds.present_[cell] = 1;
      ds.y_[cell] = o.outcome;
    }
    ds.n_obs_ = static_cast<long>(obs.size());

    for (char t : ds.unit_treated_) (t ? ds.n_treated_ : ds.n_control_)++;
    if (ds.n_treated_ == 0) throw PanelError("no treated units in panel");
    if (ds.n_control_ == 0) throw PanelError("no control units in panel");

    if (t_star < ds.t_min() || t_star >= ds.t_max())
      throw PanelError("t_star=" + std::to_string(t_star) +
                       " out of range: need t_min <= t_star < t_max with periods [" +
                       std::to_string(ds.t_min()) + ", " + std::to_string(ds.t_max()) +
                       "]");
    ds.t_star_ = t_star;
    return ds;
  }

  long n_units() const { return static_cast<long>(unit_ids_.size()); }
  long n_periods() const { return static_cast<long>(periods_.size()); }
  long n_obs() const { return n_obs_; }
  long n_treated_units() const { return n_treated_; }
  long n_control_units() const { return n_control_; }
  int t_min() const { return periods_.front(); }
  int t_max() const { return periods_.back(); }
  int t_star() const { return t_star_; }
  const std::vector<int>& periods() const { return periods_; }

  const std::string& unit_id(long u) const { return unit_ids_[static_cast<size_t>(u)]; }
  bool unit_treated(long u) const { return unit_treated_[static_cast<size_t>(u)] != 0; }

  // Index of period t in periods(), or -1 when absent.
  int period_index(int t) const {
    auto it = std::lower_bound(periods_.begin(), periods_.end(), t);
    if (it == periods_.end() || *it != t) return -1;
    return static_cast<int>(it - periods_.begin());
  }

  bool has(long u, long p) const { return present_[cell(u, p)] != 0; }
  double outcome(long u, long p) const { return y_[cell(u, p)]; }

  std::vector<Observation> observations() const {
    std::vector<Observation> out;
    out.reserve(static_cast<size_t>(n_obs_));
    for (long u = 0; u < n_units(); ++u)
      for (long p = 0; p < n_periods(); ++p)
        if (has(u, p))
          out.push_back({unit_id(u), periods_[static_cast<size_t>(p)],
                         unit_treated(u), outcome(u, p)});
    return out;
  }

 private:
  size_t cell(long u, long p) const {
    return static_cast<size_t>(u) * periods_.size() + static_cast<size_t>(p);
  }
  int period_index_checked(int t) const {
    int p = period_index(t);
    if (p < 0) throw PanelError("internal: unregistered period");
    return p;
  }

  std::vector<std::string> unit_ids_;
  std::vector<char> unit_treated_;
  std::vector<int> periods_;
  std::vector<double> y_;
  std::vector<char> present_;
  long n_obs_ = 0;
  long n_treated_ = 0;
  long n_control_ = 0;
  int t_star_ = 0;

  friend PanelDataset truncate_pre_window(const PanelDataset&, int);
};

inline int event_time(const PanelDataset& ds, int time) { return time - ds.t_star(); }

// Longest pre-trends window the dataset supports: t* - ell must not precede
// the first observed period.
inline int max_pre_length(const PanelDataset& ds) { return ds.t_star() - ds.t_min(); }

inline ValidationReport validate(const PanelDataset& ds) {
  ValidationReport rep;
  rep.n_treated = ds.n_treated_units();
  rep.n_control = ds.n_control_units();
  rep.t_min = ds.t_min();
  rep.t_max = ds.t_max();
  for (long u = 0; u < ds.n_units(); ++u)
    for (long p = 0; p < ds.n_periods(); ++p)
      if (!ds.has(u, p))
        rep.missing_cells.emplace_back(ds.unit_id(u), ds.periods()[static_cast<size_t>(p)]);
  rep.is_balanced = rep.missing_cells.empty();
  return rep;
}

// Keeps periods in [t* - ell, t_max]. t* itself is always retained, so the
// result is a valid dataset with the same t*.
inline PanelDataset truncate_pre_window(const PanelDataset& ds, int ell) {
  if (ell < 0)
    throw WindowError("pre-trends length must be non-negative, got " + std::to_string(ell));
  if (ell > max_pre_length(ds))
    throw WindowError("pre-trends length " + std::to_string(ell) +
                      " infeasible: window start " + std::to_string(ds.t_star() - ell) +
                      " precedes first period " + std::to_string(ds.t_min()) +
                      "; maximum feasible length is " + std::to_string(max_pre_length(ds)));

  const int cut = ds.t_star() - ell;
  auto first = std::lower_bound(ds.periods_.begin(), ds.periods_.end(), cut);
  const size_t p0 = static_cast<size_t>(first - ds.periods_.begin());
  const size_t np_old = ds.periods_.size();
  const size_t np_new = np_old - p0;
  const size_t nu = ds.unit_ids_.size();

  PanelDataset out;
  out.unit_ids_ = ds.unit_ids_;
  out.unit_treated_ = ds.unit_treated_;
  out.periods_.assign(first, ds.periods_.end());
  out.y_.resize(nu * np_new);
  out.present_.resize(nu * np_new);
  long kept = 0;
  for (size_t u = 0; u < nu; ++u) {
    for (size_t p = 0; p < np_new; ++p) {
      out.y_[u * np_new + p] = ds.y_[u * np_old + p0 + p];
      out.present_[u * np_new + p] = ds.present_[u * np_old + p0 + p];
      kept += out.present_[u * np_new + p];
    }
  }
  out.n_obs_ = kept;
  out.n_treated_ = ds.n_treated_;
  out.n_control_ = ds.n_control_;
  out.t_star_ = ds.t_star_;
  return out;
}

inline PanelDataset load_long_csv(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty input: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  auto header = csv::split_line(line);
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw CsvError("column '" + name + "' not found in header");
  };
  const int c_unit = col(schema.unit);
  const int c_time = col(schema.time);
  const int c_treated = col(schema.treated);
  const int c_outcome = col(schema.outcome);
  const size_t width = header.size();

  std::vector<Observation> obs;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split_line(line);
    if (fields.size() != width)
      throw CsvError("row " + std::to_string(row) + ": expected " +
                     std::to_string(width) + " fields, got " +
                     std::to_string(fields.size()));
    Observation o;
    o.unit = fields[static_cast<size_t>(c_unit)];
    if (o.unit.empty()) throw CsvError("row " + std::to_string(row) + ": empty unit id");
    auto t = csv::parse_int(fields[static_cast<size_t>(c_time)]);
    if (!t) throw CsvError("row " + std::to_string(row) + ": cannot parse time '" +
                           fields[static_cast<size_t>(c_time)] + "'");
    auto d = csv::parse_flag(fields[static_cast<size_t>(c_treated)]);
    if (!d) throw CsvError("row " + std::to_string(row) + ": cannot parse treated '" +
                           fields[static_cast<size_t>(c_treated)] + "' (want 0/1 or true/false)");
    auto y = csv::parse_double(fields[static_cast<size_t>(c_outcome)]);
    if (!y) throw CsvError("row " + std::to_string(row) + ": cannot parse outcome '" +
                           fields[static_cast<size_t>(c_outcome)] + "'");
    o.time = static_cast<int>(*t);
    o.treated = *d;
    o.outcome = *y;
    obs.push_back(std::move(o));
  }
  if (obs.empty()) throw CsvError("empty input: no data rows");
  return PanelDataset::from_observations(obs, schema.t_star);
}

inline PanelDataset load_long_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  return load_long_csv(in, schema);
}

// Outcomes are written with full precision so a write/load round trip
// reproduces the dataset bit for bit.
inline void write_long_csv(const PanelDataset& ds, std::ostream& out,
                           const CsvSchema& schema = {}) {
  out << schema.unit << ',' << schema.time << ',' << schema.treated << ','
      << schema.outcome << '\n';
  for (long u = 0; u < ds.n_units(); ++u)
    for (long p = 0; p < ds.n_periods(); ++p)
      if (ds.has(u, p))
        out << ds.unit_id(u) << ',' << ds.periods()[static_cast<size_t>(p)] << ','
            << (ds.unit_treated(u) ? 1 : 0) << ','
            << csv::format_double(ds.outcome(u, p), true) << '\n';
}

inline void write_long_csv(const PanelDataset& ds, const std::string& path,
                           const CsvSchema& schema = {}) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open '" + path + "' for writing");
  write_long_csv(ds, out, schema);
}

}  // namespace msedid
