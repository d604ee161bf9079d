#pragma once

// Station CSV ingestion and the CSV / PGM writers used by the pipeline.
//
//   stations:    station_id,x,y,date,value      (empty value = missing)
//   exceedance:  station_id,date,prob,se,method,threshold
//   grid:        x,y,pred,se

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unistd.h>
#include <vector>

#include "exceed/data_model.hpp"
#include "exceed/error.hpp"
#include "exceed/kriging.hpp"

namespace exceed {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, std::size_t line, const char* field) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(line, std::string("invalid number in field '") + field + "': '" + std::string(s) + "'");
  }
  return v;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void expect_header(std::istream& is, std::string_view expected) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(1, "empty file; expected header '" + std::string(expected) + "'");
  if (trim(line) != expected) {
    throw ParseError(1, "header mismatch: expected '" + std::string(expected) + "', got '" + line + "'");
  }
}

}  // namespace detail

struct LoadOptions {
  double missing_cap = 0.10;  // maximum tolerated fraction of missing days per station
};

/// Reads the station CSV. Rows may appear in any order; every station must
/// cover the same set of consecutive dates.
inline StationSet load_stations(std::istream& is, const LoadOptions& opt = {}) {
  require(opt.missing_cap >= 0.0 && opt.missing_cap <= 1.0, "missing cap must lie in [0, 1]");
  detail::expect_header(is, "station_id,x,y,date,value");

  struct Pending {
    Location loc;
    std::map<Date, std::optional<double>> values;
  };
  std::vector<std::string> order;
  std::map<std::string, Pending> stations;

  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 5) {
      throw ParseError(lineno, "expected 5 fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty()) throw ParseError(lineno, "empty station_id");
    const std::string id(f[0]);
    const Location loc{detail::parse_double(f[1], lineno, "x"), detail::parse_double(f[2], lineno, "y")};
    if (!std::isfinite(loc.x) || !std::isfinite(loc.y)) throw ParseError(lineno, "non-finite coordinates");
    Date date;
    try {
      date = parse_iso_date(f[3]);
    } catch (const ValidationError& e) {
      throw ParseError(lineno, e.what());
    }
    std::optional<double> value;
    if (!f[4].empty()) {
      value = detail::parse_double(f[4], lineno, "value");
      if (!std::isfinite(*value)) throw ParseError(lineno, "non-finite value");
    }

    auto [it, inserted] = stations.try_emplace(id, Pending{loc, {}});
    if (inserted) order.push_back(id);
    if (!(it->second.loc == loc)) {
      throw ParseError(lineno, "station " + id + " has inconsistent coordinates");
    }
    if (!it->second.values.emplace(date, value).second) {
      throw ParseError(lineno, "duplicate row for station " + id + " on " + format_iso_date(date));
    }
  }
  if (order.empty()) throw ValidationError("station file contains no data rows");

  std::vector<Date> dates;
  for (const auto& [d, v] : stations.at(order.front()).values) dates.push_back(d);
  for (const auto& id : order) {
    const auto& vals = stations.at(id).values;
    bool same = vals.size() == dates.size();
    std::size_t i = 0;
    for (auto it = vals.begin(); same && it != vals.end(); ++it, ++i) same = it->first == dates[i];
    if (!same) {
      throw ValidationError("inconsistent dates across stations: " + id + " does not match " + order.front());
    }
  }

  StationSet set;
  set.grid = TimeGrid(dates);
  for (const auto& id : order) {
    auto& p = stations.at(id);
    StationSeries s;
    s.id = id;
    s.loc = p.loc;
    for (const auto& [d, v] : p.values) {
      s.values.push_back(v.value_or(0.0));
      s.mask.push_back(v.has_value());
    }
    if (s.missing_fraction() > opt.missing_cap) {
      std::ostringstream os;
      os << "station " << id << ": missing cap exceeded (" << 100.0 * s.missing_fraction() << "% > "
         << 100.0 * opt.missing_cap << "%)";
      throw ValidationError(os.str());
    }
    set.stations.push_back(std::move(s));
  }
  return set;
}

inline StationSet load_stations(const std::filesystem::path& path, const LoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return load_stations(in, opt);
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e.line(), e.message());
  }
}

inline void write_stations(std::ostream& os, const StationSet& set) {
  require(set.grid.has_labels(), "write_stations: time grid has no date labels");
  os << "station_id,x,y,date,value\n";
  for (const auto& s : set.stations) {
    require(s.size() == set.grid.size(), "write_stations: station " + s.id + " length mismatch");
    const std::string prefix = s.id + ',' + detail::fmt(s.loc.x) + ',' + detail::fmt(s.loc.y) + ',';
    for (std::size_t t = 0; t < s.size(); ++t) {
      os << prefix << format_iso_date(set.grid.label(t)) << ',';
      if (s.mask.empty() || s.mask[t]) os << detail::fmt(s.values[t]);
      os << '\n';
    }
  }
}

inline void write_exceedance(std::ostream& os, std::span<const ExceedanceEstimate> estimates,
                             const TimeGrid& grid) {
  require(grid.has_labels(), "write_exceedance: time grid has no date labels");
  os << "station_id,date,prob,se,method,threshold\n";
  for (const auto& e : estimates) {
    require(e.probs.size() == grid.size(), "write_exceedance: station " + e.station_id + " length mismatch");
    const std::string tail = ',' + to_string(e.method) + ',' + detail::fmt(e.threshold) + '\n';
    for (std::size_t t = 0; t < grid.size(); ++t) {
      os << e.station_id << ',' << format_iso_date(grid.label(t)) << ',' << detail::fmt(e.probs[t]) << ',';
      if (e.se) os << detail::fmt(e.se->at(t));
      os << tail;
    }
  }
}

struct ExceedanceTable {
  TimeGrid grid;
  std::vector<ExceedanceEstimate> estimates;  // one per (station, method, threshold)
};

inline ExceedanceTable read_exceedance(std::istream& is) {
  detail::expect_header(is, "station_id,date,prob,se,method,threshold");
  struct Key {
    std::string id;
    Method method;
    double threshold;
    auto operator<=>(const Key&) const = default;
  };
  std::vector<Key> order;
  std::map<Key, std::map<Date, std::pair<double, std::optional<double>>>> rows;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 6) throw ParseError(lineno, "expected 6 fields, got " + std::to_string(f.size()));
    Key key;
    Date date;
    try {
      key = {std::string(f[0]), parse_method(f[4]), detail::parse_double(f[5], lineno, "threshold")};
      date = parse_iso_date(f[1]);
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(lineno, e.what());
    }
    const double prob = detail::parse_double(f[2], lineno, "prob");
    if (!(prob >= -1e-12 && prob <= 1.0 + 1e-12)) throw ParseError(lineno, "probability outside [0, 1]");
    std::optional<double> se;
    if (!f[3].empty()) se = detail::parse_double(f[3], lineno, "se");
    auto [it, inserted] = rows.try_emplace(key);
    if (inserted) order.push_back(key);
    if (!it->second.emplace(date, std::pair{prob, se}).second) {
      throw ParseError(lineno, "duplicate row for station " + key.id + " on " + format_iso_date(date));
    }
  }
  if (order.empty()) throw ValidationError("exceedance file contains no data rows");

  ExceedanceTable table;
  std::vector<Date> dates;
  for (const auto& [d, v] : rows.at(order.front())) dates.push_back(d);
  table.grid = TimeGrid(dates);
  for (const auto& key : order) {
    const auto& r = rows.at(key);
    bool same = r.size() == dates.size();
    std::size_t i = 0;
    for (auto it = r.begin(); same && it != r.end(); ++it, ++i) same = it->first == dates[i];
    if (!same) throw ValidationError("inconsistent dates across stations: " + key.id);
    ExceedanceEstimate e;
    e.station_id = key.id;
    e.method = key.method;
    e.threshold = key.threshold;
    bool has_se = true;
    std::vector<double> se;
    for (const auto& [d, v] : r) {
      e.probs.push_back(std::clamp(v.first, 0.0, 1.0));
      has_se = has_se && v.second.has_value();
      se.push_back(v.second.value_or(0.0));
    }
    if (has_se) e.se = std::move(se);
    table.estimates.push_back(std::move(e));
  }
  return table;
}

inline void write_grid_csv(std::ostream& os, const KrigedField& field) {
  os << "x,y,pred,se\n";
  for (std::size_t k = 0; k < field.grid.cell_count(); ++k) {
    const auto c = field.grid.cell(k);
    os << detail::fmt(c.x) << ',' << detail::fmt(c.y) << ',' << detail::fmt(field.raw[k]) << ','
       << detail::fmt(field.se[k]) << '\n';
  }
}

/// Binary 8-bit PGM (P5): pixel = round(255 p) of the clamped prediction,
/// top row = largest y.
inline void write_pgm(std::ostream& os, const KrigedField& field) {
  const auto& g = field.grid;
  os << "P5\n" << g.nx << ' ' << g.ny << "\n255\n";
  for (std::size_t row = 0; row < g.ny; ++row) {
    const std::size_t iy = g.ny - 1 - row;
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
      const double p = std::clamp(field.pred[iy * g.nx + ix], 0.0, 1.0);
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * p))));
    }
  }
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer,
                         bool binary = false) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw ValidationError("write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace exceed
