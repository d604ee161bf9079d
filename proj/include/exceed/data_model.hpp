#pragma once

// Core domain types: locations, time grids, station series, exceedance
// estimates and prediction grids.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exceed/error.hpp"

namespace exceed {

using Date = std::chrono::sys_days;

/// Parses a strict ISO `YYYY-MM-DD` date.
inline Date parse_iso_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  const std::string buf(text);
  if (buf.size() != 10 || std::sscanf(buf.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 ||
      buf[4] != '-' || buf[7] != '-') {
    throw ValidationError("invalid ISO date '" + buf + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw ValidationError("invalid calendar date '" + buf + "'");
  return Date{ymd};
}

inline std::string format_iso_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Planar coordinates in abstract distance units.
struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

inline void validate(const Location& loc) {
  require(std::isfinite(loc.x) && std::isfinite(loc.y), "location coordinates must be finite");
}

inline double distance(const Location& a, const Location& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// A regular daily time axis of n points, rescaled to t_i = i/n, i = 1..n.
class TimeGrid {
public:
  TimeGrid() = default;

  explicit TimeGrid(std::size_t n) : n_(n) { require(n >= 2, "time grid needs at least 2 points"); }

  /// Labels must be consecutive days.
  explicit TimeGrid(std::vector<Date> labels) : n_(labels.size()), labels_(std::move(labels)) {
    require(n_ >= 2, "time grid needs at least 2 points");
    for (std::size_t i = 1; i < n_; ++i) {
      if ((labels_[i] - labels_[i - 1]).count() != 1) {
        throw ValidationError("irregular time grid at " + format_iso_date(labels_[i]) +
                              ": consecutive daily dates required");
      }
    }
  }

  /// Daily grid of n points starting at `first`.
  static TimeGrid daily(Date first, std::size_t n) {
    std::vector<Date> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = first + std::chrono::days{static_cast<int>(i)};
    return TimeGrid(std::move(labels));
  }

  std::size_t size() const noexcept { return n_; }
  bool has_labels() const noexcept { return !labels_.empty(); }
  const std::vector<Date>& labels() const noexcept { return labels_; }

  /// Rescaled time of the 0-based index i, i.e. (i+1)/n.
  double rescaled(std::size_t i) const noexcept {
    return static_cast<double>(i + 1) / static_cast<double>(n_);
  }

  Date label(std::size_t i) const {
    require(has_labels(), "time grid has no date labels");
    return labels_.at(i);
  }

  std::optional<std::size_t> index_of(Date d) const {
    if (!has_labels()) return std::nullopt;
    const auto off = (d - labels_.front()).count();
    if (off < 0 || static_cast<std::size_t>(off) >= n_) return std::nullopt;
    return static_cast<std::size_t>(off);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
  std::size_t n_ = 0;
  std::vector<Date> labels_;
};

/// One monitoring site. mask[i] is true where values[i] was observed.
struct StationSeries {
  std::string id;
  Location loc;
  std::vector<double> values;
  std::vector<bool> mask;

  std::size_t size() const noexcept { return values.size(); }

  std::size_t missing_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), false));
  }

  double missing_fraction() const {
    return values.empty() ? 0.0 : static_cast<double>(missing_count()) / static_cast<double>(size());
  }

  bool fully_observed() const { return missing_count() == 0; }
};

/// Builds a fully observed series.
inline StationSeries make_series(std::string id, Location loc, std::vector<double> values) {
  StationSeries s{std::move(id), loc, std::move(values), {}};
  s.mask.assign(s.values.size(), true);
  return s;
}

/// Stations sharing one time grid.
struct StationSet {
  std::vector<StationSeries> stations;
  TimeGrid grid;

  std::vector<Location> locations() const {
    std::vector<Location> out;
    out.reserve(stations.size());
    for (const auto& s : stations) out.push_back(s.loc);
    return out;
  }
};

enum class Method { IND, EDF, KER };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::IND: return "IND";
    case Method::EDF: return "EDF";
    case Method::KER: return "KER";
  }
  return "?";
}

/// Case-insensitive.
inline Method parse_method(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "IND") return Method::IND;
  if (up == "EDF") return Method::EDF;
  if (up == "KER") return Method::KER;
  throw ValidationError("unknown method '" + std::string(text) + "' (expected ind, edf or ker)");
}

/// Smoothed exceedance probabilities for one station and threshold.
struct ExceedanceEstimate {
  std::string station_id;
  double threshold = 0.0;
  std::vector<double> probs;
  Method method = Method::KER;
  std::optional<std::vector<double>> se;
};

/// Regular lattice of nx*ny cells; cell (ix, iy) sits at origin + spacing*(ix, iy).
/// Cells are ordered with x varying fastest.
struct GridSpec {
  std::size_t nx = 1;
  std::size_t ny = 1;
  Location origin{};
  double spacing = 1.0;

  std::size_t cell_count() const noexcept { return nx * ny; }

  Location cell(std::size_t index) const {
    const std::size_t ix = index % nx;
    const std::size_t iy = index / nx;
    return {origin.x + spacing * static_cast<double>(ix), origin.y + spacing * static_cast<double>(iy)};
  }

  std::vector<Location> cells() const {
    std::vector<Location> out(cell_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cell(i);
    return out;
  }
};

inline void validate(const GridSpec& g) {
  require(g.nx >= 1 && g.ny >= 1, "grid must have at least one cell");
  require(std::isfinite(g.spacing) && g.spacing > 0.0, "grid spacing must be positive");
  validate(g.origin);
}

/// Fills missing values by linear interpolation between the nearest observed
/// neighbours, with constant extension past the first/last observation.
inline StationSeries impute_missing(const StationSeries& s) {
  require(s.mask.size() == s.values.size(), "station " + s.id + ": mask/value length mismatch");
  std::vector<std::size_t> obs;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.mask[i]) obs.push_back(i);
  if (obs.size() < 2) {
    throw ValidationError("station " + s.id + ": imputation needs at least 2 observed values");
  }

  StationSeries out = s;
  for (std::size_t i = 0; i < obs.front(); ++i) out.values[i] = s.values[obs.front()];
  for (std::size_t i = obs.back() + 1; i < s.size(); ++i) out.values[i] = s.values[obs.back()];
  for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
    const std::size_t a = obs[k], b = obs[k + 1];
    for (std::size_t i = a + 1; i < b; ++i) {
      const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
      out.values[i] = (1.0 - w) * s.values[a] + w * s.values[b];
    }
  }
  out.mask.assign(s.size(), true);
  return out;
}

using Indicators = std::vector<std::uint8_t>;

/// 1 where value >= x0 (ties count as exceedances).
inline Indicators indicator_series(std::span<const double> values, double x0) {
  Indicators out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [x0](double v) { return static_cast<std::uint8_t>(v >= x0 ? 1 : 0); });
  return out;
}

inline Indicators indicator_series(const StationSeries& s, double x0) {
  require(s.fully_observed(), "station " + s.id + ": indicators need a fully observed series");
  return indicator_series(std::span<const double>(s.values), x0);
}

}  // namespace exceed
