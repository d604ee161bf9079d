// exceed_cli: threshold-exceedance probabilities from station time series.
//
//   simulate    draw a separable space-time field and write it as station CSV
//   smooth      per-station daily exceedance probabilities (IND / EDF / KER)
//   fit         ML Matern fit to one day's probabilities
//   krige       predictions at listed target points
//   map         grid CSV + PGM for one day or a season
//   crossval    leave-one-out RMSE per station
//   experiment  simulated RMSE comparison of the three methods
//
// Exit codes: 0 success, 1 invalid input, 2 numerical failure.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exceed/exceed.hpp"

namespace {

using namespace exceed;

struct Options {
  std::string input;
  std::string output;
  std::string stations;
  std::string model;
  std::string targets;
  std::vector<double> thresholds;
  std::string method;
  std::vector<std::string> methods;
  double bandwidth_c = 1.0;
  std::string kernel = "gaussian";
  std::size_t window = 7;
  std::string transform = "none";
  std::string mean = "constant";
  double nugget = 0.0;
  std::string grid;
  std::string season;
  std::string date;
  std::string fit = "per-day";
  std::optional<std::uint64_t> seed;
  std::size_t reps = 50;
  std::size_t parallel = 1;
  std::size_t n_time = 200;
  std::size_t sites = 0;
  std::string start = "2000-01-01";
  double missing_cap = 0.10;
  double band_level = 0.0;
  std::vector<std::size_t> m_values;
  std::size_t refit_max_m = 100;
  std::string table;
};

GridSpec parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) parts.push_back(p);
  require(parts.size() == 3 || parts.size() == 5, "--grid expects nx,ny,spacing or nx,ny,spacing,x0,y0");
  GridSpec g;
  try {
    g.nx = std::stoul(parts[0]);
    g.ny = std::stoul(parts[1]);
    g.spacing = std::stod(parts[2]);
    if (parts.size() == 5) g.origin = {std::stod(parts[3]), std::stod(parts[4])};
  } catch (const std::logic_error&) {
    throw ValidationError("--grid: malformed value '" + text + "'");
  }
  validate(g);
  return g;
}

SmootherConfig smoother_config(const Options& o, Method method) {
  SmootherConfig c{method, o.bandwidth_c, parse_kernel(o.kernel), o.window};
  require(c.bandwidth_c > 0.0, "--bandwidth-c must be positive");
  require(c.window >= 1 && c.window % 2 == 1, "--window must be a positive odd number");
  return c;
}

std::vector<StationSeries> imputed(const StationSet& set) {
  std::vector<StationSeries> out;
  for (const auto& s : set.stations) out.push_back(s.fully_observed() ? s : impute_missing(s));
  return out;
}

ExceedanceTable read_exceedance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return read_exceedance(in);
  } catch (const ParseError& e) {
    throw ParseError(path, e.line(), e.message());
  }
}

// The estimates of one (method, threshold) group, aligned with the station
// file's locations.
struct Slice {
  std::vector<std::string> ids;
  std::vector<Location> sites;
  std::vector<const ExceedanceEstimate*> est;
  TimeGrid grid;
};

Slice select_slice(const ExceedanceTable& table, const StationSet& stations, const Options& o) {
  std::vector<const ExceedanceEstimate*> picked;
  for (const auto& e : table.estimates) {
    if (!o.method.empty() && e.method != parse_method(o.method)) continue;
    if (!o.thresholds.empty() && e.threshold != o.thresholds.front()) continue;
    picked.push_back(&e);
  }
  require(!picked.empty(), "no estimates match the requested method/threshold");
  for (const auto* e : picked) {
    require(e->method == picked.front()->method && e->threshold == picked.front()->threshold,
            "estimates contain several methods or thresholds; select one with --method and --threshold");
  }
  std::map<std::string, Location> loc;
  for (const auto& s : stations.stations) loc[s.id] = s.loc;
  Slice s{{}, {}, {}, table.grid};
  for (const auto* e : picked) {
    const auto it = loc.find(e->station_id);
    require(it != loc.end(), "station " + e->station_id + " is not in the station file");
    s.ids.push_back(e->station_id);
    s.sites.push_back(it->second);
    s.est.push_back(e);
  }
  require(s.sites.size() >= 3, "at least 3 stations are required for kriging");
  return s;
}

std::vector<double> day_values(const Slice& s, std::size_t t) {
  std::vector<double> v;
  for (const auto* e : s.est) v.push_back(e->probs[t]);
  return v;
}

std::size_t day_index(const Slice& s, const std::string& date) {
  const auto idx = s.grid.index_of(parse_iso_date(date));
  if (!idx) throw ValidationError("date " + date + " is outside the estimate series");
  return *idx;
}

FitOptions fit_options(const Options& o) {
  FitOptions f;
  f.mean = parse_mean_model(o.mean);
  f.relative_nugget = o.nugget;
  require(o.nugget >= 0.0, "--nugget must be non-negative");
  return f;
}

// Fitted on the given values, unless they are constant (nothing to fit) in
// which case the fallback used by the harness applies.
KrigingModel model_for(const Options& o, std::span<const Location> sites, std::span<const double> values) {
  if (!o.model.empty()) {
    std::ifstream in(o.model);
    if (!in) throw ValidationError("cannot open " + o.model);
    KrigingModel m = read_model(in);
    require(m.sites.size() == sites.size(), "model was fitted on a different station set");
    m.sites.assign(sites.begin(), sites.end());
    return m;
  }
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    return detail::fallback_model(sites, parse_mean_model(o.mean));
  }
  return fit_ml(sites, values, fit_options(o));
}

StationSet load_station_file(const std::string& path, double missing_cap) {
  require(!path.empty(), "a station CSV is required");
  return load_stations(path, LoadOptions{missing_cap});
}

int cmd_simulate(const Options& o) {
  require(o.seed.has_value(), "--seed is required for simulate");
  require(!o.output.empty(), "--output is required");
  SimScenario sc;
  if (!o.grid.empty()) sc.grid = parse_grid(o.grid);
  sc.n_time = o.n_time;
  sc.seed = *o.seed;
  const Eigen::MatrixXd field = simulate(sc);
  StationSet set = to_station_set(sc, field, parse_iso_date(o.start));
  if (o.sites > 0) {
    const auto idx = sample_cells(sc.grid, o.sites, derive_seed(*o.seed, 0x5173));
    StationSet sub;
    sub.grid = set.grid;
    for (std::size_t i : idx) sub.stations.push_back(set.stations[i]);
    set = std::move(sub);
  }
  atomic_write(o.output, [&](std::ostream& os) { write_stations(os, set); });
  return 0;
}

int cmd_smooth(const Options& o) {
  require(!o.output.empty(), "--output is required");
  require(!o.thresholds.empty(), "--threshold is required");
  const StationSet set = load_station_file(o.input, o.missing_cap);
  const auto series = imputed(set);
  const SmootherConfig cfg = smoother_config(o, parse_method(o.method.empty() ? "ker" : o.method));
  require(o.band_level == 0.0 || cfg.method == Method::KER, "--bands is only available for method ker");

  std::vector<ExceedanceEstimate> out;
  for (double x0 : o.thresholds) {
    for (const auto& s : series) {
      ExceedanceEstimate e;
      e.station_id = s.id;
      e.threshold = x0;
      e.method = cfg.method;
      if (o.band_level > 0.0) {
        auto band = variance_band(indicator_series(s.values, x0), kernel_for(s.size(), cfg), o.band_level);
        e.probs = std::move(band.estimate);
        e.se = std::move(band.sd);
      } else {
        e.probs = smooth(s.values, x0, cfg);
      }
      out.push_back(std::move(e));
    }
  }
  atomic_write(o.output, [&](std::ostream& os) { write_exceedance(os, out, set.grid); });
  return 0;
}

int cmd_fit(const Options& o) {
  require(!o.output.empty(), "--output is required");
  require(!o.date.empty(), "--date is required");
  const auto table = read_exceedance_file(o.input);
  const StationSet stations = load_station_file(o.stations, 1.0);
  const Slice s = select_slice(table, stations, o);
  const auto values = day_values(s, day_index(s, o.date));
  const KrigingModel m = fit_ml(s.sites, values, fit_options(o));
  atomic_write(o.output, [&](std::ostream& os) { write_model(os, m); });
  return 0;
}

int cmd_krige(const Options& o) {
  require(!o.output.empty(), "--output is required");
  require(!o.date.empty(), "--date is required");
  require(!o.targets.empty(), "--targets is required");
  const auto table = read_exceedance_file(o.input);
  const StationSet stations = load_station_file(o.stations, 1.0);
  const Slice s = select_slice(table, stations, o);
  const auto values = day_values(s, day_index(s, o.date));

  std::ifstream in(o.targets);
  if (!in) throw ValidationError("cannot open " + o.targets);
  detail::expect_header(in, "x,y");
  std::vector<Location> targets;
  std::string line;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 2) throw ParseError(o.targets, lineno, "expected 2 fields");
    targets.push_back({detail::parse_double(f[0], lineno, "x"), detail::parse_double(f[1], lineno, "y")});
  }
  const auto preds = krige_predict(model_for(o, s.sites, values), values, targets);
  atomic_write(o.output, [&](std::ostream& os) {
    os << "x,y,pred,se\n";
    for (std::size_t i = 0; i < targets.size(); ++i) {
      os << detail::fmt(targets[i].x) << ',' << detail::fmt(targets[i].y) << ',' << detail::fmt(preds[i].pred)
         << ',' << detail::fmt(preds[i].se) << '\n';
    }
  });
  return 0;
}

int cmd_map(const Options& o) {
  require(!o.output.empty(), "--output is required (path prefix for .csv and .pgm)");
  require(!o.grid.empty(), "--grid is required");
  require(o.date.empty() != o.season.empty(), "give exactly one of --date or --season");
  const GridSpec grid = parse_grid(o.grid);
  const Transform transform = parse_transform(o.transform);
  const auto table = read_exceedance_file(o.input);
  const StationSet stations = load_station_file(o.stations, 1.0);
  const Slice s = select_slice(table, stations, o);
  require(s.grid.has_labels(), "estimates carry no dates");

  KrigedField field;
  if (!o.date.empty()) {
    const auto values = day_values(s, day_index(s, o.date));
    field = krige_field(model_for(o, s.sites, values), values, grid, transform);
    field.label = o.date;
  } else {
    const Season season = parse_season(o.season);
    std::vector<KrigedField> days;
    std::vector<Date> dates;
    std::optional<KrigingModel> shared;
    if (parse_fit_mode(o.fit) == FitMode::time_averaged || !o.model.empty()) {
      std::vector<double> avg(s.sites.size(), 0.0);
      std::size_t count = 0;
      for (std::size_t t = 0; t < s.grid.size(); ++t) {
        if (!season.contains(s.grid.label(t))) continue;
        const auto v = day_values(s, t);
        for (std::size_t i = 0; i < v.size(); ++i) avg[i] += v[i];
        ++count;
      }
      if (count == 0) throw ValidationError("no day falls in season " + season.name);
      for (double& v : avg) v /= static_cast<double>(count);
      shared = model_for(o, s.sites, avg);
    }
    for (std::size_t t = 0; t < s.grid.size(); ++t) {
      if (!season.contains(s.grid.label(t))) continue;
      const auto values = day_values(s, t);
      days.push_back(krige_field(shared ? *shared : model_for(o, s.sites, values), values, grid, transform));
      dates.push_back(s.grid.label(t));
    }
    field = seasonal_average(days, dates, season);
  }
  field.method = s.est.front()->method;
  atomic_write(o.output + ".csv", [&](std::ostream& os) { write_grid_csv(os, field); });
  atomic_write(o.output + ".pgm", [&](std::ostream& os) { write_pgm(os, field); }, true);
  return 0;
}

int cmd_crossval(const Options& o) {
  require(!o.thresholds.empty(), "--threshold is required");
  const StationSet loaded = load_station_file(o.input, o.missing_cap);
  StationSet set{imputed(loaded), loaded.grid};
  KrigingConfig kcfg;
  kcfg.fit = parse_fit_mode(o.fit);
  kcfg.fit_options = fit_options(o);

  std::vector<std::string> names = o.methods;
  if (!o.method.empty()) names.push_back(o.method);
  if (names.empty()) names = {"ind", "edf", "ker"};

  std::ostringstream csv;
  csv << "station_id,method,threshold,rmse\n";
  for (const auto& name : names) {
    const Method method = parse_method(name);
    const auto res = loo_crossval(set, o.thresholds.front(), smoother_config(o, method), kcfg, o.parallel);
    std::vector<double> r;
    for (const auto& sr : res) {
      csv << sr.station_id << ',' << to_string(method) << ',' << detail::fmt(o.thresholds.front()) << ','
          << detail::fmt(sr.rmse) << '\n';
      r.push_back(sr.rmse);
    }
    std::cout << to_string(method) << " median LOOCV RMSE " << median(r) << "\n";
  }
  if (!o.output.empty()) atomic_write(o.output, [&](std::ostream& os) { os << csv.str(); });
  return 0;
}

int cmd_experiment(const Options& o) {
  require(o.seed.has_value(), "--seed is required for experiment");
  ExperimentConfig cfg;
  cfg.seed = *o.seed;
  cfg.reps = o.reps;
  cfg.parallel = o.parallel;
  cfg.bandwidth_c = o.bandwidth_c;
  cfg.kernel = parse_kernel(o.kernel);
  cfg.window = o.window;
  cfg.mean = parse_mean_model(o.mean);
  cfg.per_day_refit_max_m = o.refit_max_m;
  if (!o.grid.empty()) cfg.scenario.grid = parse_grid(o.grid);
  cfg.scenario.n_time = o.n_time;
  if (!o.thresholds.empty()) cfg.thresholds = o.thresholds;
  if (!o.m_values.empty()) cfg.m_values = o.m_values;
  if (!o.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : o.methods) cfg.methods.push_back(parse_method(m));
  }
  smoother_config(o, Method::KER);

  const ExperimentReport rep = run_table1(cfg);
  std::ostringstream table;
  write_report_table(table, rep);
  if (o.table.empty()) {
    std::cout << table.str();
  } else {
    atomic_write(o.table, [&](std::ostream& os) { os << table.str(); });
  }
  if (!o.output.empty()) atomic_write(o.output, [&](std::ostream& os) { write_report_csv(os, rep); });
  std::cerr << "wall clock " << rep.wall_clock_seconds << " s\n";
  for (const auto& f : rep.failures) std::cerr << "replicate " << f.replicate << " failed: " << f.reason << "\n";
  return rep.failures.empty() ? 0 : 2;
}

// key=value lines from --config become flags unless given on the command line.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  if (std::find(args.begin(), args.end(), "--help") != args.end() ||
      std::find(args.begin(), args.end(), "-h") != args.end())
    return args;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> extra;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(path, lineno, "expected key=value");
    const std::string flag = "--" + std::string(detail::trim(t.substr(0, eq)));
    if (given(flag)) continue;
    extra.push_back(flag);
    extra.emplace_back(detail::trim(t.substr(eq + 1)));
  }
  // Subcommand flags must follow the subcommand name.
  const auto pos = args.empty() ? args.end() : args.begin() + 1;
  args.insert(pos, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Threshold-exceedance probabilities for spatially correlated time series", "exceed_cli"};
  app.require_subcommand(1);
  app.add_option("--config", "key=value file of flag defaults (command-line flags win)");

  auto io = [&](CLI::App* sub, bool input, bool output) {
    if (input) sub->add_option("--input", o.input, "input CSV");
    if (output) sub->add_option("--output", o.output, "output path");
  };
  auto smoothing = [&](CLI::App* sub) {
    sub->add_option("--method", o.method, "ind, edf or ker");
    sub->add_option("--bandwidth-c", o.bandwidth_c, "bandwidth constant c in b = c n^(-1/5)")->capture_default_str();
    sub->add_option("--kernel", o.kernel, "gaussian or epanechnikov")->capture_default_str();
    sub->add_option("--window", o.window, "EDF window length")->capture_default_str();
    sub->add_option("--missing-cap", o.missing_cap, "maximum missing fraction per station")->capture_default_str();
  };
  auto kriging = [&](CLI::App* sub) {
    sub->add_option("--stations", o.stations, "station CSV supplying coordinates")->required();
    sub->add_option("--method", o.method, "select estimates of this method");
    sub->add_option("--threshold", o.thresholds, "select estimates at this threshold");
    sub->add_option("--mean", o.mean, "constant or linear")->capture_default_str();
    sub->add_option("--nugget", o.nugget, "nugget relative to sigma")->capture_default_str();
    sub->add_option("--model", o.model, "use a fitted model instead of fitting");
  };

  auto* sim = app.add_subcommand("simulate", "simulate a field and write it as station CSV");
  io(sim, false, true);
  sim->add_option("--seed", o.seed, "master seed (required)");
  sim->add_option("--grid", o.grid, "nx,ny,spacing[,x0,y0]");
  sim->add_option("--n-time", o.n_time, "number of days")->capture_default_str();
  sim->add_option("--start", o.start, "first date")->capture_default_str();
  sim->add_option("--sites", o.sites, "keep a random subset of this many cells (0 = all)");

  auto* smo = app.add_subcommand("smooth", "estimate daily exceedance probabilities per station");
  io(smo, true, true);
  smoothing(smo);
  smo->add_option("--threshold", o.thresholds, "threshold x0 (repeatable)");
  smo->add_option("--bands", o.band_level, "write KER standard errors; value is the band level, e.g. 0.95");

  auto* fit = app.add_subcommand("fit", "fit a Matern model by maximum likelihood");
  io(fit, true, true);
  kriging(fit);
  fit->add_option("--date", o.date, "day to fit");

  auto* kri = app.add_subcommand("krige", "predict at target points");
  io(kri, true, true);
  kriging(kri);
  kri->add_option("--date", o.date, "day to predict");
  kri->add_option("--targets", o.targets, "CSV with header x,y");

  auto* map = app.add_subcommand("map", "write a probability map as grid CSV and PGM");
  io(map, true, true);
  kriging(map);
  map->add_option("--grid", o.grid, "nx,ny,spacing[,x0,y0]");
  map->add_option("--date", o.date, "day to map");
  map->add_option("--season", o.season, "summer, winter or FROM..TO");
  map->add_option("--transform", o.transform, "none or logit")->capture_default_str();
  map->add_option("--fit", o.fit, "per-day or time-averaged (seasons only)")->capture_default_str();

  auto* cv = app.add_subcommand("crossval", "leave-one-out cross-validation");
  io(cv, true, true);
  smoothing(cv);
  cv->add_option("--methods", o.methods, "methods to compare (default all)");
  cv->add_option("--threshold", o.thresholds, "threshold x0");
  cv->add_option("--fit", o.fit, "per-day or time-averaged")->capture_default_str();
  cv->add_option("--mean", o.mean, "constant or linear")->capture_default_str();
  cv->add_option("--nugget", o.nugget, "nugget relative to sigma")->capture_default_str();
  cv->add_option("--parallel", o.parallel, "worker threads")->capture_default_str();

  auto* expt = app.add_subcommand("experiment", "simulated RMSE comparison of IND, EDF and KER");
  expt->add_option("--output", o.output, "report CSV");
  expt->add_option("--table", o.table, "write the readable table here instead of stdout");
  expt->add_option("--seed", o.seed, "master seed (required)");
  expt->add_option("--reps", o.reps, "replicates")->capture_default_str();
  expt->add_option("--parallel", o.parallel, "worker threads")->capture_default_str();
  expt->add_option("--bandwidth-c", o.bandwidth_c, "bandwidth constant c")->capture_default_str();
  expt->add_option("--kernel", o.kernel, "gaussian or epanechnikov")->capture_default_str();
  expt->add_option("--window", o.window, "EDF window length")->capture_default_str();
  expt->add_option("--grid", o.grid, "nx,ny,spacing");
  expt->add_option("--n-time", o.n_time, "number of time points")->capture_default_str();
  expt->add_option("--threshold", o.thresholds, "thresholds (default 0 and 2)");
  expt->add_option("--m", o.m_values, "predictor counts (default 24 and 400)");
  expt->add_option("--methods", o.methods, "methods (default ind edf ker)");
  expt->add_option("--mean", o.mean, "constant or linear")->capture_default_str();
  expt->add_option("--refit-max-m", o.refit_max_m, "refit every day when m is at most this")->capture_default_str();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*smo) return cmd_smooth(o);
    if (*fit) return cmd_fit(o);
    if (*kri) return cmd_krige(o);
    if (*map) return cmd_map(o);
    if (*cv) return cmd_crossval(o);
    if (*expt) return cmd_experiment(o);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
