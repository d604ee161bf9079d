#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "exceed/csv_io.hpp"

using namespace exceed;

namespace {

StationSet parse(const std::string& text, LoadOptions opt = {}) {
  std::istringstream in(text);
  return load_stations(in, opt);
}

std::string series(const std::string& id, double x, double y, int days, int missing_at = -1) {
  std::string out;
  for (int d = 0; d < days; ++d) {
    const auto date = format_iso_date(parse_iso_date("2002-01-01") + std::chrono::days{d});
    out += id + "," + std::to_string(x) + "," + std::to_string(y) + "," + date + ",";
    if (d != missing_at) out += std::to_string(40 + d);
    out += "\n";
  }
  return out;
}

const char* kHeader = "station_id,x,y,date,value\n";

}  // namespace

TEST(LoadStations, TwoCompleteStations) {
  const auto set = parse(kHeader + series("A", 0, 0, 4) + series("B", 1, 2, 4));
  ASSERT_EQ(set.stations.size(), 2u);
  EXPECT_EQ(set.grid.size(), 4u);
  EXPECT_EQ(set.stations[1].id, "B");
  EXPECT_DOUBLE_EQ(set.stations[1].loc.y, 2.0);
  EXPECT_TRUE(set.stations[0].fully_observed());
}

TEST(LoadStations, RowsInAnyOrder) {
  const std::string text = std::string(kHeader) +
                           "A,0,0,2002-01-02,2\nB,1,1,2002-01-01,5\nA,0,0,2002-01-01,1\nB,1,1,2002-01-02,6\n";
  const auto set = parse(text);
  EXPECT_EQ(set.stations[0].values, (std::vector<double>{1, 2}));
  EXPECT_EQ(format_iso_date(set.grid.label(0)), "2002-01-01");
}

TEST(LoadStations, MissingValueMasked) {
  const auto set = parse(kHeader + series("A", 0, 0, 20, 7));
  const auto& s = set.stations[0];
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.mask[i], i != 7);
}

TEST(LoadStations, MissingCapExceeded) {
  std::string text = kHeader;
  for (int d = 0; d < 25; ++d) {
    const auto date = format_iso_date(parse_iso_date("2002-01-01") + std::chrono::days{d});
    text += "A,0,0," + date + "," + (d % 8 == 0 ? "" : "1") + "\n";  // 4 of 25 missing = 16%
  }
  try {
    parse(text);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing cap exceeded"), std::string::npos);
  }
  EXPECT_NO_THROW(parse(text, LoadOptions{0.2}));
}

TEST(LoadStations, InconsistentDatesAcrossStations) {
  try {
    parse(kHeader + series("A", 0, 0, 4) + series("B", 1, 1, 5));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("inconsistent dates"), std::string::npos);
  }
}

TEST(LoadStations, ParseErrorsCarryLineNumbers) {
  try {
    parse(std::string(kHeader) + "A,0,0,2002-01-01,1\nA,0,zero,2002-01-02,2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse("id,x,y,date,value\n"), ParseError);
  EXPECT_THROW(parse(std::string(kHeader) + "A,0,0,2002-01-01\n"), ParseError);
  EXPECT_THROW(parse(std::string(kHeader) + "A,0,0,2002-01-01,1\nA,0,0,2002-01-01,2\n"), ParseError);
  EXPECT_THROW(parse(std::string(kHeader) + "A,0,0,2002-01-01,1\nA,0,1,2002-01-02,2\n"), ParseError);
  EXPECT_THROW(parse(std::string(kHeader) + "A,0,0,2002-01-01,1\nA,0,0,2002-01-03,2\n"), ValidationError);
}

TEST(LoadStations, FileErrorsNameTheFile) {
  const auto path = std::filesystem::temp_directory_path() / "exceed_bad_stations.csv";
  std::ofstream(path) << kHeader << "A,0,0,2002-01-01,x\n";
  try {
    load_stations(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("exceed_bad_stations.csv:2"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(WriteStations, RoundTrip) {
  const auto set = parse(kHeader + series("A", 0.5, 0, 6, 2) + series("B", 1, 1, 6), LoadOptions{0.5});
  std::stringstream ss;
  write_stations(ss, set);
  const auto back = load_stations(ss, LoadOptions{0.5});
  EXPECT_EQ(back.stations[0].mask, set.stations[0].mask);
  EXPECT_EQ(back.stations[1].values, set.stations[1].values);
}

TEST(Exceedance, RoundTripWithAndWithoutSe) {
  const auto grid = TimeGrid::daily(parse_iso_date("2002-03-01"), 3);
  std::vector<ExceedanceEstimate> e(2);
  e[0] = {"A", 50.0, {0.1, 0.2, 0.3}, Method::KER, std::vector<double>{0.01, 0.02, 0.03}};
  e[1] = {"B", 50.0, {1.0 / 3.0, 0.0, 1.0}, Method::KER, std::nullopt};
  std::stringstream ss;
  write_exceedance(ss, e, grid);
  const auto t = read_exceedance(ss);
  ASSERT_EQ(t.estimates.size(), 2u);
  EXPECT_EQ(t.estimates[1].probs[0], 1.0 / 3.0);
  EXPECT_TRUE(t.estimates[0].se.has_value());
  EXPECT_FALSE(t.estimates[1].se.has_value());
  EXPECT_EQ(t.grid, grid);
}

TEST(GridOutput, CsvRowsAndPgmPixels) {
  KrigedField f;
  f.grid = {3, 2, {0, 0}, 1.0};
  f.raw = {-0.03, 0.5, 1.2, 0.25, 0.0, 1.0};
  f.pred = {0.0, 0.5, 1.0, 0.25, 0.0, 1.0};
  f.se.assign(6, 0.0);
  std::ostringstream csv;
  write_grid_csv(csv, f);
  const std::string s = csv.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 7);
  EXPECT_NE(s.find("0,0,-0.029999999999999999,0"), std::string::npos);

  std::ostringstream pgm;
  write_pgm(pgm, f);
  const std::string p = pgm.str();
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(p.size(), header.size() + 6);
  const auto* px = reinterpret_cast<const unsigned char*>(p.data() + header.size());
  // top row holds y = 1
  EXPECT_EQ(px[0], 64);
  EXPECT_EQ(px[1], 0);
  EXPECT_EQ(px[2], 255);
  EXPECT_EQ(px[3], 0);
  EXPECT_EQ(px[4], 128);
  EXPECT_EQ(px[5], 255);
}

TEST(AtomicWrite, ReplacesTarget) {
  const auto path = std::filesystem::temp_directory_path() / "exceed_atomic.txt";
  atomic_write(path, [](std::ostream& os) { os << "first"; });
  atomic_write(path, [](std::ostream& os) { os << "second"; });
  std::ifstream in(path);
  std::string s;
  in >> s;
  EXPECT_EQ(s, "second");
  std::filesystem::remove(path);
}
