#include "thermonet/io/network_file.hpp"
#include "thermonet/io/results_file.hpp"
#include "thermonet/io/rom_file.hpp"
#include "thermonet/io/scenario_file.hpp"
#include "thermonet/mor.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <string>

using namespace thermonet;

namespace {

std::string data_file(const std::string& name) { return std::string(THERMONET_DATA_DIR) + "/" + name; }

std::string parse_error(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "expected a parse error";
  return {};
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "thermonet_test_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Units, ConversionsRoundTripExactly) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const double bar = dist(rng);
    const double pa = io::bar_to_pa(bar);
    EXPECT_EQ(io::bar_to_pa(io::pa_to_bar(pa)), pa);
    const double lpm = 20.0 * dist(rng);
    const double q = io::lpm_to_m3s(lpm);
    EXPECT_EQ(io::lpm_to_m3s(io::m3s_to_lpm(q)), q);
  }
  EXPECT_DOUBLE_EQ(io::bar_to_pa(0.3), 3e4);
  EXPECT_DOUBLE_EQ(io::lpm_to_m3s(6.0), 1e-4);
}

TEST(Numbers, ShortestFormattingRoundTrips) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = dist(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    EXPECT_EQ(io::parse_number(io::format_number(x), "x"), x);
  }
  EXPECT_EQ(io::format_number(0.1), "0.1");
  EXPECT_EQ(io::parse_number(" +2.5 ", "x"), 2.5);
  EXPECT_NE(parse_error([] { io::parse_number("1.5abc", "file.csv:4: column 'T_up_C'"); }).find("file.csv:4"),
            std::string::npos);
  parse_error([] { io::parse_number("nan", "x"); });
  parse_error([] { io::parse_number("", "x"); });
}

TEST(Csv, ReportsLineAndColumnOnErrors) {
  const auto table = io::parse_csv("# comment\na,b\n1,2\n\n3,4\n", "t.csv");
  ASSERT_EQ(table.rows(), 2u);
  EXPECT_EQ(table.columns[1][1], 4.0);
  const auto bad_count = parse_error([] { io::parse_csv("a,b\n1,2\n3\n", "t.csv"); });
  EXPECT_NE(bad_count.find("t.csv:3"), std::string::npos);
  EXPECT_NE(bad_count.find("expected 2 fields"), std::string::npos);
  const auto bad_value = parse_error([] { io::parse_csv("a,b\n1,x\n", "t.csv"); });
  EXPECT_NE(bad_value.find("t.csv:2"), std::string::npos);
  EXPECT_NE(bad_value.find("'b'"), std::string::npos);
  parse_error([] { io::parse_csv("a,a\n1,2\n", "t.csv"); });
  parse_error([] { io::parse_csv("\n# only comments\n", "t.csv"); });
}

TEST(NetworkFile, ParseSerializeParseIsIdentical) {
  for (const char* name : {"single_pipe.json", "parallel_pair.json", "branch_demand.json", "three_path.json"}) {
    const std::string text = io::read_file(data_file(name));
    const auto first = io::parse_network(text, name);
    const std::string once = io::serialize_network(first);
    const auto second = io::parse_network(once, name);
    EXPECT_EQ(io::serialize_network(second), once) << name;
    ASSERT_EQ(first.nodes.size(), second.nodes.size());
    for (std::size_t i = 0; i < first.nodes.size(); ++i) EXPECT_EQ(first.nodes[i].known_head, second.nodes[i].known_head);
    ASSERT_EQ(first.links.size(), second.links.size());
    for (std::size_t i = 0; i < first.links.size(); ++i) {
      const auto& a = first.links[i].spec.hydraulic;
      const auto& b = second.links[i].spec.hydraulic;
      EXPECT_EQ(a.geometry.cross_section, b.geometry.cross_section);
      EXPECT_EQ(a.geometry.segment_length, b.geometry.segment_length);
      EXPECT_EQ(a.valve.open_area, b.valve.open_area);
      EXPECT_EQ(first.links[i].thermal.sensors, second.links[i].thermal.sensors);
    }
  }
}

TEST(NetworkFile, DiagnosticsNameFileAndField) {
  const std::string text = io::read_file(data_file("parallel_pair.json"));
  auto doc = io::Json::parse(text);
  doc["links"][1]["length_m"] = "ten";
  const auto wrong_type = parse_error([&] { io::parse_network(doc.dump(), "net.json"); });
  EXPECT_NE(wrong_type.find("net.json"), std::string::npos);
  EXPECT_NE(wrong_type.find("$.links[1].length_m"), std::string::npos);

  doc = io::Json::parse(text);
  doc["links"][2]["valve"].erase("a_open_m2");
  EXPECT_NE(parse_error([&] { io::parse_network(doc.dump(), "net.json"); }).find("a_open_m2"), std::string::npos);

  doc = io::Json::parse(text);
  doc["links"][0]["thermal"]["model"] = "exact";
  EXPECT_NE(parse_error([&] { io::parse_network(doc.dump(), "net.json"); }).find("thermal.model"), std::string::npos);

  doc = io::Json::parse(text);
  doc["links"][1]["thermal"]["sensors_m"] = {50.0};
  EXPECT_NE(parse_error([&] { io::parse_network(doc.dump(), "net.json"); }).find("sensors_m[0]"), std::string::npos);

  parse_error([] { io::parse_network("{not json", "net.json"); });
  EXPECT_THROW(io::load_network("/nonexistent/net.json"), Error);
}

TEST(ScenarioFile, ParseSerializeParseIsIdentical) {
  const std::string text = io::read_file(data_file("three_path_demo.csv"));
  const auto first = io::parse_scenario(text, "demo.csv");
  ASSERT_GT(first.size(), 10u);
  const std::string once = io::serialize_scenario(first);
  const auto second = io::parse_scenario(once, "demo.csv");
  EXPECT_EQ(io::serialize_scenario(second), once);
  EXPECT_EQ(first.feed, second.feed);
  EXPECT_EQ(first.valves, second.valves);
  EXPECT_EQ(first.demands, second.demands);
}

TEST(ScenarioFile, RejectsMalformedScenarios) {
  const auto missing = parse_error([] { io::parse_scenario("time_s,h_up_bar,T_up_C\n0,0.3,50\n", "s.csv"); });
  EXPECT_NE(missing.find("T_amb_C"), std::string::npos);
  parse_error([] { io::parse_scenario("time_s,h_up_bar,q_up_lpm,T_up_C,T_amb_C\n0,0.3,1,50,20\n", "s.csv"); });
  const auto grid = parse_error(
      [] { io::parse_scenario("time_s,h_up_bar,T_up_C,T_amb_C\n0,0.3,50,20\n1,0.3,50,20\n3,0.3,50,20\n", "s.csv"); });
  EXPECT_NE(grid.find("row 3"), std::string::npos);
  const auto signal =
      parse_error([] { io::parse_scenario("time_s,h_up_bar,T_up_C,T_amb_C,u_v:a\n0,0.3,50,20,1.2\n", "s.csv"); });
  EXPECT_NE(signal.find("u_v:a"), std::string::npos);
  parse_error([] { io::parse_scenario("time_s,h_up_bar,T_up_C,T_amb_C,extra\n0,0.3,50,20,1\n", "s.csv"); });
}

TEST(RomFile, SaveLoadIsBitExact) {
  const auto geom = build_grid(15.0, 60, 0.02);
  const ThermalParameters p{7e-4, 4e-3};
  const auto fom = assemble_fom(geom, p, SensorLayout{{3.0, 9.0}});
  const auto factors = decouple_parameters(geom);
  const auto rom = project(factors, fom, moment_reduce(factors, p, fom, 6));
  const auto path = scratch("rom.json");
  io::write_atomic(path, io::serialize_rom(rom));
  const auto back = io::load_rom(path);
  EXPECT_EQ(back.order, rom.order);
  EXPECT_EQ(back.full_dim, rom.full_dim);
  EXPECT_EQ(back.segment_length, rom.segment_length);
  EXPECT_EQ(back.reduction_point.lambda, rom.reduction_point.lambda);
  EXPECT_TRUE(bit_equal(back.A_red, rom.A_red));
  EXPECT_TRUE(bit_equal(back.Q_red, rom.Q_red));
  EXPECT_TRUE(bit_equal(back.B_red, rom.B_red));
  EXPECT_TRUE(bit_equal(back.C_red, rom.C_red));
  EXPECT_TRUE(bit_equal(back.V, rom.V));
  EXPECT_EQ(io::serialize_rom(back), io::serialize_rom(rom));

  auto doc = nlohmann::ordered_json::parse(io::serialize_rom(rom));
  doc["order"] = 5;
  parse_error([&] { io::parse_rom(doc.dump(), "rom.json"); });
  doc = nlohmann::ordered_json::parse(io::serialize_rom(rom));
  doc["format"] = "other";
  parse_error([&] { io::parse_rom(doc.dump(), "rom.json"); });
}

TEST(Metrics, IdentityAndRelativeError) {
  const std::vector<double> y{100.0, 100.0, 100.0};
  const auto zero = io::compute_metrics(y, y);
  EXPECT_EQ(zero.max_abs_error, 0.0);
  EXPECT_EQ(zero.mean_relative_error, 0.0);
  const auto two = io::compute_metrics(y, {98.0, 98.0, 98.0});
  EXPECT_DOUBLE_EQ(two.mean_relative_error, 2.0);
  EXPECT_DOUBLE_EQ(two.max_abs_error, 2.0);
  EXPECT_FALSE(two.range_normalized);
}

TEST(Metrics, SignChangingReferenceUsesRange) {
  const auto m = io::compute_metrics({-1.0, 1.0}, {-1.0, 1.5});
  EXPECT_TRUE(m.range_normalized);
  EXPECT_DOUBLE_EQ(m.mean_relative_error, 100.0 * 0.25 / 2.0);
  EXPECT_THROW(io::compute_metrics({1.0}, {1.0, 2.0}), Error);
}

TEST(Metrics, TablesCompareSharedColumns) {
  const auto a = io::parse_csv("time_s,x,y\n0,1,10\n1,2,10\n", "a");
  const auto b = io::parse_csv("time_s,y,z\n0,10,5\n1,11,5\n", "b");
  const auto m = io::compare_tables(a, b);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].first, "y");
  EXPECT_DOUBLE_EQ(m[0].second.mean_relative_error, 5.0);
  const auto c = io::parse_csv("time_s,y\n0,10\n", "c");
  EXPECT_THROW(io::compare_tables(a, c), Error);
}

TEST(Files, AtomicWriteReplacesContent) {
  const auto path = scratch("atomic.txt");
  io::write_atomic(path, "first\n");
  io::write_atomic(path, "second\n");
  EXPECT_EQ(io::read_file(path), "second\n");
  for (const auto& e : std::filesystem::directory_iterator(path.parent_path()))
    EXPECT_EQ(e.path().string().find(".tmp."), std::string::npos);
  EXPECT_THROW(io::write_atomic("/nonexistent/dir/x.txt", "x"), Error);
}
