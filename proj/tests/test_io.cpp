#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "gammaflow/errors.hpp"
#include "gammaflow/io.hpp"
#include "gammaflow/singset.hpp"

using namespace gammaflow;
using nlohmann::json;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("gammaflow_test_" + name)).string();
}

}  // namespace

TEST_CASE("cost tables round trip") {
  const CostTable t = circle_cost_table(1.7);
  const json j = to_json(t);
  CHECK(j["schema_version"] == 1);
  const CostTable back = cost_table_from_json(json::parse(j.dump()));
  CHECK(back.group == t.group);
  CHECK(back.entries == t.entries);
  CHECK(back.extension == t.extension);
  CHECK(back.exponent == t.exponent);

  CostTable z6;
  z6.group = CoefficientGroup(0, {6});
  z6.entries = {{GroupElement({1}), 1.0}, {GroupElement({5}), 1.0}, {GroupElement({2}), 1.5}, {GroupElement({4}), 1.5}};
  CHECK(cost_table_from_json(to_json(z6)).entries == z6.entries);
}

TEST_CASE("asymmetric cost tables are rejected with the offending element") {
  CostTable t;
  t.group = CoefficientGroup(0, {5});
  t.entries = {{GroupElement({1}), 1.0}, {GroupElement({4}), 2.0}};
  json j = to_json(t);
  CHECK_THROWS_WITH_AS(cost_table_from_json(j), doctest::Contains("(1)"), ValidationError);
  j["schema_version"] = 2;
  CHECK_THROWS_AS(cost_table_from_json(j), ValidationError);
  json missing = to_json(circle_cost_table(1.5));
  missing.erase("group");
  CHECK_THROWS_WITH_AS(cost_table_from_json(missing), doctest::Contains("group"), ValidationError);
}

TEST_CASE("chains round trip") {
  Field f = box_field(centered_grid(20, 0.1), [](const Point& x) { return vortex(x, {0.01, 0.02}, 1); });
  const SingularChain T = extract_Tp(f);
  const Chain back = chain_from_json(json::parse(to_json(T.chain).dump()));
  CHECK(back == T.chain);
  CHECK(back.grid() == T.chain.grid());
  CHECK(back.norm().p() == 2.0);
  CHECK(mass(back) == doctest::Approx(mass(T.chain)));

  json bad = to_json(T.chain);
  bad["cells"][0]["axes"] = {0};
  CHECK_THROWS_AS(chain_from_json(bad), ValidationError);
}

TEST_CASE("fields round trip through the binary format") {
  Field f = disk_field(disk_grid(24), 2, 1.8);
  const std::string path = temp_path("field.gfld");
  write_field(f, path);
  const Field g = read_field(path);
  CHECK(g.grid == f.grid);
  CHECK(g.p == f.p);
  CHECK(g.values == f.values);
  CHECK(g.fixed == f.fixed);
  CHECK(g.cells == f.cells);
  CHECK(std::filesystem::file_size(path) ==
        4 + 4 + 4 + 2 * 4 + 2 * 8 + 8 + 8 + f.values.size() * 16 + f.fixed.size() + f.cells.size());

  {
    std::ofstream out(path, std::ios::binary | std::ios::in);
    out.write("XXXX", 4);
  }
  CHECK_THROWS_WITH_AS(read_field(path), doctest::Contains("not a field file"), ValidationError);
  write_field(f, path);
  std::filesystem::resize_file(path, 100);
  CHECK_THROWS_WITH_AS(read_field(path), doctest::Contains("truncated"), ValidationError);
  std::remove(path.c_str());
}
