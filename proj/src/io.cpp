#include "gammaflow/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gammaflow/errors.hpp"

namespace gammaflow {

using nlohmann::json;

namespace {

void check_schema(const json& j, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + ": expected a JSON object");
  if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion)
    throw ValidationError(std::string(what) + ": unsupported or missing schema_version");
}

template <class T>
T get(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw ValidationError(std::string(what) + ": missing key \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(what) + ": bad value for \"" + key + "\"");
  }
}

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("truncated field file " + path);
  return v;
}

}  // namespace

json to_json(const CoefficientGroup& g) { return {{"free_rank", g.free_rank()}, {"torsion", g.torsion_orders()}}; }

CoefficientGroup group_from_json(const json& j) {
  return CoefficientGroup(get<int>(j, "free_rank", "group"), get<std::vector<std::int64_t>>(j, "torsion", "group"));
}

json to_json(const GroupElement& g) { return g.coords(); }

GroupElement element_from_json(const CoefficientGroup& G, const json& j) {
  std::vector<std::int64_t> c;
  try {
    c = j.get<std::vector<std::int64_t>>();
  } catch (const json::exception&) {
    throw ValidationError("group element must be an array of integers");
  }
  const GroupElement g(c);
  if (!G.contains(g)) throw ValidationError("element " + to_string(g) + " is not a reduced group element");
  return g;
}

json to_json(const CostTable& t) {
  json entries = json::array();
  for (const auto& [g, c] : t.entries) entries.push_back({{"element", to_json(g)}, {"cost", c}});
  return {{"schema_version", kSchemaVersion},
          {"group", to_json(t.group)},
          {"entries", entries},
          {"extension", t.extension == CostExtension::power_law ? "power_law" : "none"},
          {"exponent", t.exponent}};
}

CostTable cost_table_from_json(const json& j) {
  check_schema(j, "cost table");
  CostTable t;
  t.group = group_from_json(get<json>(j, "group", "cost table"));
  for (const auto& e : get<json>(j, "entries", "cost table"))
    t.entries.push_back({element_from_json(t.group, get<json>(e, "element", "cost entry")),
                         get<double>(e, "cost", "cost entry")});
  const auto ext = j.value("extension", std::string("none"));
  if (ext == "power_law")
    t.extension = CostExtension::power_law;
  else if (ext != "none")
    throw ValidationError("cost table: unknown extension \"" + ext + "\"");
  t.exponent = j.value("exponent", 1.0);
  t.validate();
  return t;
}

json to_json(const CubicalGrid& g) { return {{"origin", g.origin}, {"h", g.h}, {"extents", g.extents}}; }

CubicalGrid grid_from_json(const json& j) {
  CubicalGrid g{get<std::vector<double>>(j, "origin", "grid"), get<double>(j, "h", "grid"),
                get<std::vector<int>>(j, "extents", "grid")};
  g.validate();
  return g;
}

json to_json(const Chain& c) {
  json cells = json::array();
  for (const auto& [cell, coeff] : c.coeffs()) {
    std::vector<int> base(cell.base.begin(), cell.base.begin() + c.grid().dim()), axes;
    for (int a = 0; a < c.grid().dim(); ++a)
      if (cell.has_axis(a)) axes.push_back(a);
    cells.push_back({{"base", base}, {"axes", axes}, {"coeff", to_json(coeff)}});
  }
  return {{"schema_version", kSchemaVersion},
          {"grid", to_json(c.grid())},
          {"dim", c.dim()},
          {"norm", {{"p", c.norm().p()}, {"table", to_json(c.norm().table())}, {"ref", c.norm_ref()}}},
          {"cells", cells}};
}

Chain chain_from_json(const json& j) {
  check_schema(j, "chain");
  const CubicalGrid g = grid_from_json(get<json>(j, "grid", "chain"));
  const json nj = get<json>(j, "norm", "chain");
  auto norm = std::make_shared<const CostedNorm>(cost_table_from_json(get<json>(nj, "table", "chain norm")),
                                                 get<double>(nj, "p", "chain norm"));
  Chain c(g, get<int>(j, "dim", "chain"), norm, nj.value("ref", std::string()));
  for (const auto& e : get<json>(j, "cells", "chain")) {
    const auto base = get<std::vector<int>>(e, "base", "chain cell");
    if (static_cast<int>(base.size()) != g.dim()) throw ValidationError("chain cell base has the wrong length");
    c.add(make_cell(base, get<std::vector<int>>(e, "axes", "chain cell")),
          element_from_json(norm->group(), get<json>(e, "coeff", "chain cell")));
  }
  return c;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
}

void write_field(const Field& f, const std::string& path) {
  f.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out.write("GFLD", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.dim()));
  for (int e : f.grid.extents) put<std::int32_t>(out, e);
  for (double o : f.grid.origin) put<double>(out, o);
  put<double>(out, f.grid.h);
  put<double>(out, f.p);
  for (const Vec2& v : f.values) {
    put<double>(out, v.x);
    put<double>(out, v.y);
  }
  out.write(reinterpret_cast<const char*>(f.fixed.data()), static_cast<std::streamsize>(f.fixed.size()));
  out.write(reinterpret_cast<const char*>(f.cells.data()), static_cast<std::streamsize>(f.cells.size()));
}

Field read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "GFLD", 4) != 0) throw ValidationError(path + " is not a field file");
  if (take<std::uint32_t>(in, path) != 1) throw ValidationError(path + ": unsupported field version");
  const auto ndim = take<std::uint32_t>(in, path);
  if (ndim < 1 || ndim > static_cast<std::uint32_t>(kMaxAmbientDim)) throw ValidationError(path + ": bad dimension");
  Field f;
  for (std::uint32_t a = 0; a < ndim; ++a) f.grid.extents.push_back(take<std::int32_t>(in, path));
  for (std::uint32_t a = 0; a < ndim; ++a) f.grid.origin.push_back(take<double>(in, path));
  f.grid.h = take<double>(in, path);
  f.p = take<double>(in, path);
  f.grid.validate();
  f.values.resize(f.node_count());
  for (auto& v : f.values) {
    v.x = take<double>(in, path);
    v.y = take<double>(in, path);
  }
  f.fixed.resize(f.node_count());
  f.cells.resize(f.cell_count());
  in.read(reinterpret_cast<char*>(f.fixed.data()), static_cast<std::streamsize>(f.fixed.size()));
  in.read(reinterpret_cast<char*>(f.cells.data()), static_cast<std::streamsize>(f.cells.size()));
  if (!in) throw ValidationError("truncated field file " + path);
  f.validate();
  return f;
}

}  // namespace gammaflow
