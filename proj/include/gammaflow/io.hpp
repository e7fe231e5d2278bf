#pragma once

// Persistence: JSON cost tables and chains ("schema_version": 1) and the
// binary field format.
//
// Field files ("GFLD", native little-endian):
//   char[4] "GFLD", uint32 version (1), uint32 ndim, int32 extents[ndim],
//   double origin[ndim], double h, double p, double values[2 * nodes],
//   uint8 fixed[nodes], uint8 cells[cells].

#include <json.hpp>
#include <memory>
#include <string>

#include "gammaflow/chains.hpp"
#include "gammaflow/fields.hpp"

namespace gammaflow {

constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const CoefficientGroup& g);
CoefficientGroup group_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroupElement& g);
GroupElement element_from_json(const CoefficientGroup& G, const nlohmann::json& j);

// {"schema_version", "group", "entries": [{"element", "cost"}], "extension", "exponent"}
nlohmann::json to_json(const CostTable& t);
// Validates the table; throws ValidationError naming the offending element.
CostTable cost_table_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CubicalGrid& g);
CubicalGrid grid_from_json(const nlohmann::json& j);

// Carries its norm (cost table and exponent) so that it can be read back alone.
nlohmann::json to_json(const Chain& c);
Chain chain_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

void write_field(const Field& f, const std::string& path);
Field read_field(const std::string& path);

}  // namespace gammaflow
