#pragma once

#include <string>
#include <vector>

#include "sessionrank/nn.hpp"

namespace sessionrank {

// Versioned JSON model format:
//   {"format_version": 1, "tables": {name: {rows, cols, data[]}}}
// Tables are emitted in sorted name order so identical parameters always
// produce identical bytes.
std::string tables_to_json(const std::vector<ParamRef>& params);
void save_tables(const std::string& path, const std::vector<ParamRef>& params);

// Loads into the given refs; every named table must be present with a
// matching shape.
void load_tables(const std::string& path, const std::vector<ParamRef>& params);

}  // namespace sessionrank
