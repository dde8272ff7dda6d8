#include "sessionrank/serialize.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

namespace sessionrank {

namespace {

constexpr int kFormatVersion = 1;

}  // namespace

std::string tables_to_json(const std::vector<ParamRef>& params) {
  std::map<std::string, const Matrix*> ordered;
  for (const auto& p : params) ordered[p.name] = p.value;

  nlohmann::ordered_json doc;
  doc["format_version"] = kFormatVersion;
  nlohmann::ordered_json tables = nlohmann::ordered_json::object();
  for (const auto& [name, m] : ordered) {
    nlohmann::ordered_json t;
    t["rows"] = m->rows;
    t["cols"] = m->cols;
    t["data"] = m->data;
    tables[name] = std::move(t);
  }
  doc["tables"] = std::move(tables);
  return doc.dump();
}

void save_tables(const std::string& path, const std::vector<ParamRef>& params) {
  for (const auto& p : params) {
    if (!all_finite(*p.value)) {
      throw NumericalError("save_tables: non-finite entries in " + p.name);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_tables: cannot write " + path);
  out << tables_to_json(params) << '\n';
}

void load_tables(const std::string& path, const std::vector<ParamRef>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_tables: cannot read " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_tables: invalid JSON in " + path + ": " + e.what());
  }
  if (doc.value("format_version", -1) != kFormatVersion) {
    throw std::runtime_error("load_tables: unsupported format_version in " + path);
  }
  const auto& tables = doc.at("tables");
  for (const auto& p : params) {
    if (!tables.contains(p.name)) {
      throw std::runtime_error("load_tables: missing table " + p.name + " in " + path);
    }
    const auto& t = tables.at(p.name);
    const std::size_t rows = t.at("rows").get<std::size_t>();
    const std::size_t cols = t.at("cols").get<std::size_t>();
    if (rows != p.value->rows || cols != p.value->cols) {
      throw std::runtime_error("load_tables: shape mismatch for " + p.name + " in " + path);
    }
    t.at("data").get_to(p.value->data);
    if (p.value->data.size() != rows * cols) {
      throw std::runtime_error("load_tables: bad data length for " + p.name + " in " + path);
    }
  }
}

}  // namespace sessionrank
