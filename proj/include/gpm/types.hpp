#pragma once

// Schema, dataset container, and serialization for mixed-type observations.
// Continuous cells are plain reals; discrete cells hold category indices in
// [0, cardinality). Category index 0 is the reference category everywhere.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace gpm {

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

enum class VarKind { Continuous, Discrete };

struct VariableSpec {
  std::string name;
  VarKind kind = VarKind::Continuous;
  int cardinality = 0;               // discrete only, >= 2
  std::vector<std::string> codes;    // discrete only, one label per category

  bool operator==(const VariableSpec&) const = default;
};

inline VariableSpec continuous_var(std::string name) {
  return VariableSpec{std::move(name), VarKind::Continuous, 0, {}};
}

inline VariableSpec discrete_var(std::string name, int cardinality) {
  VariableSpec v{std::move(name), VarKind::Discrete, cardinality, {}};
  for (int c = 0; c < cardinality; ++c) v.codes.push_back(std::to_string(c));
  return v;
}

inline VariableSpec discrete_var(std::string name, std::vector<std::string> codes) {
  VariableSpec v{std::move(name), VarKind::Discrete, static_cast<int>(codes.size()),
                 std::move(codes)};
  return v;
}

/// Ordered variable list; the index order is the canonical order used by
/// omega rows/cols and graph vertices.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<VariableSpec> vars) : vars_(std::move(vars)) { validate(); }

  int size() const { return static_cast<int>(vars_.size()); }
  const VariableSpec& var(int i) const { return vars_.at(i); }
  const std::vector<VariableSpec>& vars() const { return vars_; }

  bool is_discrete(int i) const { return vars_.at(i).kind == VarKind::Discrete; }
  bool is_continuous(int i) const { return vars_.at(i).kind == VarKind::Continuous; }
  int cardinality(int i) const { return vars_.at(i).cardinality; }

  std::vector<int> continuous_indices() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (is_continuous(i)) out.push_back(i);
    return out;
  }
  std::vector<int> discrete_indices() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (is_discrete(i)) out.push_back(i);
    return out;
  }

  bool operator==(const Schema&) const = default;

 private:
  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& v : vars_) {
      if (v.name.empty()) throw DataError("schema: empty variable name");
      if (!seen.insert(v.name).second)
        throw DataError("schema: duplicate variable name '" + v.name + "'");
      if (v.kind == VarKind::Discrete) {
        if (v.cardinality < 2)
          throw DataError("schema: variable '" + v.name + "' has cardinality " +
                          std::to_string(v.cardinality) + " (must be >= 2)");
        if (static_cast<int>(v.codes.size()) != v.cardinality)
          throw DataError("schema: variable '" + v.name +
                          "' declares " + std::to_string(v.cardinality) +
                          " categories but lists " + std::to_string(v.codes.size()) +
                          " codes");
        std::unordered_set<std::string> cs(v.codes.begin(), v.codes.end());
        if (cs.size() != v.codes.size())
          throw DataError("schema: variable '" + v.name + "' has duplicate codes");
      }
    }
  }

  std::vector<VariableSpec> vars_;
};

/// n x d table of observations. Discrete cells hold exact category indices
/// stored as doubles. Immutable by convention after validate().
struct Dataset {
  Schema schema;
  Eigen::MatrixXd rows;

  int n() const { return static_cast<int>(rows.rows()); }
  int d() const { return static_cast<int>(rows.cols()); }

  void validate() const {
    if (rows.cols() != schema.size())
      throw DataError("dataset: row width " + std::to_string(rows.cols()) +
                      " does not match schema size " + std::to_string(schema.size()));
    if (n() < 1) throw DataError("dataset: n >= 1 violated");
    for (int i = 0; i < n(); ++i) {
      for (int j = 0; j < d(); ++j) {
        const double v = rows(i, j);
        if (!std::isfinite(v))
          throw DataError("dataset: non-finite value at row " + std::to_string(i + 1) +
                          ", col " + std::to_string(j + 1));
        if (schema.is_discrete(j)) {
          if (v != std::floor(v) || v < 0 || v >= schema.cardinality(j))
            throw DataError("dataset: category index out of range at row " +
                            std::to_string(i + 1) + ", col " + std::to_string(j + 1));
        }
      }
    }
  }
};

struct ColumnTransform {
  double shift = 0.0;
  double scale = 1.0;
};

/// Per-variable shift/scale sufficient to invert standardize().
struct StandardizeRecord {
  std::vector<ColumnTransform> columns;
};

/// Centers every continuous column to mean 0 and population sd 1. Columns
/// with zero variance are centered only (scale recorded as 1). Discrete
/// columns pass through.
inline std::pair<Dataset, StandardizeRecord> standardize(const Dataset& ds) {
  ds.validate();
  Dataset out = ds;
  StandardizeRecord rec;
  rec.columns.resize(ds.d());
  const double n = static_cast<double>(ds.n());
  for (int j = 0; j < ds.d(); ++j) {
    if (ds.schema.is_discrete(j)) continue;
    const double mean = ds.rows.col(j).mean();
    const double var = (ds.rows.col(j).array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    const double scale = sd > 0 ? sd : 1.0;
    rec.columns[j] = {mean, scale};
    out.rows.col(j) = (ds.rows.col(j).array() - mean) / scale;
  }
  return {std::move(out), std::move(rec)};
}

inline Dataset unstandardize(const Dataset& ds, const StandardizeRecord& rec) {
  Dataset out = ds;
  for (int j = 0; j < ds.d(); ++j) {
    const auto& t = rec.columns.at(j);
    if (ds.schema.is_discrete(j)) continue;
    out.rows.col(j) = ds.rows.col(j).array() * t.scale + t.shift;
  }
  return out;
}

namespace detail {

inline std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_type_tag(const std::string& tag, VarKind& kind, int& card) {
  if (tag == "c") {
    kind = VarKind::Continuous;
    card = 0;
    return true;
  }
  if (tag.size() >= 3 && tag[0] == 'd' && tag[1] == ':') {
    for (size_t i = 2; i < tag.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(tag[i]))) return false;
    kind = VarKind::Discrete;
    card = std::stoi(tag.substr(2));
    return true;
  }
  return false;
}

inline double parse_real(const std::string& s, int row, int col) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DataError("dataset: cannot parse '" + s + "' as a real number at row " +
                    std::to_string(row) + ", col " + std::to_string(col));
  }
}

}  // namespace detail

/// CSV layout: one header row of names, one row of type tags ("c" or
/// "d:<M>"), then data. Discrete cells carry the category label.
inline void save_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  for (int j = 0; j < ds.d(); ++j)
    f << (j ? "," : "") << ds.schema.var(j).name;
  f << "\n";
  for (int j = 0; j < ds.d(); ++j) {
    f << (j ? "," : "");
    if (ds.schema.is_discrete(j))
      f << "d:" << ds.schema.cardinality(j);
    else
      f << "c";
  }
  f << "\n";
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.d(); ++j) {
      f << (j ? "," : "");
      if (ds.schema.is_discrete(j))
        f << ds.schema.var(j).codes[static_cast<int>(ds.rows(i, j))];
      else
        f << detail::fmt_full(ds.rows(i, j));
    }
    f << "\n";
  }
}

/// Loads a dataset; when no schema is given, variable kinds come from the
/// type-tag row and discrete codes from first appearance order in the data.
inline Dataset load_dataset_csv(const std::string& path,
                                const std::optional<Schema>& schema = std::nullopt) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open dataset file '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) lines.push_back(line);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 2) throw DataError("dataset: missing header rows in '" + path + "'");

  const auto names = detail::split_csv_line(lines[0]);
  const int d = static_cast<int>(names.size());

  std::vector<VarKind> kinds(d);
  std::vector<int> cards(d, 0);
  size_t first_data = 1;
  bool has_tag_row = false;
  if (lines.size() >= 2) {
    auto tags = detail::split_csv_line(lines[1]);
    if (static_cast<int>(tags.size()) == d) {
      has_tag_row = true;
      for (int j = 0; j < d; ++j) {
        if (!detail::parse_type_tag(tags[j], kinds[j], cards[j])) {
          has_tag_row = false;
          break;
        }
      }
    }
    if (has_tag_row) first_data = 2;
  }

  if (!schema && !has_tag_row)
    throw DataError("dataset: no schema given and no type-tag row in '" + path + "'");

  if (schema) {
    if (schema->size() != d)
      throw DataError("dataset: header has " + std::to_string(d) +
                      " columns but schema declares " + std::to_string(schema->size()));
    for (int j = 0; j < d; ++j) {
      if (schema->var(j).name != names[j])
        throw DataError("dataset: column " + std::to_string(j + 1) + " is named '" +
                        names[j] + "' but schema expects '" + schema->var(j).name + "'");
      if (has_tag_row) {
        const bool want_disc = schema->is_discrete(j);
        const bool got_disc = kinds[j] == VarKind::Discrete;
        if (want_disc != got_disc ||
            (want_disc && cards[j] != schema->cardinality(j)))
          throw DataError("dataset: type tag mismatch for column '" + names[j] + "'");
      }
    }
  }

  const int n = static_cast<int>(lines.size() - first_data);
  if (n < 1) throw DataError("dataset: n >= 1 violated");

  // Discrete code mapping: declared order when a schema is given, otherwise
  // first appearance order in the data.
  std::vector<std::unordered_map<std::string, int>> code_map(d);
  std::vector<std::vector<std::string>> codes(d);
  if (schema) {
    for (int j = 0; j < d; ++j) {
      if (!schema->is_discrete(j)) continue;
      codes[j] = schema->var(j).codes;
      for (int c = 0; c < static_cast<int>(codes[j].size()); ++c)
        code_map[j][codes[j][c]] = c;
    }
  }

  Eigen::MatrixXd rows(n, d);
  for (int i = 0; i < n; ++i) {
    auto cells = detail::split_csv_line(lines[first_data + i]);
    if (static_cast<int>(cells.size()) != d)
      throw DataError("dataset: row " + std::to_string(i + 1) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(d));
    for (int j = 0; j < d; ++j) {
      const bool disc = schema ? schema->is_discrete(j) : kinds[j] == VarKind::Discrete;
      if (cells[j].empty())
        throw DataError("dataset: missing value at row " + std::to_string(i + 1) +
                        ", col " + std::to_string(j + 1));
      if (disc) {
        auto it = code_map[j].find(cells[j]);
        if (it == code_map[j].end()) {
          if (schema)
            throw DataError("dataset: category '" + cells[j] +
                            "' out of declared range at row " + std::to_string(i + 1) +
                            ", col " + std::to_string(j + 1));
          const int card = cards[j];
          if (static_cast<int>(codes[j].size()) >= card)
            throw DataError("dataset: category '" + cells[j] + "' exceeds cardinality " +
                            std::to_string(card) + " at row " + std::to_string(i + 1) +
                            ", col " + std::to_string(j + 1));
          code_map[j][cells[j]] = static_cast<int>(codes[j].size());
          codes[j].push_back(cells[j]);
          it = code_map[j].find(cells[j]);
        }
        rows(i, j) = it->second;
      } else {
        rows(i, j) = detail::parse_real(cells[j], i + 1, j + 1);
      }
    }
  }

  Schema out_schema;
  if (schema) {
    out_schema = *schema;
  } else {
    std::vector<VariableSpec> vs;
    for (int j = 0; j < d; ++j) {
      if (kinds[j] == VarKind::Discrete) {
        if (static_cast<int>(codes[j].size()) != cards[j])
          throw DataError("dataset: column '" + names[j] + "' declares cardinality " +
                          std::to_string(cards[j]) + " but only " +
                          std::to_string(codes[j].size()) + " categories appear");
        vs.push_back(discrete_var(names[j], codes[j]));
      } else {
        vs.push_back(continuous_var(names[j]));
      }
    }
    out_schema = Schema(std::move(vs));
  }

  Dataset ds{std::move(out_schema), std::move(rows)};
  ds.validate();
  return ds;
}

inline nlohmann::json schema_to_json(const Schema& s) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : s.vars()) {
    nlohmann::json jv;
    jv["name"] = v.name;
    if (v.kind == VarKind::Discrete) {
      jv["kind"] = "discrete";
      jv["codes"] = v.codes;
    } else {
      jv["kind"] = "continuous";
    }
    vars.push_back(jv);
  }
  return nlohmann::json{{"vars", vars}};
}

inline Schema schema_from_json(const nlohmann::json& j) {
  std::vector<VariableSpec> vs;
  for (const auto& jv : j.at("vars")) {
    const std::string kind = jv.at("kind").get<std::string>();
    if (kind == "discrete") {
      vs.push_back(discrete_var(jv.at("name").get<std::string>(),
                                jv.at("codes").get<std::vector<std::string>>()));
    } else if (kind == "continuous") {
      vs.push_back(continuous_var(jv.at("name").get<std::string>()));
    } else {
      throw DataError("schema json: unknown kind '" + kind + "'");
    }
  }
  return Schema(std::move(vs));
}

inline nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json j = schema_to_json(ds.schema);
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < ds.n(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int jj = 0; jj < ds.d(); ++jj) {
      if (ds.schema.is_discrete(jj))
        row.push_back(static_cast<int>(ds.rows(i, jj)));
      else
        row.push_back(ds.rows(i, jj));
    }
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j;
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  Schema schema = schema_from_json(j);
  const auto& rows = j.at("rows");
  const int n = static_cast<int>(rows.size());
  if (n < 1) throw DataError("dataset: n >= 1 violated");
  Eigen::MatrixXd m(n, schema.size());
  for (int i = 0; i < n; ++i) {
    const auto& row = rows.at(i);
    if (static_cast<int>(row.size()) != schema.size())
      throw DataError("dataset json: row " + std::to_string(i + 1) + " has wrong width");
    for (int jj = 0; jj < schema.size(); ++jj) m(i, jj) = row.at(jj).get<double>();
  }
  Dataset ds{std::move(schema), std::move(m)};
  ds.validate();
  return ds;
}

}  // namespace gpm
