// Copyright 2026 The rwsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Microdata tables: one continuous sensitive column, categorical
// pattern/predictor columns and an optional opaque id column.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rwsynth/error.hpp"

namespace rwsynth {

enum class ColumnRole { kId, kPattern, kPredictor, kSensitive };
enum class ColumnKind { kCategorical, kContinuous, kText };

inline std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::kId: return "id";
    case ColumnRole::kPattern: return "pattern";
    case ColumnRole::kPredictor: return "predictor";
    case ColumnRole::kSensitive: return "sensitive";
  }
  return "?";
}

inline std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kContinuous: return "continuous";
    case ColumnKind::kText: return "text";
  }
  return "?";
}

struct Column {
  std::string name;
  ColumnRole role = ColumnRole::kPredictor;
  ColumnKind kind = ColumnKind::kCategorical;
  std::vector<std::string> levels;  // categorical only; code = position

  bool is_categorical() const { return kind == ColumnKind::kCategorical; }
};

/// Column layout of a microdata table. Construct through `Schema::make` or
/// `Schema::from_json`; both validate.
class Schema {
 public:
  Schema() = default;

  static Schema make(std::vector<Column> columns) {
    Schema s;
    s.columns_ = std::move(columns);
    s.validate();
    return s;
  }

  /// {"columns": [{"name": ..., "role": ..., "kind": ..., "levels": [...]}]}
  /// `kind` defaults to categorical when levels are given, continuous for
  /// the sensitive column and text for the id column.
  static Schema from_json(const nlohmann::json& doc) {
    const std::string where = "schema.columns";
    if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array()) {
      throw InputError(where + ": expected an array of column objects");
    }
    std::vector<Column> cols;
    std::size_t k = 0;
    for (const auto& c : doc["columns"]) {
      const std::string path = where + "[" + std::to_string(k++) + "]";
      if (!c.is_object() || !c.contains("name") || !c["name"].is_string()) {
        throw InputError(path + ".name: missing or not a string");
      }
      Column col;
      col.name = c["name"].get<std::string>();
      const std::string role = c.value("role", std::string("predictor"));
      if (role == "id") col.role = ColumnRole::kId;
      else if (role == "pattern") col.role = ColumnRole::kPattern;
      else if (role == "predictor") col.role = ColumnRole::kPredictor;
      else if (role == "sensitive") col.role = ColumnRole::kSensitive;
      else throw InputError(path + ".role: unknown role '" + role + "'");
      if (c.contains("levels")) {
        if (!c["levels"].is_array()) throw InputError(path + ".levels: expected array");
        for (const auto& lv : c["levels"]) {
          if (!lv.is_string()) throw InputError(path + ".levels: levels must be strings");
          col.levels.push_back(lv.get<std::string>());
        }
      }
      std::string kind;
      if (c.contains("kind")) {
        kind = c["kind"].get<std::string>();
      } else if (col.role == ColumnRole::kSensitive) {
        kind = "continuous";
      } else if (col.role == ColumnRole::kId) {
        kind = "text";
      } else {
        kind = "categorical";
      }
      if (kind == "categorical") col.kind = ColumnKind::kCategorical;
      else if (kind == "continuous") col.kind = ColumnKind::kContinuous;
      else if (kind == "text") col.kind = ColumnKind::kText;
      else throw InputError(path + ".kind: unknown kind '" + kind + "'");
      cols.push_back(std::move(col));
    }
    try {
      return make(std::move(cols));
    } catch (const InputError& e) {
      throw InputError("schema: " + std::string(e.what()));
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json cols = nlohmann::ordered_json::array();
    for (const auto& c : columns_) {
      nlohmann::ordered_json j;
      j["name"] = c.name;
      j["role"] = to_string(c.role);
      j["kind"] = to_string(c.kind);
      if (c.is_categorical()) j["levels"] = c.levels;
      cols.push_back(std::move(j));
    }
    nlohmann::ordered_json doc;
    doc["columns"] = std::move(cols);
    return doc;
  }

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  const Column& column(std::size_t i) const { return columns_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].name == name) return i;
    }
    return std::nullopt;
  }

  std::size_t index_of(std::string_view name) const {
    auto i = find(name);
    if (!i) throw InputError("unknown column '" + std::string(name) + "'");
    return *i;
  }

  std::size_t sensitive_index() const { return sensitive_; }
  std::optional<std::size_t> id_index() const { return id_; }

  std::vector<std::string> pattern_columns() const {
    std::vector<std::string> out;
    for (const auto& c : columns_) {
      if (c.role == ColumnRole::kPattern) out.push_back(c.name);
    }
    return out;
  }

  friend bool operator==(const Schema& a, const Schema& b) {
    if (a.columns_.size() != b.columns_.size()) return false;
    for (std::size_t i = 0; i < a.columns_.size(); ++i) {
      const auto& x = a.columns_[i];
      const auto& y = b.columns_[i];
      if (x.name != y.name || x.role != y.role || x.kind != y.kind || x.levels != y.levels) {
        return false;
      }
    }
    return true;
  }

 private:
  void validate() {
    std::unordered_set<std::string> names;
    std::size_t n_sensitive = 0;
    std::size_t n_pattern = 0;
    id_.reset();
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const auto& c = columns_[i];
      if (c.name.empty()) throw InputError("column " + std::to_string(i) + " has an empty name");
      if (!names.insert(c.name).second) throw InputError("duplicate column '" + c.name + "'");
      switch (c.role) {
        case ColumnRole::kSensitive:
          if (c.kind != ColumnKind::kContinuous) {
            throw InputError("sensitive column '" + c.name + "' must be continuous");
          }
          sensitive_ = i;
          ++n_sensitive;
          break;
        case ColumnRole::kId:
          if (id_) throw InputError("more than one id column");
          id_ = i;
          break;
        case ColumnRole::kPattern:
          ++n_pattern;
          [[fallthrough]];
        case ColumnRole::kPredictor:
          if (c.kind != ColumnKind::kCategorical) {
            throw InputError("column '" + c.name + "' must be categorical");
          }
          break;
      }
      if (c.is_categorical()) {
        if (c.levels.empty()) throw InputError("column '" + c.name + "' has no levels");
        std::unordered_set<std::string> lv(c.levels.begin(), c.levels.end());
        if (lv.size() != c.levels.size()) {
          throw InputError("column '" + c.name + "' has duplicate levels");
        }
      }
    }
    if (n_sensitive != 1) throw InputError("schema needs exactly one sensitive column");
    if (n_pattern == 0) throw InputError("schema needs at least one pattern column");
  }

  std::vector<Column> columns_;
  std::size_t sensitive_ = 0;
  std::optional<std::size_t> id_;
};

/// One microdata row. `codes` is indexed by schema column; entries of
/// non-categorical columns are -1.
struct Record {
  std::size_t id = 0;
  std::vector<int> codes;
  double y = 0.0;
};

/// Immutable after construction; ids are exactly 0..n-1 in file order.
class Dataset {
 public:
  Dataset(Schema schema, std::vector<Record> records,
          std::vector<std::string> id_labels = {})
      : schema_(std::move(schema)),
        records_(std::move(records)),
        id_labels_(std::move(id_labels)) {
    if (records_.empty()) throw InputError("empty table");
    for (std::size_t i = 0; i < records_.size(); ++i) {
      auto& r = records_[i];
      if (r.id != i) throw InputError("record ids must be dense 0..n-1");
      if (r.codes.size() != schema_.size()) {
        throw InputError("record " + std::to_string(i) + " has wrong column count");
      }
      for (std::size_t c = 0; c < schema_.size(); ++c) {
        const auto& col = schema_.column(c);
        if (col.is_categorical()) {
          if (r.codes[c] < 0 || r.codes[c] >= static_cast<int>(col.levels.size())) {
            throw InputError("record " + std::to_string(i) + ": code out of range in " + col.name);
          }
        } else {
          r.codes[c] = -1;
        }
      }
      if (!std::isfinite(r.y)) throw InputError("record " + std::to_string(i) + ": non-finite y");
    }
    if (!id_labels_.empty() && id_labels_.size() != records_.size()) {
      throw InputError("id label count does not match record count");
    }
  }

  const Schema& schema() const { return schema_; }
  const std::vector<Record>& records() const { return records_; }
  const Record& record(std::size_t i) const { return records_.at(i); }
  std::size_t n() const { return records_.size(); }
  const std::vector<std::string>& id_labels() const { return id_labels_; }

  std::vector<double> y() const {
    std::vector<double> out(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) out[i] = records_[i].y;
    return out;
  }

  int code(std::size_t record, std::size_t column) const {
    return records_[record].codes[column];
  }

  /// Partial synthesis: same table with the sensitive column replaced.
  Dataset with_sensitive(const std::vector<double>& y) const {
    if (y.size() != records_.size()) {
      throw InputError("replacement sensitive column has wrong length");
    }
    std::vector<Record> recs = records_;
    for (std::size_t i = 0; i < recs.size(); ++i) recs[i].y = y[i];
    return Dataset(schema_, std::move(recs), id_labels_);
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    if (!(a.schema_ == b.schema_) || a.id_labels_ != b.id_labels_ ||
        a.records_.size() != b.records_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.records_.size(); ++i) {
      if (a.records_[i].codes != b.records_[i].codes || a.records_[i].y != b.records_[i].y) {
        return false;
      }
    }
    return true;
  }

 private:
  Schema schema_;
  std::vector<Record> records_;
  std::vector<std::string> id_labels_;
};

namespace csv {

/// Splits one delimited line; double quotes protect delimiters and "" is an
/// escaped quote.
inline std::vector<std::string> split_line(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string quote_if_needed(const std::string& field, char delim) {
  if (field.find_first_of(std::string{delim, '"', '\n', '\r'}) == std::string::npos) {
    return field;
  }
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += '"';
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace csv

struct CsvOptions {
  char delimiter = ',';
};

/// Parses a delimited table. Extra columns not named in the schema are
/// ignored; errors name the data row (1-based, header excluded) and column.
inline Dataset parse_dataset(std::istream& in, const Schema& schema,
                             const CsvOptions& opts = {}) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty table: missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  auto header = csv::split_line(line, opts.delimiter);
  for (auto& h : header) h = csv::trim(h);
  std::vector<std::size_t> file_col(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), schema.column(c).name);
    if (it == header.end()) {
      throw InputError("missing column '" + schema.column(c).name + "' in header");
    }
    file_col[c] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<std::unordered_map<std::string, int>> level_maps(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& col = schema.column(c);
    for (std::size_t l = 0; l < col.levels.size(); ++l) {
      level_maps[c].emplace(col.levels[l], static_cast<int>(l));
    }
  }
  const auto id_col = schema.id_index();
  std::vector<Record> records;
  std::vector<std::string> id_labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    auto cells = csv::split_line(line, opts.delimiter);
    auto where = [&](std::size_t c) {
      return "row " + std::to_string(row) + ", column " + schema.column(c).name;
    };
    Record rec;
    rec.id = records.size();
    rec.codes.assign(schema.size(), -1);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (file_col[c] >= cells.size()) throw InputError(where(c) + ": missing cell");
      const std::string cell = csv::trim(cells[file_col[c]]);
      const auto& col = schema.column(c);
      switch (col.kind) {
        case ColumnKind::kCategorical: {
          auto it = level_maps[c].find(cell);
          if (it == level_maps[c].end()) {
            throw InputError(where(c) + ": unknown level '" + cell + "'");
          }
          rec.codes[c] = it->second;
          break;
        }
        case ColumnKind::kContinuous: {
          auto v = csv::parse_double(cell);
          if (!v || !std::isfinite(*v)) {
            throw InputError(where(c) + ": non-numeric value '" + cell + "'");
          }
          rec.y = *v;
          break;
        }
        case ColumnKind::kText:
          if (id_col && *id_col == c) id_labels.push_back(cell);
          break;
      }
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw InputError("empty table");
  return Dataset(schema, std::move(records), std::move(id_labels));
}

inline Dataset load_dataset(const std::string& path, const Schema& schema,
                            const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return parse_dataset(in, schema, opts);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void write_dataset(std::ostream& out, const Dataset& ds, const CsvOptions& opts = {}) {
  const auto& schema = ds.schema();
  const auto id_col = schema.id_index();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c) out << opts.delimiter;
    out << csv::quote_if_needed(schema.column(c).name, opts.delimiter);
  }
  out << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto& rec = ds.record(i);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) out << opts.delimiter;
      const auto& col = schema.column(c);
      switch (col.kind) {
        case ColumnKind::kCategorical:
          out << csv::quote_if_needed(col.levels[static_cast<std::size_t>(rec.codes[c])],
                                      opts.delimiter);
          break;
        case ColumnKind::kContinuous:
          out << csv::format_double(rec.y);
          break;
        case ColumnKind::kText:
          if (id_col && *id_col == c && !ds.id_labels().empty()) {
            out << csv::quote_if_needed(ds.id_labels()[i], opts.delimiter);
          } else {
            out << i;
          }
          break;
      }
    }
    out << '\n';
  }
}

inline void save_dataset(const std::string& path, const Dataset& ds, const CsvOptions& opts = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_dataset(out, ds, opts);
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Partition of record ids by the joint value of the intruder-known
/// categorical columns. Groups are ordered by key; members ascend.
class PatternIndex {
 public:
  struct Group {
    std::vector<int> key;
    std::vector<std::size_t> members;
  };

  PatternIndex() = default;

  const std::vector<std::string>& pattern_vars() const { return vars_; }
  const std::vector<Group>& groups() const { return groups_; }
  std::size_t group_count() const { return groups_.size(); }
  std::size_t group_of(std::size_t record) const { return membership_.at(record); }
  const Group& group_for(std::size_t record) const { return groups_[group_of(record)]; }
  std::size_t group_size_of(std::size_t record) const {
    return groups_[group_of(record)].members.size();
  }
  std::size_t n() const { return membership_.size(); }

  std::vector<std::size_t> singleton_records() const {
    std::vector<std::size_t> out;
    for (const auto& g : groups_) {
      if (g.members.size() == 1) out.push_back(g.members.front());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Pattern-column indices into the schema, in pattern_vars order.
  const std::vector<std::size_t>& columns() const { return cols_; }

 private:
  friend PatternIndex build_pattern_index(const Dataset&, const std::vector<std::string>&);

  std::vector<std::string> vars_;
  std::vector<std::size_t> cols_;
  std::vector<Group> groups_;
  std::vector<std::size_t> membership_;
};

inline PatternIndex build_pattern_index(const Dataset& ds,
                                        const std::vector<std::string>& pattern_vars) {
  if (pattern_vars.empty()) throw InputError("pattern_vars must not be empty");
  PatternIndex idx;
  idx.vars_ = pattern_vars;
  for (const auto& v : pattern_vars) {
    auto c = ds.schema().find(v);
    if (!c) throw InputError("pattern variable '" + v + "' is not a column");
    if (!ds.schema().column(*c).is_categorical()) {
      throw InputError("pattern variable '" + v + "' is not categorical");
    }
    idx.cols_.push_back(*c);
  }
  std::map<std::vector<int>, std::vector<std::size_t>> by_key;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    std::vector<int> key;
    key.reserve(idx.cols_.size());
    for (auto c : idx.cols_) key.push_back(ds.code(i, c));
    by_key[std::move(key)].push_back(i);
  }
  idx.membership_.assign(ds.n(), 0);
  std::size_t covered = 0;
  for (auto& [key, members] : by_key) {
    const std::size_t g = idx.groups_.size();
    for (auto m : members) idx.membership_[m] = g;
    covered += members.size();
    idx.groups_.push_back({key, std::move(members)});
  }
  if (covered != ds.n()) throw std::logic_error("pattern groups do not partition the records");
  return idx;
}

enum class NegativeCenterPolicy { kAbsoluteRadius, kReject };

/// Closeness ball: radius = r * max(|center|, zero_center_epsilon).
struct BallConfig {
  double r = 0.2;
  NegativeCenterPolicy negative_center_policy = NegativeCenterPolicy::kAbsoluteRadius;
  double zero_center_epsilon = 0.0;

  void validate() const {
    if (!(r > 0.0) || !std::isfinite(r)) throw InputError("ball.r must be positive");
    if (!(zero_center_epsilon >= 0.0)) {
      throw InputError("ball.zero_center_epsilon must be >= 0");
    }
  }

  double radius(double center) const {
    if (center < 0.0 && negative_center_policy == NegativeCenterPolicy::kReject) {
      throw InputError("negative ball center " + csv::format_double(center) +
                       " under the reject policy");
    }
    return r * std::max(std::abs(center), zero_center_epsilon);
  }
};

/// Inclusive boundary: |y_h - y_center| <= radius.
inline bool in_ball(double y_h, double y_center, const BallConfig& cfg) {
  return std::abs(y_h - y_center) <= cfg.radius(y_center);
}

}  // namespace rwsynth
