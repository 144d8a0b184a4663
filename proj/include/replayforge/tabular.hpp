// Mixed-type tabular datasets: schema, CSV ingestion, and splitting.
//
// Storage is columnar. Continuous cells are doubles; discrete cells hold the
// index of their category in the schema's category list. A dataset may be
// unlabeled (empty target vector), which is how generator samples travel.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "replayforge/common.hpp"

namespace replayforge {

enum class ColumnKind { Continuous, Discrete };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    std::vector<std::string> categories;  // discrete only, frozen order
};

struct Schema {
    std::vector<Column> columns;  // feature columns, in order
    std::string target_name;      // continuous target

    std::size_t n_features() const { return columns.size(); }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].name == name) return i;
        throw SchemaError("unknown column: " + name);
    }

    void validate() const {
        if (target_name.empty()) throw SchemaError("schema has no target column");
        std::vector<std::string> names;
        for (const auto& c : columns) {
            if (c.name.empty()) throw SchemaError("empty column name");
            if (std::find(names.begin(), names.end(), c.name) != names.end())
                throw SchemaError("duplicate column name: " + c.name);
            names.push_back(c.name);
            if (c.kind == ColumnKind::Discrete && c.categories.empty())
                throw SchemaError("discrete column '" + c.name +
                                  "' has no categories");
        }
        if (std::find(names.begin(), names.end(), target_name) != names.end())
            throw SchemaError("target column '" + target_name +
                              "' clashes with a feature column");
    }

    std::size_t category_index(std::size_t col, const std::string& value) const {
        const auto& cats = columns[col].categories;
        for (std::size_t i = 0; i < cats.size(); ++i)
            if (cats[i] == value) return i;
        throw ParseError("unknown category '" + value + "' in column '" +
                         columns[col].name + "'");
    }

    bool operator==(const Schema& other) const {
        if (target_name != other.target_name ||
            columns.size() != other.columns.size())
            return false;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i].name != other.columns[i].name ||
                columns[i].kind != other.columns[i].kind ||
                columns[i].categories != other.columns[i].categories)
                return false;
        }
        return true;
    }
};

struct TabularDataset {
    Schema schema;
    // columns[c][row]; discrete columns store category indices as doubles.
    std::vector<std::vector<double>> columns;
    std::vector<double> targets;  // empty for unlabeled (feature-only) data

    TabularDataset() = default;
    explicit TabularDataset(Schema s) : schema(std::move(s)) {
        columns.resize(schema.columns.size());
    }

    std::size_t n_rows() const { return columns.empty() ? 0 : columns[0].size(); }
    bool labeled() const { return !targets.empty(); }

    std::vector<double> row(std::size_t r) const {
        std::vector<double> out(columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) out[c] = columns[c][r];
        return out;
    }

    void append_row(const std::vector<double>& values) {
        if (values.size() != columns.size())
            throw DimensionError("append_row: expected " +
                                 std::to_string(columns.size()) + " values");
        for (std::size_t c = 0; c < columns.size(); ++c)
            columns[c].push_back(values[c]);
    }

    void append_row(const std::vector<double>& values, double target) {
        append_row(values);
        targets.push_back(target);
    }

    // Schema conformance: discrete values are valid category indices, all
    // values finite, target count matches row count when labeled.
    void validate() const {
        schema.validate();
        if (columns.size() != schema.columns.size())
            throw SchemaError("column storage does not match schema");
        const std::size_t n = n_rows();
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (columns[c].size() != n)
                throw SchemaError("ragged columns in dataset");
            if (schema.columns[c].kind == ColumnKind::Discrete) {
                const double ncats =
                    static_cast<double>(schema.columns[c].categories.size());
                for (double v : columns[c]) {
                    if (v != std::floor(v) || v < 0.0 || v >= ncats)
                        throw SchemaError("invalid category index in column '" +
                                          schema.columns[c].name + "'");
                }
            } else {
                for (double v : columns[c])
                    if (!std::isfinite(v))
                        throw SchemaError("non-finite value in column '" +
                                          schema.columns[c].name + "'");
            }
        }
        if (labeled() && targets.size() != n)
            throw SchemaError("target count does not match row count");
    }

    TabularDataset take(const std::vector<std::size_t>& idx) const {
        TabularDataset out(schema);
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out.columns[c].reserve(idx.size());
            for (std::size_t i : idx) out.columns[c].push_back(columns[c][i]);
        }
        if (labeled()) {
            out.targets.reserve(idx.size());
            for (std::size_t i : idx) out.targets.push_back(targets[i]);
        }
        return out;
    }

    void append_dataset(const TabularDataset& other) {
        if (!(schema == other.schema))
            throw SchemaError("append_dataset: schema mismatch");
        for (std::size_t c = 0; c < columns.size(); ++c)
            columns[c].insert(columns[c].end(), other.columns[c].begin(),
                              other.columns[c].end());
        targets.insert(targets.end(), other.targets.begin(), other.targets.end());
    }

    // Logical storage footprint: 8 bytes per continuous cell and target,
    // 4 bytes per discrete index. Used by the storage accounting.
    std::size_t raw_bytes() const {
        std::size_t per_row = 0;
        for (const auto& col : schema.columns)
            per_row += col.kind == ColumnKind::Continuous ? 8 : 4;
        if (labeled()) per_row += 8;
        return per_row * n_rows();
    }
};

// ---- CSV / schema files -----------------------------------------------------

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

inline double parse_double(const std::string& s, std::size_t row,
                           const std::string& col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(row) + ", column '" + col +
                         "': cannot parse '" + s + "' as a number");
    }
}

}  // namespace detail

// Comma-separated, header row, '.' decimal, no quoting. Rows that violate the
// schema are rejected with their (1-based, header excluded) row index.
inline TabularDataset load_csv(const std::string& path, const Schema& schema) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_line(line, ',');

    // Map each schema column (and the target) to its position in the file.
    std::vector<std::size_t> feature_pos(schema.columns.size());
    std::size_t target_pos = 0;
    auto find_col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw SchemaError(path + ": missing column '" + name + "'");
    };
    for (std::size_t c = 0; c < schema.columns.size(); ++c)
        feature_pos[c] = find_col(schema.columns[c].name);
    target_pos = find_col(schema.target_name);

    TabularDataset ds(schema);
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row_no;
        const auto fields = detail::split_line(line, ',');
        if (fields.size() != header.size())
            throw ParseError(path + ": row " + std::to_string(row_no) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(header.size()));
        std::vector<double> values(schema.columns.size());
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            const std::string& raw = fields[feature_pos[c]];
            if (schema.columns[c].kind == ColumnKind::Discrete) {
                try {
                    values[c] = static_cast<double>(schema.category_index(c, raw));
                } catch (const ParseError& e) {
                    throw ParseError(path + ": row " + std::to_string(row_no) +
                                     ": " + e.what());
                }
            } else {
                values[c] =
                    detail::parse_double(raw, row_no, schema.columns[c].name);
            }
        }
        const double y =
            detail::parse_double(fields[target_pos], row_no, schema.target_name);
        ds.append_row(values, y);
    }
    return ds;
}

inline void save_csv(const TabularDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    for (std::size_t c = 0; c < ds.schema.columns.size(); ++c) {
        if (c) out << ',';
        out << ds.schema.columns[c].name;
    }
    if (ds.labeled()) out << ',' << ds.schema.target_name;
    out << '\n';
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        for (std::size_t c = 0; c < ds.schema.columns.size(); ++c) {
            if (c) out << ',';
            if (ds.schema.columns[c].kind == ColumnKind::Discrete)
                out << ds.schema.columns[c]
                           .categories[static_cast<std::size_t>(ds.columns[c][r])];
            else
                out << ds.columns[c][r];
        }
        if (ds.labeled()) out << ',' << ds.targets[r];
        out << '\n';
    }
}

// Sidecar schema format: one line per column `name,kind[,cat1|cat2|...]`,
// final line `target,<name>`.
inline void save_schema(const Schema& schema, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& col : schema.columns) {
        out << col.name << ','
            << (col.kind == ColumnKind::Continuous ? "continuous" : "discrete");
        if (col.kind == ColumnKind::Discrete) {
            out << ',';
            for (std::size_t i = 0; i < col.categories.size(); ++i) {
                if (i) out << '|';
                out << col.categories[i];
            }
        }
        out << '\n';
    }
    out << "target," << schema.target_name << '\n';
}

inline Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Schema schema;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto fields = detail::split_line(line, ',');
        if (fields.size() < 2)
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": expected `name,kind`");
        if (fields[0] == "target") {
            schema.target_name = fields[1];
            continue;
        }
        Column col;
        col.name = fields[0];
        if (fields[1] == "continuous") {
            col.kind = ColumnKind::Continuous;
        } else if (fields[1] == "discrete") {
            col.kind = ColumnKind::Discrete;
            if (fields.size() < 3)
                throw ParseError(path + ": line " + std::to_string(line_no) +
                                 ": discrete column needs categories");
            col.categories = detail::split_line(fields[2], '|');
        } else {
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": unknown kind '" + fields[1] + "'");
        }
        schema.columns.push_back(col);
    }
    schema.validate();
    return schema;
}

// ---- Split ------------------------------------------------------------------

struct TrainTestSplit {
    TabularDataset train;
    TabularDataset test;
};

// Disjoint random partition; train size is floor(n * fraction).
inline TrainTestSplit split_train_test(const TabularDataset& ds,
                                       double train_fraction, Rng& rng) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DomainError("split_train_test: fraction must be in (0, 1)");
    if (ds.n_rows() == 0)
        throw DomainError("split_train_test: dataset is empty");
    const std::size_t n = ds.n_rows();
    auto perm = rng.permutation(n);
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
    std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + n_train);
    std::vector<std::size_t> test_idx(perm.begin() + n_train, perm.end());
    return {ds.take(train_idx), ds.take(test_idx)};
}

}  // namespace replayforge
