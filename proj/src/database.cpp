#include "relfeat/database.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "relfeat/csv.hpp"

namespace relfeat {

int Table::column_index(const std::string& col) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == col) return static_cast<int>(i);
    return -1;
}

int Table::designated_time_column() const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].kind == ColumnKind::Timestamp) return static_cast<int>(i);
    return -1;
}

int Database::table_index(const std::string& name) const {
    for (size_t i = 0; i < tables.size(); ++i)
        if (tables[i].name == name) return static_cast<int>(i);
    return -1;
}

std::vector<Cell> Database::target_cells() const {
    std::vector<Cell> out;
    const Table& m = main();
    out.reserve(m.rows.size());
    for (const auto& row : m.rows)
        out.push_back(row[static_cast<size_t>(target_column)]);
    return out;
}

ColumnKind infer_kind(const std::vector<std::string>& raw) {
    size_t non_null = 0;
    bool all_time = true;
    bool all_num = true;
    std::set<std::string> distinct;
    for (const auto& s : raw) {
        if (s.empty()) continue;
        ++non_null;
        if (all_time && !parse_timestamp(s)) all_time = false;
        if (all_num && !parse_number(s)) all_num = false;
        distinct.insert(s);
    }
    if (non_null == 0) return ColumnKind::Ignored;
    if (all_time) return ColumnKind::Timestamp;
    if (all_num) return ColumnKind::Numeric;
    if (static_cast<double>(distinct.size()) <=
        0.5 * static_cast<double>(non_null))
        return ColumnKind::Categorical;
    return ColumnKind::Text;
}

namespace {

Cell typed_cell(const std::string& raw, ColumnKind kind, const std::string& table,
                size_t row, const std::string& col) {
    if (raw.empty()) return Cell::null();
    switch (kind) {
    case ColumnKind::Numeric:
    case ColumnKind::Target: {
        // Target cells keep their raw form unless numeric.
        auto n = parse_number(raw);
        if (n) return Cell::number(*n);
        if (kind == ColumnKind::Numeric)
            throw LoadError(table + " row " + std::to_string(row + 1) + " column " +
                            col + ": cannot parse '" + raw + "' as numeric");
        return Cell::str(raw);
    }
    case ColumnKind::Timestamp:
    case ColumnKind::Cutoff: {
        auto t = parse_timestamp(raw);
        if (!t)
            throw LoadError(table + " row " + std::to_string(row + 1) + " column " +
                            col + ": cannot parse '" + raw + "' as timestamp");
        return Cell::timestamp(*t);
    }
    case ColumnKind::Categorical:
    case ColumnKind::Text:
    case ColumnKind::Key:
        return Cell::str(raw);
    case ColumnKind::Ignored:
        return Cell::null();
    }
    return Cell::null();
}

}  // namespace

Database load_database(const Schema& schema) {
    Database db;
    db.pipeline = schema.pipeline;

    // Kinds forced by structure: declared keys, referenced key endpoints,
    // target and cutoff columns.
    std::map<std::string, std::map<std::string, ColumnKind>> forced;
    for (const auto& fk : schema.foreign_keys) {
        forced[fk.from_table][fk.from_col] = ColumnKind::Key;
        forced[fk.to_table][fk.to_col] = ColumnKind::Key;
    }
    for (const auto& t : schema.tables) {
        for (const auto& [c, k] : t.declared_kinds) {
            if (k == ColumnKind::Key) {
                forced[t.name][c] = ColumnKind::Key;
            } else {
                auto it = forced.find(t.name);
                if (it != forced.end() && it->second.count(c) &&
                    it->second[c] == ColumnKind::Key)
                    throw LoadError("column " + t.name + "." + c +
                                    " is a key endpoint but declared " +
                                    to_string(k));
                forced[t.name][c] = k;
            }
        }
        if (!t.target_column.empty())
            forced[t.name][t.target_column] = ColumnKind::Target;
    }
    if (!schema.pipeline.cutoff_table.empty())
        forced[schema.pipeline.cutoff_table][schema.pipeline.cutoff_column] =
            ColumnKind::Cutoff;

    for (const auto& decl : schema.tables) {
        CsvTable csv = read_csv_file(decl.source);
        Table table;
        table.name = decl.name;
        table.source = decl.source;
        table.is_main = decl.is_main;

        std::set<std::string> header_set(csv.header.begin(), csv.header.end());
        if (header_set.size() != csv.header.size())
            throw LoadError(decl.name + ": duplicate column name in header");
        auto check_declared = [&](const std::string& col) {
            if (!header_set.count(col))
                throw LoadError(decl.name + ": declared column '" + col +
                                "' not present in " + decl.source);
        };
        for (const auto& [c, k] : decl.declared_kinds) check_declared(c);
        if (!decl.target_column.empty()) check_declared(decl.target_column);
        for (const auto& fk : schema.foreign_keys) {
            if (fk.from_table == decl.name) check_declared(fk.from_col);
            if (fk.to_table == decl.name) check_declared(fk.to_col);
        }

        const size_t ncols = csv.header.size();
        for (size_t c = 0; c < ncols; ++c) {
            ColumnDef def;
            def.name = csv.header[c];
            auto ft = forced.find(decl.name);
            const ColumnKind* forced_kind = nullptr;
            if (ft != forced.end()) {
                auto fc = ft->second.find(def.name);
                if (fc != ft->second.end()) forced_kind = &fc->second;
            }
            if (forced_kind) {
                def.kind = *forced_kind;
            } else {
                std::vector<std::string> raw;
                raw.reserve(csv.rows.size());
                for (const auto& r : csv.rows) raw.push_back(r[c]);
                def.kind = infer_kind(raw);
            }
            table.columns.push_back(def);
        }

        table.rows.reserve(csv.rows.size());
        for (size_t r = 0; r < csv.rows.size(); ++r) {
            std::vector<Cell> row;
            row.reserve(ncols);
            for (size_t c = 0; c < ncols; ++c)
                row.push_back(typed_cell(csv.rows[r][c], table.columns[c].kind,
                                         decl.name, r, csv.header[c]));
            table.rows.push_back(std::move(row));
        }
        db.tables.push_back(std::move(table));
    }

    db.main_table = db.table_index(schema.main_table().name);
    db.target_column =
        db.main().column_index(schema.main_table().target_column);
    if (!schema.pipeline.cutoff_table.empty()) {
        int ti = db.table_index(schema.pipeline.cutoff_table);
        db.cutoff_column =
            db.tables[static_cast<size_t>(ti)].column_index(schema.pipeline.cutoff_column);
        if (db.cutoff_column < 0)
            throw LoadError("cutoff column " + schema.pipeline.cutoff_column +
                            " not found in " + schema.pipeline.cutoff_table);
    }

    for (const auto& fk : schema.foreign_keys) {
        ResolvedForeignKey r;
        r.from_table = db.table_index(fk.from_table);
        r.to_table = db.table_index(fk.to_table);
        r.from_col = db.tables[static_cast<size_t>(r.from_table)].column_index(fk.from_col);
        r.to_col = db.tables[static_cast<size_t>(r.to_table)].column_index(fk.to_col);
        if (r.from_col < 0 || r.to_col < 0)
            throw LoadError("foreign key endpoint missing: " + fk.from_table + "." +
                            fk.from_col + " -> " + fk.to_table + "." + fk.to_col);
        r.decl = fk;
        db.foreign_keys.push_back(r);
    }

    const Table& m = db.main();
    for (size_t r = 0; r < m.rows.size(); ++r) {
        if (m.rows[r][static_cast<size_t>(db.target_column)].is_null())
            throw LoadError(m.name + " row " + std::to_string(r + 1) +
                            ": target value is null");
    }
    return db;
}

TargetEncoding encode_target(const Database& db) {
    TargetEncoding enc;
    std::vector<Cell> cells = db.target_cells();
    bool all_numeric = true;
    std::set<std::string> distinct;
    for (const auto& c : cells) {
        if (c.type != ValueType::Number) all_numeric = false;
        if (c.type == ValueType::Number) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", c.num);
            distinct.insert(buf);
        } else {
            distinct.insert(c.text);
        }
    }

    Task task = db.pipeline.task;
    if (task == Task::Auto) {
        task = (all_numeric && distinct.size() > 10) ? Task::Regression
                                                     : Task::Classification;
    }
    enc.task = task;

    if (task == Task::Regression) {
        if (!all_numeric)
            throw LoadError("regression task requires a numeric target");
        for (const auto& c : cells) enc.labels.push_back(c.num);
        return enc;
    }

    std::map<std::string, int> index;
    for (const auto& s : distinct) {
        index[s] = static_cast<int>(enc.class_labels.size());
        enc.class_labels.push_back(s);
    }
    for (const auto& c : cells) {
        std::string key;
        if (c.type == ValueType::Number) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", c.num);
            key = buf;
        } else {
            key = c.text;
        }
        enc.labels.push_back(static_cast<double>(index[key]));
    }
    return enc;
}

}  // namespace relfeat
