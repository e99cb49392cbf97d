#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relfeat/schema.hpp"
#include "relfeat/value.hpp"

namespace relfeat {

struct Table {
    std::string name;
    std::string source;
    bool is_main = false;
    std::vector<ColumnDef> columns;
    std::vector<std::vector<Cell>> rows;  // rows[r][c], file order preserved

    int column_index(const std::string& name) const;  // -1 when absent
    // First Timestamp-kind column, used for cut-off filtering; -1 when none.
    int designated_time_column() const;
};

struct ResolvedForeignKey {
    int from_table, from_col;
    int to_table, to_col;
    ForeignKey decl;
};

struct Database {
    std::vector<Table> tables;
    std::vector<ResolvedForeignKey> foreign_keys;
    int main_table = -1;
    int target_column = -1;  // in main table
    int cutoff_column = -1;  // in main table, -1 when no cut-off configured
    PipelineConfig pipeline;

    const Table& main() const { return tables[static_cast<size_t>(main_table)]; }
    int table_index(const std::string& name) const;
    size_t example_count() const { return main().rows.size(); }

    // Raw target cells of the main table, in row order.
    std::vector<Cell> target_cells() const;
};

// Per-column kind inference over raw string cells. Declared kinds override;
// the fall-through order is Timestamp, Numeric, Categorical, Text.
ColumnKind infer_kind(const std::vector<std::string>& raw_column);

struct LoadError : std::runtime_error {
    explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

// Loads every table, infers/validates kinds and resolves foreign keys.
// Referential integrity between tables is not required; joins on missing
// keys simply produce no match.
Database load_database(const Schema& schema);

// Label vector plus the resolved task. Classification labels are indices
// into `class_labels` (sorted distinct raw values); regression labels are
// the numeric target.
struct TargetEncoding {
    Task task = Task::Classification;
    std::vector<double> labels;
    std::vector<std::string> class_labels;
};

TargetEncoding encode_target(const Database& db);

}  // namespace relfeat
