#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace relfeat {

enum class ColumnKind : uint8_t {
    Numeric,
    Categorical,
    Timestamp,
    Text,
    Key,
    Target,
    Cutoff,
    Ignored,
};

const char* to_string(ColumnKind k);
std::optional<ColumnKind> column_kind_from_string(const std::string& s);

enum class PathStrategy : uint8_t { Simple, ForwardOnly, All };
const char* to_string(PathStrategy s);
std::optional<PathStrategy> strategy_from_string(const std::string& s);

enum class Task : uint8_t { Auto, Classification, Regression };

struct ColumnDef {
    std::string name;
    ColumnKind kind = ColumnKind::Text;
};

struct ForeignKey {
    std::string from_table;
    std::string from_col;
    std::string to_table;
    std::string to_col;
};

struct TableDecl {
    std::string name;
    std::string source;  // resolved csv path
    bool is_main = false;
    std::string target_column;                       // main table only
    std::vector<std::pair<std::string, ColumnKind>> declared_kinds;
    std::vector<ForeignKey> keys;  // declared in this table's section
};

// Pipeline defaults follow the published parameter table; overridable here
// and by CLI flags.
struct PipelineConfig {
    PathStrategy strategy = PathStrategy::ForwardOnly;
    int max_depth = 3;
    uint64_t seed = 42;
    Task task = Task::Auto;
    std::string cutoff_table;   // empty when no cut-off configured
    std::string cutoff_column;
    std::string time_source_table;   // optional override for collection order
    std::string time_source_column;
    std::string rules = "onebm";  // onebm | dfs | both
    int recent_k = 10;
    int top_items = 10;
    double min_correlation = 1e-16;
    double min_info_gain = 1e-16;
    int64_t max_joined_size = 1000000000;
};

struct Schema {
    std::vector<TableDecl> tables;
    std::vector<ForeignKey> foreign_keys;  // all, in declaration order
    PipelineConfig pipeline;

    const TableDecl& main_table() const;
    const TableDecl* find_table(const std::string& name) const;
};

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Parses the line-oriented schema config. Relative `file =` paths are
// resolved against base_dir. Unknown sections or keys are hard errors, each
// reported with its line number.
Schema parse_schema(const std::string& config_text, const std::string& base_dir);
Schema parse_schema_file(const std::string& path);

// Inverse of parse_schema up to formatting: parse_schema(render_schema(s))
// yields an equal Schema.
std::string render_schema(const Schema& schema);

bool operator==(const Schema& a, const Schema& b);

}  // namespace relfeat
