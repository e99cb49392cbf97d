#include "relfeat/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <set>

#include "relfeat/csv.hpp"
#include "relfeat/value.hpp"

namespace relfeat {

const char* to_string(ColumnKind k) {
    switch (k) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Timestamp: return "timestamp";
    case ColumnKind::Text: return "text";
    case ColumnKind::Key: return "key";
    case ColumnKind::Target: return "target";
    case ColumnKind::Cutoff: return "cutoff";
    case ColumnKind::Ignored: return "ignored";
    }
    return "?";
}

std::optional<ColumnKind> column_kind_from_string(const std::string& s) {
    if (s == "numeric") return ColumnKind::Numeric;
    if (s == "categorical") return ColumnKind::Categorical;
    if (s == "timestamp") return ColumnKind::Timestamp;
    if (s == "text") return ColumnKind::Text;
    if (s == "key") return ColumnKind::Key;
    if (s == "ignored") return ColumnKind::Ignored;
    return std::nullopt;
}

const char* to_string(PathStrategy s) {
    switch (s) {
    case PathStrategy::Simple: return "simple";
    case PathStrategy::ForwardOnly: return "forward_only";
    case PathStrategy::All: return "all";
    }
    return "?";
}

std::optional<PathStrategy> strategy_from_string(const std::string& s) {
    if (s == "simple") return PathStrategy::Simple;
    if (s == "forward_only") return PathStrategy::ForwardOnly;
    if (s == "all") return PathStrategy::All;
    return std::nullopt;
}

const TableDecl& Schema::main_table() const {
    for (const auto& t : tables)
        if (t.is_main) return t;
    throw SchemaError("no main table");
}

const TableDecl* Schema::find_table(const std::string& name) const {
    for (const auto& t : tables)
        if (t.name == name) return &t;
    return nullptr;
}

namespace {

struct Line {
    size_t number;
    std::string text;
};

[[noreturn]] void fail(size_t line, const std::string& msg) {
    throw SchemaError("schema config line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& s) {
    bool seen_char = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '#' && (!seen_char || s[i - 1] == ' ' || s[i - 1] == '\t'))
            return s.substr(0, i);
        if (s[i] != ' ' && s[i] != '\t') seen_char = true;
    }
    return s;
}

bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
            return false;
    }
    return true;
}

// "table.Column" -> pair
std::pair<std::string, std::string> split_qualified(const std::string& s,
                                                    size_t line) {
    size_t dot = s.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == s.size())
        fail(line, "expected table.column, got '" + s + "'");
    return {s.substr(0, dot), s.substr(dot + 1)};
}

int64_t parse_int_value(const std::string& v, size_t line) {
    int64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        fail(line, "expected integer, got '" + v + "'");
    return out;
}

double parse_real_value(const std::string& v, size_t line) {
    auto d = parse_number(v);
    if (!d) fail(line, "expected number, got '" + v + "'");
    return *d;
}

}  // namespace

Schema parse_schema(const std::string& config_text, const std::string& base_dir) {
    Schema schema;
    std::vector<Line> lines;
    {
        size_t number = 1;
        size_t start = 0;
        while (start <= config_text.size()) {
            size_t nl = config_text.find('\n', start);
            size_t end = nl == std::string::npos ? config_text.size() : nl;
            std::string raw = config_text.substr(start, end - start);
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
            std::string text = trim(strip_comment(raw));
            if (!text.empty()) lines.push_back({number, text});
            if (nl == std::string::npos) break;
            start = nl + 1;
            ++number;
        }
    }

    enum class Section { None, Table, Pipeline };
    Section section = Section::None;
    TableDecl* current = nullptr;
    bool saw_pipeline = false;
    size_t target_count = 0;

    for (const auto& ln : lines) {
        const std::string& s = ln.text;
        if (s.front() == '[') {
            if (s.back() != ']') fail(ln.number, "unterminated section header");
            std::string inner = trim(s.substr(1, s.size() - 2));
            if (inner == "pipeline") {
                if (saw_pipeline) fail(ln.number, "duplicate [pipeline] section");
                saw_pipeline = true;
                section = Section::Pipeline;
                current = nullptr;
                continue;
            }
            if (inner.rfind("table ", 0) == 0) {
                std::string name = trim(inner.substr(6));
                if (!valid_identifier(name))
                    fail(ln.number, "invalid table name '" + name + "'");
                for (const auto& t : schema.tables)
                    if (t.name == name)
                        fail(ln.number, "duplicate table name '" + name + "'");
                schema.tables.push_back(TableDecl{});
                schema.tables.back().name = name;
                current = &schema.tables.back();
                section = Section::Table;
                continue;
            }
            fail(ln.number, "unknown section '[" + inner + "]'");
        }

        // Foreign keys use arrow syntax: key COL -> table.col
        if (section == Section::Table && s.rfind("key ", 0) == 0) {
            size_t arrow = s.find("->");
            if (arrow == std::string::npos)
                fail(ln.number, "expected key COL -> table.column");
            std::string col = trim(s.substr(4, arrow - 4));
            std::string target = trim(s.substr(arrow + 2));
            if (!valid_identifier(col)) fail(ln.number, "bad column name '" + col + "'");
            auto [to_table, to_col] = split_qualified(target, ln.number);
            current->keys.push_back(ForeignKey{current->name, col, to_table, to_col});
            continue;
        }

        size_t eq = s.find('=');
        if (eq == std::string::npos) fail(ln.number, "expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty() || value.empty()) fail(ln.number, "expected key = value");

        if (section == Section::Table) {
            if (key == "file") {
                std::filesystem::path p(value);
                if (p.is_relative() && !base_dir.empty())
                    p = std::filesystem::path(base_dir) / p;
                current->source = p.lexically_normal().string();
            } else if (key == "main") {
                if (value == "true") current->is_main = true;
                else if (value == "false") current->is_main = false;
                else fail(ln.number, "main expects true or false");
            } else if (key == "target") {
                if (!current->target_column.empty() || !valid_identifier(value))
                    fail(ln.number, "bad target declaration");
                current->target_column = value;
                ++target_count;
            } else if (key.rfind("type ", 0) == 0) {
                std::string col = trim(key.substr(5));
                if (!valid_identifier(col)) fail(ln.number, "bad column name '" + col + "'");
                auto kind = column_kind_from_string(value);
                if (!kind) fail(ln.number, "unknown column type '" + value + "'");
                for (const auto& [c, k] : current->declared_kinds)
                    if (c == col) fail(ln.number, "duplicate type for column '" + col + "'");
                current->declared_kinds.emplace_back(col, *kind);
            } else {
                fail(ln.number, "unknown key '" + key + "' in table section");
            }
        } else if (section == Section::Pipeline) {
            PipelineConfig& p = schema.pipeline;
            if (key == "strategy") {
                auto st = strategy_from_string(value);
                if (!st) fail(ln.number, "unknown strategy '" + value + "'");
                p.strategy = *st;
            } else if (key == "max_depth") {
                p.max_depth = static_cast<int>(parse_int_value(value, ln.number));
                if (p.max_depth < 1) fail(ln.number, "max_depth must be >= 1");
            } else if (key == "seed") {
                p.seed = static_cast<uint64_t>(parse_int_value(value, ln.number));
            } else if (key == "cutoff") {
                auto [t, c] = split_qualified(value, ln.number);
                p.cutoff_table = t;
                p.cutoff_column = c;
            } else if (key == "time_source") {
                auto [t, c] = split_qualified(value, ln.number);
                p.time_source_table = t;
                p.time_source_column = c;
            } else if (key == "task") {
                if (value == "classification") p.task = Task::Classification;
                else if (value == "regression") p.task = Task::Regression;
                else if (value == "auto") p.task = Task::Auto;
                else fail(ln.number, "unknown task '" + value + "'");
            } else if (key == "rules") {
                if (value != "onebm" && value != "dfs" && value != "both")
                    fail(ln.number, "rules expects onebm, dfs or both");
                p.rules = value;
            } else if (key == "recent_k") {
                p.recent_k = static_cast<int>(parse_int_value(value, ln.number));
                if (p.recent_k < 0) fail(ln.number, "recent_k must be >= 0");
            } else if (key == "top_items") {
                p.top_items = static_cast<int>(parse_int_value(value, ln.number));
                if (p.top_items < 0) fail(ln.number, "top_items must be >= 0");
            } else if (key == "min_correlation") {
                p.min_correlation = parse_real_value(value, ln.number);
            } else if (key == "min_info_gain") {
                p.min_info_gain = parse_real_value(value, ln.number);
            } else if (key == "max_joined_size") {
                p.max_joined_size = parse_int_value(value, ln.number);
                if (p.max_joined_size < 1) fail(ln.number, "max_joined_size must be >= 1");
            } else {
                fail(ln.number, "unknown key '" + key + "' in pipeline section");
            }
        } else {
            fail(ln.number, "entry outside any section");
        }
    }

    // Cross-checks over the assembled declaration.
    size_t main_count = 0;
    for (const auto& t : schema.tables) {
        if (t.is_main) ++main_count;
        if (t.source.empty())
            throw SchemaError("table '" + t.name + "' declares no file");
    }
    if (main_count == 0) throw SchemaError("no main table");
    if (main_count > 1) throw SchemaError("more than one main table");
    if (target_count == 0) throw SchemaError("no target column declared");
    if (target_count > 1) throw SchemaError("more than one target column declared");
    if (schema.main_table().target_column.empty())
        throw SchemaError("target column must be declared on the main table");

    for (auto& t : schema.tables) {
        std::set<std::string> cols;
        for (const auto& [c, k] : t.declared_kinds) cols.insert(c);
        for (const auto& fk : t.keys) {
            if (!schema.find_table(fk.to_table))
                throw SchemaError("dangling key reference: " + fk.from_table + "." +
                                  fk.from_col + " -> nonexistent table '" +
                                  fk.to_table + "'");
            schema.foreign_keys.push_back(fk);
        }
    }
    if (!schema.pipeline.cutoff_table.empty()) {
        if (!schema.find_table(schema.pipeline.cutoff_table))
            throw SchemaError("cutoff references nonexistent table '" +
                              schema.pipeline.cutoff_table + "'");
        if (!schema.find_table(schema.pipeline.cutoff_table)->is_main)
            throw SchemaError("cutoff column must live in the main table");
    }
    if (!schema.pipeline.time_source_table.empty() &&
        !schema.find_table(schema.pipeline.time_source_table))
        throw SchemaError("time_source references nonexistent table '" +
                          schema.pipeline.time_source_table + "'");
    return schema;
}

Schema parse_schema_file(const std::string& path) {
    std::filesystem::path p(path);
    return parse_schema(read_file(path), p.parent_path().string());
}

std::string render_schema(const Schema& schema) {
    std::string out;
    char buf[64];
    for (const auto& t : schema.tables) {
        out += "[table " + t.name + "]\n";
        out += "file = " + t.source + "\n";
        if (t.is_main) out += "main = true\n";
        if (!t.target_column.empty()) out += "target = " + t.target_column + "\n";
        for (const auto& fk : t.keys)
            out += "key " + fk.from_col + " -> " + fk.to_table + "." + fk.to_col + "\n";
        for (const auto& [c, k] : t.declared_kinds)
            out += "type " + c + " = " + to_string(k) + "\n";
    }
    const PipelineConfig& p = schema.pipeline;
    out += "[pipeline]\n";
    out += std::string("strategy = ") + to_string(p.strategy) + "\n";
    out += "max_depth = " + std::to_string(p.max_depth) + "\n";
    out += "seed = " + std::to_string(p.seed) + "\n";
    if (p.task == Task::Classification) out += "task = classification\n";
    if (p.task == Task::Regression) out += "task = regression\n";
    if (!p.cutoff_table.empty())
        out += "cutoff = " + p.cutoff_table + "." + p.cutoff_column + "\n";
    if (!p.time_source_table.empty())
        out += "time_source = " + p.time_source_table + "." + p.time_source_column + "\n";
    if (p.rules != "onebm") out += "rules = " + p.rules + "\n";
    out += "recent_k = " + std::to_string(p.recent_k) + "\n";
    out += "top_items = " + std::to_string(p.top_items) + "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", p.min_correlation);
    out += std::string("min_correlation = ") + buf + "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", p.min_info_gain);
    out += std::string("min_info_gain = ") + buf + "\n";
    out += "max_joined_size = " + std::to_string(p.max_joined_size) + "\n";
    return out;
}

bool operator==(const Schema& a, const Schema& b) {
    auto tbl_eq = [](const TableDecl& x, const TableDecl& y) {
        auto keys_eq = [](const ForeignKey& f, const ForeignKey& g) {
            return f.from_table == g.from_table && f.from_col == g.from_col &&
                   f.to_table == g.to_table && f.to_col == g.to_col;
        };
        if (x.keys.size() != y.keys.size()) return false;
        for (size_t i = 0; i < x.keys.size(); ++i)
            if (!keys_eq(x.keys[i], y.keys[i])) return false;
        return x.name == y.name && x.source == y.source && x.is_main == y.is_main &&
               x.target_column == y.target_column &&
               x.declared_kinds == y.declared_kinds;
    };
    if (a.tables.size() != b.tables.size()) return false;
    for (size_t i = 0; i < a.tables.size(); ++i)
        if (!tbl_eq(a.tables[i], b.tables[i])) return false;
    const PipelineConfig& p = a.pipeline;
    const PipelineConfig& q = b.pipeline;
    return p.strategy == q.strategy && p.max_depth == q.max_depth &&
           p.seed == q.seed && p.task == q.task && p.cutoff_table == q.cutoff_table &&
           p.cutoff_column == q.cutoff_column &&
           p.time_source_table == q.time_source_table &&
           p.time_source_column == q.time_source_column && p.rules == q.rules &&
           p.recent_k == q.recent_k && p.top_items == q.top_items &&
           p.min_correlation == q.min_correlation &&
           p.min_info_gain == q.min_info_gain &&
           p.max_joined_size == q.max_joined_size;
}

}  // namespace relfeat
