#include "relfeat/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace relfeat {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write: " + path);
}

CsvTable parse_csv(std::string_view content, const std::string& origin) {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    size_t line = 1;

    auto end_field = [&]() {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&]() {
        end_field();
        if (table.header.empty()) {
            table.header = std::move(record);
        } else {
            if (record.size() != table.header.size()) {
                throw std::runtime_error(origin + ": line " + std::to_string(line) +
                                         ": expected " +
                                         std::to_string(table.header.size()) +
                                         " fields, got " +
                                         std::to_string(record.size()));
            }
            table.rows.push_back(std::move(record));
        }
        record.clear();
    };

    size_t i = 0;
    const size_t n = content.size();
    while (i < n) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started && field.empty()) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            // swallowed; CRLF handled at '\n'
        } else if (c == '\n') {
            end_record();
            ++line;
        } else {
            field.push_back(c);
            field_started = true;
        }
        ++i;
    }
    if (in_quotes) throw std::runtime_error(origin + ": unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    if (table.header.empty()) throw std::runtime_error(origin + ": missing header row");
    return table;
}

CsvTable read_csv_file(const std::string& path) {
    return parse_csv(read_file(path), path);
}

std::string csv_escape(const std::string& field) {
    bool needs_quote = field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quote) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_csv_row(std::string& out, const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_escape(fields[i]);
    }
    out.push_back('\n');
}

}  // namespace relfeat
