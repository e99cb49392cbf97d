#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace relfeat {

// RFC-4180 CSV content: header row plus data records. Quoted fields may
// contain commas, escaped quotes ("") and newlines.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::string_view content, const std::string& origin);
CsvTable read_csv_file(const std::string& path);

std::string csv_escape(const std::string& field);
void write_csv_row(std::string& out, const std::vector<std::string>& fields);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace relfeat
