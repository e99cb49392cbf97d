#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relfeat {

// A cell holds one typed value from a loaded table. Null is the empty cell.
enum class ValueType : uint8_t { Null, Number, Text, Time };

struct Cell {
    ValueType type = ValueType::Null;
    double num = 0.0;   // ValueType::Number
    int64_t time = 0;   // ValueType::Time, seconds since epoch, UTC
    std::string text;   // ValueType::Text and raw form of keys

    bool is_null() const { return type == ValueType::Null; }

    static Cell null() { return Cell{}; }
    static Cell number(double v) {
        Cell c;
        c.type = ValueType::Number;
        c.num = v;
        return c;
    }
    static Cell str(std::string v) {
        Cell c;
        c.type = ValueType::Text;
        c.text = std::move(v);
        return c;
    }
    static Cell timestamp(int64_t seconds) {
        Cell c;
        c.type = ValueType::Time;
        c.time = seconds;
        return c;
    }

    bool operator==(const Cell& o) const {
        if (type != o.type) return false;
        switch (type) {
        case ValueType::Null: return true;
        case ValueType::Number: return num == o.num;
        case ValueType::Time: return time == o.time;
        case ValueType::Text: return text == o.text;
        }
        return false;
    }
};

// Calendar fields of a UTC timestamp.
struct CalendarParts {
    int year;
    int month;    // 1..12
    int day;      // 1..31
    int weekday;  // 0 = Monday .. 6 = Sunday
    int hour;     // 0..23
    int minute;
    int second;
};

// Parses a strict decimal number (optional sign, digits, fraction, exponent).
// The whole string must be consumed.
std::optional<double> parse_number(std::string_view s);

// Parses `YYYY-MM-DD`, `YYYY-MM-DD HH:MM:SS` or `YYYY-MM-DDTHH:MM:SS`
// (optional trailing `Z`) to seconds since epoch, UTC.
std::optional<int64_t> parse_timestamp(std::string_view s);

CalendarParts calendar_parts(int64_t epoch_seconds);
int64_t epoch_from_civil(int year, int month, int day, int hour = 0,
                         int minute = 0, int second = 0);
std::string format_timestamp(int64_t epoch_seconds);

// Key cells may carry several join tokens separated by commas ("1,2" links a
// row to both key values 1 and 2). A plain value is the one-token case.
std::vector<std::string> key_tokens(const std::string& raw);

// Splits on runs of whitespace; used for Text-kind tokenization.
std::vector<std::string> whitespace_tokens(const std::string& s);

// FNV-1a, used for derived stage seeds and config hashing.
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 1469598103934665603ull);

}  // namespace relfeat
