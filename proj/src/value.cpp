#include "relfeat/value.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace relfeat {

std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) return std::nullopt;
    return v;
}

namespace {

bool parse_int_field(std::string_view s, size_t pos, size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (size_t i = pos; i < pos + len; ++i) {
        char c = s[i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

// Days since 1970-01-01 for a proleptic Gregorian civil date.
int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yy = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    y = static_cast<int>(yy + (m <= 2));
}

bool valid_date(int y, int m, int d) {
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr std::array<int, 12> days{31, 28, 31, 30, 31, 30,
                                              31, 31, 30, 31, 30, 31};
    int dmax = days[static_cast<size_t>(m - 1)];
    if (m == 2 && (y % 4 == 0 && (y % 100 != 0 || y % 400 == 0))) dmax = 29;
    return d <= dmax;
}

}  // namespace

std::optional<int64_t> parse_timestamp(std::string_view s) {
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    if (s.size() != 10 && s.size() != 19) return std::nullopt;
    int y, mo, d;
    if (!parse_int_field(s, 0, 4, y) || s[4] != '-' ||
        !parse_int_field(s, 5, 2, mo) || s[7] != '-' ||
        !parse_int_field(s, 8, 2, d)) {
        return std::nullopt;
    }
    if (!valid_date(y, mo, d)) return std::nullopt;
    int h = 0, mi = 0, se = 0;
    if (s.size() == 19) {
        if (s[10] != ' ' && s[10] != 'T') return std::nullopt;
        if (!parse_int_field(s, 11, 2, h) || s[13] != ':' ||
            !parse_int_field(s, 14, 2, mi) || s[16] != ':' ||
            !parse_int_field(s, 17, 2, se)) {
            return std::nullopt;
        }
        if (h > 23 || mi > 59 || se > 60) return std::nullopt;
    }
    return epoch_from_civil(y, mo, d, h, mi, se);
}

int64_t epoch_from_civil(int year, int month, int day, int hour, int minute,
                         int second) {
    return days_from_civil(year, month, day) * 86400 + hour * 3600 +
           minute * 60 + second;
}

CalendarParts calendar_parts(int64_t t) {
    int64_t days = t / 86400;
    int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    CalendarParts p{};
    civil_from_days(days, p.year, p.month, p.day);
    // 1970-01-01 was a Thursday; weekday 0 = Monday.
    p.weekday = static_cast<int>(((days % 7) + 7 + 3) % 7);
    p.hour = static_cast<int>(rem / 3600);
    p.minute = static_cast<int>((rem / 60) % 60);
    p.second = static_cast<int>(rem % 60);
    return p;
}

std::string format_timestamp(int64_t t) {
    CalendarParts p = calendar_parts(t);
    char buf[32];
    if (p.hour == 0 && p.minute == 0 && p.second == 0) {
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", p.year, p.month, p.day);
    } else {
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", p.year,
                      p.month, p.day, p.hour, p.minute, p.second);
    }
    return buf;
}

std::vector<std::string> key_tokens(const std::string& raw) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= raw.size()) {
        size_t comma = raw.find(',', start);
        size_t end = comma == std::string::npos ? raw.size() : comma;
        size_t a = start, b = end;
        while (a < b && (raw[a] == ' ' || raw[a] == '\t')) ++a;
        while (b > a && (raw[b - 1] == ' ' || raw[b - 1] == '\t')) --b;
        if (b > a) out.emplace_back(raw.substr(a, b - a));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::string> whitespace_tokens(const std::string& s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

uint64_t fnv1a64(std::string_view bytes, uint64_t seed) {
    uint64_t h = seed;
    for (char c : bytes) {
        h ^= static_cast<uint8_t>(c);
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace relfeat
