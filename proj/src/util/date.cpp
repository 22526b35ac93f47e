#include "dde/date.hpp"

#include <cctype>
#include <cstdio>

#include "dde/error.hpp"

namespace dde {

namespace {

bool all_digits(std::string_view s) {
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return !s.empty();
}

int to_int(std::string_view s) {
    int v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
}

std::optional<Date> make_date(int y, int m, int d) {
    Date ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
             std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

}  // namespace

std::optional<Date> try_parse_date(std::string_view text) {
    if (text.size() < 10) return std::nullopt;
    if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') return std::nullopt;
    auto y = text.substr(0, 4), m = text.substr(5, 2), d = text.substr(8, 2);
    if (text[4] != '-' || text[7] != '-' || !all_digits(y) || !all_digits(m) || !all_digits(d)) {
        return std::nullopt;
    }
    return make_date(to_int(y), to_int(m), to_int(d));
}

Date parse_date(std::string_view text) {
    if (auto d = try_parse_date(text)) return *d;
    throw ParseError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::string format_date_compact(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d%02u%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::optional<Date> find_date_in_name(std::string_view name) {
    for (std::size_t i = 0; i + 8 <= name.size(); ++i) {
        if (i > 0 && std::isdigit(static_cast<unsigned char>(name[i - 1]))) continue;
        if (i + 10 <= name.size()) {
            char sep = name[i + 4];
            if ((sep == '-' || sep == '_') && name[i + 7] == sep) {
                auto y = name.substr(i, 4), m = name.substr(i + 5, 2), d = name.substr(i + 8, 2);
                if (all_digits(y) && all_digits(m) && all_digits(d)) {
                    if (auto date = make_date(to_int(y), to_int(m), to_int(d))) return date;
                }
            }
        }
        auto run = name.substr(i, 8);
        bool bounded = i + 8 == name.size() || !std::isdigit(static_cast<unsigned char>(name[i + 8]));
        if (all_digits(run) && bounded) {
            if (auto date = make_date(to_int(run.substr(0, 4)), to_int(run.substr(4, 2)),
                                      to_int(run.substr(6, 2)))) {
                return date;
            }
        }
    }
    return std::nullopt;
}

}  // namespace dde
