#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace dde {

using Date = std::chrono::year_month_day;

// Parses YYYY-MM-DD (optionally followed by a 'T' time part, which is ignored).
Date parse_date(std::string_view text);
std::optional<Date> try_parse_date(std::string_view text);
std::string format_date(Date d);
// YYYYMMDD, used in artifact file names.
std::string format_date_compact(Date d);

// Finds the first YYYY-MM-DD, YYYY_MM_DD or YYYYMMDD run in a file name.
std::optional<Date> find_date_in_name(std::string_view name);

}  // namespace dde
