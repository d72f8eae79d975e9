#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "ecoavatar/error.hpp"

namespace ecoavatar::io {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_integer(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// ISO-8601 calendar dates (days since 1970-01-01)

struct IsoTime {
  double days = 0.0;
  bool has_clock = false;
};

/// Accepts YYYY-MM-DD or YYYY-MM-DDTHH:MM:SS with an optional trailing Z.
inline std::optional<IsoTime> parse_iso_time(std::string_view s) {
  using namespace std::chrono;
  s = trim(s);
  if (s.size() != 10 && s.size() != 19 && s.size() != 20) return std::nullopt;
  if (s[4] != '-' || s[7] != '-') return std::nullopt;
  const auto y = parse_integer(s.substr(0, 4));
  const auto m = parse_integer(s.substr(5, 2));
  const auto d = parse_integer(s.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  const year_month_day ymd{year(static_cast<int>(*y)), month(static_cast<unsigned>(*m)),
                           day(static_cast<unsigned>(*d))};
  if (!ymd.ok()) return std::nullopt;
  IsoTime out;
  out.days = static_cast<double>(sys_days(ymd).time_since_epoch().count());
  if (s.size() == 10) return out;
  if (s[10] != 'T' || s[13] != ':' || s[16] != ':') return std::nullopt;
  if (s.size() == 20 && s[19] != 'Z') return std::nullopt;
  const auto hh = parse_integer(s.substr(11, 2));
  const auto mm = parse_integer(s.substr(14, 2));
  const auto ss = parse_integer(s.substr(17, 2));
  if (!hh || !mm || !ss || *hh > 23 || *mm > 59 || *ss > 59 || *hh < 0 || *mm < 0 || *ss < 0)
    return std::nullopt;
  out.has_clock = true;
  out.days += static_cast<double>(*hh * 3600 + *mm * 60 + *ss) / 86400.0;
  return out;
}

inline std::string format_iso_time(double days, bool with_clock) {
  using namespace std::chrono;
  const long long total_seconds = std::llround(days * 86400.0);
  long long whole_days = total_seconds / 86400;
  long long rem = total_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --whole_days;
  }
  const year_month_day ymd{sys_days(std::chrono::days(whole_days))};
  char buf[32];
  if (with_clock) {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lld", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), rem / 3600, (rem / 60) % 60,
                  rem % 60);
  } else {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Whole-file helpers

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write '" + path + "'");
  out << contents;
  require(static_cast<bool>(out), ErrorCode::io_error, "failed writing '" + path + "'");
}

}  // namespace ecoavatar::io
