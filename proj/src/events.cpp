#include "mpnet/events.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mpnet/common.hpp"

namespace mp {

namespace {

constexpr std::array<int, 12> kMonthDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
constexpr int kYear = 2019;  // fixed non-leap year for the synthetic grid

int parse_int_field(std::string_view s, int lo, int hi, const char* what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    fail(Errc::parse, "bad ", what, " field '", std::string(s), "'");
  if (v < lo || v > hi) fail(Errc::parse, what, " out of range: ", v);
  return v;
}

}  // namespace

void validate_event(const EventRecord& e) {
  if (e.day < 0 || e.day > 364) fail(Errc::invalid_argument, "event day out of range: ", e.day);
  if (e.hour < 0 || e.hour > 23) fail(Errc::invalid_argument, "event hour out of range: ", e.hour);
  if (!(e.price >= 0) || !std::isfinite(e.price))
    fail(Errc::invalid_argument, "event price must be finite and non-negative");
  if (e.genre_path.empty()) fail(Errc::invalid_argument, "event genre_path must be non-empty");
}

std::string day_hour_to_datetime(int day, int hour) {
  if (day < 0 || day > 364) fail(Errc::invalid_argument, "day out of range: ", day);
  if (hour < 0 || hour > 23) fail(Errc::invalid_argument, "hour out of range: ", hour);
  int month = 0, d = day;
  while (d >= kMonthDays[month]) {
    d -= kMonthDays[month];
    ++month;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:00:00", kYear, month + 1, d + 1, hour);
  return buf;
}

void datetime_to_day_hour(std::string_view text, int& day, int& hour) {
  // YYYY-MM-DDThh:00:00 is exactly 19 chars.
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':')
    fail(Errc::parse, "bad datetime '", std::string(text), "'");
  const int year = parse_int_field(text.substr(0, 4), 0, 9999, "year");
  if (year != kYear) fail(Errc::parse, "datetime year must be ", kYear, ", got ", year);
  const int month = parse_int_field(text.substr(5, 2), 1, 12, "month");
  const int dom = parse_int_field(text.substr(8, 2), 1, kMonthDays[month - 1], "day-of-month");
  hour = parse_int_field(text.substr(11, 2), 0, 23, "hour");
  const int minute = parse_int_field(text.substr(14, 2), 0, 59, "minute");
  const int second = parse_int_field(text.substr(17, 2), 0, 59, "second");
  if (minute != 0 || second != 0)
    fail(Errc::parse, "datetime minutes/seconds must be zero in '", std::string(text), "'");
  day = dom - 1;
  for (int m = 0; m < month - 1; ++m) day += kMonthDays[m];
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) fail(Errc::internal, "to_chars failed");
  return std::string(buf, p);
}

std::string format_float(float v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) fail(Errc::internal, "to_chars failed");
  return std::string(buf, p);
}

void write_events_csv(const std::string& path, const std::vector<EventRecord>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << "user_id,price,datetime,genre_path\n";
  for (const auto& e : events) {
    validate_event(e);
    out << e.user_id << ',' << format_double(e.price) << ','
        << day_hour_to_datetime(e.day, e.hour) << ',' << e.genre_path << '\n';
  }
  if (!out) fail(Errc::io, "write failed: ", path);
}

std::vector<EventRecord> read_events_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  std::string line;
  if (!std::getline(in, line)) fail(Errc::parse, path, ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "user_id,price,datetime,genre_path")
    fail(Errc::parse, path, ": unexpected header '", line, "'");
  std::vector<EventRecord> events;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string_view, 4> f;
    std::string_view rest = line;
    for (int i = 0; i < 3; ++i) {
      const auto comma = rest.find(',');
      if (comma == std::string_view::npos)
        fail(Errc::parse, path, ":", lineno, ": expected 4 comma-separated fields");
      f[i] = rest.substr(0, comma);
      rest.remove_prefix(comma + 1);
    }
    f[3] = rest;
    EventRecord e;
    {
      auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), e.user_id);
      if (ec != std::errc{} || p != f[0].data() + f[0].size())
        fail(Errc::parse, path, ":", lineno, ": bad user_id '", std::string(f[0]), "'");
    }
    {
      auto [p, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), e.price);
      if (ec != std::errc{} || p != f[1].data() + f[1].size())
        fail(Errc::parse, path, ":", lineno, ": bad price '", std::string(f[1]), "'");
    }
    try {
      datetime_to_day_hour(f[2], e.day, e.hour);
    } catch (const Error& err) {
      fail(Errc::parse, path, ":", lineno, ": ", err.what());
    }
    e.genre_path = std::string(f[3]);
    try {
      validate_event(e);
    } catch (const Error& err) {
      fail(Errc::parse, path, ":", lineno, ": ", err.what());
    }
    events.push_back(std::move(e));
  }
  return events;
}

}  // namespace mp
