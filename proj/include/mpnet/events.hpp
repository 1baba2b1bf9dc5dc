#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mp {

// One behavioral event: a purchase or a point-usage action.
struct EventRecord {
  std::int64_t user_id = 0;
  double price = 0.0;       // non-negative currency / point units
  int day = 0;              // day of year, 0..364 (365-day grid, no leap days)
  int hour = 0;             // 0..23
  std::string genre_path;   // slash-separated, e.g. "fashion/tops/shirts"
};

void validate_event(const EventRecord& e);

// The CSV datetime column uses a fixed synthetic year: day 0 = 2019-01-01.
std::string day_hour_to_datetime(int day, int hour);
// Accepts exactly "YYYY-MM-DDThh:00:00"; minutes/seconds must be zero.
void datetime_to_day_hour(std::string_view text, int& day, int& hour);

// Header: user_id,price,datetime,genre_path
void write_events_csv(const std::string& path, const std::vector<EventRecord>& events);
std::vector<EventRecord> read_events_csv(const std::string& path);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
std::string format_float(float v);

}  // namespace mp
