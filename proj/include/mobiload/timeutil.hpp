#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mobiload {

using Instant = std::chrono::sys_seconds;  // UTC
using Date = std::chrono::sys_days;        // civil calendar date, zone-free

constexpr std::chrono::seconds kHour{3600};

// Inclusive range of calendar dates.
struct DateRange {
    Date first{};
    Date last{};

    int days() const { return static_cast<int>((last - first).count()) + 1; }
    bool contains(Date d) const { return d >= first && d <= last; }
    bool contains(const DateRange& other) const {
        return other.first >= first && other.last <= last;
    }
    bool operator==(const DateRange&) const = default;
};

Date parse_date(std::string_view text);
std::string format_date(Date d);
DateRange parse_date_range(std::string_view first, std::string_view last);

// Accepts YYYY-MM-DDTHH:MM[:SS][Z|+HH:MM|-HH:MM]; a space may replace the T.
// Values without an offset are UTC.
Instant parse_timestamp(std::string_view text);
std::string format_timestamp(Instant t);  // YYYY-MM-DDTHH:MM:SSZ

struct LocalTime {
    Date date{};
    int hour = 0;
    int minute = 0;
};

// IANA zone backed by the system TZif database ($TZDIR or /usr/share/zoneinfo).
// Instants after the last recorded transition use the final offset.
class TimeZone {
public:
    static const TimeZone& locate(const std::string& name);

    const std::string& name() const { return name_; }
    std::chrono::seconds offset(Instant t) const;
    LocalTime to_local(Instant t) const;
    Date local_date(Instant t) const { return to_local(t).date; }
    // UTC instant of 00:00 local on `d`; inside a DST gap, the first valid instant after it.
    Instant local_midnight(Date d) const;

    explicit TimeZone(std::string name);

private:
    std::string name_;
    std::vector<std::int64_t> transitions_;
    std::vector<std::int32_t> offsets_after_;  // offset in effect from transitions_[i]
    std::int32_t initial_offset_ = 0;
};

}  // namespace mobiload
