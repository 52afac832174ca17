#include "mobiload/timeutil.hpp"

#include "mobiload/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>

namespace mobiload {

namespace {

int parse_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
    int value = 0;
    if (pos + len > text.size()) fail(ErrorKind::SchemaMismatch, "malformed date/time '" + std::string(whole) + "'");
    auto first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len) {
        fail(ErrorKind::SchemaMismatch, "malformed date/time '" + std::string(whole) + "'");
    }
    return value;
}

Date make_date(int y, int m, int d, std::string_view whole) {
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) fail(ErrorKind::SchemaMismatch, "invalid calendar date '" + std::string(whole) + "'");
    return sys_days{ymd};
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::int64_t read_be(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
    if (bytes == 4) return static_cast<std::int32_t>(static_cast<std::uint32_t>(v));
    return static_cast<std::int64_t>(v);
}

}  // namespace

Date parse_date(std::string_view text) {
    auto s = trim(text);
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
        fail(ErrorKind::SchemaMismatch, "expected YYYY-MM-DD, got '" + std::string(text) + "'");
    }
    return make_date(parse_int(s, 0, 4, text), parse_int(s, 5, 2, text), parse_int(s, 8, 2, text), text);
}

std::string format_date(Date d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

DateRange parse_date_range(std::string_view first, std::string_view last) {
    DateRange r{parse_date(first), parse_date(last)};
    if (r.last < r.first) {
        fail(ErrorKind::InvalidConfig, "date range ends before it starts: " + std::string(first) + " .. " + std::string(last));
    }
    return r;
}

Instant parse_timestamp(std::string_view text) {
    auto s = trim(text);
    if (s.size() < 16 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
        fail(ErrorKind::SchemaMismatch, "expected ISO-8601 timestamp, got '" + std::string(text) + "'");
    }
    Date d = parse_date(s.substr(0, 10));
    int hh = parse_int(s, 11, 2, text);
    int mm = parse_int(s, 14, 2, text);
    int ss = 0;
    std::size_t pos = 16;
    if (pos < s.size() && s[pos] == ':') {
        ss = parse_int(s, pos + 1, 2, text);
        pos += 3;
    }
    if (hh > 23 || mm > 59 || ss > 60) fail(ErrorKind::SchemaMismatch, "time out of range in '" + std::string(text) + "'");
    int offset_s = 0;
    if (pos < s.size()) {
        char c = s[pos];
        if (c == 'Z' && pos + 1 == s.size()) {
        } else if ((c == '+' || c == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
            int oh = parse_int(s, pos + 1, 2, text);
            int om = parse_int(s, pos + 4, 2, text);
            offset_s = (oh * 3600 + om * 60) * (c == '-' ? -1 : 1);
        } else {
            fail(ErrorKind::SchemaMismatch, "bad timestamp suffix in '" + std::string(text) + "'");
        }
    }
    return Instant{d} + std::chrono::seconds{hh * 3600 + mm * 60 + ss - offset_s};
}

std::string format_timestamp(Instant t) {
    auto day = std::chrono::floor<std::chrono::days>(t);
    auto secs = (t - day).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(Date{day}).c_str(),
                  static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
    return buf;
}

TimeZone::TimeZone(std::string name) : name_(std::move(name)) {
    if (name_ == "UTC" || name_ == "Etc/UTC") return;
    const char* dir = std::getenv("TZDIR");
    std::string path = std::string(dir ? dir : "/usr/share/zoneinfo") + "/" + name_;
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::InvalidConfig, "unknown time zone '" + name_ + "'");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    auto bad = [&] { fail(ErrorKind::InvalidConfig, "unreadable zoneinfo file for '" + name_ + "'"); };
    auto header = [&](std::size_t at, std::array<std::int64_t, 6>& counts) {
        if (at + 44 > buf.size() || buf[at] != 'T' || buf[at + 1] != 'Z' || buf[at + 2] != 'i' || buf[at + 3] != 'f') bad();
        // isutcnt, isstdcnt, leapcnt, timecnt, typecnt, charcnt
        for (int i = 0; i < 6; ++i) counts[i] = read_be(&buf[at + 20 + 4 * i], 4);
    };

    std::array<std::int64_t, 6> c{};
    header(0, c);
    char version = static_cast<char>(buf[4]);
    std::size_t at = 44;
    int time_size = 4;
    if (version >= '2') {
        // Skip the legacy 32-bit block and read the 64-bit one.
        at += c[3] * 5 + c[4] * 6 + c[5] + c[2] * 8 + c[1] + c[0];
        header(at, c);
        at += 44;
        time_size = 8;
    }
    const auto timecnt = c[3], typecnt = c[4];
    if (typecnt < 1 || at + timecnt * (time_size + 1) + typecnt * 6 > buf.size()) bad();
    std::vector<std::int64_t> times(timecnt);
    for (std::int64_t i = 0; i < timecnt; ++i) times[i] = read_be(&buf[at + i * time_size], time_size);
    at += timecnt * time_size;
    std::vector<int> idx(timecnt);
    for (std::int64_t i = 0; i < timecnt; ++i) idx[i] = buf[at + i];
    at += timecnt;
    std::vector<std::int32_t> utoff(typecnt);
    std::vector<bool> isdst(typecnt);
    for (std::int64_t i = 0; i < typecnt; ++i) {
        utoff[i] = static_cast<std::int32_t>(read_be(&buf[at + 6 * i], 4));
        isdst[i] = buf[at + 6 * i + 4] != 0;
    }
    // Offset before the first transition: first standard-time type.
    initial_offset_ = utoff[0];
    for (std::int64_t i = 0; i < typecnt; ++i) {
        if (!isdst[i]) {
            initial_offset_ = utoff[i];
            break;
        }
    }
    for (std::int64_t i = 0; i < timecnt; ++i) {
        if (idx[i] >= typecnt) bad();
        transitions_.push_back(times[i]);
        offsets_after_.push_back(utoff[idx[i]]);
    }
}

const TimeZone& TimeZone::locate(const std::string& name) {
    static std::mutex mu;
    static std::map<std::string, std::unique_ptr<TimeZone>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(name);
    if (it == cache.end()) it = cache.emplace(name, std::make_unique<TimeZone>(name)).first;
    return *it->second;
}

std::chrono::seconds TimeZone::offset(Instant t) const {
    const auto secs = t.time_since_epoch().count();
    auto it = std::upper_bound(transitions_.begin(), transitions_.end(), secs);
    if (it == transitions_.begin()) return std::chrono::seconds{initial_offset_};
    return std::chrono::seconds{offsets_after_[static_cast<std::size_t>(it - transitions_.begin()) - 1]};
}

LocalTime TimeZone::to_local(Instant t) const {
    auto local = t + offset(t);
    auto day = std::chrono::floor<std::chrono::days>(local);
    auto secs = (local - day).count();
    return {Date{day}, static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60)};
}

Instant TimeZone::local_midnight(Date d) const {
    const Instant local{d};
    // Try each offset that could be in effect near this wall-clock time.
    Instant best = Instant::max();
    for (auto probe : {local - std::chrono::hours{36}, local, local + std::chrono::hours{36}}) {
        Instant candidate = local - offset(probe);
        if (candidate + offset(candidate) == local) best = std::min(best, candidate);
    }
    if (best != Instant::max()) return best;
    // Wall-clock midnight skipped: first valid instant after the gap.
    Instant candidate = local - offset(local - std::chrono::hours{36});
    return candidate;
}

}  // namespace mobiload
