#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acdkit/error.hpp"

namespace acdkit {

// Milliseconds since midnight. The exchange clock resolution is 1 ms, so
// timestamps are exact integers and durations are exact differences.
using Millis = std::int64_t;

inline constexpr double to_seconds(Millis ms) noexcept { return static_cast<double>(ms) / 1000.0; }

// Regular trading session, in seconds since midnight.
struct Session {
  double open = 9.5 * 3600.0;
  double close = 16.0 * 3600.0;

  double length() const noexcept { return close - open; }
  bool contains(double t) const noexcept { return t >= open && t <= close; }
};

struct TickRecord {
  int day_index = 0;
  Millis time_ms = 0;
  double price = 0.0;
  double volume = 0.0;

  double time() const noexcept { return to_seconds(time_ms); }
};

// One trading day of ticks in arrival order.
class TickDay {
 public:
  TickDay(int day_index, std::vector<TickRecord> records)
      : day_index_(day_index), records_(std::move(records)) {
    if (records_.empty()) throw ValidationError("day " + std::to_string(day_index_) + " has no ticks");
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (r.day_index != day_index_)
        throw ValidationError("tick " + std::to_string(i) + " belongs to day " + std::to_string(r.day_index));
      if (!(r.price > 0.0) || !(r.volume > 0.0))
        throw ValidationError("tick " + std::to_string(i) + " has non-positive price or volume");
      if (i > 0 && r.time_ms < records_[i - 1].time_ms)
        throw ValidationError("timestamps decrease at tick " + std::to_string(i) + " of day " +
                              std::to_string(day_index_));
    }
  }

  int day_index() const noexcept { return day_index_; }
  std::span<const TickRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  const TickRecord& operator[](std::size_t i) const { return records_[i]; }

 private:
  int day_index_;
  std::vector<TickRecord> records_;
};

// Convenience for tests and callers holding plain arrays of seconds.
inline TickDay make_tick_day(int day_index, std::span<const double> times_seconds,
                             std::span<const double> prices = {}, std::span<const double> volumes = {}) {
  std::vector<TickRecord> recs;
  recs.reserve(times_seconds.size());
  for (std::size_t i = 0; i < times_seconds.size(); ++i) {
    recs.push_back({day_index, std::llround(times_seconds[i] * 1000.0),
                    prices.empty() ? 100.0 : prices[i], volumes.empty() ? 100.0 : volumes[i]});
  }
  return TickDay(day_index, std::move(recs));
}

// ---------------------------------------------------------------------------
// CSV ingest

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_accepted = 0;
  std::vector<RejectedRow> rejects;
  std::vector<std::string> day_labels;  // label of day ordinal i, as it appeared in the input
  bool header = false;

  double reject_fraction() const noexcept {
    return rows_read == 0 ? 0.0 : static_cast<double>(rejects.size()) / static_cast<double>(rows_read);
  }
};

struct IngestResult {
  std::vector<TickDay> days;
  IngestReport report;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double x = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, x);
  if (ec != std::errc{} || p != end || !std::isfinite(x)) return std::nullopt;
  return x;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long x = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, x);
  if (ec != std::errc{} || p != end) return std::nullopt;
  return x;
}

inline bool is_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

// Accepts "34200.125" or "09:30:00.125"; fractional seconds beyond 1 ms are
// rejected rather than rounded.
inline std::optional<Millis> parse_time(std::string_view s) {
  if (s.find(':') != std::string_view::npos) {
    if (s.size() < 8 || s[2] != ':' || s[5] != ':') return std::nullopt;
    auto hh = parse_int(s.substr(0, 2));
    auto mm = parse_int(s.substr(3, 2));
    auto sec = parse_double(s.substr(6));
    if (!hh || !mm || !sec || *hh < 0 || *hh > 23 || *mm < 0 || *mm > 59 || *sec < 0 || *sec >= 61) return std::nullopt;
    const double ms = (*hh * 3600.0 + *mm * 60.0 + *sec) * 1000.0;
    const double r = std::round(ms);
    if (std::abs(ms - r) > 1e-4) return std::nullopt;
    return static_cast<Millis>(r);
  }
  auto sec = parse_double(s);
  if (!sec || *sec < 0) return std::nullopt;
  const double ms = *sec * 1000.0;
  const double r = std::round(ms);
  if (std::abs(ms - r) > 1e-4) return std::nullopt;
  return static_cast<Millis>(r);
}

}  // namespace detail

// Parses day,time,price,volume rows. A first line whose price field is not
// numeric is taken as a header. Rows outside the session, with bad fields,
// or going backwards in time within a day are rejected with their line
// number; everything else is grouped into days.
inline IngestResult parse_tick_csv(std::istream& in, const Session& session = {}) {
  IngestResult result;
  auto& rep = result.report;

  struct Pending {
    std::size_t line;
    std::string day;
    Millis t;
    double price;
    double volume;
  };
  std::vector<Pending> rows;
  std::optional<bool> iso_days;

  std::string line;
  std::size_t lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (first_content) {
      first_content = false;
      if (fields.size() >= 3 && !detail::parse_double(fields[2])) {
        rep.header = true;
        continue;
      }
    }
    ++rep.rows_read;
    auto reject = [&](std::string reason) { rep.rejects.push_back({lineno, std::move(reason)}); };
    if (fields.size() != 4) {
      reject("expected 4 fields, found " + std::to_string(fields.size()));
      continue;
    }
    const bool iso = detail::is_iso_date(fields[0]);
    if (!iso && !detail::parse_int(fields[0])) {
      reject("malformed day");
      continue;
    }
    if (!iso_days) iso_days = iso;
    if (*iso_days != iso) {
      reject("day format differs from first row");
      continue;
    }
    auto t = detail::parse_time(fields[1]);
    if (!t) {
      reject("malformed time");
      continue;
    }
    auto price = detail::parse_double(fields[2]);
    auto volume = detail::parse_double(fields[3]);
    if (!price || !volume) {
      reject("malformed price or volume");
      continue;
    }
    if (!(*price > 0.0) || !(*volume > 0.0)) {
      reject("non-positive price or volume");
      continue;
    }
    if (!session.contains(to_seconds(*t))) {
      reject("outside session");
      continue;
    }
    rows.push_back({lineno, std::string(fields[0]), *t, *price, *volume});
  }

  // Day ordinals: integer labels are used as-is, ISO dates are ranked.
  std::map<std::string, int> ordinal;
  if (iso_days.value_or(false)) {
    for (const auto& r : rows) ordinal.emplace(r.day, 0);
    int k = 0;
    for (auto& [label, idx] : ordinal) idx = k++;
  } else {
    for (const auto& r : rows) ordinal.emplace(r.day, static_cast<int>(*detail::parse_int(r.day)));
  }

  std::map<int, std::vector<TickRecord>> by_day;
  for (const auto& r : rows) {
    const int d = ordinal.at(r.day);
    auto& recs = by_day[d];
    if (!recs.empty() && r.t < recs.back().time_ms) {
      rep.rejects.push_back({r.line, "time decreases within day"});
      continue;
    }
    recs.push_back({d, r.t, r.price, r.volume});
  }
  std::sort(rep.rejects.begin(), rep.rejects.end(),
            [](const RejectedRow& a, const RejectedRow& b) { return a.line < b.line; });

  std::map<int, std::string> label_of;
  for (const auto& [label, idx] : ordinal) label_of[idx] = label;
  for (auto& [d, recs] : by_day) {
    rep.rows_accepted += recs.size();
    rep.day_labels.push_back(label_of[d]);
    result.days.emplace_back(d, std::move(recs));
  }
  return result;
}

inline std::string format_number(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, p);
}

inline std::string format_millis(Millis ms) {
  const bool neg = ms < 0;
  const auto a = neg ? -ms : ms;
  std::string frac = std::to_string(a % 1000);
  frac.insert(0, 3 - frac.size(), '0');
  return (neg ? "-" : "") + std::to_string(a / 1000) + "." + frac;
}

// Writes the canonical tick CSV (header, day ordinal, seconds with 3 decimals).
inline void write_tick_csv(std::ostream& out, std::span<const TickDay> days) {
  out << "day,time,price,volume\n";
  for (const auto& day : days)
    for (const auto& r : day.records())
      out << r.day_index << ',' << format_millis(r.time_ms) << ',' << format_number(r.price) << ','
          << format_number(r.volume) << '\n';
}

}  // namespace acdkit
