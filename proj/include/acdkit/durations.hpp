#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acdkit/error.hpp"
#include "acdkit/stats.hpp"
#include "acdkit/ticks.hpp"

namespace acdkit {

enum class DurationKind { trade, transaction_aggregated, price, volume };
enum class SeasonalState { raw, deseasonalized };

inline const char* to_string(DurationKind k) {
  switch (k) {
    case DurationKind::trade: return "trade";
    case DurationKind::transaction_aggregated: return "transaction_aggregated";
    case DurationKind::price: return "price";
    case DurationKind::volume: return "volume";
  }
  return "?";
}

struct DurationEntry {
  double start_time = 0.0;  // seconds since midnight
  double end_time = 0.0;
  double duration = 0.0;  // seconds when raw, dimensionless when deseasonalized
};

struct DaySegment {
  int day_index = 0;
  std::vector<DurationEntry> entries;
};

// Ordered durations split by trading day. No entry crosses a day boundary.
// While `contiguous()` holds, each entry ends where the next one starts;
// filtering drops entries and clears that flag.
class DurationSeries {
 public:
  DurationSeries() = default;
  DurationSeries(DurationKind kind, SeasonalState state, std::vector<DaySegment> segments, bool contiguous = true,
                 int aggregation = 2)
      : kind_(kind), state_(state), segments_(std::move(segments)), contiguous_(contiguous), aggregation_(aggregation) {
    for (const auto& seg : segments_) {
      for (std::size_t i = 0; i < seg.entries.size(); ++i) {
        const auto& e = seg.entries[i];
        if (!std::isfinite(e.duration) || e.duration < 0.0)
          throw ValidationError("negative or non-finite duration in day " + std::to_string(seg.day_index));
        if (i > 0 && e.start_time < seg.entries[i - 1].start_time)
          throw ValidationError("start times decrease in day " + std::to_string(seg.day_index));
      }
    }
  }

  DurationKind kind() const noexcept { return kind_; }
  SeasonalState state() const noexcept { return state_; }
  bool contiguous() const noexcept { return contiguous_; }
  // T of transaction aggregation (2 for plain tick durations).
  int aggregation() const noexcept { return aggregation_; }
  const std::vector<DaySegment>& segments() const noexcept { return segments_; }

  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto& s : segments_) n += s.entries.size();
    return n;
  }
  bool empty() const noexcept { return size() == 0; }

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(size());
    for (const auto& s : segments_)
      for (const auto& e : s.entries) v.push_back(e.duration);
    return v;
  }

  // Same layout, new duration values in flattened order.
  DurationSeries with_values(std::span<const double> values, SeasonalState state) const {
    if (values.size() != size()) throw ParameterError("value count does not match series length");
    auto segs = segments_;
    std::size_t k = 0;
    for (auto& s : segs)
      for (auto& e : s.entries) e.duration = values[k++];
    return DurationSeries(kind_, state, std::move(segs), contiguous_, aggregation_);
  }

  // Concatenates the days of several series (used to merge per-day results).
  static DurationSeries merge(std::span<const DurationSeries> parts) {
    if (parts.empty()) return {};
    std::vector<DaySegment> segs;
    bool contiguous = true;
    for (const auto& p : parts) {
      contiguous = contiguous && p.contiguous();
      segs.insert(segs.end(), p.segments().begin(), p.segments().end());
    }
    return DurationSeries(parts.front().kind(), parts.front().state(), std::move(segs), contiguous,
                          parts.front().aggregation());
  }

 private:
  DurationKind kind_ = DurationKind::trade;
  SeasonalState state_ = SeasonalState::raw;
  std::vector<DaySegment> segments_;
  bool contiguous_ = true;
  int aggregation_ = 2;
};

struct ThinningConfig {
  double price_threshold = 0.0;
  double volume_threshold = 0.0;
};

struct FilterPolicy {
  bool drop_zero = false;
  std::optional<double> max_duration_cap;
};

namespace detail {

inline DurationSeries from_retained(const TickDay& day, const std::vector<std::size_t>& idx, DurationKind kind,
                                    int aggregation = 2) {
  DaySegment seg{day.day_index(), {}};
  seg.entries.reserve(idx.empty() ? 0 : idx.size() - 1);
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const auto& a = day[idx[k - 1]];
    const auto& b = day[idx[k]];
    seg.entries.push_back({a.time(), b.time(), to_seconds(b.time_ms - a.time_ms)});
  }
  return DurationSeries(kind, SeasonalState::raw, {std::move(seg)}, true, aggregation);
}

}  // namespace detail

inline DurationSeries compute_trade_durations(const TickDay& day) {
  std::vector<std::size_t> idx(day.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return detail::from_retained(day, idx, DurationKind::trade);
}

// Each duration spans T-1 consecutive tick gaps: t[(T-1)i] - t[(T-1)(i-1)].
inline DurationSeries aggregate_transactions(const TickDay& day, int T) {
  if (T < 2) throw ParameterError("aggregation T must be at least 2");
  const auto step = static_cast<std::size_t>(T - 1);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < day.size(); i += step) idx.push_back(i);
  return detail::from_retained(day, idx, T == 2 ? DurationKind::trade : DurationKind::transaction_aggregated, T);
}

// Same grouping applied to an existing (possibly filtered or deseasonalized)
// tick-duration series: every T-1 consecutive entries of a day are summed,
// and an incomplete trailing group is dropped.
inline DurationSeries aggregate_durations(const DurationSeries& series, int T) {
  if (T < 2) throw ParameterError("aggregation T must be at least 2");
  if (series.aggregation() != 2) throw ParameterError("series is already aggregated");
  const auto step = static_cast<std::size_t>(T - 1);
  std::vector<DaySegment> segs;
  for (const auto& s : series.segments()) {
    DaySegment out{s.day_index, {}};
    for (std::size_t i = 0; i + step <= s.entries.size(); i += step) {
      double sum = 0.0;
      for (std::size_t j = i; j < i + step; ++j) sum += s.entries[j].duration;
      out.entries.push_back({s.entries[i].start_time, s.entries[i + step - 1].end_time, sum});
    }
    segs.push_back(std::move(out));
  }
  return DurationSeries(T == 2 ? series.kind() : DurationKind::transaction_aggregated, series.state(), std::move(segs),
                        series.contiguous(), T);
}

// Retains t0, then each first tick whose price has moved by at least C from
// the last retained price.
inline DurationSeries thin_by_price(const TickDay& day, double C) {
  if (!(C >= 0.0)) throw ParameterError("price threshold must be non-negative");
  constexpr double tol = 1e-9;
  std::vector<std::size_t> idx{0};
  double ref = day[0].price;
  for (std::size_t j = 1; j < day.size(); ++j) {
    if (std::abs(day[j].price - ref) >= C - tol) {
      idx.push_back(j);
      ref = day[j].price;
    }
  }
  return detail::from_retained(day, idx, DurationKind::price);
}

// Retains t0, then each first tick at which volume accumulated since the last
// retained tick (exclusive) reaches V.
inline DurationSeries thin_by_volume(const TickDay& day, double V) {
  if (!(V > 0.0)) throw ParameterError("volume threshold must be positive");
  std::vector<std::size_t> idx{0};
  double acc = 0.0;
  for (std::size_t j = 1; j < day.size(); ++j) {
    acc += day[j].volume;
    if (acc >= V) {
      idx.push_back(j);
      acc = 0.0;
    }
  }
  return detail::from_retained(day, idx, DurationKind::volume);
}

template <typename Fn>
DurationSeries build_for_days(std::span<const TickDay> days, Fn&& per_day) {
  std::vector<DurationSeries> parts;
  parts.reserve(days.size());
  for (const auto& d : days) parts.push_back(per_day(d));
  if (parts.empty()) return {};
  return DurationSeries::merge(parts);
}

inline DurationSeries apply_filter(const DurationSeries& series, const FilterPolicy& policy) {
  if (series.state() != SeasonalState::raw) throw ParameterError("filtering applies to raw durations");
  if (policy.max_duration_cap && !(*policy.max_duration_cap > 0.0))
    throw ParameterError("duration cap must be positive");
  if (!policy.drop_zero && !policy.max_duration_cap) return series;
  std::vector<DaySegment> segs;
  bool dropped = false;
  for (const auto& s : series.segments()) {
    DaySegment out{s.day_index, {}};
    for (const auto& e : s.entries) {
      const bool zero = policy.drop_zero && e.duration == 0.0;
      const bool big = policy.max_duration_cap && e.duration > *policy.max_duration_cap;
      if (zero || big)
        dropped = true;
      else
        out.entries.push_back(e);
    }
    segs.push_back(std::move(out));
  }
  return DurationSeries(series.kind(), series.state(), std::move(segs), series.contiguous() && !dropped,
                        series.aggregation());
}

struct DurationSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
  std::optional<double> ljung_box;  // empty when the series is constant
  std::size_t lb_lags = 0;
};

inline DurationSummary describe(std::span<const double> x, std::size_t lb_lags = 20) {
  if (x.empty()) throw ParameterError("cannot describe an empty series");
  DurationSummary s;
  s.n = x.size();
  s.mean = stats::mean(x);
  s.sd = x.size() > 1 ? std::sqrt(stats::variance(x)) : 0.0;
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  s.q05 = stats::ecdf_quantile_sorted(sorted, 0.05);
  s.q25 = stats::ecdf_quantile_sorted(sorted, 0.25);
  s.q50 = stats::ecdf_quantile_sorted(sorted, 0.50);
  s.q75 = stats::ecdf_quantile_sorted(sorted, 0.75);
  s.q95 = stats::ecdf_quantile_sorted(sorted, 0.95);
  s.lb_lags = lb_lags;
  if (s.sd > 0.0 && x.size() > lb_lags) s.ljung_box = stats::ljung_box(x, lb_lags).q;
  return s;
}

inline DurationSummary describe(const DurationSeries& series, std::size_t lb_lags = 20) {
  const auto v = series.values();
  return describe(std::span<const double>(v), lb_lags);
}

// Instantaneous variance implied by the hazard of a price duration of size C.
inline double price_duration_volatility(double C, double price, double hazard) {
  if (!(price > 0.0)) throw ParameterError("price must be positive");
  if (hazard < 0.0) throw ParameterError("hazard must be non-negative");
  const double r = C / price;
  return r * r * hazard;
}

// Writes day,start_time,duration rows.
inline void write_duration_csv(std::ostream& out, const DurationSeries& series) {
  out << "day,start_time,duration\n";
  for (const auto& s : series.segments())
    for (const auto& e : s.entries)
      out << s.day_index << ',' << format_number(e.start_time) << ',' << format_number(e.duration) << '\n';
}

// Reads the day,start_time,duration layout written above. Rows are grouped by
// day; end times are start + duration.
inline DurationSeries parse_duration_csv(std::istream& in, DurationKind kind = DurationKind::trade,
                                         SeasonalState state = SeasonalState::raw) {
  std::map<int, std::vector<DurationEntry>> by_day;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv(line);
    if (lineno == 1 && f.size() == 3 && !detail::parse_double(f[2])) continue;
    const auto where = " on line " + std::to_string(lineno);
    if (f.size() != 3) throw ValidationError("expected 3 fields" + where);
    const auto day = detail::parse_int(f[0]);
    const auto start = detail::parse_double(f[1]);
    const auto dur = detail::parse_double(f[2]);
    if (!day || !start || !dur) throw ValidationError("malformed duration row" + where);
    by_day[static_cast<int>(*day)].push_back({*start, *start + *dur, *dur});
  }
  if (by_day.empty()) throw ValidationError("duration file holds no rows");
  std::vector<DaySegment> segs;
  for (auto& [d, e] : by_day) segs.push_back({d, std::move(e)});
  return DurationSeries(kind, state, std::move(segs));
}

}  // namespace acdkit
