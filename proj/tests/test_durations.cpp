#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "catch_amalgamated.hpp"

#include "acdkit/durations.hpp"

using namespace acdkit;
using Catch::Approx;

namespace {

std::vector<double> values_of(const DurationSeries& s) { return s.values(); }

DurationSeries raw_series(const std::vector<double>& d) {
  DaySegment seg{0, {}};
  double t = 34200.0;
  for (double x : d) {
    seg.entries.push_back({t, t + x, x});
    t += x;
  }
  return DurationSeries(DurationKind::trade, SeasonalState::raw, {seg});
}

TickDay random_day(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> gap(0, 3000);
  std::uniform_int_distribution<int> tick(-3, 3);
  std::uniform_int_distribution<int> vol(1, 500);
  std::vector<TickRecord> r;
  Millis t = 34200000;
  double p = 100.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.push_back({0, t, p, static_cast<double>(vol(rng))});
    t += gap(rng);
    p = std::max(0.01, p + 0.01 * tick(rng));
  }
  return TickDay(0, std::move(r));
}

// Direct reading of the retained-time definition, kept independent of the
// library code.
std::vector<std::size_t> brute_price_scan(const TickDay& d, double C) {
  std::vector<std::size_t> keep{0};
  for (std::size_t j = 1; j < d.size(); ++j)
    if (std::abs(d[j].price - d[keep.back()].price) >= C - 1e-9) keep.push_back(j);
  return keep;
}

std::vector<std::size_t> brute_volume_scan(const TickDay& d, double V) {
  std::vector<std::size_t> keep{0};
  for (std::size_t j = 1; j < d.size(); ++j) {
    double acc = 0.0;
    for (std::size_t k = keep.back() + 1; k <= j; ++k) acc += d[k].volume;
    if (acc >= V) keep.push_back(j);
  }
  return keep;
}

std::vector<double> diffs(const TickDay& d, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (std::size_t k = 1; k < idx.size(); ++k) out.push_back(to_seconds(d[idx[k]].time_ms - d[idx[k - 1]].time_ms));
  return out;
}

}  // namespace

TEST_CASE("trade durations are first differences and keep zeros") {
  const std::vector<double> t{0.0, 0.5, 0.5, 1.2};
  const auto s = compute_trade_durations(make_tick_day(0, t));
  const auto v = values_of(s);
  REQUIRE(v.size() == 3);
  CHECK(v[0] == Approx(0.5));
  CHECK(v[1] == 0.0);
  CHECK(v[2] == Approx(0.7));
  CHECK(s.kind() == DurationKind::trade);
  CHECK(s.segments()[0].entries[0].end_time == s.segments()[0].entries[1].start_time);
}

TEST_CASE("a single tick yields an empty series") {
  const std::vector<double> t{1.0};
  CHECK(compute_trade_durations(make_tick_day(0, t)).empty());
}

TEST_CASE("transaction aggregation follows the (T-1) index grid") {
  const std::vector<double> t{0, 1, 3, 6, 10};
  const auto v = values_of(aggregate_transactions(make_tick_day(0, t), 3));
  REQUIRE(v.size() == 2);
  CHECK(v[0] == 3.0);
  CHECK(v[1] == 7.0);
  CHECK(aggregate_transactions(make_tick_day(0, t), 4).size() == 1);
  CHECK_THROWS_AS(aggregate_transactions(make_tick_day(0, t), 1), ParameterError);
}

TEST_CASE("T = 2 aggregation is identical to trade durations") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = random_day(rng, 2 + rep * 7);
    CHECK(values_of(aggregate_transactions(d, 2)) == values_of(compute_trade_durations(d)));
  }
}

TEST_CASE("aggregated durations telescope") {
  std::mt19937_64 rng(6);
  for (int T : {2, 3, 5, 13, 40}) {
    const auto d = random_day(rng, 301);
    const auto v = values_of(aggregate_transactions(d, T));
    const auto K = v.size();
    CHECK(K == (d.size() - 1) / static_cast<std::size_t>(T - 1));
    double sum = 0.0;
    for (double x : v) sum += x;
    CHECK(sum == Approx(to_seconds(d[(T - 1) * K].time_ms - d[0].time_ms)).margin(1e-9));
  }
}

TEST_CASE("aggregating tick durations matches aggregating ticks") {
  std::mt19937_64 rng(7);
  const auto d = random_day(rng, 200);
  const auto a = values_of(aggregate_transactions(d, 6));
  const auto b = values_of(aggregate_durations(compute_trade_durations(d), 6));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == Approx(b[i]).margin(1e-9));
}

TEST_CASE("price thinning hand trace") {
  const std::vector<double> t{0, 1, 2, 3, 4};
  const std::vector<double> p{100, 100.01, 100.05, 99.94, 100.06};
  const auto d = make_tick_day(0, t, p);
  const auto s = thin_by_price(d, 0.05);
  CHECK(values_of(s) == diffs(d, {0, 2, 3, 4}));
  CHECK(values_of(thin_by_price(d, 0.0)) == values_of(compute_trade_durations(d)));
}

TEST_CASE("prices stepping by exactly C keep every tick") {
  std::vector<double> t, p;
  for (int i = 0; i < 50; ++i) {
    t.push_back(i);
    p.push_back(100.0 + 0.05 * i);
  }
  const auto d = make_tick_day(0, t, p);
  CHECK(thin_by_price(d, 0.05).size() == 49);
}

TEST_CASE("price thinning agrees with a brute-force scanner") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const auto d = random_day(rng, 400);
    const double C = 0.01 * (1 + rep % 6);
    const auto keep = brute_price_scan(d, C);
    CHECK(values_of(thin_by_price(d, C)) == diffs(d, keep));
    for (std::size_t k = 1; k < keep.size(); ++k)
      CHECK(std::abs(d[keep[k]].price - d[keep[k - 1]].price) >= C - 1e-9);
  }
}

TEST_CASE("volume thinning hand trace and edge cases") {
  const std::vector<double> t{0, 1, 2, 3};
  const std::vector<double> v{10, 10, 10, 10};
  const auto d = make_tick_day(0, t, {}, v);
  const auto s = thin_by_volume(d, 20.0);
  REQUIRE(s.size() == 1);
  CHECK(values_of(s)[0] == 2.0);
  CHECK(thin_by_volume(d, 5.0).size() == 3);
  CHECK(thin_by_volume(d, 1000.0).empty());
  CHECK_THROWS_AS(thin_by_volume(d, 0.0), ParameterError);
}

TEST_CASE("volume thinning agrees with a brute-force accumulator") {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 30; ++rep) {
    const auto d = random_day(rng, 300);
    const double V = 100.0 * (1 + rep % 10);
    CHECK(values_of(thin_by_volume(d, V)) == diffs(d, brute_volume_scan(d, V)));
  }
}

TEST_CASE("filter drops zeros and long durations in order") {
  const auto s = raw_series({0.0, 0.5, 4.0, 1.0});
  const auto f = apply_filter(s, {true, 3.0});
  CHECK(values_of(f) == std::vector<double>{0.5, 1.0});
  CHECK_FALSE(f.contiguous());
  const auto same = apply_filter(s, {});
  CHECK(values_of(same) == values_of(s));
  CHECK(same.contiguous());
  CHECK(apply_filter(raw_series({0.0, 0.0}), {true, std::nullopt}).empty());
  CHECK_THROWS_AS(apply_filter(s, {false, -1.0}), ParameterError);
}

TEST_CASE("filter never reorders or alters survivors") {
  std::mt19937_64 rng(10);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x;
  for (int i = 0; i < 500; ++i) x.push_back(i % 7 == 0 ? 0.0 : e(rng));
  const auto f = values_of(apply_filter(raw_series(x), {true, 2.0}));
  std::vector<double> expected;
  for (double v : x)
    if (v != 0.0 && v <= 2.0) expected.push_back(v);
  CHECK(f == expected);
}

TEST_CASE("describe uses the empirical-CDF inverse") {
  const std::vector<double> x{1, 2, 3, 4};
  const auto s = describe(std::span<const double>(x));
  CHECK(s.mean == 2.5);
  CHECK(s.q50 == 2.0);
  CHECK(s.sd == Approx(std::sqrt(5.0 / 3.0)));
  const std::vector<double> c(30, 2.0);
  const auto k = describe(std::span<const double>(c));
  CHECK(k.sd == 0.0);
  CHECK_FALSE(k.ljung_box.has_value());
  CHECK_THROWS_AS(describe(std::span<const double>()), ParameterError);
}

TEST_CASE("quantile properties") {
  std::mt19937_64 rng(11);
  std::lognormal_distribution<double> ln(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(50 + rep * 13);
    for (auto& v : x) v = ln(rng);
    const auto s = describe(std::span<const double>(x));
    const double qs[] = {s.q05, s.q25, s.q50, s.q75, s.q95};
    const double ps[] = {0.05, 0.25, 0.5, 0.75, 0.95};
    for (int j = 0; j < 5; ++j) {
      const auto below = std::count_if(x.begin(), x.end(), [&](double v) { return v <= qs[j]; });
      CHECK(static_cast<double>(below) / static_cast<double>(x.size()) >= ps[j]);
    }
    auto trimmed = x;
    trimmed.erase(std::max_element(trimmed.begin(), trimmed.end()));
    CHECK(describe(std::span<const double>(trimmed)).q05 <= s.q05);
  }
}

TEST_CASE("price-duration volatility") {
  CHECK(price_duration_volatility(0.05, 100.0, 2.0) == Approx(5.0e-7));
  CHECK(price_duration_volatility(0.05, 100.0, 0.0) == 0.0);
  CHECK(price_duration_volatility(0.1, 100.0, 2.0) == Approx(4.0 * price_duration_volatility(0.05, 100.0, 2.0)));
  CHECK_THROWS_AS(price_duration_volatility(0.05, 0.0, 1.0), ParameterError);
}

TEST_CASE("duration CSV round trip") {
  const auto s = raw_series({0.25, 1.5, 0.001});
  std::ostringstream out;
  write_duration_csv(out, s);
  std::istringstream in(out.str());
  const auto back = parse_duration_csv(in);
  CHECK(values_of(back) == values_of(s));
  CHECK(back.segments()[0].entries[1].start_time == s.segments()[0].entries[1].start_time);
}

TEST_CASE("series rejects negative durations") {
  CHECK_THROWS_AS(raw_series({1.0, -0.5}), ValidationError);
}
