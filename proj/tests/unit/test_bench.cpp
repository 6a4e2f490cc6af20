#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/test_support.hpp"
#include "twinbridge/bench.hpp"

using namespace twinbridge;

namespace {

// Two-pass textbook formulas, kept independent of the Welford code.
double naive_mean(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double naive_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = naive_mean(xs), ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

bool rel_close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("stats match the naive recomputation") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(320, 40);
  std::uniform_int_distribution<int> len(1, 300);
  for (int set = 0; set < 200; ++set) {
    std::vector<double> xs(static_cast<std::size_t>(len(rng)));
    for (auto& x : xs) x = n(rng);
    auto st = compute_stats(xs);
    CHECK(rel_close(st.mean, naive_mean(xs), 1e-9));
    CHECK(rel_close(st.std, naive_std(xs), 1e-9));
    CHECK(st.min == *std::min_element(xs.begin(), xs.end()));
    CHECK(st.max == *std::max_element(xs.begin(), xs.end()));
  }
}

TEST_CASE("single sample and empty input") {
  auto st = compute_stats(std::vector<double>{42.5});
  CHECK(st.mean == 42.5);
  CHECK(st.std == 0.0);
  CHECK_THROWS_WITH_AS(compute_stats(std::vector<double>{}), doctest::Contains("TARGET_UNREACHABLE"), Error);
}

TEST_CASE("report json round-trip") {
  auto r = make_report(DeviceKind::Fan, PathKind::Direct, {210.5, 214.25, 219.0}, 1);
  CHECK(r.trials == 4);
  CHECK(report_from_json(report_to_json(r)) == r);
  std::vector<LatencyReport> rs{r, make_report(DeviceKind::Iaq, PathKind::Relay, {1, 2}, 0)};
  CHECK(reports_from_json(reports_to_json(rs)) == rs);
  CHECK(reports_from_json(report_to_json(r)).size() == 1);
}

TEST_CASE("table rows follow IAQ, Fan, Weather and relay before direct") {
  std::vector<LatencyReport> rs{
      make_report(DeviceKind::Weather, PathKind::Relay, {1226.0}, 0),
      make_report(DeviceKind::Fan, PathKind::Relay, {310, 330}, 0),
      make_report(DeviceKind::Iaq, PathKind::Direct, {200, 224}, 0),
      make_report(DeviceKind::Iaq, PathKind::Relay, {315, 325}, 0),
  };
  auto table = render_table(rs);
  auto iaq_relay = table.find("IAQ Sensor       relay");
  auto iaq_direct = table.find("IAQ Sensor       direct");
  auto fan = table.find("Fan Sensor");
  auto weather = table.find("Weather Sensor");
  REQUIRE(iaq_relay != std::string::npos);
  REQUIRE(iaq_direct != std::string::npos);
  CHECK(iaq_relay < iaq_direct);
  CHECK(iaq_direct < fan);
  CHECK(fan < weather);
  CHECK(table.find("320 ± 7.07") != std::string::npos);
  // Single-sample row: mean only, with a thousands separator.
  auto weather_line = table.substr(weather, table.find('\n', weather) - weather);
  CHECK(weather_line.find("1,226") != std::string::npos);
  CHECK(weather_line.find("±") == std::string::npos);
}

TEST_CASE("bootstrap interval brackets the observed difference") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> a(320, 10), b(212, 8);
  std::vector<double> xs(100), ys(100);
  for (auto& x : xs) x = a(rng);
  for (auto& y : ys) y = b(rng);
  double diff = naive_mean(xs) - naive_mean(ys);
  auto ci = bootstrap_mean_difference(xs, ys, 1000, 42);
  CHECK(ci.low < diff);
  CHECK(diff < ci.high);
  CHECK(ci.high - ci.low < 10.0);
  auto again = bootstrap_mean_difference(xs, ys, 1000, 42);
  CHECK(again.low == ci.low);
  CHECK(again.high == ci.high);
}

TEST_CASE("one trial against loopback, no injection") {
  BenchTopology topo(DelayInjection::from_preset("none"));
  auto r = run_trials(topo.targets(), DeviceKind::Iaq, PathKind::Direct, 1);
  CHECK(r.trials == 1);
  CHECK(r.failures == 0);
  CHECK(r.mean_ms == r.raw_samples.at(0));
  CHECK(r.std_ms == 0.0);
}

TEST_CASE("without injection the relay adds under 50 ms") {
  auto r = compare_paths(DeviceKind::Iaq, 30, DelayInjection::from_preset("none"), 200);
  CHECK(r.direct.failures == 0);
  CHECK(r.relay.failures == 0);
  CHECK(r.overhead_ms < 50.0);
}

TEST_CASE("injected delays compose along the path") {
  auto inj = DelayInjection::from_preset("none", 1);
  inj.service_time[DeviceKind::Fan] = DelaySpec::constant(40);
  inj.client_to_relay = DelaySpec::constant(30);
  inj.relay_to_platform = DelaySpec::constant(20);
  BenchTopology topo(inj);
  auto direct = run_trials(topo.targets(), DeviceKind::Fan, PathKind::Direct, 5);
  auto relay = run_trials(topo.targets(), DeviceKind::Fan, PathKind::Relay, 5);
  CHECK(direct.min_ms >= 40.0);
  CHECK(relay.min_ms >= 40.0 + 30.0 + 20.0);
  CHECK(relay.mean_ms - direct.mean_ms == doctest::Approx(50.0).epsilon(0.3));
}

TEST_CASE("unreachable target") {
  BenchTargets t{"http://127.0.0.1:" + std::to_string(tbtest::free_port()), "", std::chrono::milliseconds(200)};
  CHECK_THROWS_WITH_AS(run_trials(t, DeviceKind::Iaq, PathKind::Direct, 3), doctest::Contains("TARGET_UNREACHABLE"),
                       Error);
}

}
