#include <catch2/catch_amalgamated.hpp>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "epistat/core/gse.hpp"
#include "epistat/emerging/generation.hpp"
#include "epistat/emerging/growth.hpp"
#include "epistat/emerging/intervals.hpp"
#include "support/stats.hpp"

using namespace epistat;
using Catch::Approx;

namespace {

EventLog chain_log() {
  return {3,
          {{0.0, EventKind::infection, 0, no_infector},
           {1.0, EventKind::infection, 1, 0},
           {1.5, EventKind::recovery, 0, no_infector},
           {2.0, EventKind::infection, 2, 1},
           {2.5, EventKind::recovery, 1, no_infector},
           {3.0, EventKind::recovery, 2, no_infector}},
          3.0};
}

EventLog major_outbreak(const GseParams& p, std::uint64_t& seed) {
  for (;; ++seed) {
    auto log = simulate_gse(p, seed);
    if (final_size(log) > p.n / 10) return log;
  }
}

}  // namespace

TEST_CASE("growth rate of a synthetic exponential series") {
  IncidenceSeries s;
  for (int t = 0; t < 10; ++t) s.counts.push_back(std::lround(10.0 * std::exp(0.3 * t)));
  const auto est = estimate_growth_rate(s, {0, 9});
  CHECK(est.r >= 0.29);
  CHECK(est.r <= 0.31);
  CHECK(est.se > 0.0);
  const auto ls = estimate_growth_rate(s, {0, 9}, GrowthMethod::log_least_squares);
  CHECK(ls.r == Approx(0.3).margin(0.01));

  IncidenceSeries half = s;
  half.period_length = 0.5;
  CHECK(estimate_growth_rate(half, {0, 9}).r == Approx(2 * est.r).epsilon(1e-9));
}

TEST_CASE("growth rate of a flat series is near zero") {
  IncidenceSeries s{{20, 18, 22, 19, 21, 20, 23, 17}, 1.0};
  const auto est = estimate_growth_rate(s, {0, 7});
  CHECK(std::abs(est.r) <= 2 * est.se);
}

TEST_CASE("growth-rate input checks") {
  IncidenceSeries zeros{{0, 0, 0, 0}, 1.0};
  CHECK_THROWS_AS(estimate_growth_rate(zeros, {0, 3}), DomainError);
  IncidenceSeries s{{1, 2, 3, 4}, 1.0};
  CHECK_THROWS_AS(estimate_growth_rate(s, {0, 1}), DomainError);
  CHECK_THROWS_AS(estimate_growth_rate(s, {0, 4}), DomainError);
  IncidenceSeries with_zero{{0, 2, 3, 4}, 1.0};
  CHECK_NOTHROW(estimate_growth_rate(with_zero, {0, 3}));
  CHECK_THROWS_AS(estimate_growth_rate(with_zero, {0, 3}, GrowthMethod::log_least_squares),
                  DomainError);
}

TEST_CASE("growth rate of simulated outbreaks matches lambda - gamma") {
  // Single early windows scatter by about 0.1 around the asymptotic rate
  // because of the random timing of the first generations, so the check is on
  // the average over 20 major outbreaks.
  GseParams p;
  p.lambda = 2.0;
  p.gamma = 1.0;
  p.n = 100000;
  std::uint64_t seed = 1;
  double sum = 0.0;
  const int runs = 20;
  for (int k = 0; k < runs; ++k, ++seed) {
    const auto log = major_outbreak(p, seed);
    const auto inc = incidence_from_log(log, 0.5);
    // From the first period with 50 cumulative cases until 5% are infected.
    long cum = 0;
    std::size_t first = 0, last = 0;
    bool started = false;
    for (std::size_t i = 0; i < inc.counts.size(); ++i) {
      cum += inc.counts[i];
      if (!started && cum >= 50) {
        first = i;
        started = true;
      }
      if (cum < 5000) last = i;
    }
    REQUIRE(last >= first + 2);
    sum += estimate_growth_rate(inc, {first, last}).r;
  }
  CHECK(sum / runs == Approx(1.0).margin(0.1));
}

TEST_CASE("Euler-Lotka closed forms") {
  CHECK(euler_lotka_r(2.0, GenerationTimeDist::exponential(1.0)) == Approx(1.0).margin(1e-10));
  CHECK(euler_lotka_r(2.0, GenerationTimeDist::fixed(1.0)) == Approx(std::log(2.0)).margin(1e-10));
  for (const auto& g : {GenerationTimeDist::exponential(0.7), GenerationTimeDist::fixed(3.0),
                        GenerationTimeDist::gamma(2.5, 1.5)})
    CHECK(euler_lotka_r(1.0, g) == 0.0);
  for (double r0 : {0.3, 0.8, 1.2, 2.0, 5.0, 15.0}) {
    const double gamma = 0.4;
    CHECK(euler_lotka_r(r0, GenerationTimeDist::exponential(gamma)) ==
          Approx(gamma * (r0 - 1.0)).margin(1e-10));
    CHECK(euler_lotka_r(r0, GenerationTimeDist::fixed(2.5)) ==
          Approx(std::log(r0) / 2.5).margin(1e-10));
  }
  // gamma(2, 1): R0 = (1 + r)^2.
  CHECK(euler_lotka_r(2.0, GenerationTimeDist::gamma(2.0, 1.0)) ==
        Approx(std::sqrt(2.0) - 1.0).margin(1e-10));
}

TEST_CASE("Euler-Lotka inverse") {
  CHECK(r0_from_growth(1.0, GenerationTimeDist::exponential(1.0)) == Approx(2.0).epsilon(1e-12));
  CHECK(r0_from_growth(0.0, GenerationTimeDist::gamma(3.0, 2.0)) == 1.0);
  const auto g = GenerationTimeDist::gamma(2.0, 2.0);
  CHECK(r0_from_growth(euler_lotka_r(1.7, g), g) == Approx(1.7).margin(1e-8));
  for (double r0 : {0.5, 0.9, 1.1, 3.0, 8.0}) {
    const auto gg = GenerationTimeDist::gamma(4.2, 0.9);
    CHECK(r0_from_growth(euler_lotka_r(r0, gg), gg) == Approx(r0).margin(1e-8));
  }
  CHECK_THROWS_AS(r0_from_growth(-1.0, GenerationTimeDist::exponential(1.0)), DomainError);
  CHECK_THROWS_AS(r0_from_growth(-3.0, GenerationTimeDist::gamma(2.0, 2.0)), DomainError);
}

TEST_CASE("Euler-Lotka is monotone") {
  const auto g = GenerationTimeDist::gamma(2.0, 0.5);
  double prev = -1e300;
  for (double r0 = 0.2; r0 < 10.0; r0 += 0.3) {
    const double r = euler_lotka_r(r0, g);
    CHECK(r > prev);
    prev = r;
  }
  double prev_r0 = 0.0;
  for (double r = -0.4; r < 3.0; r += 0.1) {
    const double r0 = r0_from_growth(r, g);
    CHECK(r0 > prev_r0);
    prev_r0 = r0;
  }
}

TEST_CASE("Laplace transforms agree with quadrature of the density") {
  boost::math::quadrature::exp_sinh<double> integrator;
  for (const auto& g : {GenerationTimeDist::gamma(2.0, 2.0), GenerationTimeDist::gamma(0.7, 1.3),
                        GenerationTimeDist::exponential(0.5)}) {
    for (double r : {-0.2, 0.0, 0.3, 1.5}) {
      const double q = integrator.integrate([&](double t) {
        const double d = g.density(t);
        return d > 0.0 ? std::exp(-r * t + std::log(d)) : 0.0;
      });
      CHECK(g.laplace(r) == Approx(q).epsilon(1e-9));
    }
    CHECK(integrator.integrate([&](double t) { return g.density(t); }) == Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("empirical generation times") {
  const auto g = GenerationTimeDist::empirical({1.0, 2.0, 2.0, 4.0});
  CHECK(g.mean() == 2.25);
  CHECK(g.laplace(0.5) == Approx((std::exp(-0.5) + 2 * std::exp(-1.0) + std::exp(-2.0)) / 4).epsilon(1e-14));
  const double r = euler_lotka_r(1.8, g);
  CHECK(1.8 * g.laplace(r) == Approx(1.0).margin(1e-10));
  CHECK(euler_lotka_r(0.6, g) < 0.0);

  Rng rng(4);
  std::vector<double> sample;
  for (int i = 0; i < 500; ++i) sample.push_back(rng.gamma(2.0, 1.0));
  const auto h = GenerationTimeDist::empirical(sample);
  const double lo = *std::min_element(sample.begin(), sample.end());
  const double hi = *std::max_element(sample.begin(), sample.end());
  // The histogram density is piecewise constant; sum exact bin integrals.
  const int bins = static_cast<int>(std::ceil(std::sqrt(500.0)));
  const double w = (hi - lo) / bins;
  double total = 0.0;
  for (int b = 0; b < bins; ++b) total += h.density(lo + (b + 0.5) * w) * w;
  CHECK(total == Approx(1.0).margin(1e-8));

  CHECK_THROWS_AS(GenerationTimeDist::empirical({}), DomainError);
  CHECK_THROWS_AS(GenerationTimeDist::empirical({1.0, -2.0}), DomainError);
}

TEST_CASE("forward intervals of a deterministic chain") {
  const auto set = extract_intervals(chain_log());
  CHECK(set.forward == std::vector<double>{1.0, 1.0});
  CHECK(set.backward == std::vector<double>{1.0, 1.0});
  CHECK(set.serial.empty());
}

TEST_CASE("zero onset offsets give serial equal to generation intervals") {
  GseParams p;
  p.lambda = 2.0;
  p.gamma = 1.0;
  p.n = 500;
  std::uint64_t seed = 3;
  const auto log = major_outbreak(p, seed);
  const std::vector<double> zeros(500, 0.0);
  IntervalOptions opts;
  opts.onset_offsets = zeros;
  const auto set = extract_intervals(log, opts);
  CHECK(set.serial == set.forward);
}

TEST_CASE("interval extraction rejects missing attribution") {
  auto log = chain_log();
  log.events[3].infector = no_infector;
  CHECK_THROWS_AS(extract_intervals(log), DataError);
  const std::vector<double> short_offsets(2, 0.0);
  IntervalOptions opts;
  opts.onset_offsets = short_offsets;
  CHECK_THROWS_AS(extract_intervals(chain_log(), opts), DomainError);
}

TEST_CASE("serial intervals are more variable than generation intervals") {
  GseParams p;
  p.lambda = 2.0;
  p.gamma = 1.0;
  p.n = 200;
  Rng rng(12);
  std::vector<double> gen, ser;
  std::uint64_t seed = 100;
  for (int run = 0; run < 1000; ++run, ++seed) {
    const auto log = simulate_gse(p, seed);
    std::vector<double> offsets(200);
    for (auto& o : offsets) o = rng.gamma(3.0, 2.0);
    IntervalOptions opts;
    opts.onset_offsets = offsets;
    const auto set = extract_intervals(log, opts);
    gen.insert(gen.end(), set.forward.begin(), set.forward.end());
    ser.insert(ser.end(), set.serial.begin(), set.serial.end());
  }
  CHECK(oracle::variance(ser) >= oracle::variance(gen));
}

TEST_CASE("backward intervals are shorter during growth") {
  GseParams p;
  p.lambda = 2.0;
  p.gamma = 1.0;
  p.n = 20000;
  std::vector<double> fwd, bwd;
  std::uint64_t seed = 1;
  for (int run = 0; run < 40; ++run, ++seed) {
    const auto log = major_outbreak(p, seed);
    IntervalOptions opts;
    opts.window = growth_phase_window(log);
    const auto set = extract_intervals(log, opts);
    fwd.insert(fwd.end(), set.forward.begin(), set.forward.end());
    bwd.insert(bwd.end(), set.backward.begin(), set.backward.end());
  }
  const double diff = oracle::mean(fwd) - oracle::mean(bwd);
  const double se = std::sqrt(oracle::variance(fwd) / fwd.size() + oracle::variance(bwd) / bwd.size());
  CHECK(oracle::normal_upper_pvalue(diff / se) < 0.05);
}

TEST_CASE("growth-phase window") {
  GseParams p;
  p.lambda = 2.0;
  p.gamma = 1.0;
  p.n = 2000;
  std::uint64_t seed = 9;
  const auto log = major_outbreak(p, seed);
  const auto w = growth_phase_window(log);
  CHECK(w.start < w.end);
  long before_end = 0;
  for (const auto& e : log.events)
    if (e.kind == EventKind::infection && e.time < w.end) ++before_end;
  CHECK(before_end < 100);
  CHECK_THROWS_AS(growth_phase_window(chain_log(), 0.01, 1.0 + 1e-9), DomainError);
}
