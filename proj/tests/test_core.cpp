#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "epistat/core/gse.hpp"
#include "epistat/core/replicate.hpp"
#include "epistat/io/schemas.hpp"
#include "support/stats.hpp"

using namespace epistat;
using Catch::Approx;

namespace {

GseParams gse(double lambda, double gamma, int n) {
  GseParams p;
  p.lambda = lambda;
  p.gamma = gamma;
  p.n = n;
  return p;
}

// Independent replay: recompute S, E, I, R after every event from scratch and
// check the infector was infectious at the infection time.
void check_log_invariants(const EventLog& log) {
  std::vector<int> state(static_cast<std::size_t>(log.n), 0);  // 0 S, 1 E, 2 I, 3 R
  const bool seir = std::any_of(log.events.begin(), log.events.end(),
                                [](const Event& e) { return e.kind == EventKind::end_latency; });
  double last = 0.0;
  for (const Event& e : log.events) {
    REQUIRE(e.time >= last);
    last = e.time;
    auto& s = state[static_cast<std::size_t>(e.subject)];
    if (e.kind == EventKind::infection) {
      REQUIRE(s == 0);
      if (e.infector != no_infector) REQUIRE(state[static_cast<std::size_t>(e.infector)] == 2);
      s = seir ? 1 : 2;
    } else if (e.kind == EventKind::end_latency) {
      REQUIRE(s == 1);
      s = 2;
    } else {
      REQUIRE(s == 2);
      s = 3;
    }
    int counts[4] = {0, 0, 0, 0};
    for (int v : state) ++counts[v];
    REQUIRE(counts[0] + counts[1] + counts[2] + counts[3] == log.n);
  }
}

}  // namespace

TEST_CASE("gse without contacts infects only the index case") {
  const auto log = simulate_gse(gse(0.0, 1.0, 100), 3);
  CHECK(final_size(log) == 1);
  const auto recoveries = std::count_if(log.events.begin(), log.events.end(),
                                        [](const Event& e) { return e.kind == EventKind::recovery; });
  CHECK(recoveries == 1);
  CHECK(log.events.front().subject == 0);
  CHECK(log.events.front().infector == no_infector);
}

TEST_CASE("gse is deterministic in its seed") {
  const auto p = gse(1.5, 1.0, 1000);
  const auto a = simulate_gse(p, 7);
  const auto b = simulate_gse(p, 7);
  CHECK(a == b);
  CHECK(io::to_csv(a) == io::to_csv(b));
  const auto c = simulate_gse(p, 8);
  CHECK_FALSE(a == c);
}

TEST_CASE("event logs satisfy the compartment invariants") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto p = gse(2.0, 1.0, 60);
    if (seed % 3 == 1) p.infectious_period = InfectiousPeriod::fixed;
    if (seed % 3 == 2) p.latent_rate = 0.7;
    const auto log = simulate_gse(p, seed);
    check_log_invariants(log);
    validate(log);
    for (const auto& st : compartment_path(log)) CHECK(st.S + st.E + st.I + st.R == log.n);
    const auto infections = std::count_if(
        log.events.begin(), log.events.end(),
        [](const Event& e) { return e.kind == EventKind::infection; });
    CHECK(final_size(log) == infections);
  }
}

TEST_CASE("fixed infectious period lasts exactly 1/gamma") {
  auto p = gse(2.5, 0.5, 200);
  p.infectious_period = InfectiousPeriod::fixed;
  const auto log = simulate_gse(p, 11);
  const auto t_inf = infection_times(log);
  for (const auto& e : log.events)
    if (e.kind == EventKind::recovery)
      CHECK(e.time - t_inf[static_cast<std::size_t>(e.subject)] == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("seir logs record end of latency between infection and recovery") {
  auto p = gse(2.0, 1.0, 100);
  p.latent_rate = 2.0;
  const auto log = simulate_gse(p, 5);
  std::vector<double> inf(100, -1), lat(100, -1), rec(100, -1);
  for (const auto& e : log.events) {
    auto i = static_cast<std::size_t>(e.subject);
    if (e.kind == EventKind::infection) inf[i] = e.time;
    if (e.kind == EventKind::end_latency) lat[i] = e.time;
    if (e.kind == EventKind::recovery) rec[i] = e.time;
  }
  for (std::size_t i = 0; i < 100; ++i) {
    if (inf[i] < 0) continue;
    REQUIRE(lat[i] >= inf[i]);
    REQUIRE(rec[i] > lat[i]);
  }
}

TEST_CASE("gse parameters are validated") {
  CHECK_THROWS_AS(simulate_gse(gse(-1.0, 1.0, 10), 1), DomainError);
  CHECK_THROWS_AS(simulate_gse(gse(1.0, 0.0, 10), 1), DomainError);
  CHECK_THROWS_AS(simulate_gse(gse(1.0, 1.0, 1), 1), DomainError);
  auto p = gse(1.0, 1.0, 10);
  p.latent_rate = 0.0;
  CHECK_THROWS_AS(simulate_gse(p, 1), DomainError);
}

TEST_CASE("reproduction numbers and vaccination coverage") {
  CHECK(reproduction_number(3.0, 2.0) == 1.5);
  CHECK(vaccinated_reproduction_number(2.0, 0.25) == 1.5);
  CHECK(critical_vaccination_coverage(2.0) == 0.5);
  CHECK(critical_vaccination_coverage(0.8) == 0.0);
}

TEST_CASE("reed-frost trivial chains") {
  const auto none = simulate_reed_frost({10, 0.0, 2}, 1);
  CHECK(none == std::vector<int>{2});
  CHECK(total_infected(none) == 2);
  const auto all = simulate_reed_frost({5, 1.0, 1}, 1);
  CHECK(all == std::vector<int>{1, 4});
  CHECK(total_infected(all) == 5);
  CHECK_THROWS_AS(simulate_reed_frost({5, 1.5, 1}, 1), DomainError);
  CHECK_THROWS_AS(simulate_reed_frost({5, 0.5, 5}, 1), DomainError);
}

TEST_CASE("reed-frost escape probability for n=3") {
  // The index case fails to infect either susceptible with probability (1-p)^2.
  const int runs = 100000;
  int only_index = 0;
  for (int s = 0; s < runs; ++s)
    if (total_infected(simulate_reed_frost({3, 0.5, 1}, stream_seed(99, s))) == 1) ++only_index;
  CHECK(static_cast<double>(only_index) / runs == Approx(0.25).margin(0.01));
}

TEST_CASE("final size of hand-built logs") {
  EventLog index_only{100, {{0.0, EventKind::infection, 0, no_infector}, {1.0, EventKind::recovery, 0, no_infector}}, 1.0};
  CHECK(final_size(index_only) == 1);

  EventLog everyone{50, {}, 0.0};
  everyone.events.push_back({0.0, EventKind::infection, 0, no_infector});
  for (int i = 1; i < 50; ++i) everyone.events.push_back({0.01 * i, EventKind::infection, i, 0});
  for (int i = 0; i < 50; ++i) everyone.events.push_back({1.0 + 0.01 * i, EventKind::recovery, i, no_infector});
  CHECK(final_size(everyone) == 50);

  EventLog open{10, {{0.0, EventKind::infection, 0, no_infector}}, 0.0};
  CHECK_THROWS_AS(final_size(open), DomainError);
}

TEST_CASE("malformed logs are rejected") {
  EventLog twice{3, {{0.0, EventKind::infection, 0, no_infector}, {0.5, EventKind::infection, 0, 0}}, 0.5};
  CHECK_THROWS_AS(validate(twice), DataError);
  EventLog bad_infector{3, {{0.0, EventKind::infection, 0, no_infector}, {0.5, EventKind::infection, 1, 2}}, 0.5};
  CHECK_THROWS_AS(validate(bad_infector), DataError);
  EventLog backwards{3, {{1.0, EventKind::infection, 0, no_infector}, {0.5, EventKind::recovery, 0, no_infector}}, 1.0};
  CHECK_THROWS_AS(validate(backwards), DataError);
}

TEST_CASE("major outbreak classification uses a strict cutoff") {
  CHECK_FALSE(classify_major(0, 100));
  CHECK(classify_major(100, 100));
  CHECK_FALSE(classify_major(1000, 10000, 0.1));
  CHECK(classify_major(1001, 10000, 0.1));
  CHECK_THROWS_AS(classify_major(5, 4), DomainError);
  CHECK_THROWS_AS(classify_major(1, 4, 1.0), DomainError);
}

TEST_CASE("replicate summaries") {
  const auto p = gse(1.5, 1.0, 500);
  SECTION("one replicate equals the single run") {
    const auto s = replicate(p, 1, 42);
    const auto log = simulate_gse(p, stream_seed(42, 0));
    REQUIRE(s.final_sizes.size() == 1);
    CHECK(s.final_sizes[0] == final_size(log));
    CHECK(s.major_fraction == (classify_major(final_size(log), 500) ? 1.0 : 0.0));
    const auto path = compartment_path(log);
    for (std::size_t g = 0; g < s.grid.size(); ++g)
      CHECK(s.mean_I[g] == state_at(path, s.grid[g]).I);
  }
  SECTION("identical master seeds and any thread count give identical summaries") {
    ReplicateOptions serial;
    serial.threads = 1;
    ReplicateOptions parallel;
    parallel.threads = 4;
    const auto a = replicate(p, 40, 9, serial);
    const auto b = replicate(p, 40, 9, parallel);
    CHECK(a.final_sizes == b.final_sizes);
    CHECK(a.major_fraction == b.major_fraction);
    CHECK(a.mean_S == b.mean_S);
    CHECK(a.mean_R == b.mean_R);
  }
  CHECK_THROWS_AS(replicate(p, 0, 1), DomainError);
}

TEST_CASE("subcritical outbreaks stay minor") {
  const auto s = replicate(gse(0.5, 1.0, 10000), 1000, 2024);
  // Extinction is certain below threshold; allow a generous binomial margin
  // around a tiny per-run probability.
  CHECK(s.major_fraction <= 0.005);
}

TEST_CASE("supercritical final-size law") {
  const auto s = replicate(gse(1.5, 1.0, 10000), 2000, 77);
  const double tau = oracle::final_fraction(1.5);
  CHECK(tau == Approx(0.5828).margin(5e-5));
  double sum = 0.0;
  int majors = 0;
  for (int z : s.final_sizes)
    if (classify_major(z, 10000)) {
      sum += z / 10000.0;
      ++majors;
    }
  REQUIRE(majors > 500);
  CHECK(sum / majors == Approx(tau).margin(0.02));
}

TEST_CASE("fixed infectious period also gives a bimodal final size at R0=2") {
  auto p = gse(2.0, 1.0, 2000);
  p.infectious_period = InfectiousPeriod::fixed;
  const auto s = replicate(p, 400, 5);
  int small = 0, large = 0, middle = 0;
  for (int z : s.final_sizes) {
    const double f = z / 2000.0;
    if (f < 0.05) ++small;
    else if (f > 0.3) ++large;
    else ++middle;
  }
  CHECK(small > 20);
  CHECK(large > 200);
  // The gap between the clusters is essentially empty.
  CHECK(middle <= 2);
}
