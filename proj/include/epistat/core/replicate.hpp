#pragma once

#include <algorithm>
#include <atomic>
#include <concepts>
#include <cstdint>
#include <thread>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/event_log.hpp"
#include "epistat/core/gse.hpp"
#include "epistat/core/rng.hpp"

namespace epistat {

inline constexpr double default_major_cutoff = 0.1;

/// True iff Z > cutoff_fraction * n (strict).
inline bool classify_major(int z, int n, double cutoff_fraction = default_major_cutoff) {
  detail::require(z >= 0 && z <= n, "final size must lie in [0, n]");
  detail::require(cutoff_fraction > 0.0 && cutoff_fraction < 1.0,
                  "cutoff fraction must lie in (0, 1)");
  return static_cast<double>(z) > cutoff_fraction * static_cast<double>(n);
}

struct ReplicateOptions {
  double cutoff_fraction = default_major_cutoff;
  double grid_step = 0.5;
  int grid_points = 101;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ReplicateSummary {
  std::vector<int> final_sizes;
  double major_fraction = 0.0;
  std::vector<double> grid;
  // Mean compartment counts over all replicates at each grid time.
  std::vector<double> mean_S, mean_E, mean_I, mean_R;
};

namespace detail {

template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  unsigned workers = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i, 0u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = next++; i < count; i = next++) body(i, w);
    });
  }
}

}  // namespace detail

/// Runs R replicates of `simulate(seed) -> EventLog`; replicate i uses
/// stream_seed(master_seed, i). Integer accumulation keeps the summary
/// identical for any thread count.
template <class Simulator>
  requires std::invocable<Simulator&, std::uint64_t>
ReplicateSummary replicate(Simulator&& simulate, int replicates, std::uint64_t master_seed,
                           const ReplicateOptions& opts = {}) {
  detail::require(replicates >= 1, "replicate count must be >= 1");
  detail::require(opts.grid_points >= 1 && opts.grid_step > 0.0, "invalid trajectory grid");
  const auto R = static_cast<std::size_t>(replicates);
  const auto G = static_cast<std::size_t>(opts.grid_points);
  unsigned workers = opts.threads != 0 ? opts.threads
                                       : std::max(1u, std::thread::hardware_concurrency());

  ReplicateSummary out;
  out.final_sizes.assign(R, 0);
  std::vector<std::uint8_t> major(R, 0);
  std::vector<std::vector<std::int64_t>> sums(workers, std::vector<std::int64_t>(4 * G, 0));

  detail::parallel_for(R, workers, [&](std::size_t i, unsigned w) {
    const EventLog log = simulate(stream_seed(master_seed, i));
    const auto path = compartment_path(log);
    out.final_sizes[i] = final_size(log);
    major[i] = classify_major(out.final_sizes[i], log.n, opts.cutoff_fraction) ? 1 : 0;
    auto& acc = sums[w];
    for (std::size_t g = 0; g < G; ++g) {
      const auto st = state_at(path, static_cast<double>(g) * opts.grid_step);
      acc[4 * g] += st.S;
      acc[4 * g + 1] += st.E;
      acc[4 * g + 2] += st.I;
      acc[4 * g + 3] += st.R;
    }
  });

  std::size_t majors = 0;
  for (auto m : major) majors += m;
  out.major_fraction = static_cast<double>(majors) / static_cast<double>(R);
  out.grid.resize(G);
  out.mean_S.assign(G, 0.0);
  out.mean_E.assign(G, 0.0);
  out.mean_I.assign(G, 0.0);
  out.mean_R.assign(G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    std::int64_t s = 0, e = 0, in = 0, r = 0;
    for (const auto& acc : sums) {
      s += acc[4 * g];
      e += acc[4 * g + 1];
      in += acc[4 * g + 2];
      r += acc[4 * g + 3];
    }
    const double denom = static_cast<double>(R);
    out.grid[g] = static_cast<double>(g) * opts.grid_step;
    out.mean_S[g] = static_cast<double>(s) / denom;
    out.mean_E[g] = static_cast<double>(e) / denom;
    out.mean_I[g] = static_cast<double>(in) / denom;
    out.mean_R[g] = static_cast<double>(r) / denom;
  }
  return out;
}

inline ReplicateSummary replicate(const GseParams& params, int replicates,
                                  std::uint64_t master_seed, const ReplicateOptions& opts = {}) {
  params.validate();
  return replicate([&params](std::uint64_t seed) { return simulate_gse(params, seed); },
                   replicates, master_seed, opts);
}

}  // namespace epistat
