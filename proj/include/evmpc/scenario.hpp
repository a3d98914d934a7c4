#pragma once

#include "evmpc/fleet.hpp"
#include "evmpc/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace evmpc {

struct Scenario {
  Network network;
  std::vector<Pev> roster;
  Profile load_profile;   // multipliers l(t)
  Profile price_profile;  // money per kWh
  int slots = 24;
  double dt = 0.5;
  std::uint64_t seed = 1;

  // l(t) * T / sum l, the per-slot multiplier on every bus's base load.
  std::vector<double> load_factors() const;
  // Throws InputError on profile length mismatch, stations outside the
  // generator set, or invalid vehicles.
  void validate() const;
  // FNV-1a over the canonical text of every field.
  std::string fingerprint() const;
};

struct FleetDefaults {
  double capacity_kwh = 100.0;
  double soc0 = 0.2;
  double u_h = 0.9;
  double p_max_kw = 20.0;
  int departure_slot = 0;  // 0 means the last slot
};

struct ArrivalModel {
  double mean_h = 20.0;
  double sd_h = 1.5;
  double window_lo = 18.0;  // also the clock time of slot 1's start
  double window_hi = 24.0;
};

// Draws from N(mean, sd^2) truncated to [lo, hi) by inverse CDF.
std::vector<double> sample_arrival_hours(std::uint64_t seed, int count,
                                         const ArrivalModel& model = {});
// ceil((h - lo) / dt) clamped to [1, slots].
std::vector<int> sample_arrivals(std::uint64_t seed, int count, double dt, int slots,
                                 const ArrivalModel& model = {});
// Analytic mean of the truncated distribution.
double truncated_mean(const ArrivalModel& model);

// Vehicles numbered from 1, grouped by station in the order given; arrivals
// come from one seeded stream. Throws InputError if any vehicle fails
// check_admissible.
std::vector<Pev> build_fleet(std::uint64_t seed, const std::vector<std::pair<int, int>>& counts,
                             const FleetDefaults& defaults, int slots, double dt,
                             const ArrivalModel& arrivals = {});

// `total` vehicles spread across the generator buses, lowest buses first.
std::vector<std::pair<int, int>> uniform_counts(const Network& network, int total);

// INI file with [network], [fleet], [profiles] and [horizon]; relative
// paths resolve against the file's directory.
// A seed override replaces fleet.seed before vehicles are drawn.
Scenario load_scenario(const std::filesystem::path& path,
                       std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace evmpc
