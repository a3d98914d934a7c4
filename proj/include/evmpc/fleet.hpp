#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evmpc {

// Slots are 1-based. Energy in kWh, power in kW, time in hours.
struct Pev {
  int id = 0;
  int station = 0;  // generator bus id
  int t_a = 1;
  int t_d = 24;
  double capacity_kwh = 100.0;
  double soc0 = 0.2;
  double p_max_kw = 20.0;
  double u_h = 0.9;
  std::optional<int> max_stay;  // T_kn, slots
};

inline constexpr double kLedgerTolerance = 1e-9;

double initial_demand(const Pev& pev);

// u_h * p_max * dt * (t_d - t_a + 1) >= C (1 - soc0)
bool check_admissible(const Pev& pev, double dt);

// Throws InputError on broken per-vehicle invariants.
void validate_pev(const Pev& pev, int slots);

class FleetState {
 public:
  FleetState(int slots, double dt);

  int slots() const { return slots_; }
  double dt() const { return dt_; }
  int clock() const { return clock_; }
  void set_clock(int t) { clock_ = t; }

  // Adds a vehicle with its full initial demand outstanding.
  void admit(const Pev& pev);
  bool contains(int id) const { return entries_.count(id) > 0; }
  const Pev& pev(int id) const;
  double remaining(int id) const;
  double delivered(int id) const;
  // All admitted vehicles ordered by id.
  std::vector<const Pev*> pevs() const;

  // Vehicles plugged in at t with outstanding demand, ordered by id.
  std::vector<const Pev*> active_set(int t) const;
  // Latest departure over active_set(t); t when nothing is active.
  int horizon(int t) const;

  // remaining -= u_h * p * dt. Throws on negative p, p above the rate limit,
  // or overcharge beyond tolerance; small undershoots clamp to zero.
  void apply_charge(int id, double p_kw);

  // Drops a vehicle from every later active set; its demand stays unmet.
  void evict(int id);
  bool evicted(int id) const { return entry(id).evicted; }

 private:
  struct Entry {
    Pev pev;
    double remaining;
    bool evicted = false;
  };
  const Entry& entry(int id) const;

  int slots_;
  double dt_;
  int clock_ = 1;
  std::map<int, Entry> entries_;
};

// id,station,arrival_slot,departure_slot,capacity_kwh,soc0,pmax_kw,uh
std::vector<Pev> parse_roster_csv(std::string_view text);
std::string serialize_roster_csv(const std::vector<Pev>& roster);

}  // namespace evmpc
