#include "evmpc/fleet.hpp"

#include "evmpc/error.hpp"
#include "evmpc/text.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace evmpc {

double initial_demand(const Pev& pev) { return pev.capacity_kwh * (1.0 - pev.soc0); }

bool check_admissible(const Pev& pev, double dt) {
  const double deliverable = pev.u_h * pev.p_max_kw * dt * (pev.t_d - pev.t_a + 1);
  return deliverable >= initial_demand(pev);
}

void validate_pev(const Pev& p, int slots) {
  const std::string name = "pev " + std::to_string(p.id);
  if (p.t_a < 1 || p.t_a > p.t_d || p.t_d > slots)
    throw InputError(name + ": need 1 <= arrival <= departure <= " + std::to_string(slots));
  if (p.max_stay && p.t_d - p.t_a > *p.max_stay)
    throw InputError(name + ": stay exceeds its time demand");
  if (!(p.capacity_kwh > 0)) throw InputError(name + ": capacity must be positive");
  if (!(p.soc0 >= 0 && p.soc0 <= 1)) throw InputError(name + ": soc0 outside [0, 1]");
  if (!(p.p_max_kw >= 0)) throw InputError(name + ": negative rate limit");
  if (!(p.u_h > 0 && p.u_h <= 1)) throw InputError(name + ": efficiency outside (0, 1]");
}

FleetState::FleetState(int slots, double dt) : slots_(slots), dt_(dt) {
  if (slots < 1) throw InputError("fleet horizon must be >= 1 slot");
  if (!(dt > 0)) throw InputError("slot length must be positive");
}

void FleetState::admit(const Pev& pev) {
  validate_pev(pev, slots_);
  if (!entries_.emplace(pev.id, Entry{pev, initial_demand(pev)}).second)
    throw InputError("pev " + std::to_string(pev.id) + " admitted twice");
}

const FleetState::Entry& FleetState::entry(int id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw InputError("unknown pev " + std::to_string(id));
  return it->second;
}

const Pev& FleetState::pev(int id) const { return entry(id).pev; }
double FleetState::remaining(int id) const { return entry(id).remaining; }
double FleetState::delivered(int id) const {
  const auto& e = entry(id);
  return initial_demand(e.pev) - e.remaining;
}

std::vector<const Pev*> FleetState::pevs() const {
  std::vector<const Pev*> out;
  for (const auto& [id, e] : entries_) out.push_back(&e.pev);
  return out;
}

std::vector<const Pev*> FleetState::active_set(int t) const {
  std::vector<const Pev*> out;
  for (const auto& [id, e] : entries_)
    if (!e.evicted && e.pev.t_a <= t && t <= e.pev.t_d && e.remaining > kLedgerTolerance)
      out.push_back(&e.pev);
  return out;
}

void FleetState::evict(int id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw InputError("unknown pev " + std::to_string(id));
  it->second.evicted = true;
}

int FleetState::horizon(int t) const {
  int psi = t;
  for (const Pev* p : active_set(t)) psi = std::max(psi, p->t_d);
  return psi;
}

void FleetState::apply_charge(int id, double p_kw) {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw InputError("unknown pev " + std::to_string(id));
  Entry& e = it->second;
  const std::string name = "pev " + std::to_string(id);
  if (p_kw < 0) throw InputError(name + ": negative charge");
  if (p_kw > e.pev.p_max_kw * (1 + kLedgerTolerance) + kLedgerTolerance)
    throw InputError(name + ": charge above rate limit");
  const double next = e.remaining - e.pev.u_h * p_kw * dt_;
  if (next < -kLedgerTolerance) throw InputError(name + ": overcharged");
  e.remaining = std::abs(next) <= kLedgerTolerance ? 0.0 : next;
}

std::vector<Pev> parse_roster_csv(std::string_view text) {
  const auto rows = text::parse_csv(text, {"id", "station", "arrival_slot", "departure_slot",
                                           "capacity_kwh", "soc0", "pmax_kw", "uh"});
  std::vector<Pev> out;
  std::set<int> ids;
  for (const auto& r : rows) {
    Pev p;
    p.id = text::parse_int(r.fields[0], r.line);
    p.station = text::parse_int(r.fields[1], r.line);
    p.t_a = text::parse_int(r.fields[2], r.line);
    p.t_d = text::parse_int(r.fields[3], r.line);
    p.capacity_kwh = text::parse_double(r.fields[4], r.line);
    p.soc0 = text::parse_double(r.fields[5], r.line);
    p.p_max_kw = text::parse_double(r.fields[6], r.line);
    p.u_h = text::parse_double(r.fields[7], r.line);
    if (!ids.insert(p.id).second)
      throw ParseError(r.line, "duplicate pev id " + std::to_string(p.id));
    out.push_back(p);
  }
  return out;
}

std::string serialize_roster_csv(const std::vector<Pev>& roster) {
  std::ostringstream os;
  os.precision(17);
  os << "id,station,arrival_slot,departure_slot,capacity_kwh,soc0,pmax_kw,uh\n";
  for (const auto& p : roster)
    os << p.id << ',' << p.station << ',' << p.t_a << ',' << p.t_d << ',' << p.capacity_kwh
       << ',' << p.soc0 << ',' << p.p_max_kw << ',' << p.u_h << '\n';
  return os.str();
}

}  // namespace evmpc
