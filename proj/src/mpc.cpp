#include "evmpc/mpc.hpp"

#include "evmpc/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace evmpc {

double MpcSlotRecord::aggregate_charge_kw() const {
  double s = 0.0;
  for (double p : charge_kw) s += p;
  return s;
}

std::string dominant_constraint(const sdp::SdpProblem& problem, const sdp::SdpSolution& sol) {
  if (sol.duals.size() == 0) return "unknown";
  Eigen::Index i = 0;
  sol.duals.cwiseAbs().maxCoeff(&i);
  const std::string& label = problem.constraints()[i].label;
  static const char* const classes[] = {"balance", "voltage", "angle", "generation",
                                        "rate", "completion", "epigraph"};
  for (const char* c : classes)
    if (label.find(c) != std::string::npos) return std::string(c) + " (" + label + ")";
  return label.empty() ? "unlabelled" : label;
}

namespace {

WindowSpec window(const FleetState& state, int t, const Scenario& sc,
                  const std::vector<double>& factors) {
  WindowSpec spec;
  spec.dt = sc.dt;
  for (int s = t; s <= state.horizon(t); ++s)
    spec.slots.push_back({s, factors[s - 1], sc.price_profile.at_slot(s), {}});
  for (const Pev* p : state.active_set(t))
    spec.pevs.push_back({p->id, p->station, t, p->t_d, p->p_max_kw, p->u_h, state.remaining(p->id)});
  return spec;
}

// Largest remaining demand per remaining slot; lowest id on ties.
int eviction_candidate(const FleetState& state, int t) {
  int id = -1;
  double worst = -1.0;
  for (const Pev* p : state.active_set(t)) {
    const double r = state.remaining(p->id) / (p->t_d - t + 1);
    if (r > worst) {
      worst = r;
      id = p->id;
    }
  }
  return id;
}

// Rate clamped to [0, p_max] and never past the vehicle's remaining demand;
// the departure slot takes exactly what is left when the limit allows it.
double snap_charge(const FleetState& state, const Pev& p, int t, double kw) {
  const double need = state.remaining(p.id) / (p.u_h * state.dt());
  double x = std::clamp(kw, 0.0, p.p_max_kw);
  const bool finish = t == p.t_d || x >= need || need - x <= kLedgerTolerance * std::max(1.0, need);
  if (finish) x = need <= p.p_max_kw * (1 + kLedgerTolerance) ? need : p.p_max_kw;
  return x;
}

}  // namespace

MpcSlotRecord step(FleetState& state, int t, const Scenario& sc, const MpcOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  if (t < 1 || t > sc.slots) throw InputError("slot " + std::to_string(t) + " outside horizon");
  state.set_clock(t);
  const auto factors = sc.load_factors();
  const Network& net = sc.network;
  const std::string where = "slot " + std::to_string(t) + ": ";

  MpcSlotRecord rec;
  rec.t = t;
  for (;;) {
    WindowSpec spec = window(state, t, sc, factors);
    auto [prob, model] = build_window_sdr(net, spec);
    const auto sol = sdp::solve(prob, o.solver);
    if (sol.status == sdp::SolveStatus::infeasible) {
      const int id = eviction_candidate(state, t);
      if (id < 0)
        throw SolverError(where + "relaxation infeasible, dominant constraint " +
                          dominant_constraint(prob, sol));
      rec.evictions.push_back({t, id, state.remaining(id)});
      state.evict(id);
      continue;
    }
    if (sol.status != sdp::SolveStatus::optimal)
      throw SolverError(where + "window relaxation stopped (" + sdp::to_string(sol.status) +
                        " after " + std::to_string(sol.iterations) + " iterations)");

    rec.window_last = model.last();
    RecoveredSlot slot = extract_slot(net, model, sol, t, o.penalty.epsilon);
    rec.sdr_rank = numerical_rank(slot.w);
    rec.sdr_rank_ratio = slot.rank_ratio;
    if (slot.rank_ratio > kRankOneRatio) {
      SlotInput in = spec.slots.front();
      in.fixed_charge_kw = charges_by_bus(net, model, slot);
      const auto r = repair_slot(net, in, sc.dt, slot, o.penalty, o.solver);
      rec.repaired = true;
      rec.noa_iterations = r.trace.iterations;
      rec.noa_converged = r.trace.converged;
      slot = r.slot;
    }

    rec.pg = slot.pg;
    rec.qg = slot.qg;
    rec.gen_cost = slot.gen_cost;
    rec.rank_gap = slot.rank_gap;
    rec.v = slot.v ? *slot.v : recover_voltage(slot.w, model.reference_bus());

    std::vector<int> buses;
    for (std::size_t i = 0; i < slot.charge_ids.size(); ++i) {
      const Pev& p = state.pev(slot.charge_ids[i]);
      const double x = snap_charge(state, p, t, slot.charge_kw[i]);
      state.apply_charge(p.id, x);
      rec.charge_ids.push_back(p.id);
      rec.charge_kw.push_back(x);
      buses.push_back(p.station);
    }
    const SlotInput& in = spec.slots.front();
    rec.charge_cost = sc.dt * in.price * rec.aggregate_charge_kw();
    std::vector<Complex> s_gen;
    for (std::size_t g = 0; g < rec.pg.size(); ++g) s_gen.emplace_back(rec.pg[g], rec.qg[g]);
    rec.flow_residual = flow_residual(net, rec.v, s_gen, slot_load(net, in, buses, rec.charge_kw));
    break;
  }
  rec.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

MpcResult run(const Scenario& sc, const MpcOptions& o) {
  sc.validate();
  o.penalty.validate();
  FleetState state(sc.slots, sc.dt);
  std::vector<Pev> roster = sc.roster;
  std::sort(roster.begin(), roster.end(), [](const Pev& a, const Pev& b) { return a.id < b.id; });

  MpcResult out;
  out.scenario = sc.fingerprint();
  for (int t = 1; t <= sc.slots; ++t) {
    for (const Pev& p : roster) {
      if (p.t_a != t) continue;
      if (!check_admissible(p, sc.dt)) {
        out.rejected.push_back({t, p.id, "demand exceeds what the rate limit delivers by departure"});
        continue;
      }
      state.admit(p);
    }
    try {
      out.records.push_back(step(state, t, sc, o));
    } catch (const SolverError& e) {
      out.error = e.what();
      break;
    }
    const auto& rec = out.records.back();
    out.generation_cost += rec.gen_cost;
    out.charging_cost += rec.charge_cost;
    out.evicted.insert(out.evicted.end(), rec.evictions.begin(), rec.evictions.end());
  }
  out.total = out.generation_cost + out.charging_cost;
  for (const Pev* p : state.pevs()) out.delivered_kwh[p->id] = state.delivered(p->id);
  out.complete = out.error.empty();
  return out;
}

CostBreakdown total_cost(const MpcResult& result, const Scenario& sc) {
  CostBreakdown c;
  const auto& gens = sc.network.generators();
  for (const auto& r : result.records) {
    for (std::size_t g = 0; g < gens.size() && g < r.pg.size(); ++g)
      c.generation += sc.dt * sc.network.generation_cost(gens[g], r.pg[g]);
    c.charging += sc.dt * sc.price_profile.at_slot(r.t) * r.aggregate_charge_kw();
  }
  c.total = c.generation + c.charging;
  return c;
}

}  // namespace evmpc
