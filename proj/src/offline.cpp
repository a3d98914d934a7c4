#include "evmpc/offline.hpp"

#include "evmpc/error.hpp"

#include <algorithm>
#include <cmath>

namespace evmpc {

OfflineMethod parse_method(std::string_view text) {
  if (text == "joint") return OfflineMethod::joint;
  if (text == "dnoa") return OfflineMethod::dnoa;
  throw InputError("unknown method '" + std::string(text) + "' (expected joint or dnoa)");
}

std::string to_string(OfflineMethod method) {
  return method == OfflineMethod::joint ? "joint" : "dnoa";
}

OfflineResult run_offline(const Scenario& sc, OfflineMethod method, const MpcOptions& o,
                          int threads) {
  sc.validate();
  o.penalty.validate();
  const Network& net = sc.network;
  OfflineResult out;
  out.method = method;
  out.scenario = sc.fingerprint();

  WindowSpec spec;
  spec.dt = sc.dt;
  const auto factors = sc.load_factors();
  for (int t = 1; t <= sc.slots; ++t)
    spec.slots.push_back({t, factors[t - 1], sc.price_profile.at_slot(t), {}});
  std::vector<Pev> roster = sc.roster;
  std::sort(roster.begin(), roster.end(), [](const Pev& a, const Pev& b) { return a.id < b.id; });
  for (const Pev& p : roster) {
    if (!check_admissible(p, sc.dt)) {
      out.rejected.push_back({p.t_a, p.id, "demand exceeds what the rate limit delivers by departure"});
      continue;
    }
    spec.pevs.push_back({p.id, p.station, p.t_a, p.t_d, p.p_max_kw, p.u_h, initial_demand(p)});
  }

  auto [prob, model] = build_window_sdr(net, spec);
  const auto sol = sdp::solve(prob, o.solver);
  if (sol.status == sdp::SolveStatus::infeasible)
    throw SolverError("full-horizon relaxation infeasible, dominant constraint " +
                      dominant_constraint(prob, sol));
  if (sol.status != sdp::SolveStatus::optimal)
    throw SolverError("full-horizon relaxation stopped (" + sdp::to_string(sol.status) + " after " +
                      std::to_string(sol.iterations) + " iterations)");
  out.lower_bound = sol.primal_objective;

  std::vector<RecoveredSlot> relaxed;
  out.all_rank_one = true;
  for (int t = 1; t <= sc.slots; ++t) {
    relaxed.push_back(extract_slot(net, model, sol, t, o.penalty.epsilon));
    if (relaxed.back().rank_ratio > kRankOneRatio) out.all_rank_one = false;
  }
  for (const auto& r : relaxed) {
    OfflineSlot s;
    s.slot = r;
    s.sdr_rank = numerical_rank(r.w);
    s.sdr_rank_ratio = r.rank_ratio;
    out.slots.push_back(std::move(s));
  }

  if (out.all_rank_one) {
    out.value = out.lower_bound;
    out.converged = true;
  } else if (method == OfflineMethod::joint) {
    const auto joint = noa_offline_joint(net, prob, model, sol, o.penalty, o.solver);
    for (std::size_t i = 0; i < out.slots.size(); ++i) {
      out.slots[i].slot = joint.slots[i];
      out.slots[i].noa_iterations = joint.trace.iterations;
      out.slots[i].converged = joint.trace.converged;
    }
    out.value = joint.objective;
    out.converged = joint.trace.converged;
  } else {
    const auto d = dnoa_offline(net, model, relaxed, o.penalty, o.solver, threads);
    for (std::size_t i = 0; i < out.slots.size(); ++i) {
      out.slots[i].slot = d.slots[i].slot;
      out.slots[i].noa_iterations = d.slots[i].trace.iterations;
      out.slots[i].converged = d.slots[i].trace.converged;
      out.slots[i].error = d.slots[i].error;
    }
    out.value = d.objective;
    out.converged = d.ok();
  }

  for (const auto& p : spec.pevs) out.delivered_kwh[p.id] = 0.0;
  for (const auto& s : out.slots) {
    out.generation_cost += s.slot.gen_cost;
    out.charging_cost += s.slot.charge_cost;
    for (std::size_t i = 0; i < s.slot.charge_ids.size(); ++i) {
      const auto& p = *std::find_if(spec.pevs.begin(), spec.pevs.end(),
                                    [&](const PevRequest& q) { return q.id == s.slot.charge_ids[i]; });
      out.delivered_kwh[p.id] += p.u_h * s.slot.charge_kw[i] * sc.dt;
    }
  }
  return out;
}

namespace {

bool leq(double a, double b) { return a <= b + 1e-6 * std::max(1.0, std::abs(b)); }

}  // namespace

CompareReport compare(const MpcResult& online, const OfflineResult& offline) {
  if (online.scenario != offline.scenario)
    throw InputError("online and offline runs come from different scenarios (" + online.scenario +
                     " vs " + offline.scenario + ")");
  if (!online.complete) throw InputError("online run is incomplete: " + online.error);
  CompareReport r;
  r.online_total = online.total;
  r.offline_value = offline.value;
  r.lower_bound = offline.lower_bound;
  r.ratio = online.total > 0 ? offline.value / online.total : 1.0;
  for (const auto& rec : online.records) r.online_charge_kw.push_back(rec.aggregate_charge_kw());
  for (const auto& s : offline.slots) {
    double kw = 0.0;
    for (double p : s.slot.charge_kw) kw += p;
    r.offline_charge_kw.push_back(kw);
  }
  r.ordering_holds = leq(r.lower_bound, r.offline_value) && leq(r.offline_value, r.online_total);
  if (!leq(r.lower_bound, r.offline_value)) r.flags.push_back("offline value below the bound");
  if (!leq(r.offline_value, r.online_total)) r.flags.push_back("online total below offline value");
  if (!offline.converged) r.flags.push_back("offline repair did not converge");
  return r;
}

}  // namespace evmpc
