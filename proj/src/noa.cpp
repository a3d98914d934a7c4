#include "evmpc/noa.hpp"

#include "evmpc/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace evmpc {

void PenaltyConfig::validate() const {
  if (!(mu > 0)) throw InputError("penalty mu must be positive");
  if (!(epsilon > 0)) throw InputError("rank tolerance must be positive");
  if (max_iter < 0) throw InputError("NOA max_iter must be >= 0");
  if (doubling && !(mu_start > 0)) throw InputError("mu_start must be positive");
  if (!(monotone_tol >= 0)) throw InputError("monotone_tol must be >= 0");
}

double default_mu(const Network& network) { return network.num_buses() <= 30 ? 10.0 : 100.0; }

namespace {

struct Iterate {
  std::vector<RecoveredSlot> slots;
  double base = 0.0;
  double gap = 0.0;
};

Iterate make_iterate(std::vector<RecoveredSlot> slots) {
  Iterate it;
  it.slots = std::move(slots);
  for (const auto& s : it.slots) {
    it.base += s.gen_cost + s.charge_cost;
    it.gap += s.rank_gap;
  }
  return it;
}

// Shared penalty loop: every slot of `model` is penalized.
Iterate run_noa(const Network& net, const sdp::SdpProblem& base, const WindowModel& model,
                Iterate current, const PenaltyConfig& cfg, const sdp::SolverOptions& opts,
                NoaTrace& trace) {
  cfg.validate();
  sdp::SolverOptions sub = opts;
  sub.gap_tol = std::min(sub.gap_tol, kNoaGapTol);
  double mu = cfg.doubling ? cfg.mu_start : cfg.mu;
  trace.history.push_back({current.base + mu * current.gap, current.gap, current.base, mu});
  if (current.gap <= cfg.epsilon) {
    trace.converged = true;
    return current;
  }
  Iterate best = current;
  int mu_since = 0;  // history index where the current mu took effect
  for (int k = 1; k <= cfg.max_iter; ++k) {
    sdp::SdpProblem prob = base;
    std::vector<Eigen::VectorXcd> dirs;
    for (std::size_t i = 0; i < current.slots.size(); ++i) {
      dirs.push_back(sdp::max_eigpair(current.slots[i].w).vector);
      add_rank_penalty(prob, model.slots()[i], mu, dirs.back());
    }
    const auto sol = sdp::solve(prob, sub);
    if (sol.status == sdp::SolveStatus::infeasible)
      throw SolverError("rank repair subproblem infeasible");
    // A stalled solve that still meets the caller's own tolerances is usable.
    const bool usable = sol.status == sdp::SolveStatus::optimal ||
                        (sol.gap <= opts.gap_tol && sol.primal_residual <= opts.feas_tol &&
                         sol.dual_residual <= opts.feas_tol);
    if (!usable) break;

    std::vector<RecoveredSlot> slots;
    for (std::size_t i = 0; i < current.slots.size(); ++i) {
      slots.push_back(extract_slot(net, model, sol, model.slots()[i].t, cfg.epsilon));
      const auto& w = slots.back().w;
      const double lmax = sdp::max_eigpair(w).value;
      const double quad = dirs[i].dot(w * dirs[i]).real();
      if (lmax < quad - 1e-12 * std::max(1.0, lmax)) trace.surrogate_valid = false;
    }
    Iterate next = make_iterate(std::move(slots));
    // both sides at the mu this subproblem used
    const double f_next = next.base + mu * next.gap;
    const double f_prev = current.base + mu * current.gap;
    if (f_next > f_prev + cfg.monotone_tol * std::max(1.0, std::abs(f_prev)))
      trace.monotone = false;
    trace.history.push_back({f_next, next.gap, next.base, mu});
    trace.iterations = k;
    current = std::move(next);
    if (current.gap < best.gap) best = current;
    if (current.gap <= cfg.epsilon) {
      trace.converged = true;
      return current;
    }
    const int h = static_cast<int>(trace.history.size()) - 1;
    if (cfg.doubling && h - mu_since >= 3 &&
        trace.history[h].rank_gap > 0.9 * trace.history[h - 3].rank_gap) {
      mu *= 2;
      mu_since = h;
    }
  }
  return best;
}

}  // namespace

RepairResult repair_slot(const Network& net, const SlotInput& input, double dt,
                         const RecoveredSlot& init, const PenaltyConfig& cfg,
                         const sdp::SolverOptions& opts) {
  RepairResult out;
  WindowSpec spec;
  spec.slots = {input};
  spec.dt = dt;
  auto [prob, model] = build_window_sdr(net, spec);
  Iterate start = make_iterate({init});
  Iterate done = run_noa(net, prob, model, std::move(start), cfg, opts, out.trace);
  out.slot = std::move(done.slots.front());
  out.slot.charge_ids = init.charge_ids;
  out.slot.charge_kw = init.charge_kw;
  return out;
}

JointResult noa_offline_joint(const Network& net, const sdp::SdpProblem& relaxation,
                              const WindowModel& model, const sdp::SdpSolution& solution,
                              const PenaltyConfig& cfg, const sdp::SolverOptions& opts) {
  std::vector<RecoveredSlot> slots;
  for (const auto& sv : model.slots())
    slots.push_back(extract_slot(net, model, solution, sv.t, cfg.epsilon));
  JointResult out;
  Iterate done = run_noa(net, relaxation, model, make_iterate(std::move(slots)), cfg, opts,
                         out.trace);
  out.slots = std::move(done.slots);
  out.objective = done.base;
  return out;
}

bool DnoaResult::ok() const {
  return std::all_of(slots.begin(), slots.end(), [](const RepairResult& r) {
    return r.error.empty() && r.trace.converged;
  });
}

std::vector<double> charges_by_bus(const Network& net, const WindowModel& model,
                                   const RecoveredSlot& slot) {
  std::vector<double> kw(net.num_buses(), 0.0);
  for (std::size_t i = 0; i < slot.charge_ids.size(); ++i) {
    const auto it = std::find_if(model.pevs().begin(), model.pevs().end(),
                                 [&](const PevRequest& p) { return p.id == slot.charge_ids[i]; });
    if (it == model.pevs().end()) throw InputError("charge for unknown pev");
    kw[net.bus_index(it->bus)] += slot.charge_kw[i];
  }
  return kw;
}

DnoaResult dnoa_offline(const Network& net, const WindowModel& model,
                        const std::vector<RecoveredSlot>& relaxed, const PenaltyConfig& cfg,
                        const sdp::SolverOptions& opts, int threads) {
  const std::size_t n = relaxed.size();
  if (n != model.slots().size()) throw InputError("one relaxed slot per model slot required");
  cfg.validate();
  DnoaResult out;
  out.slots.resize(n);

  auto work = [&](std::size_t i) {
    try {
      SlotInput in = model.inputs()[i];
      const auto kw = charges_by_bus(net, model, relaxed[i]);
      if (in.fixed_charge_kw.empty()) in.fixed_charge_kw.assign(net.num_buses(), 0.0);
      for (int k = 0; k < net.num_buses(); ++k) in.fixed_charge_kw[k] += kw[k];
      out.slots[i] = repair_slot(net, in, model.dt(), relaxed[i], cfg, opts);
    } catch (const std::exception& e) {
      out.slots[i].slot = relaxed[i];
      out.slots[i].error = e.what();
    }
  };

  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& r : out.slots) out.objective += r.slot.gen_cost + r.slot.charge_cost;
  return out;
}

}  // namespace evmpc
