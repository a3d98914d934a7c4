#pragma once

#include "evmpc/opf.hpp"

#include <string>
#include <vector>

namespace evmpc {

struct PenaltyConfig {
  double mu = 10.0;
  double epsilon = kRankEpsilon;
  int max_iter = 50;
  // Start at mu_start and double whenever the rank gap has not dropped by
  // more than 10% over the last three iterations.
  bool doubling = false;
  double mu_start = 1.0;
  // Slack allowed on the per-iteration descent check, relative to
  // max(1, |F_mu|).
  double monotone_tol = 1e-9;

  void validate() const;
};

// Subproblems aim for this duality gap (coarser solves make the descent
// check meaningless) and fall back to the caller's gap_tol when they stall.
inline constexpr double kNoaGapTol = 1e-10;

// 10 for networks up to 30 buses, 100 above.
double default_mu(const Network& network);

struct NoaIteration {
  double penalized;  // F + mu * (Trace W - lambda_max W)
  double rank_gap;
  double base_objective;
  double mu;
};

struct NoaTrace {
  // Entry 0 is the starting point; entry k the k-th iterate.
  std::vector<NoaIteration> history;
  int iterations = 0;
  bool converged = false;
  // Every step satisfied F_mu(k+1) <= F_mu(k) + slack, both evaluated at
  // the mu of step k+1.
  bool monotone = true;
  // lambda_max(W) >= w^H W w held at every iterate for the previous w.
  bool surrogate_valid = true;
};

struct RepairResult {
  RecoveredSlot slot;
  NoaTrace trace;
  std::string error;  // set when the slot could not be repaired
};

// Penalty repair of one slot. `input.fixed_charge_kw` carries the charges taken
// from the window relaxation; `init` supplies the starting W and generation.
// The returned slot keeps init's charge ids and rates.
RepairResult repair_slot(const Network& network, const SlotInput& input, double dt,
                         const RecoveredSlot& init, const PenaltyConfig& config,
                         const sdp::SolverOptions& options = {});

struct JointResult {
  std::vector<RecoveredSlot> slots;
  NoaTrace trace;  // rank_gap entries are sums over slots
  double objective = 0.0;
};

// Joint repair: one penalty per slot on the full-horizon relaxation; charges
// are re-optimized together with W and generation.
JointResult noa_offline_joint(const Network& network, const sdp::SdpProblem& relaxation,
                              const WindowModel& model, const sdp::SdpSolution& solution,
                              const PenaltyConfig& config,
                              const sdp::SolverOptions& options = {});

struct DnoaResult {
  std::vector<RepairResult> slots;
  double objective = 0.0;  // sum of slot generation and charging costs
  bool ok() const;
};

// Decoupled repair: charges fixed from the full-horizon relaxation, each slot
// repaired independently on up to `threads` workers (0 = hardware).
DnoaResult dnoa_offline(const Network& network, const WindowModel& model,
                        const std::vector<RecoveredSlot>& relaxed, const PenaltyConfig& config,
                        const sdp::SolverOptions& options = {}, int threads = 0);

// Per-bus charging load (kW) of a recovered slot.
std::vector<double> charges_by_bus(const Network& network, const WindowModel& model,
                                   const RecoveredSlot& slot);

}  // namespace evmpc
