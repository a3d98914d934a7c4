#pragma once

#include "evmpc/noa.hpp"
#include "evmpc/scenario.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace evmpc {

struct MpcOptions {
  PenaltyConfig penalty;
  sdp::SolverOptions solver;
};

struct Eviction {
  int slot = 0;
  int id = 0;
  double remaining_kwh = 0.0;
};

struct Rejection {
  int slot = 0;
  int id = 0;
  std::string reason;
};

struct MpcSlotRecord {
  int t = 0;
  int window_last = 0;  // Psi(t)
  Eigen::VectorXcd v;
  std::vector<double> pg;  // per generator, per-unit
  std::vector<double> qg;
  std::vector<int> charge_ids;
  std::vector<double> charge_kw;
  double gen_cost = 0.0;
  double charge_cost = 0.0;
  int sdr_rank = 1;
  double sdr_rank_ratio = 0.0;
  bool repaired = false;
  int noa_iterations = 0;
  bool noa_converged = true;
  double rank_gap = 0.0;       // of the committed W
  double flow_residual = 0.0;  // of the committed voltages
  double solve_ms = 0.0;
  std::vector<Eviction> evictions;

  double aggregate_charge_kw() const;
};

struct MpcResult {
  std::string scenario;  // Scenario::fingerprint()
  std::vector<MpcSlotRecord> records;
  double generation_cost = 0.0;
  double charging_cost = 0.0;
  double total = 0.0;
  std::map<int, double> delivered_kwh;  // every admitted vehicle
  std::vector<Rejection> rejected;
  std::vector<Eviction> evicted;
  bool complete = false;
  std::string error;  // set when a step failed; records hold the prefix
};

struct CostBreakdown {
  double generation = 0.0;
  double charging = 0.0;
  double total = 0.0;
};

// Text of the constraint class carrying the largest dual weight, for
// infeasibility messages.
std::string dominant_constraint(const sdp::SdpProblem& problem, const sdp::SdpSolution& solution);

// One receding-horizon step at slot t. Arrivals at t must already be in
// `state`. Throws SolverError when the window stays infeasible after every
// vehicle has been evicted, or when the solver fails outright.
MpcSlotRecord step(FleetState& state, int t, const Scenario& scenario,
                   const MpcOptions& options = {});

// Admits each vehicle at its arrival slot (rejecting inadmissible ones) and
// steps through t = 1..T. Solver failures end the run early with `error` set.
MpcResult run(const Scenario& scenario, const MpcOptions& options = {});

// Recomputed from the committed controls.
CostBreakdown total_cost(const MpcResult& result, const Scenario& scenario);

}  // namespace evmpc
