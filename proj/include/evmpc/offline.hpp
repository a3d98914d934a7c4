#pragma once

#include "evmpc/mpc.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace evmpc {

enum class OfflineMethod { joint, dnoa };

// "joint" or "dnoa"; throws InputError otherwise.
OfflineMethod parse_method(std::string_view text);
std::string to_string(OfflineMethod method);

struct OfflineSlot {
  RecoveredSlot slot;  // repaired, or the relaxation's when already rank one
  int sdr_rank = 1;
  double sdr_rank_ratio = 0.0;
  int noa_iterations = 0;  // per slot for dnoa; the shared count for joint
  bool converged = true;
  std::string error;
};

struct OfflineResult {
  OfflineMethod method = OfflineMethod::joint;
  std::string scenario;  // Scenario::fingerprint()
  double lower_bound = 0.0;
  double value = 0.0;
  double generation_cost = 0.0;
  double charging_cost = 0.0;
  bool all_rank_one = false;
  bool converged = false;
  std::vector<OfflineSlot> slots;
  std::map<int, double> delivered_kwh;
  std::vector<Rejection> rejected;
};

// Full-horizon relaxation over every admissible vehicle, then rank repair by
// the chosen method. If every slot is already rank one the value is the
// bound. Throws SolverError if the relaxation cannot be solved.
OfflineResult run_offline(const Scenario& scenario, OfflineMethod method,
                          const MpcOptions& options = {}, int threads = 0);

struct CompareReport {
  double online_total = 0.0;
  double offline_value = 0.0;
  double lower_bound = 0.0;
  double ratio = 0.0;  // offline / online
  std::vector<double> online_charge_kw;  // aggregate per slot
  std::vector<double> offline_charge_kw;
  // bound <= offline <= online, each up to 1e-6 relative.
  bool ordering_holds = true;
  std::vector<std::string> flags;
};

// Throws InputError when the two runs come from different scenarios or the
// online run is incomplete.
CompareReport compare(const MpcResult& online, const OfflineResult& offline);

}  // namespace evmpc
