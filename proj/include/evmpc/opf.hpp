#pragma once

#include "evmpc/grid.hpp"
#include "evmpc/sdp.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <vector>

namespace evmpc {

// Default rank tolerance for Trace(W) - lambda_max(W).
inline constexpr double kRankEpsilon = 1e-4;
// lambda_2 / lambda_1 at or below this counts as rank one.
inline constexpr double kRankOneRatio = 1e-6;

struct SlotInput {
  int t = 1;
  double load_factor = 1.0;  // multiplies every bus's base load
  double price = 0.0;        // money per kWh
  // Constant charging demand per bus index (kW); empty means none.
  std::vector<double> fixed_charge_kw;
};

// A vehicle's decision variables live on slots [first, last] of the window.
struct PevRequest {
  int id = 0;
  int bus = 0;
  int first = 1;
  int last = 1;
  double p_max_kw = 0.0;
  double u_h = 1.0;
  double remaining_kwh = 0.0;
};

struct WindowSpec {
  std::vector<SlotInput> slots;  // consecutive
  std::vector<PevRequest> pevs;
  double dt = 0.5;
};

struct SlotVars {
  int t = 0;
  sdp::HermitianEmbedding w{1, 0};
  // Scalars hold P - Pmin and Q - Qmin (per-unit).
  std::vector<int> pg;
  std::vector<int> qg;
  std::vector<int> epigraph_block;  // -1 for linear cost
  // (position in WindowModel::pevs(), scalar index) for vehicles present.
  std::vector<std::pair<int, int>> charges;
  std::vector<int> balance_p;  // constraint index per bus
  std::vector<int> balance_q;
  std::vector<std::array<int, 2>> voltage_rows;  // (lower, upper) per bus
  std::vector<std::array<int, 2>> angle_rows;    // per line
  std::vector<int> generation_rows;              // P and Q upper bounds
};

class WindowModel {
 public:
  const std::vector<SlotVars>& slots() const { return slots_; }
  // Throws InputError when t is outside the window.
  const SlotVars& slot(int t) const;
  int first() const { return slots_.front().t; }
  int last() const { return slots_.back().t; }
  const std::vector<PevRequest>& pevs() const { return pevs_; }
  const std::vector<SlotInput>& inputs() const { return inputs_; }
  const std::vector<int>& completion_rows() const { return completion_rows_; }
  const std::vector<int>& rate_rows() const { return rate_rows_; }
  double dt() const { return dt_; }
  int reference_bus() const { return reference_; }  // bus index

 private:
  friend std::pair<sdp::SdpProblem, WindowModel> build_window_sdr(const Network&,
                                                                   const WindowSpec&);
  std::vector<SlotVars> slots_;
  std::vector<SlotInput> inputs_;
  std::vector<PevRequest> pevs_;
  std::vector<int> completion_rows_;
  std::vector<int> rate_rows_;
  double dt_ = 0.5;
  int reference_ = 0;
};

// Relaxation of the joint OPF and charging problem over the window. The
// objective is dt * sum f(P_g) + dt * sum price * P_kn; charges are in kW.
std::pair<sdp::SdpProblem, WindowModel> build_window_sdr(const Network& network,
                                                         const WindowSpec& spec);

// Adds mu * (Trace W(t) - w^H W(t) w) to the objective.
void add_rank_penalty(sdp::SdpProblem& problem, const SlotVars& slot, double mu,
                      const Eigen::VectorXcd& w);

// Trace(W) - lambda_max(W). Throws InputError if W has an eigenvalue below
// -psd_tol * max(1, lambda_max).
double rank_gap(const Eigen::MatrixXcd& w, double psd_tol = 1e-6);
// lambda_2 / lambda_1 (0 for 1 x 1).
double rank_ratio(const Eigen::MatrixXcd& w);
// Eigenvalues above ratio * lambda_1.
int numerical_rank(const Eigen::MatrixXcd& w, double ratio = kRankOneRatio);

// sqrt(lambda_max) * w_max rotated so arg(V[reference]) = 0.
Eigen::VectorXcd recover_voltage(const Eigen::MatrixXcd& w, int reference);

// max_k |V_k conj(sum_m y_km (V_k - V_m)) - (sum gen at k - s_load_k)|.
// s_gen is per generator, s_load per bus; both per-unit.
double flow_residual(const Network& network, const Eigen::VectorXcd& v,
                     const std::vector<Complex>& s_gen, const std::vector<Complex>& s_load);

struct RecoveredSlot {
  int t = 0;
  Eigen::MatrixXcd w;
  std::optional<Eigen::VectorXcd> v;  // only when rank_gap <= epsilon
  std::vector<double> pg;             // per generator, per-unit
  std::vector<double> qg;
  std::vector<int> charge_ids;
  std::vector<double> charge_kw;
  double rank_gap = 0.0;
  double rank_ratio = 0.0;
  double flow_residual = 0.0;  // NaN without v
  double gen_cost = 0.0;       // dt * sum f(P_g)
  double charge_cost = 0.0;    // dt * price * sum P_kn
};

// Per-bus complex load (per-unit) at a slot, charges included.
std::vector<Complex> slot_load(const Network& network, const SlotInput& input,
                               const std::vector<int>& charge_bus,
                               const std::vector<double>& charge_kw);

RecoveredSlot extract_slot(const Network& network, const WindowModel& model,
                           const sdp::SdpSolution& solution, int t,
                           double epsilon = kRankEpsilon);

}  // namespace evmpc
