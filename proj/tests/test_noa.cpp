#include <doctest.h>

#include "desk.hpp"

#include "evmpc/error.hpp"
#include "evmpc/noa.hpp"

#include <cmath>

using namespace evmpc;

namespace {

WindowSpec ring_spec() {
  WindowSpec spec;
  const double load[] = {0.8, 1.0, 1.2, 0.9};
  const double price[] = {0.30, 0.25, 0.10, 0.12};
  for (int t = 1; t <= 4; ++t) spec.slots.push_back({t, load[t - 1], price[t - 1], {}});
  spec.pevs = {{1, 1, 1, 4, 20, 0.9, 30.0}, {2, 2, 2, 4, 20, 0.9, 20.0},
               {3, 1, 1, 2, 20, 0.9, 15.0}};
  return spec;
}

}  // namespace

TEST_CASE("PenaltyConfig validation and default mu") {
  PenaltyConfig cfg;
  CHECK(cfg.epsilon == 1e-4);
  CHECK(cfg.max_iter == 50);
  CHECK_NOTHROW(cfg.validate());
  cfg.mu = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.mu = 1;
  cfg.epsilon = -1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  CHECK(default_mu(load_case("data/case9.txt")) == 10.0);
  std::vector<Bus> many;
  for (int k = 1; k <= 31; ++k) many.push_back({k, 0, 0, 0.9, 1.1});
  CHECK(default_mu(Network(100, many, {}, {})) == 100.0);
}

TEST_CASE("repair_slot: rank-one input returns immediately") {
  const Network net = load_case("data/case9.txt");
  SlotInput in{1, 0.9, 0.1, {}};
  WindowSpec spec;
  spec.slots = {in};
  auto [prob, model] = build_window_sdr(net, spec);
  const auto sol = sdp::solve(prob);
  const auto init = extract_slot(net, model, sol, 1);
  REQUIRE(init.rank_gap <= kRankEpsilon);
  PenaltyConfig cfg;
  cfg.mu = default_mu(net);
  const auto r = repair_slot(net, in, spec.dt, init, cfg);
  CHECK(r.trace.iterations == 0);
  CHECK(r.trace.converged);
  CHECK(r.slot.w == init.w);
  CHECK(r.slot.pg == init.pg);
  CHECK(r.slot.rank_gap <= 1e-4);
}

TEST_CASE("repair_slot: seeded desk instances from high-rank starts") {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    const Network net = desk::random_network(seed);
    const SlotInput in{1, 1.0, 0.0, {}};
    const auto start = desk::central_point(net, in, 0.5);
    REQUIRE(start.rank_gap > kRankEpsilon);

    WindowSpec spec;
    spec.slots = {in};
    auto [prob, model] = build_window_sdr(net, spec);
    const auto sdr = sdp::solve(prob);
    REQUIRE(sdr.status == sdp::SolveStatus::optimal);

    PenaltyConfig cfg;
    const auto r = repair_slot(net, in, 0.5, start, cfg);
    CHECK(r.trace.converged);
    CHECK(r.trace.monotone);
    CHECK(r.trace.surrogate_valid);
    CHECK(r.trace.iterations <= 50);
    CHECK(r.slot.rank_gap <= 1e-4);
    for (std::size_t k = 1; k < r.trace.history.size(); ++k)
      CHECK(r.trace.history[k].penalized <=
            r.trace.history[k - 1].penalized + 1e-9 * std::abs(r.trace.history[k - 1].penalized));
    // bound sandwich
    CHECK(r.slot.gen_cost >= sdr.primal_objective - 1e-6 * std::abs(sdr.primal_objective));
    REQUIRE(r.slot.v.has_value());
    CHECK(r.slot.flow_residual <= 1e-3);
  }
}

TEST_CASE("repair_slot: fixed charges enter as load and cost") {
  const Network net = load_case("data/case3.txt");
  SlotInput in{1, 1.0, 0.2, {10000.0, 0.0, 0.0}};  // 10 MW at bus 1
  const auto start = desk::central_point(net, in, 0.5);
  RecoveredSlot init = start;
  init.charge_ids = {4};
  init.charge_kw = {10000.0};
  const auto r = repair_slot(net, in, 0.5, init, PenaltyConfig{});
  CHECK(r.trace.converged);
  CHECK(r.slot.charge_ids == std::vector<int>{4});
  CHECK(r.slot.charge_cost == doctest::Approx(0.5 * 0.2 * 10000.0));
  double pg = 0.0;
  for (double p : r.slot.pg) pg += p;
  CHECK(pg > 1.4 + 0.1);  // 140 MW load plus 10 MW charging, plus losses
}

namespace {

// Relaxation is inexact here and the penalty stalls near a gap of 8e-4.
RecoveredSlot stalled_start(Network& net, SlotInput& in) {
  net = desk::with_min_output(desk::random_network(40), 1.03);
  in = SlotInput{1, 1.0, 0.0, {}};
  WindowSpec spec;
  spec.slots = {in};
  auto [prob, model] = build_window_sdr(net, spec);
  const auto sol = sdp::solve(prob);
  REQUIRE(sol.status == sdp::SolveStatus::optimal);
  return extract_slot(net, model, sol, 1);
}

}  // namespace

TEST_CASE("doubling schedule raises mu when the gap stalls") {
  Network net;
  SlotInput in;
  const auto start = stalled_start(net, in);
  REQUIRE(start.rank_ratio > kRankOneRatio);
  PenaltyConfig cfg;
  cfg.doubling = true;
  cfg.mu_start = 1.0;
  cfg.max_iter = 15;
  const auto r = repair_slot(net, in, 0.5, start, cfg);
  CHECK(r.trace.monotone);
  CHECK(r.trace.history.back().mu > cfg.mu_start);
  for (std::size_t k = 1; k < r.trace.history.size(); ++k)
    CHECK(r.trace.history[k].mu >= r.trace.history[k - 1].mu);
}

TEST_CASE("non-convergence returns the best iterate flagged") {
  Network net;
  SlotInput in;
  const auto start = stalled_start(net, in);
  PenaltyConfig cfg;
  cfg.max_iter = 2;
  const auto r = repair_slot(net, in, 0.5, start, cfg);
  CHECK_FALSE(r.trace.converged);
  CHECK(r.trace.iterations == 2);
  CHECK(r.slot.rank_gap < start.rank_gap);
  CHECK(r.slot.rank_gap > cfg.epsilon);
  CHECK_FALSE(r.slot.v.has_value());
}

TEST_CASE("joint NOA and DNOA on the 3-bus ring, T = 4") {
  const Network net = load_case("data/case3.txt");
  const WindowSpec spec = ring_spec();
  auto [prob, model] = build_window_sdr(net, spec);
  const auto sdr = sdp::solve(prob);
  REQUIRE(sdr.status == sdp::SolveStatus::optimal);
  const double bound = sdr.primal_objective;

  // start the joint method from a high-rank feasible point
  sdp::SdpProblem flat = prob;
  flat.objective() = sdp::LinearFunctional();
  flat.set_objective_constant(0.0);
  const auto centre = sdp::solve(flat);
  REQUIRE(centre.status == sdp::SolveStatus::optimal);

  PenaltyConfig cfg;
  const auto joint = noa_offline_joint(net, prob, model, centre, cfg);
  CHECK(joint.trace.converged);
  CHECK(joint.trace.monotone);
  CHECK(joint.trace.iterations >= 1);
  double gap = 0.0;
  for (const auto& s : joint.slots) gap += s.rank_gap;
  CHECK(gap <= 1e-4);
  CHECK(joint.objective >= bound - 1e-6 * bound);
  CHECK(joint.objective <= bound * 1.005);

  // charges still meet every demand
  for (const auto& pev : spec.pevs) {
    double e = 0.0;
    for (const auto& s : joint.slots)
      for (std::size_t i = 0; i < s.charge_ids.size(); ++i)
        if (s.charge_ids[i] == pev.id) e += pev.u_h * s.charge_kw[i] * spec.dt;
    CHECK(e == doctest::Approx(pev.remaining_kwh).epsilon(1e-6));
  }

  std::vector<RecoveredSlot> relaxed;
  for (int t = 1; t <= 4; ++t) relaxed.push_back(extract_slot(net, model, sdr, t));
  const auto dnoa = dnoa_offline(net, model, relaxed, cfg, {}, 2);
  CHECK(dnoa.ok());
  CHECK(dnoa.objective >= bound - 1e-6 * bound);
  CHECK(std::abs(dnoa.objective - joint.objective) <= 1e-3 * joint.objective);

  // already rank-one blocks are left alone
  for (const auto& s : dnoa.slots) CHECK(s.trace.iterations == 0);

  const auto joint_from_sdr = noa_offline_joint(net, prob, model, sdr, cfg);
  CHECK(joint_from_sdr.trace.iterations == 0);
  CHECK(joint_from_sdr.objective == doctest::Approx(bound).epsilon(1e-6));
}

TEST_CASE("DNOA on one slot equals repair_slot") {
  const Network net = desk::random_network(7);
  WindowSpec spec;
  spec.slots = {{3, 1.0, 0.1, {}}};
  auto [prob, model] = build_window_sdr(net, spec);
  prob.objective() = sdp::LinearFunctional();
  prob.set_objective_constant(0.0);
  const auto centre = sdp::solve(prob);
  const auto start = extract_slot(net, model, centre, 3);

  PenaltyConfig cfg;
  const auto d = dnoa_offline(net, model, {start}, cfg, {}, 1);
  SlotInput in = spec.slots[0];
  in.fixed_charge_kw.assign(net.num_buses(), 0.0);
  const auto r = repair_slot(net, in, spec.dt, start, cfg);
  REQUIRE(d.slots.size() == 1);
  CHECK(d.slots[0].trace.iterations == r.trace.iterations);
  CHECK((d.slots[0].slot.w - r.slot.w).norm() <= 1e-12);
  CHECK(d.objective == doctest::Approx(r.slot.gen_cost + r.slot.charge_cost));
}

TEST_CASE("DNOA reports per-slot failures without aborting") {
  const Network net = load_case("data/case3.txt");
  const WindowSpec spec = ring_spec();
  auto [prob, model] = build_window_sdr(net, spec);
  const auto sdr = sdp::solve(prob);
  std::vector<RecoveredSlot> relaxed;
  for (int t = 1; t <= 4; ++t) relaxed.push_back(extract_slot(net, model, sdr, t));
  relaxed[1].charge_ids.push_back(99);  // unknown vehicle
  relaxed[1].charge_kw.push_back(1.0);
  const auto d = dnoa_offline(net, model, relaxed, PenaltyConfig{}, {}, 1);
  CHECK_FALSE(d.ok());
  CHECK_FALSE(d.slots[1].error.empty());
  CHECK(d.slots[0].error.empty());
  CHECK(d.slots[2].error.empty());
}
