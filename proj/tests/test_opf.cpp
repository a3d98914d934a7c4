#include <doctest.h>

#include "evmpc/error.hpp"
#include "evmpc/opf.hpp"

#include <cmath>
#include <random>

using namespace evmpc;

namespace {

// Both buses carry generators so any voltage pair is realizable.
Network two_bus(Complex z, double c2 = 0.02) {
  std::vector<Bus> buses{{1, 0.3, 0.1, 0.9, 1.1}, {2, 0.6, 0.2, 0.9, 1.1}};
  std::vector<Line> lines{{1, 2, 1.0 / z, 0.5}};
  std::vector<Generator> gens{{1, 0.0, 3.0, -3.0, 3.0, {c2, 8.0, 1.0}},
                              {2, 0.0, 3.0, -3.0, 3.0, {2 * c2, 12.0, 0.0}}};
  return Network(100, buses, lines, gens);
}

sdp::SdpSolution fake_solution(const sdp::SdpProblem& prob) {
  sdp::SdpSolution sol;
  sol.status = sdp::SolveStatus::optimal;
  for (int d : prob.block_dims()) sol.blocks.push_back(Eigen::MatrixXd::Identity(d, d));
  sol.scalars = Eigen::VectorXd::Zero(prob.num_scalars());
  return sol;
}

double violation(const sdp::Constraint& c, const std::vector<Eigen::MatrixXd>& blocks,
                 const Eigen::VectorXd& x) {
  const double v = c.lhs.evaluate(blocks, x) - c.rhs;
  return c.sense == sdp::Sense::equal ? std::abs(v) : std::max(v, 0.0);
}

}  // namespace

TEST_CASE("build_window_sdr: construction counts") {
  const Network net = two_bus({0.01, 0.1});
  WindowSpec spec;
  spec.slots = {{1, 1.0, 0.2, {}}, {2, 1.0, 0.1, {}}};
  spec.pevs = {{7, 1, 1, 2, 20.0, 0.9, 10.0}};
  auto [prob, model] = build_window_sdr(net, spec);

  // one 2N block per slot plus one 2x2 epigraph per quadratic generator
  int w_blocks = 0, e_blocks = 0;
  for (int d : prob.block_dims()) (d == 4 ? w_blocks : e_blocks) += 1;
  CHECK(w_blocks == 2);
  CHECK(e_blocks == 4);
  // P_g, Q_g per generator per slot plus one rate per slot
  CHECK(prob.num_scalars() == 2 * 2 * 2 + 2);

  int balance = 0, voltage = 0, angle = 0, rate = 0, completion = 0, generation = 0,
      epigraph = 0;
  for (const auto& c : prob.constraints()) {
    const auto& l = c.label;
    if (l.find("balance") != std::string::npos) ++balance;
    else if (l.find("voltage") != std::string::npos) ++voltage;
    else if (l.find("angle") != std::string::npos) ++angle;
    else if (l.find("rate") != std::string::npos) ++rate;
    else if (l.find("completion") != std::string::npos) ++completion;
    else if (l.find("generation") != std::string::npos) ++generation;
    else if (l.find("epigraph") != std::string::npos) ++epigraph;
  }
  CHECK(balance == 2 * 2 * 2);
  CHECK(voltage == 2 * 2 * 2);  // two-sided box per bus per slot
  CHECK(angle == 2 * 2);
  CHECK(rate == 2);  // upper bounds; lower bounds are the scalars' sign
  CHECK(completion == 1);
  CHECK(generation == 2 * 2 * 2);
  CHECK(epigraph == 2 * 2 * 2);
  CHECK(balance + voltage + angle + rate + completion + generation + epigraph ==
        prob.num_constraints());

  CHECK(model.slot(1).charges.size() == 1);
  CHECK(model.slot(2).charges.size() == 1);
  CHECK(model.completion_rows().size() == 1);
  CHECK_THROWS_AS(model.slot(3), InputError);
}

TEST_CASE("build_window_sdr: balance row expands conj(y)") {
  // 1 / (0.1 + 0.3j) = 1 - 3j
  const Network net = two_bus({0.1, 0.3});
  CHECK(std::abs(net.lines()[0].y - Complex(1, -3)) < 1e-12);
  WindowSpec spec;
  spec.slots = {{1, 1.0, 0.0, {}}};
  auto [prob, model] = build_window_sdr(net, spec);
  const auto& sv = model.slot(1);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXcd a(2, 2);
    for (int i = 0; i < 4; ++i) a(i / 2, i % 2) = Complex(nd(rng), nd(rng));
    const Eigen::MatrixXcd h = a * a.adjoint();
    auto blocks = fake_solution(prob).blocks;
    blocks[sv.w.block()] = sv.w.embed(h);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(prob.num_scalars());
    x(sv.pg[0]) = 0.7;
    x(sv.qg[0]) = -0.2;

    const auto& row = prob.constraints()[sv.balance_p[0]];
    const double expect = ((h(0, 0) - h(0, 1)) * Complex(1, 3)).real() - 0.7;
    CHECK(row.lhs.evaluate(blocks, x) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(row.rhs == doctest::Approx(-0.3));
    const auto& qrow = prob.constraints()[sv.balance_q[0]];
    const double qexpect = ((h(0, 0) - h(0, 1)) * Complex(1, 3)).imag() + 0.2;
    CHECK(qrow.lhs.evaluate(blocks, x) == doctest::Approx(qexpect).epsilon(1e-12));
  }
}

TEST_CASE("build_window_sdr: plain OPF without vehicles") {
  const Network net = load_case("data/case9.txt");
  WindowSpec spec;
  spec.slots = {{5, 0.9, 0.1, {}}};
  auto [prob, model] = build_window_sdr(net, spec);
  CHECK(model.completion_rows().empty());
  CHECK(model.slot(5).charges.empty());
  CHECK(model.reference_bus() == 0);
  const auto sol = sdp::solve(prob);
  REQUIRE(sol.status == sdp::SolveStatus::optimal);
  for (const auto& c : prob.constraints())
    CHECK(violation(c, sol.blocks, sol.scalars) <= 1e-6);

  const auto r = extract_slot(net, model, sol, 5);
  CHECK(r.rank_ratio <= kRankOneRatio);
  REQUIRE(r.v.has_value());
  CHECK(std::abs(std::arg((*r.v)(0))) < 1e-12);
  CHECK(r.flow_residual <= 1e-4);
  CHECK(r.charge_cost == 0.0);
  CHECK(r.gen_cost == doctest::Approx(sol.primal_objective).epsilon(1e-6));
  CHECK_THROWS_AS(extract_slot(net, model, sol, 6), InputError);
}

TEST_CASE("relaxation property on a feasible rank-one point") {
  const Network net = two_bus({0.02, 0.2}, 0.03);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(0.92, 1.08), ang(-0.3, 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXcd v(2);
    v << std::polar(mag(rng), 0.0), std::polar(mag(rng), ang(rng));
    // generation that balances the flows exactly
    std::vector<double> pg(2), qg(2);
    for (int k = 0; k < 2; ++k) {
      const int m = 1 - k;
      const Complex s = v(k) * std::conj(net.lines()[0].y * (v(k) - v(m)));
      pg[k] = s.real() + net.buses()[k].p_load;
      qg[k] = s.imag() + net.buses()[k].q_load;
    }
    if (pg[0] < 0 || pg[1] < 0) continue;

    WindowSpec spec;
    spec.slots = {{1, 1.0, 0.0, {}}};
    auto [prob, model] = build_window_sdr(net, spec);
    const auto& sv = model.slot(1);
    auto blocks = fake_solution(prob).blocks;
    blocks[sv.w.block()] = sv.w.embed(v * v.adjoint());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(prob.num_scalars());
    double cost = 0.0;
    for (int g = 0; g < 2; ++g) {
      const auto& gen = net.generators()[g];
      x(sv.pg[g]) = pg[g] - gen.p_min;
      x(sv.qg[g]) = qg[g] - gen.q_min;
      const double p_mw = 100 * pg[g];
      Eigen::Matrix2d e;
      e << gen.cost.c2 * p_mw * p_mw, std::sqrt(gen.cost.c2) * p_mw,
          std::sqrt(gen.cost.c2) * p_mw, 1.0;
      blocks[sv.epigraph_block[g]] = e;
      cost += spec.dt * gen.cost(p_mw);
    }
    for (const auto& c : prob.constraints()) CHECK(violation(c, blocks, x) <= 1e-10);
    const double obj = prob.objective().evaluate(blocks, x) + prob.objective_constant();
    CHECK(obj == doctest::Approx(cost).epsilon(1e-12));

    const auto sol = sdp::solve(prob);
    REQUIRE(sol.status == sdp::SolveStatus::optimal);
    CHECK(sol.primal_objective <= cost + 1e-6 * std::abs(cost));
  }
}

TEST_CASE("objective decomposes into generation and charging") {
  const Network net = load_case("data/case9.txt");
  WindowSpec spec;
  const double price[] = {0.3, 0.2, 0.05};
  for (int t = 1; t <= 3; ++t) spec.slots.push_back({t, 0.8 + 0.05 * t, price[t - 1], {}});
  spec.pevs = {{1, 1, 1, 3, 20, 0.9, 20.0}, {2, 3, 2, 3, 20, 0.9, 12.0}};
  auto [prob, model] = build_window_sdr(net, spec);
  const auto sol = sdp::solve(prob);
  REQUIRE(sol.status == sdp::SolveStatus::optimal);
  double total = 0.0, charge_direct = 0.0;
  std::vector<double> energy(2, 0.0);
  for (int t = 1; t <= 3; ++t) {
    const auto r = extract_slot(net, model, sol, t);
    total += r.gen_cost + r.charge_cost;
    double kw = 0.0;
    for (std::size_t i = 0; i < r.charge_ids.size(); ++i) {
      kw += r.charge_kw[i];
      energy[r.charge_ids[i] - 1] += 0.9 * r.charge_kw[i] * 0.5;
      CHECK(r.charge_kw[i] >= -1e-7);
      CHECK(r.charge_kw[i] <= 20 + 1e-6);
    }
    charge_direct += 0.5 * spec.slots[t - 1].price * kw;
  }
  CHECK(total == doctest::Approx(sol.primal_objective).epsilon(1e-6));
  CHECK(energy[0] == doctest::Approx(20.0).epsilon(1e-7));
  CHECK(energy[1] == doctest::Approx(12.0).epsilon(1e-7));
  CHECK(charge_direct > 0);
  // all charging goes to the cheapest slot while the rate allows
  const auto last = extract_slot(net, model, sol, 3);
  CHECK(last.charge_kw[0] == doctest::Approx(20.0).epsilon(1e-5));
}

TEST_CASE("build_window_sdr input errors") {
  const Network net = load_case("data/case9.txt");
  WindowSpec spec;
  CHECK_THROWS_AS(build_window_sdr(net, spec), InputError);
  spec.slots = {{1, 1.0, 0.1, {}}, {3, 1.0, 0.1, {}}};
  CHECK_THROWS_AS(build_window_sdr(net, spec), InputError);
  spec.slots = {{1, 1.0, 0.1, {}}};
  spec.pevs = {{1, 5, 1, 1, 20, 0.9, 5}};  // bus 5 has no generator
  CHECK_THROWS_AS(build_window_sdr(net, spec), InputError);
  spec.pevs = {{1, 1, 1, 2, 20, 0.9, 5}};
  CHECK_THROWS_AS(build_window_sdr(net, spec), InputError);
  spec.pevs.clear();
  spec.slots[0].fixed_charge_kw = {1.0, 2.0};
  CHECK_THROWS_AS(build_window_sdr(net, spec), InputError);
}

TEST_CASE("rank_gap") {
  Eigen::VectorXcd v(3);
  v << Complex(1, 0), Complex(0.5, -0.2), Complex(-0.3, 0.9);
  CHECK(rank_gap(v * v.adjoint()) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rank_gap(Eigen::MatrixXcd::Identity(2, 2)) == doctest::Approx(1.0));
  CHECK(kRankEpsilon == 1e-4);
  CHECK(numerical_rank(v * v.adjoint()) == 1);
  CHECK(numerical_rank(Eigen::MatrixXcd::Identity(3, 3)) == 3);
  CHECK(rank_ratio(Eigen::MatrixXcd::Identity(2, 2)) == doctest::Approx(1.0));
  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Identity(2, 2);
  bad(1, 1) = -0.5;
  CHECK_THROWS_AS(rank_gap(bad), InputError);
}

TEST_CASE("recover_voltage") {
  Eigen::MatrixXcd ones = Eigen::MatrixXcd::Ones(2, 2);
  const auto v1 = recover_voltage(ones, 0);
  CHECK(std::abs(v1(0) - 1.0) < 1e-12);
  CHECK(std::abs(v1(1) - 1.0) < 1e-12);

  Eigen::MatrixXcd four(1, 1);
  four(0, 0) = 4.0;
  CHECK(std::abs(recover_voltage(four, 0)(0) - 2.0) < 1e-12);

  Eigen::VectorXcd v(2);
  v << 1.0, std::polar(0.9, -0.1);
  const auto back = recover_voltage(v * v.adjoint(), 0);
  CHECK(std::abs(back(0)) == doctest::Approx(1.0));
  CHECK(std::abs(back(1)) == doctest::Approx(0.9));
  CHECK(std::arg(back(1)) - std::arg(back(0)) == doctest::Approx(-0.1));
  // rotated copy recovers the same vector
  const Eigen::VectorXcd rotated = v * std::polar(1.0, 1.3);
  CHECK((recover_voltage(rotated * rotated.adjoint(), 0) - v).norm() < 1e-12);

  CHECK_THROWS_AS(recover_voltage(Eigen::MatrixXcd::Zero(2, 2), 0), InputError);
  CHECK_THROWS_AS(recover_voltage(ones, 2), InputError);
}

TEST_CASE("flow_residual") {
  const Network net = two_bus({0.02, 0.2});
  const std::vector<Complex> no_gen(2);
  const std::vector<Complex> load{{0.0, 0.0}, {0.6, 0.8}};
  CHECK(flow_residual(net, Eigen::VectorXcd::Zero(2), no_gen, load) == doctest::Approx(1.0));

  Eigen::VectorXcd v(2);
  v << 1.0, std::polar(0.97, -0.05);
  std::vector<Complex> gen(2);
  const std::vector<Complex> zero(2);
  for (int k = 0; k < 2; ++k)
    gen[k] = v(k) * std::conj(net.lines()[0].y * (v(k) - v(1 - k)));
  CHECK(flow_residual(net, v, gen, zero) < 1e-12);

  double prev = 0.0;
  for (double d : {1e-4, 1e-3, 1e-2}) {
    Eigen::VectorXcd p = v;
    p(1) += d;
    const double r = flow_residual(net, p, gen, zero);
    CHECK(r > prev);
    prev = r;
  }
  CHECK_THROWS_AS(flow_residual(net, Eigen::VectorXcd::Zero(3), gen, zero), InputError);
}

TEST_CASE("extract_slot marks high-rank slots") {
  const Network net = two_bus({0.02, 0.2});
  WindowSpec spec;
  spec.slots = {{1, 1.0, 0.0, {}}};
  auto [prob, model] = build_window_sdr(net, spec);
  const auto sol = fake_solution(prob);  // W = I
  const auto r = extract_slot(net, model, sol, 1);
  CHECK(r.rank_gap == doctest::Approx(1.0));
  CHECK_FALSE(r.v.has_value());
  CHECK(std::isnan(r.flow_residual));
}
