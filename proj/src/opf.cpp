#include "evmpc/opf.hpp"

#include "evmpc/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>

namespace evmpc {

using sdp::LinearFunctional;
using sdp::Sense;

const SlotVars& WindowModel::slot(int t) const {
  if (slots_.empty() || t < first() || t > last())
    throw InputError("slot " + std::to_string(t) + " outside window");
  return slots_[t - first()];
}

namespace {

constexpr double kKw = 1000.0;

int reference_index(const Network& net) {
  int best = -1;
  for (const auto& g : net.generators()) {
    const int k = net.bus_index(g.bus);
    if (best < 0 || k < best) best = k;
  }
  return best < 0 ? 0 : best;
}

void check_spec(const Network& net, const WindowSpec& spec) {
  if (spec.slots.empty()) throw InputError("empty window");
  if (!(spec.dt > 0)) throw InputError("slot length must be positive");
  for (std::size_t i = 1; i < spec.slots.size(); ++i)
    if (spec.slots[i].t != spec.slots[i - 1].t + 1)
      throw InputError("window slots must be consecutive");
  for (const auto& s : spec.slots) {
    if (!s.fixed_charge_kw.empty() &&
        static_cast<int>(s.fixed_charge_kw.size()) != net.num_buses())
      throw InputError("fixed charge vector must have one entry per bus");
    if (!(s.load_factor >= 0) || !(s.price >= 0))
      throw InputError("slot " + std::to_string(s.t) + ": negative load factor or price");
  }
  const int lo = spec.slots.front().t;
  const int hi = spec.slots.back().t;
  for (const auto& p : spec.pevs) {
    const std::string name = "pev " + std::to_string(p.id);
    if (!net.is_generator_bus(p.bus))
      throw InputError(name + ": station " + std::to_string(p.bus) + " is not a generator bus");
    if (p.first < lo || p.last > hi || p.first > p.last)
      throw InputError(name + ": charging slots outside window");
    if (!(p.remaining_kwh >= 0) || !(p.p_max_kw >= 0) || !(p.u_h > 0))
      throw InputError(name + ": invalid demand, rate or efficiency");
  }
}

}  // namespace

std::pair<sdp::SdpProblem, WindowModel> build_window_sdr(const Network& net,
                                                         const WindowSpec& spec) {
  check_spec(net, spec);
  const int n = net.num_buses();
  const double base = net.base_mva();
  const double dt = spec.dt;
  const auto& gens = net.generators();

  sdp::SdpProblem prob;
  WindowModel model;
  model.inputs_ = spec.slots;
  model.pevs_ = spec.pevs;
  model.dt_ = dt;
  model.reference_ = reference_index(net);
  double constant = 0.0;

  std::vector<std::vector<std::pair<int, int>>> pev_vars(spec.pevs.size());

  for (const auto& in : spec.slots) {
    SlotVars sv;
    sv.t = in.t;
    sv.w = sdp::HermitianEmbedding(n, prob.add_block(2 * n));
    const std::string tag = "t" + std::to_string(in.t);

    for (const auto& g : gens) {
      sv.pg.push_back(prob.add_scalar());
      sv.qg.push_back(prob.add_scalar());
      const int p = sv.pg.back();
      const double c1 = g.cost.c1 * base;
      prob.objective().add_scalar(p, dt * c1);
      constant += dt * (g.cost.c1 * base * g.p_min + g.cost.c0);
      if (g.cost.c2 > 0) {
        // [[s, r P], [r P, 1]] >= 0 with r = sqrt(c2) * base gives s >= c2 P_MW^2
        const int e = prob.add_block(2);
        const double r = std::sqrt(g.cost.c2) * base;
        prob.add_constraint(LinearFunctional().add(e, 1, 1, 1.0), Sense::equal, 1.0,
                            tag + " epigraph unit");
        prob.add_constraint(LinearFunctional().add(e, 0, 1, 1.0).add_scalar(p, -r),
                            Sense::equal, r * g.p_min, tag + " epigraph link");
        prob.objective().add(e, 0, 0, dt);
        sv.epigraph_block.push_back(e);
      } else {
        sv.epigraph_block.push_back(-1);
      }
      sv.generation_rows.push_back(prob.add_constraint(
          LinearFunctional().add_scalar(p, 1.0), Sense::less_equal, g.p_max - g.p_min,
          tag + " generation P bus " + std::to_string(g.bus)));
      sv.generation_rows.push_back(prob.add_constraint(
          LinearFunctional().add_scalar(sv.qg.back(), 1.0), Sense::less_equal,
          g.q_max - g.q_min, tag + " generation Q bus " + std::to_string(g.bus)));
    }

    for (std::size_t i = 0; i < spec.pevs.size(); ++i) {
      const auto& pev = spec.pevs[i];
      if (in.t < pev.first || in.t > pev.last) continue;
      const int x = prob.add_scalar();
      sv.charges.push_back({static_cast<int>(i), x});
      pev_vars[i].push_back({in.t, x});
      prob.objective().add_scalar(x, dt * in.price);
      model.rate_rows_.push_back(
          prob.add_constraint(LinearFunctional().add_scalar(x, 1.0), Sense::less_equal,
                              pev.p_max_kw, tag + " rate pev " + std::to_string(pev.id)));
    }

    double fixed_total = 0.0;
    for (int k = 0; k < n; ++k) {
      const Bus& bus = net.buses()[k];
      LinearFunctional re, im;
      for (const auto& nb : net.neighbors(k)) {
        const double g = nb.y.real();
        const double b = nb.y.imag();
        // (W_kk - W_km) conj(y)
        sv.w.add_real(re, k, k, g);
        sv.w.add_real(re, k, nb.bus, -g);
        sv.w.add_imag(re, k, nb.bus, -b);
        sv.w.add_imag(im, k, nb.bus, -g);
        sv.w.add_real(im, k, k, -b);
        sv.w.add_real(im, k, nb.bus, b);
      }
      double rhs_p = -bus.p_load * in.load_factor;
      double rhs_q = -bus.q_load * in.load_factor;
      const int gi = net.generator_at(bus.id);
      if (gi >= 0) {
        re.add_scalar(sv.pg[gi], -1.0);
        im.add_scalar(sv.qg[gi], -1.0);
        rhs_p += gens[gi].p_min;
        rhs_q += gens[gi].q_min;
      }
      for (const auto& [i, x] : sv.charges)
        if (spec.pevs[i].bus == bus.id) re.add_scalar(x, 1.0 / (kKw * base));
      if (!in.fixed_charge_kw.empty()) {
        rhs_p -= in.fixed_charge_kw[k] / (kKw * base);
        fixed_total += in.fixed_charge_kw[k];
      }
      const std::string where = tag + " bus " + std::to_string(bus.id);
      sv.balance_p.push_back(prob.add_constraint(std::move(re), Sense::equal, rhs_p,
                                                 where + " real balance"));
      sv.balance_q.push_back(prob.add_constraint(std::move(im), Sense::equal, rhs_q,
                                                 where + " reactive balance"));

      LinearFunctional lo, hi;
      sv.w.add_real(lo, k, k, -1.0);
      sv.w.add_real(hi, k, k, 1.0);
      sv.voltage_rows.push_back(
          {prob.add_constraint(std::move(lo), Sense::less_equal, -bus.v_min * bus.v_min,
                               where + " voltage lower"),
           prob.add_constraint(std::move(hi), Sense::less_equal, bus.v_max * bus.v_max,
                               where + " voltage upper")});
    }
    constant += dt * in.price * fixed_total;

    for (const auto& line : net.lines()) {
      const int k = net.bus_index(line.from);
      const int m = net.bus_index(line.to);
      const double tan_max = std::tan(line.theta_max);
      const std::string where =
          tag + " angle " + std::to_string(line.from) + "-" + std::to_string(line.to);
      LinearFunctional up, down;
      sv.w.add_imag(up, k, m, 1.0);
      sv.w.add_real(up, k, m, -tan_max);
      sv.w.add_imag(down, k, m, -1.0);
      sv.w.add_real(down, k, m, -tan_max);
      sv.angle_rows.push_back({prob.add_constraint(std::move(up), Sense::less_equal, 0.0, where),
                               prob.add_constraint(std::move(down), Sense::less_equal, 0.0,
                                                   where)});
    }
    model.slots_.push_back(std::move(sv));
  }

  for (std::size_t i = 0; i < spec.pevs.size(); ++i) {
    const auto& pev = spec.pevs[i];
    LinearFunctional f;
    for (const auto& [t, x] : pev_vars[i]) f.add_scalar(x, pev.u_h * dt);
    model.completion_rows_.push_back(prob.add_constraint(
        std::move(f), Sense::equal, pev.remaining_kwh, "completion pev " + std::to_string(pev.id)));
  }

  prob.set_objective_constant(constant);
  return {std::move(prob), std::move(model)};
}

void add_rank_penalty(sdp::SdpProblem& problem, const SlotVars& slot, double mu,
                      const Eigen::VectorXcd& w) {
  slot.w.add_trace(problem.objective(), mu);
  slot.w.add_quadratic(problem.objective(), w, -mu);
}

namespace {

Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& w) {
  if (w.rows() != w.cols() || w.rows() == 0) throw InputError("matrix must be square");
  if (!w.allFinite()) throw InputError("non-finite matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(w, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

double rank_gap(const Eigen::MatrixXcd& w, double psd_tol) {
  const Eigen::VectorXd ev = hermitian_eigenvalues(w);
  const double top = ev(ev.size() - 1);
  if (ev(0) < -psd_tol * std::max(1.0, std::abs(top)))
    throw InputError("matrix is not positive semidefinite");
  const double gap = w.trace().real() - top;
  return std::abs(gap) <= 1e-12 ? std::max(gap, 0.0) : gap;
}

double rank_ratio(const Eigen::MatrixXcd& w) {
  const Eigen::VectorXd ev = hermitian_eigenvalues(w);
  const auto n = ev.size();
  if (n == 1 || ev(n - 1) <= 0) return 0.0;
  return std::max(ev(n - 2), 0.0) / ev(n - 1);
}

int numerical_rank(const Eigen::MatrixXcd& w, double ratio) {
  const Eigen::VectorXd ev = hermitian_eigenvalues(w);
  const double top = ev(ev.size() - 1);
  if (top <= 0) return 0;
  int r = 0;
  for (double e : ev)
    if (e > ratio * top) ++r;
  return r;
}

Eigen::VectorXcd recover_voltage(const Eigen::MatrixXcd& w, int reference) {
  if (reference < 0 || reference >= w.rows()) throw InputError("reference bus out of range");
  const auto top = sdp::max_eigpair(w);
  if (!(top.value > 0)) throw InputError("largest eigenvalue is not positive");
  Eigen::VectorXcd v = std::sqrt(top.value) * top.vector;
  const Complex ref = v(reference);
  if (std::abs(ref) > 0) v *= std::conj(ref) / std::abs(ref);
  return v;
}

double flow_residual(const Network& net, const Eigen::VectorXcd& v,
                     const std::vector<Complex>& s_gen, const std::vector<Complex>& s_load) {
  const int n = net.num_buses();
  if (v.size() != n || static_cast<int>(s_load.size()) != n ||
      s_gen.size() != net.generators().size())
    throw InputError("flow_residual: dimension mismatch");
  std::vector<Complex> injection(n);
  for (int k = 0; k < n; ++k) injection[k] = -s_load[k];
  for (std::size_t g = 0; g < s_gen.size(); ++g)
    injection[net.bus_index(net.generators()[g].bus)] += s_gen[g];
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    Complex current = 0.0;
    for (const auto& nb : net.neighbors(k)) current += nb.y * (v(k) - v(nb.bus));
    worst = std::max(worst, std::abs(v(k) * std::conj(current) - injection[k]));
  }
  return worst;
}

std::vector<Complex> slot_load(const Network& net, const SlotInput& in,
                               const std::vector<int>& charge_bus,
                               const std::vector<double>& charge_kw) {
  std::vector<Complex> s(net.num_buses());
  for (int k = 0; k < net.num_buses(); ++k) {
    const Bus& b = net.buses()[k];
    s[k] = Complex(b.p_load, b.q_load) * in.load_factor;
    if (!in.fixed_charge_kw.empty()) s[k] += in.fixed_charge_kw[k] / (kKw * net.base_mva());
  }
  for (std::size_t i = 0; i < charge_bus.size(); ++i)
    s[net.bus_index(charge_bus[i])] += charge_kw[i] / (kKw * net.base_mva());
  return s;
}

RecoveredSlot extract_slot(const Network& net, const WindowModel& model,
                           const sdp::SdpSolution& sol, int t, double epsilon) {
  const SlotVars& sv = model.slot(t);
  const SlotInput& in = model.inputs()[t - model.first()];
  const auto& gens = net.generators();
  if (static_cast<int>(sol.blocks.size()) <= sv.w.block())
    throw InputError("solution does not match the model");
  RecoveredSlot r;
  r.t = t;
  r.w = sv.w.extract(sol.blocks[sv.w.block()]);
  for (std::size_t g = 0; g < gens.size(); ++g) {
    r.pg.push_back(sol.scalars(sv.pg[g]) + gens[g].p_min);
    r.qg.push_back(sol.scalars(sv.qg[g]) + gens[g].q_min);
    r.gen_cost += model.dt() * net.generation_cost(gens[g], r.pg.back());
  }
  std::vector<int> charge_bus;
  double charged = 0.0;
  for (const auto& [i, x] : sv.charges) {
    r.charge_ids.push_back(model.pevs()[i].id);
    r.charge_kw.push_back(sol.scalars(x));
    charge_bus.push_back(model.pevs()[i].bus);
    charged += sol.scalars(x);
  }
  for (double f : in.fixed_charge_kw) charged += f;
  r.charge_cost = model.dt() * in.price * charged;
  r.rank_gap = rank_gap(r.w);
  r.rank_ratio = rank_ratio(r.w);
  r.flow_residual = std::numeric_limits<double>::quiet_NaN();
  if (r.rank_gap <= epsilon) {
    r.v = recover_voltage(r.w, model.reference_bus());
    std::vector<Complex> s_gen;
    for (std::size_t g = 0; g < gens.size(); ++g) s_gen.emplace_back(r.pg[g], r.qg[g]);
    r.flow_residual = flow_residual(net, *r.v, s_gen, slot_load(net, in, charge_bus, r.charge_kw));
  }
  return r;
}

}  // namespace evmpc
