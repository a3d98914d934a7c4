#include "evmpc/error.hpp"
#include "evmpc/offline.hpp"
#include "evmpc/report.hpp"
#include "evmpc/text.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>

using namespace evmpc;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 1;
constexpr int kSolver = 2;

struct RunConfig {
  std::string scenario;
  std::string out = "out";
  std::string method = "joint";
  std::string case_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> mu;
  std::optional<double> eps;
  std::optional<int> max_iter;
  std::optional<int> noa_max_iter;
  std::optional<double> gap_tol;
  std::optional<double> feas_tol;
  double load_factor = 1.0;
  int threads = 0;
  bool plots = false;
  bool timing = false;
  bool json = false;
};

MpcOptions options_for(const RunConfig& c, const Network& net) {
  MpcOptions o;
  o.penalty.mu = c.mu.value_or(default_mu(net));
  if (c.eps) o.penalty.epsilon = *c.eps;
  if (c.noa_max_iter) o.penalty.max_iter = *c.noa_max_iter;
  if (c.max_iter) o.solver.max_iter = *c.max_iter;
  if (c.gap_tol) o.solver.gap_tol = *c.gap_tol;
  if (c.feas_tol) o.solver.feas_tol = *c.feas_tol;
  o.penalty.validate();
  if (o.solver.max_iter < 1) throw InputError("--max-iter must be >= 1");
  if (!(o.solver.gap_tol > 0) || !(o.solver.feas_tol > 0))
    throw InputError("solver tolerances must be positive");
  return o;
}

fs::path prepare_out(const RunConfig& c) {
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + c.out);
  return dir;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void write_meta(const fs::path& dir, const std::string& command, const RunConfig& c,
                double wall_s, nlohmann::json extra) {
  extra["command"] = command;
  extra["finished_utc"] = utc_now();
  extra["wall_s"] = wall_s;
  extra["scenario_path"] = c.scenario;
  text::write_file_atomic(dir / ("run_meta_" + command + ".json"), extra.dump(2) + "\n");
}

// Renders every plot from the CSV files already on disk.
void plot(const fs::path& csv, const fs::path& svg, const std::string& title,
          const std::string& y_label, const std::vector<std::string>& columns = {}) {
  const auto table = report::read_table(text::read_file(csv));
  if (columns.empty()) {
    text::write_file_atomic(svg, report::plot_table(table, title, y_label));
    return;
  }
  std::vector<report::Series> series;
  for (const auto& name : columns) series.push_back({name, table.column(name)});
  text::write_file_atomic(
      svg, report::line_plot_svg(title, table.header.front(), y_label, table.columns.front(), series));
}

int simulate_online(const RunConfig& c) {
  const auto started = std::chrono::steady_clock::now();
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const MpcOptions o = options_for(c, sc.network);
  const fs::path dir = prepare_out(c);
  const MpcResult res = run(sc, o);

  text::write_file_atomic(dir / "online_trace.csv", report::online_trace_csv(res, c.timing));
  text::write_file_atomic(dir / "online_voltage.csv", report::online_voltage_csv(res, sc.network));
  text::write_file_atomic(dir / "online_power.csv", report::online_power_csv(res, sc.network));
  text::write_file_atomic(dir / "summary.csv", report::online_summary_csv(res));
  if (c.plots) {
    plot(dir / "online_power.csv", dir / "power.svg", "Real power generation", "MW");
    plot(dir / "online_voltage.csv", dir / "voltage.svg", "Voltage magnitude", "p.u.");
    plot(dir / "online_trace.csv", dir / "charging_load.svg", "Aggregate charging load", "kW",
         {"aggregate_charge_kw"});
  }
  nlohmann::json meta;
  meta["seed"] = sc.seed;
  meta["scenario"] = res.scenario;
  meta["complete"] = res.complete;
  meta["error"] = res.error;
  auto& ms = meta["solve_ms"] = nlohmann::json::array();
  for (const auto& r : res.records) ms.push_back(r.solve_ms);
  auto& ev = meta["evictions"] = nlohmann::json::array();
  for (const auto& e : res.evicted) ev.push_back({{"slot", e.slot}, {"id", e.id}, {"remaining_kwh", e.remaining_kwh}});
  auto& rj = meta["rejections"] = nlohmann::json::array();
  for (const auto& r : res.rejected) rj.push_back({{"slot", r.slot}, {"id", r.id}, {"reason", r.reason}});
  write_meta(dir, "simulate-online", c,
             std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(), meta);

  for (const auto& e : res.evicted)
    std::cerr << "evicted pev " << e.id << " at slot " << e.slot << '\n';
  for (const auto& r : res.rejected)
    std::cerr << "rejected pev " << r.id << " at slot " << r.slot << ": " << r.reason << '\n';
  if (!res.complete) {
    std::cerr << "error: " << res.error << " (" << res.records.size() << " slots written)\n";
    return kSolver;
  }
  std::cout << "total=" << report::num(res.total) << '\n';
  return kOk;
}

int simulate_offline(const RunConfig& c) {
  const auto started = std::chrono::steady_clock::now();
  const OfflineMethod method = parse_method(c.method);
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const MpcOptions o = options_for(c, sc.network);
  const fs::path dir = prepare_out(c);
  const OfflineResult res = run_offline(sc, method, o, c.threads);

  text::write_file_atomic(dir / "offline_trace.csv", report::offline_trace_csv(res));
  text::write_file_atomic(dir / "offline_summary.csv", report::offline_summary_csv(res));
  if (c.plots)
    plot(dir / "offline_trace.csv", dir / "offline_charging_load.svg",
         "Aggregate charging load (offline)", "kW", {"aggregate_charge_kw"});
  nlohmann::json meta;
  meta["seed"] = sc.seed;
  meta["scenario"] = res.scenario;
  meta["method"] = c.method;
  write_meta(dir, "simulate-offline", c,
             std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(), meta);
  std::cout << "lower_bound=" << report::num(res.lower_bound) << '\n'
            << "value=" << report::num(res.value) << '\n';
  if (!res.converged) std::cerr << "warning: rank repair did not converge on every slot\n";
  return kOk;
}

std::map<std::string, std::string> key_values(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing " + path.string());
  std::map<std::string, std::string> out;
  for (auto& [k, v] : report::read_key_values(text::read_file(path))) out[k] = v;
  return out;
}

double number(const std::map<std::string, std::string>& kv, const std::string& key,
              const fs::path& from) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw InputError(from.string() + " has no " + key);
  return text::parse_double(it->second, 0);
}

// Rebuilds the parts of both results that compare() reads from the traces.
std::pair<MpcResult, OfflineResult> results_from_traces(const fs::path& dir) {
  const fs::path on_sum = dir / "summary.csv", off_sum = dir / "offline_summary.csv";
  const fs::path on_trace = dir / "online_trace.csv", off_trace = dir / "offline_trace.csv";
  for (const auto& p : {on_sum, off_sum, on_trace, off_trace})
    if (!fs::exists(p)) throw InputError("missing " + p.string());
  const auto on = key_values(on_sum);
  const auto off = key_values(off_sum);

  MpcResult online;
  if (!on.count("scenario") || !off.count("scenario"))
    throw InputError("summaries carry no scenario fingerprint");
  online.scenario = on.at("scenario");
  online.complete = on.count("complete") && on.at("complete") == "1";
  if (!online.complete) online.error = "summary marks the run incomplete";
  online.total = number(on, "total", on_sum);
  const auto ot = report::read_table(text::read_file(on_trace));
  const auto& slots = ot.column("slot");
  const auto& kw = ot.column("aggregate_charge_kw");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    MpcSlotRecord r;
    r.t = static_cast<int>(slots[i]);
    r.charge_kw = {kw[i]};
    online.records.push_back(std::move(r));
  }

  OfflineResult offline;
  offline.scenario = off.at("scenario");
  offline.value = number(off, "value", off_sum);
  offline.lower_bound = number(off, "lower_bound", off_sum);
  offline.converged = off.count("converged") && off.at("converged") == "1";
  const auto ft = report::read_table(text::read_file(off_trace));
  for (double v : ft.column("aggregate_charge_kw")) {
    OfflineSlot s;
    s.slot.charge_kw = {v};
    offline.slots.push_back(std::move(s));
  }
  return {std::move(online), std::move(offline)};
}

int cmd_compare(const RunConfig& c) {
  const fs::path dir = prepare_out(c);
  CompareReport rep;
  if (!c.scenario.empty()) {
    const OfflineMethod method = parse_method(c.method);
    const Scenario sc = load_scenario(c.scenario, c.seed);
    const MpcOptions o = options_for(c, sc.network);
    const MpcResult online = run(sc, o);
    if (!online.complete) {
      std::cerr << "error: " << online.error << '\n';
      return kSolver;
    }
    rep = compare(online, run_offline(sc, method, o, c.threads));
  } else {
    const auto [online, offline] = results_from_traces(dir);
    rep = compare(online, offline);
  }
  text::write_file_atomic(dir / "compare.csv", report::compare_csv(rep));
  text::write_file_atomic(dir / "compare_load.csv", report::compare_load_csv(rep));
  if (c.plots)
    plot(dir / "compare_load.csv", dir / "charging_load_compare.svg",
         "Aggregate charging load, online and offline", "kW");
  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%.6f", rep.ratio);
  std::cout << "ratio=" << ratio << '\n';
  for (const auto& f : rep.flags) std::cerr << "flag: " << f << '\n';
  return kOk;
}

int cmd_solve_opf(const RunConfig& c) {
  const Network net = load_case(c.case_path);
  const auto problems = validate(net);
  if (!problems.empty()) throw InputError(problems.front());
  if (!(c.load_factor >= 0)) throw InputError("--load-factor must be >= 0");
  const MpcOptions o = options_for(c, net);

  WindowSpec spec;
  spec.dt = 1.0;
  spec.slots = {{1, c.load_factor, 0.0, {}}};
  auto [prob, model] = build_window_sdr(net, spec);
  const auto sol = sdp::solve(prob, o.solver);
  if (sol.status == sdp::SolveStatus::infeasible)
    throw SolverError("relaxation infeasible, dominant constraint " + dominant_constraint(prob, sol));
  if (sol.status != sdp::SolveStatus::optimal)
    throw SolverError("relaxation stopped (" + sdp::to_string(sol.status) + ")");
  const RecoveredSlot sdr = extract_slot(net, model, sol, 1, o.penalty.epsilon);
  RecoveredSlot slot = sdr;
  NoaTrace trace;
  trace.converged = sdr.rank_gap <= o.penalty.epsilon;
  if (sdr.rank_ratio > kRankOneRatio) {
    const auto r = repair_slot(net, spec.slots.front(), spec.dt, sdr, o.penalty, o.solver);
    slot = r.slot;
    trace = r.trace;
  }
  const Eigen::VectorXcd v = slot.v ? *slot.v : recover_voltage(slot.w, model.reference_bus());

  std::vector<std::pair<std::string, nlohmann::json>> out;
  out.emplace_back("objective", slot.gen_cost);
  out.emplace_back("sdr_objective", sol.primal_objective);
  out.emplace_back("rank_gap_sdr", sdr.rank_gap);
  out.emplace_back("rank_gap", slot.rank_gap);
  out.emplace_back("noa_iterations", trace.iterations);
  out.emplace_back("noa_converged", trace.converged);
  out.emplace_back("flow_residual", slot.flow_residual);
  for (int k = 0; k < net.num_buses(); ++k) {
    const std::string id = std::to_string(net.buses()[k].id);
    out.emplace_back("v" + id + "_pu", std::abs(v(k)));
    out.emplace_back("v" + id + "_deg", std::arg(v(k)) * 180.0 / std::numbers::pi);
  }
  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    const std::string id = std::to_string(net.generators()[g].bus);
    out.emplace_back("pg" + id + "_mw", slot.pg[g] * net.base_mva());
    out.emplace_back("qg" + id + "_mvar", slot.qg[g] * net.base_mva());
  }
  if (c.json) {
    nlohmann::ordered_json j;
    for (const auto& [k, val] : out) j[k] = val.is_number_float() && !std::isfinite(val.get<double>()) ? nlohmann::json() : val;
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& [k, val] : out)
      std::cout << k << '=' << (val.is_number_float() ? report::num(val.get<double>()) : val.dump()) << '\n';
  }
  return kOk;
}

int cmd_generate(const RunConfig& c) {
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const fs::path dir = prepare_out(c);
  text::write_file_atomic(dir / "case.txt", serialize_case(sc.network));
  text::write_file_atomic(dir / "roster.csv", serialize_roster_csv(sc.roster));
  text::write_file_atomic(dir / "load_profile.csv", serialize_profile_csv(sc.load_profile));
  text::write_file_atomic(dir / "price_profile.csv", serialize_profile_csv(sc.price_profile));
  std::string ini = "[network]\ncase = case.txt\n\n[fleet]\nseed = " + std::to_string(sc.seed) +
                    "\nroster = roster.csv\n\n[profiles]\nload = load_profile.csv\nprice = "
                    "price_profile.csv\n\n[horizon]\nslots = " +
                    std::to_string(sc.slots) + "\ndt_hours = " + report::num(sc.dt) + "\n";
  text::write_file_atomic(dir / "scenario.ini", ini);
  std::cout << "vehicles=" << sc.roster.size() << '\n' << "scenario=" << (dir / "scenario.ini").string() << '\n';
  return kOk;
}

void common(CLI::App* cmd, RunConfig& c, bool scenario_required) {
  auto* s = cmd->add_option("--scenario", c.scenario, "scenario INI file");
  if (scenario_required) s->required();
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "override the scenario's fleet seed");
  cmd->add_option("--mu", c.mu, "rank penalty weight (default 10, or 100 above 30 buses)");
  cmd->add_option("--eps", c.eps, "rank gap tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", c.max_iter, "SDP solver iteration cap");
  cmd->add_option("--noa-max-iter", c.noa_max_iter, "rank repair iteration cap");
  cmd->add_option("--gap-tol", c.gap_tol, "SDP relative duality gap tolerance");
  cmd->add_option("--feas-tol", c.feas_tol, "SDP feasibility tolerance");
  cmd->add_flag("--plots", c.plots, "also write SVG plots");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receding-horizon EV charging with semidefinite OPF relaxations"};
  app.require_subcommand(1);
  RunConfig c;

  auto* online = app.add_subcommand("simulate-online", "run the MPC loop over the scenario");
  common(online, c, true);
  online->add_flag("--timing", c.timing, "fill the solve_ms column of the trace");

  auto* offline = app.add_subcommand("simulate-offline", "full-horizon relaxation and rank repair");
  common(offline, c, true);
  offline->add_option("--method", c.method, "joint or dnoa")->capture_default_str();
  offline->add_option("--threads", c.threads, "DNOA workers (0 = hardware)");

  auto* cmp = app.add_subcommand("compare", "compare online and offline totals");
  common(cmp, c, false);
  cmp->add_option("--method", c.method, "offline method when running from a scenario")->capture_default_str();
  cmp->add_option("--threads", c.threads, "DNOA workers (0 = hardware)");

  auto* opf = app.add_subcommand("solve-opf", "single-slot OPF through the relaxation");
  opf->add_option("--case", c.case_path, "case file")->required();
  opf->add_option("--load-factor", c.load_factor, "multiplier on every bus load")->capture_default_str();
  opf->add_option("--mu", c.mu, "rank penalty weight");
  opf->add_option("--eps", c.eps, "rank gap tolerance")->check(CLI::PositiveNumber);
  opf->add_option("--max-iter", c.max_iter, "SDP solver iteration cap");
  opf->add_option("--noa-max-iter", c.noa_max_iter, "rank repair iteration cap");
  opf->add_flag("--json", c.json, "print one flat JSON object");

  auto* gen = app.add_subcommand("generate", "write an explicit, self-contained scenario");
  gen->add_option("--scenario", c.scenario, "scenario INI file")->required();
  gen->add_option("--out", c.out, "output directory")->capture_default_str();
  gen->add_option("--seed", c.seed, "override the scenario's fleet seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*online) return simulate_online(c);
    if (*offline) return simulate_offline(c);
    if (*cmp) return cmd_compare(c);
    if (*opf) return cmd_solve_opf(c);
    if (*gen) return cmd_generate(c);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kConfig;
}
