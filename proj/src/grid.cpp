#include "evmpc/grid.hpp"

#include "evmpc/error.hpp"
#include "evmpc/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

namespace evmpc {

Network::Network(double base_mva, std::vector<Bus> buses, std::vector<Line> lines,
                 std::vector<Generator> generators)
    : base_mva_(base_mva),
      buses_(std::move(buses)),
      lines_(std::move(lines)),
      generators_(std::move(generators)) {
  int max_id = 0;
  for (const auto& b : buses_) max_id = std::max(max_id, b.id);
  index_by_id_.assign(max_id + 1, -1);
  for (std::size_t i = 0; i < buses_.size(); ++i)
    if (buses_[i].id > 0 && index_by_id_[buses_[i].id] < 0)
      index_by_id_[buses_[i].id] = static_cast<int>(i);
  neighbors_.assign(buses_.size(), {});
  for (std::size_t l = 0; l < lines_.size(); ++l) {
    const auto& line = lines_[l];
    if (!has_bus(line.from) || !has_bus(line.to) || line.from == line.to) continue;
    const int a = bus_index(line.from);
    const int b = bus_index(line.to);
    neighbors_[a].push_back({b, static_cast<int>(l), line.y});
    neighbors_[b].push_back({a, static_cast<int>(l), line.y});
  }
}

bool Network::has_bus(int id) const {
  return id > 0 && id < static_cast<int>(index_by_id_.size()) && index_by_id_[id] >= 0;
}

int Network::bus_index(int id) const {
  if (!has_bus(id)) throw InputError("unknown bus " + std::to_string(id));
  return index_by_id_[id];
}

int Network::generator_at(int id) const {
  for (std::size_t g = 0; g < generators_.size(); ++g)
    if (generators_[g].bus == id) return static_cast<int>(g);
  return -1;
}

std::vector<std::string> validate(const Network& net) {
  std::vector<std::string> out;
  if (!(net.base_mva() > 0)) out.push_back("baseMVA must be positive");
  if (net.buses().empty()) out.push_back("network has no buses");
  std::set<int> ids;
  for (const auto& b : net.buses()) {
    const std::string name = "bus " + std::to_string(b.id);
    if (b.id < 1) out.push_back(name + ": id must be >= 1");
    if (!ids.insert(b.id).second) out.push_back(name + ": duplicate id");
    if (!std::isfinite(b.p_load) || !std::isfinite(b.q_load))
      out.push_back(name + ": non-finite load");
    if (!(b.v_min > 0)) out.push_back(name + ": v_min must be positive");
    if (!(b.v_min <= b.v_max)) out.push_back(name + ": v_min exceeds v_max");
  }
  std::set<std::pair<int, int>> pairs;
  for (const auto& l : net.lines()) {
    const std::string name =
        "line " + std::to_string(l.from) + "-" + std::to_string(l.to);
    if (l.from == l.to) out.push_back(name + ": from equals to");
    if (!net.has_bus(l.from) || !net.has_bus(l.to)) out.push_back(name + ": unknown bus");
    if (!std::isfinite(l.y.real()) || !std::isfinite(l.y.imag()) || l.y == Complex{})
      out.push_back(name + ": admittance must be finite and nonzero");
    if (!(l.theta_max > 0 && l.theta_max < std::numbers::pi / 2))
      out.push_back(name + ": angle limit outside (0, pi/2)");
    if (!pairs.insert({std::min(l.from, l.to), std::max(l.from, l.to)}).second)
      out.push_back(name + ": duplicate line");
  }
  std::set<int> gen_buses;
  for (const auto& g : net.generators()) {
    const std::string name = "generator at bus " + std::to_string(g.bus);
    if (!net.has_bus(g.bus)) out.push_back(name + ": bus does not exist");
    if (!gen_buses.insert(g.bus).second) out.push_back(name + ": duplicate generator");
    if (!(g.p_min <= g.p_max)) out.push_back(name + ": p_min exceeds p_max");
    if (!(g.q_min <= g.q_max)) out.push_back(name + ": q_min exceeds q_max");
    if (!(g.cost.c2 >= 0)) out.push_back(name + ": negative quadratic cost");
  }
  if (net.num_buses() > 0) {
    std::vector<bool> seen(net.num_buses(), false);
    std::queue<int> todo;
    todo.push(0);
    seen[0] = true;
    while (!todo.empty()) {
      const int k = todo.front();
      todo.pop();
      for (const auto& nb : net.neighbors(k))
        if (!seen[nb.bus]) {
          seen[nb.bus] = true;
          todo.push(nb.bus);
        }
    }
    for (int k = 0; k < net.num_buses(); ++k)
      if (!seen[k])
        out.push_back("bus " + std::to_string(net.buses()[k].id) +
                      ": not connected to bus " + std::to_string(net.buses()[0].id));
  }
  return out;
}

namespace {

enum class Section { none, base, bus, gen, branch, gencost };

Section section_from(const std::string& name, int row) {
  if (name == "baseMVA") return Section::base;
  if (name == "bus") return Section::bus;
  if (name == "gen") return Section::gen;
  if (name == "branch") return Section::branch;
  if (name == "gencost") return Section::gencost;
  throw ParseError(row, "unknown section [" + name + "]");
}

std::vector<double> numbers(const std::vector<std::string>& fields, int row) {
  std::vector<double> v;
  v.reserve(fields.size());
  for (const auto& f : fields) v.push_back(text::parse_double(f, row));
  return v;
}

int as_id(double v, int row) {
  if (v != std::floor(v) || v < 1) throw ParseError(row, "bus id must be a positive integer");
  return static_cast<int>(v);
}

void expect_columns(const std::vector<double>& v, std::size_t lo, std::size_t hi,
                    int row, const char* section) {
  if (v.size() < lo || v.size() > hi)
    throw ParseError(row, std::string("malformed ") + section + " row: expected " +
                              std::to_string(lo) +
                              (hi > lo ? "-" + std::to_string(hi) : std::string()) +
                              " columns, got " + std::to_string(v.size()));
}

}  // namespace

Network parse_case(std::string_view text) {
  double base = 0.0;
  bool have_base = false;
  std::vector<Bus> buses;
  std::vector<int> bus_rows;
  struct PendingGen {
    Generator g;
    int row;
  };
  std::vector<PendingGen> gens;
  std::vector<Line> lines;
  std::vector<int> line_rows;
  std::map<int, std::pair<CostPolynomial, int>> costs;

  Section section = Section::none;
  int row = 0;
  for (const auto& raw : text::split_lines(text)) {
    ++row;
    const std::string line = text::strip_comment(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(row, "malformed section header");
      section = section_from(text::trim(line.substr(1, line.size() - 2)), row);
      continue;
    }
    const auto v = numbers(text::split_ws(line), row);
    switch (section) {
      case Section::none:
        throw ParseError(row, "data before any section header");
      case Section::base:
        expect_columns(v, 1, 1, row, "baseMVA");
        if (have_base) throw ParseError(row, "baseMVA given twice");
        base = v[0];
        have_base = true;
        if (!(base > 0)) throw ParseError(row, "baseMVA must be positive");
        break;
      case Section::bus: {
        expect_columns(v, 5, 5, row, "bus");
        if (!(v[3] > 0)) throw ParseError(row, "Vmin must be positive");
        if (v[3] > v[4]) throw ParseError(row, "Vmin exceeds Vmax");
        buses.push_back({as_id(v[0], row), v[1], v[2], v[3], v[4]});
        bus_rows.push_back(row);
        break;
      }
      case Section::gen: {
        expect_columns(v, 5, 5, row, "gen");
        if (v[1] > v[2]) throw ParseError(row, "Pmin exceeds Pmax");
        if (v[3] > v[4]) throw ParseError(row, "Qmin exceeds Qmax");
        Generator g;
        g.bus = as_id(v[0], row);
        g.p_min = v[1];
        g.p_max = v[2];
        g.q_min = v[3];
        g.q_max = v[4];
        gens.push_back({g, row});
        break;
      }
      case Section::branch: {
        expect_columns(v, 5, 7, row, "branch");
        const Complex z(v[2], v[3]);
        if (z == Complex{}) throw ParseError(row, "branch impedance is zero");
        const double deg = v[4];
        if (deg < 0 || deg >= 90) throw ParseError(row, "angle limit must lie in [0, 90) degrees");
        Line l;
        l.from = as_id(v[0], row);
        l.to = as_id(v[1], row);
        if (l.from == l.to) throw ParseError(row, "branch connects a bus to itself");
        l.y = 1.0 / z;
        l.theta_max = deg == 0 ? kDefaultAngleLimit : deg * std::numbers::pi / 180.0;
        for (std::size_t k = 0; k < lines.size(); ++k) {
          const auto& o = lines[k];
          if ((o.from == l.from && o.to == l.to) || (o.from == l.to && o.to == l.from))
            throw ParseError(row, "duplicate line (first at row " +
                                      std::to_string(line_rows[k]) + ")");
        }
        lines.push_back(l);
        line_rows.push_back(row);
        break;
      }
      case Section::gencost: {
        expect_columns(v, 4, 4, row, "gencost");
        if (v[1] < 0) throw ParseError(row, "negative quadratic cost coefficient");
        const int id = as_id(v[0], row);
        if (!costs.emplace(id, std::pair{CostPolynomial{v[1], v[2], v[3]}, row}).second)
          throw ParseError(row, "duplicate gencost for bus " + std::to_string(id));
        break;
      }
    }
  }
  if (!have_base) throw ParseError(row, "missing [baseMVA] section");
  if (buses.empty()) throw ParseError(row, "no buses");

  std::set<int> ids;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (!ids.insert(buses[i].id).second)
      throw ParseError(bus_rows[i], "duplicate bus id " + std::to_string(buses[i].id));
    buses[i].p_load /= base;
    buses[i].q_load /= base;
  }
  for (std::size_t k = 0; k < lines.size(); ++k)
    if (!ids.count(lines[k].from) || !ids.count(lines[k].to))
      throw ParseError(line_rows[k], "branch references unknown bus");

  std::vector<Generator> generators;
  std::set<int> gen_ids;
  for (auto& pg : gens) {
    if (!ids.count(pg.g.bus)) throw ParseError(pg.row, "generator on unknown bus");
    if (!gen_ids.insert(pg.g.bus).second)
      throw ParseError(pg.row, "second generator on bus " + std::to_string(pg.g.bus));
    auto it = costs.find(pg.g.bus);
    if (it == costs.end())
      throw ParseError(pg.row, "no gencost row for generator at bus " + std::to_string(pg.g.bus));
    pg.g.cost = it->second.first;
    pg.g.p_min /= base;
    pg.g.p_max /= base;
    pg.g.q_min /= base;
    pg.g.q_max /= base;
    generators.push_back(pg.g);
  }
  for (const auto& [id, entry] : costs)
    if (!gen_ids.count(id))
      throw ParseError(entry.second, "gencost for bus without generator");

  Network net(base, std::move(buses), std::move(lines), std::move(generators));
  // Row-level checks above cover everything except connectivity.
  std::vector<bool> seen(net.num_buses(), false);
  std::queue<int> todo;
  todo.push(0);
  seen[0] = true;
  while (!todo.empty()) {
    const int k = todo.front();
    todo.pop();
    for (const auto& nb : net.neighbors(k))
      if (!seen[nb.bus]) {
        seen[nb.bus] = true;
        todo.push(nb.bus);
      }
  }
  for (int k = 0; k < net.num_buses(); ++k)
    if (!seen[k])
      throw ParseError(bus_rows[k], "bus " + std::to_string(net.buses()[k].id) +
                                        " is disconnected from the network");
  const auto issues = validate(net);
  if (!issues.empty()) throw InputError("invalid case: " + issues.front());
  return net;
}

Network load_case(const std::filesystem::path& path) {
  return parse_case(text::read_file(path));
}

std::string serialize_case(const Network& net) {
  std::ostringstream os;
  os.precision(17);
  const double base = net.base_mva();
  os << "[baseMVA]\n" << base << "\n\n[bus]\n# id Pd Qd Vmin Vmax\n";
  for (const auto& b : net.buses())
    os << b.id << ' ' << b.p_load * base << ' ' << b.q_load * base << ' ' << b.v_min
       << ' ' << b.v_max << '\n';
  os << "\n[gen]\n# bus Pmin Pmax Qmin Qmax\n";
  for (const auto& g : net.generators())
    os << g.bus << ' ' << g.p_min * base << ' ' << g.p_max * base << ' '
       << g.q_min * base << ' ' << g.q_max * base << '\n';
  os << "\n[branch]\n# from to r x angle_limit_deg\n";
  for (const auto& l : net.lines()) {
    const Complex z = 1.0 / l.y;
    os << l.from << ' ' << l.to << ' ' << z.real() << ' ' << z.imag() << ' '
       << l.theta_max * 180.0 / std::numbers::pi << '\n';
  }
  os << "\n[gencost]\n# bus c2 c1 c0\n";
  for (const auto& g : net.generators())
    os << g.bus << ' ' << g.cost.c2 << ' ' << g.cost.c1 << ' ' << g.cost.c0 << '\n';
  return os.str();
}

Profile::Profile(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_)
    if (!std::isfinite(v) || v < 0) throw InputError("profile values must be finite and >= 0");
}

double Profile::at_slot(int t) const {
  if (t < 1 || t > size())
    throw InputError("profile slot " + std::to_string(t) + " outside 1.." +
                     std::to_string(size()));
  return values_[t - 1];
}

Profile parse_profile_csv(std::string_view text) {
  const auto rows = text::parse_csv(text, {"slot", "value"});
  std::vector<double> values;
  for (const auto& r : rows) {
    const double slot = text::parse_double(r.fields[0], r.line);
    if (slot != static_cast<double>(values.size() + 1))
      throw ParseError(r.line, "expected slot " + std::to_string(values.size() + 1));
    const double v = text::parse_double(r.fields[1], r.line);
    if (!(v >= 0)) throw ParseError(r.line, "profile value must be >= 0");
    values.push_back(v);
  }
  if (values.empty()) throw InputError("profile has no rows");
  return Profile(std::move(values));
}

Profile load_profile(const std::filesystem::path& path) {
  return parse_profile_csv(text::read_file(path));
}

std::string serialize_profile_csv(const Profile& profile) {
  std::ostringstream os;
  os.precision(17);
  os << "slot,value\n";
  for (int t = 1; t <= profile.size(); ++t) os << t << ',' << profile.at_slot(t) << '\n';
  return os.str();
}

std::vector<double> scale_load(double base, const Profile& profile, int slots) {
  if (profile.size() != slots)
    throw InputError("profile length " + std::to_string(profile.size()) +
                     " does not match horizon " + std::to_string(slots));
  double sum = 0.0;
  for (double v : profile.values()) sum += v;
  if (!(sum > 0)) throw InputError("load profile sums to zero");
  std::vector<double> out(slots);
  for (int t = 0; t < slots; ++t) out[t] = profile.values()[t] * base * slots / sum;
  return out;
}

}  // namespace evmpc
