#include "evmpc/scenario.hpp"

#include "evmpc/error.hpp"
#include "evmpc/text.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

namespace evmpc {

std::vector<double> Scenario::load_factors() const {
  return scale_load(1.0, load_profile, slots);
}

void Scenario::validate() const {
  if (slots < 1) throw InputError("horizon must have at least one slot");
  if (!(dt > 0) || !std::isfinite(dt)) throw InputError("dt_hours must be positive");
  if (load_profile.size() != slots)
    throw InputError("load profile has " + std::to_string(load_profile.size()) +
                     " slots, horizon has " + std::to_string(slots));
  if (price_profile.size() != slots)
    throw InputError("price profile has " + std::to_string(price_profile.size()) +
                     " slots, horizon has " + std::to_string(slots));
  const auto problems = evmpc::validate(network);
  if (!problems.empty()) throw InputError("network: " + problems.front());
  std::set<int> ids;
  for (const Pev& p : roster) {
    validate_pev(p, slots);
    if (!ids.insert(p.id).second) throw InputError("pev " + std::to_string(p.id) + " listed twice");
    if (!network.is_generator_bus(p.station))
      throw InputError("pev " + std::to_string(p.id) + ": station " + std::to_string(p.station) +
                       " is not a generator bus");
  }
}

std::string Scenario::fingerprint() const {
  std::ostringstream os;
  os << serialize_case(network) << '\n'
     << serialize_roster_csv(roster) << '\n'
     << serialize_profile_csv(load_profile) << '\n'
     << serialize_profile_csv(price_profile) << '\n'
     << slots << ' ';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", dt);
  os << buf << ' ' << seed;
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void check_model(const ArrivalModel& m) {
  if (!(m.window_hi > m.window_lo)) throw InputError("arrival window is empty");
  if (!(m.sd_h > 0)) throw InputError("arrival sd must be positive");
}

}  // namespace

std::vector<double> sample_arrival_hours(std::uint64_t seed, int count, const ArrivalModel& m) {
  check_model(m);
  if (count < 0) throw InputError("arrival count must be >= 0");
  const boost::math::normal_distribution<double> nd(m.mean_h, m.sd_h);
  const double lo = boost::math::cdf(nd, m.window_lo);
  const double hi = boost::math::cdf(nd, m.window_hi);
  if (!(hi > lo)) throw InputError("arrival window carries no probability mass");
  std::mt19937_64 rng(seed);
  const double top = std::nextafter(m.window_hi, m.window_lo);
  std::vector<double> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    // 53 random bits, centred so u lies strictly inside (0, 1)
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    const double h = boost::math::quantile(nd, lo + u * (hi - lo));
    out.push_back(std::clamp(h, m.window_lo, top));
  }
  return out;
}

std::vector<int> sample_arrivals(std::uint64_t seed, int count, double dt, int slots,
                                 const ArrivalModel& m) {
  if (!(dt > 0)) throw InputError("dt must be positive");
  if (slots < 1) throw InputError("slots must be >= 1");
  std::vector<int> out;
  for (double h : sample_arrival_hours(seed, count, m)) {
    const int s = static_cast<int>(std::ceil((h - m.window_lo) / dt));
    out.push_back(std::clamp(s, 1, slots));
  }
  return out;
}

double truncated_mean(const ArrivalModel& m) {
  check_model(m);
  const boost::math::normal_distribution<double> z;
  const double a = (m.window_lo - m.mean_h) / m.sd_h;
  const double b = (m.window_hi - m.mean_h) / m.sd_h;
  const double mass = boost::math::cdf(z, b) - boost::math::cdf(z, a);
  return m.mean_h + m.sd_h * (boost::math::pdf(z, a) - boost::math::pdf(z, b)) / mass;
}

std::vector<Pev> build_fleet(std::uint64_t seed, const std::vector<std::pair<int, int>>& counts,
                             const FleetDefaults& d, int slots, double dt,
                             const ArrivalModel& arrivals) {
  int total = 0;
  for (const auto& [bus, n] : counts) {
    if (n < 0) throw InputError("station " + std::to_string(bus) + ": negative count");
    total += n;
  }
  const auto slots_in = sample_arrivals(seed, total, dt, slots, arrivals);
  const int depart = d.departure_slot > 0 ? d.departure_slot : slots;
  std::vector<Pev> roster;
  int id = 1;
  for (const auto& [bus, n] : counts)
    for (int i = 0; i < n; ++i, ++id) {
      Pev p;
      p.id = id;
      p.station = bus;
      p.t_a = std::min(slots_in[id - 1], depart);
      p.t_d = depart;
      p.capacity_kwh = d.capacity_kwh;
      p.soc0 = d.soc0;
      p.p_max_kw = d.p_max_kw;
      p.u_h = d.u_h;
      validate_pev(p, slots);
      if (!check_admissible(p, dt))
        throw InputError("pev " + std::to_string(id) + " cannot receive " +
                         std::to_string(initial_demand(p)) + " kWh between slots " +
                         std::to_string(p.t_a) + " and " + std::to_string(p.t_d));
      roster.push_back(p);
    }
  return roster;
}

std::vector<std::pair<int, int>> uniform_counts(const Network& network, int total) {
  if (total < 0) throw InputError("vehicle total must be >= 0");
  std::set<int> buses;
  for (const auto& g : network.generators()) buses.insert(g.bus);
  if (buses.empty()) throw InputError("network has no generator buses");
  const int n = static_cast<int>(buses.size());
  std::vector<std::pair<int, int>> out;
  int k = 0;
  for (int bus : buses) out.emplace_back(bus, total / n + (k++ < total % n ? 1 : 0));
  return out;
}

namespace {

namespace pt = boost::property_tree;

template <class T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  if (!tree.get_child_optional(key)) return fallback;
  try {
    return tree.get<T>(key);
  } catch (const pt::ptree_error&) {
    throw InputError("scenario key " + key + ": bad value '" + tree.get<std::string>(key) + "'");
  }
}

std::string require(const pt::ptree& tree, const std::string& key) {
  const auto v = tree.get_optional<std::string>(key);
  if (!v || text::trim(*v).empty()) throw InputError("scenario key " + key + " is required");
  return text::trim(*v);
}

// "1:7, 2:7, 3:6"
std::vector<std::pair<int, int>> parse_counts(const std::string& spec) {
  std::vector<std::pair<int, int>> out;
  std::string item;
  std::istringstream in(spec);
  while (std::getline(in, item, ',')) {
    item = text::trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw InputError("fleet.counts entry '" + item + "' is not bus:count");
    try {
      out.emplace_back(text::parse_int(text::trim(item.substr(0, colon)), 0),
                       text::parse_int(text::trim(item.substr(colon + 1)), 0));
    } catch (const ParseError&) {
      throw InputError("fleet.counts entry '" + item + "' is not bus:count");
    }
  }
  return out;
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed) {
  if (!std::filesystem::exists(path)) throw InputError("scenario file not found: " + path.string());
  pt::ptree ini;
  try {
    pt::read_ini(path.string(), ini);
  } catch (const pt::ini_parser_error& e) {
    throw InputError("scenario " + path.string() + ": " + e.message() + " (line " +
                     std::to_string(e.line()) + ")");
  }
  const auto dir = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : dir / q;
  };

  Scenario s;
  s.network = load_case(resolve(require(ini, "network.case")));
  s.slots = get(ini, "horizon.slots", 24);
  s.dt = get(ini, "horizon.dt_hours", 0.5);
  s.load_profile = load_profile(resolve(require(ini, "profiles.load")));
  s.price_profile = load_profile(resolve(require(ini, "profiles.price")));
  s.seed = seed ? *seed : get<std::uint64_t>(ini, "fleet.seed", 1);

  if (const auto roster = ini.get_optional<std::string>("fleet.roster");
      roster && !text::trim(*roster).empty()) {
    s.roster = parse_roster_csv(text::read_file(resolve(text::trim(*roster))));
  } else {
    FleetDefaults d;
    d.capacity_kwh = get(ini, "fleet.capacity_kwh", d.capacity_kwh);
    d.soc0 = get(ini, "fleet.soc0", d.soc0);
    d.u_h = get(ini, "fleet.uh", d.u_h);
    d.p_max_kw = get(ini, "fleet.pmax_kw", d.p_max_kw);
    d.departure_slot = get(ini, "fleet.departure_slot", d.departure_slot);
    ArrivalModel m;
    m.mean_h = get(ini, "fleet.arrival_mean_h", m.mean_h);
    m.sd_h = get(ini, "fleet.arrival_sd_h", m.sd_h);
    m.window_lo = get(ini, "fleet.arrival_from_h", m.window_lo);
    m.window_hi = get(ini, "fleet.arrival_to_h", m.window_hi);
    std::vector<std::pair<int, int>> counts;
    if (const auto c = ini.get_optional<std::string>("fleet.counts"))
      counts = parse_counts(*c);
    else
      counts = uniform_counts(s.network, get(ini, "fleet.total", 0));
    for (const auto& [bus, n] : counts)
      if (!s.network.is_generator_bus(bus))
        throw InputError("fleet.counts: bus " + std::to_string(bus) + " is not a generator bus");
    s.roster = build_fleet(s.seed, counts, d, s.slots, s.dt, m);
  }
  s.validate();
  return s;
}

}  // namespace evmpc
