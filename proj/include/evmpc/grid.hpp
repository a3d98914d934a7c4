#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace evmpc {

using Complex = std::complex<double>;

// Electrical quantities are per-unit on the network's MVA base.
struct Bus {
  int id = 0;
  double p_load = 0.0;
  double q_load = 0.0;
  double v_min = 0.9;
  double v_max = 1.1;
};

struct Line {
  int from = 0;
  int to = 0;
  Complex y;  // series admittance
  double theta_max = 0.0;  // radians
};

// f(P) = c2 P^2 + c1 P + c0 with P in MW; money in the polynomial's units
// per hour.
struct CostPolynomial {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  double operator()(double p_mw) const { return (c2 * p_mw + c1) * p_mw + c0; }
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  CostPolynomial cost;
};

struct Neighbor {
  int bus;  // index into Network::buses()
  int line;
  Complex y;
};

/// Immutable network description. Construction indexes buses and builds the
/// neighbor map but does not check invariants; see validate().
class Network {
 public:
  Network() = default;
  Network(double base_mva, std::vector<Bus> buses, std::vector<Line> lines,
          std::vector<Generator> generators);

  double base_mva() const { return base_mva_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<Generator>& generators() const { return generators_; }
  int num_buses() const { return static_cast<int>(buses_.size()); }

  bool has_bus(int id) const;
  // Position of bus `id` in buses(); throws InputError when absent.
  int bus_index(int id) const;
  const std::vector<Neighbor>& neighbors(int index) const { return neighbors_.at(index); }

  // Index into generators() for the unit at bus `id`, or -1.
  int generator_at(int id) const;
  bool is_generator_bus(int id) const { return generator_at(id) >= 0; }

  // Generation cost in money per hour for output p (per-unit).
  double generation_cost(const Generator& g, double p_pu) const {
    return g.cost(p_pu * base_mva_);
  }

 private:
  double base_mva_ = 100.0;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<Generator> generators_;
  std::vector<int> index_by_id_;
  std::vector<std::vector<Neighbor>> neighbors_;
};

// Human-readable invariant violations; empty iff the network is valid.
std::vector<std::string> validate(const Network& network);

// Case file format (whitespace separated, `#` starts a comment):
//
//   [baseMVA]
//   100
//   [bus]      id Pd Qd Vmin Vmax
//   [gen]      bus Pmin Pmax Qmin Qmax
//   [branch]   from to r x angle_limit_deg [b [tap]]
//   [gencost]  bus c2 c1 c0
//
// MW/MVAr columns are converted to per-unit. An angle limit of 0 means
// "unlimited" and maps to kDefaultAngleLimit. Shunt susceptance and tap
// columns are accepted and ignored. Errors carry the file's line number.
Network parse_case(std::string_view text);
Network load_case(const std::filesystem::path& path);
std::string serialize_case(const Network& network);

inline constexpr double kDefaultAngleLimit = 0.5235987755982988;  // pi / 6

/// Per-slot series: load multipliers l(t) or prices (money per kWh).
class Profile {
 public:
  Profile() = default;
  explicit Profile(std::vector<double> values);

  int size() const { return static_cast<int>(values_.size()); }
  // 1-based slot access.
  double at_slot(int t) const;
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

// CSV with header `slot,value` and slots 1..T in order.
Profile parse_profile_csv(std::string_view text);
Profile load_profile(const std::filesystem::path& path);
std::string serialize_profile_csv(const Profile& profile);

// P(t) = l(t) * base * T / sum_t l(t) for t = 1..T.
std::vector<double> scale_load(double base, const Profile& profile, int slots);

}  // namespace evmpc
