#include <doctest.h>

#include "evmpc/error.hpp"
#include "evmpc/grid.hpp"
#include "evmpc/text.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace evmpc;

namespace {

const char* kTwoBus = R"(
[baseMVA]
100
[bus]
1 0 0 0.95 1.05
2 50 10 0.95 1.05
[gen]
1 0 100 -50 50
[branch]
1 2 0 0.5 0
[gencost]
1 0.01 10 0
)";

const char* kRing = R"(
[baseMVA]
100
[bus]
1 0 0 0.9 1.1
2 40 10 0.9 1.1
3 30 5 0.9 1.1
[gen]
1 0 200 -100 100
[branch]
1 2 0.01 0.1 0
2 3 0.01 0.1 20
3 1 0.01 0.1 0
[gencost]
1 0 20 0
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

int error_row(const std::string& text) {
  try {
    parse_case(text);
  } catch (const ParseError& e) {
    return e.row();
  }
  return -1;
}

}  // namespace

TEST_CASE("parse_case: two-bus admittance is 1/(r+jx)") {
  const Network net = parse_case(kTwoBus);
  REQUIRE(net.lines().size() == 1);
  CHECK(net.lines()[0].y.real() == doctest::Approx(0.0));
  CHECK(net.lines()[0].y.imag() == doctest::Approx(-2.0));
  CHECK(net.lines()[0].theta_max == doctest::Approx(std::numbers::pi / 6));
  CHECK(net.buses()[1].p_load == doctest::Approx(0.5));
  CHECK(net.buses()[1].q_load == doctest::Approx(0.1));
  CHECK(net.generators()[0].p_max == doctest::Approx(1.0));
  CHECK(net.generation_cost(net.generators()[0], 0.5) == doctest::Approx(0.01 * 2500 + 500));
}

TEST_CASE("parse_case: ring and bundled case9 structure") {
  const Network ring = parse_case(kRing);
  CHECK(ring.generators().size() == 1);
  CHECK(ring.lines().size() == 3);
  CHECK(ring.lines()[1].theta_max == doctest::Approx(20 * std::numbers::pi / 180));

  const Network nine = load_case("data/case9.txt");
  CHECK(nine.num_buses() == 9);
  CHECK(nine.generators().size() == 3);
  CHECK(nine.lines().size() == 9);
  CHECK(validate(nine).empty());
  CHECK(nine.is_generator_bus(2));
  CHECK_FALSE(nine.is_generator_bus(5));
}

TEST_CASE("neighbor map is symmetric and matches the line list") {
  const Network net = load_case("data/case9.txt");
  std::size_t total = 0;
  for (int k = 0; k < net.num_buses(); ++k) {
    for (const auto& nb : net.neighbors(k)) {
      ++total;
      const auto& back = net.neighbors(nb.bus);
      CHECK(std::any_of(back.begin(), back.end(), [&](const Neighbor& o) {
        return o.bus == k && o.line == nb.line;
      }));
    }
  }
  CHECK(total == 2 * net.lines().size());
}

TEST_CASE("parse_case errors carry row numbers") {
  const std::string base = kTwoBus;
  // Row 1 is the empty line opening the raw literal.
  CHECK(error_row(replace(base, "2 50 10 0.95 1.05", "2 50 10 0.95")) == 6);
  CHECK(error_row(replace(base, "2 50 10 0.95 1.05", "2 50 x 0.95 1.05")) == 6);
  CHECK(error_row(replace(base, "2 50 10 0.95 1.05", "2 50 10 1.2 1.05")) == 6);
  CHECK(error_row(replace(base, "1 0 100 -50 50", "1 200 100 -50 50")) == 8);
  CHECK(error_row(replace(base, "1 2 0 0.5 0\n", "1 2 0 0.5 0\n2 1 0 0.3 0\n")) == 11);
  CHECK(error_row(replace(base, "2 50 10 0.95 1.05\n", "2 50 10 0.95 1.05\n3 0 0 0.9 1.1\n")) ==
        7);
  // gencost on the wrong bus leaves the generator uncosted
  CHECK(error_row(replace(base, "1 0.01 10 0", "2 0.01 10 0")) == 8);
  CHECK_THROWS_AS(parse_case("[bus]\n1 0 0 0.9 1.1\n"), ParseError);
}

TEST_CASE("serialize_case round-trips") {
  const Network a = load_case("data/case9.txt");
  const Network b = parse_case(serialize_case(a));
  REQUIRE(b.num_buses() == a.num_buses());
  REQUIRE(b.lines().size() == a.lines().size());
  REQUIRE(b.generators().size() == a.generators().size());
  CHECK(b.base_mva() == a.base_mva());
  for (int k = 0; k < a.num_buses(); ++k) {
    CHECK(b.buses()[k].id == a.buses()[k].id);
    CHECK(b.buses()[k].p_load == doctest::Approx(a.buses()[k].p_load).epsilon(1e-14));
    CHECK(b.buses()[k].v_max == a.buses()[k].v_max);
  }
  for (std::size_t l = 0; l < a.lines().size(); ++l) {
    CHECK(std::abs(b.lines()[l].y - a.lines()[l].y) < 1e-12 * std::abs(a.lines()[l].y));
    CHECK(b.lines()[l].theta_max == doctest::Approx(a.lines()[l].theta_max).epsilon(1e-14));
  }
  for (std::size_t g = 0; g < a.generators().size(); ++g) {
    CHECK(b.generators()[g].p_max == doctest::Approx(a.generators()[g].p_max).epsilon(1e-14));
    CHECK(b.generators()[g].cost.c2 == a.generators()[g].cost.c2);
  }
}

TEST_CASE("validate reports violations without throwing") {
  const Network good = load_case("data/case9.txt");
  CHECK(validate(good).empty());

  auto buses = good.buses();
  buses[2].v_min = 1.2;
  const auto issues = validate(Network(100, buses, good.lines(), good.generators()));
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].find("bus 3") != std::string::npos);

  auto gens = good.generators();
  gens[0].bus = 42;
  CHECK(validate(Network(100, good.buses(), good.lines(), gens)).size() == 1);

  auto lines = good.lines();
  lines.erase(lines.begin() + 1);  // 4-5 gone; 5 still reaches 6
  CHECK(validate(Network(100, good.buses(), lines, good.generators())).empty());
  lines.erase(lines.begin() + 1);  // 5-6 gone: bus 5 isolated
  const auto disc = validate(Network(100, good.buses(), lines, good.generators()));
  REQUIRE(disc.size() == 1);
  CHECK(disc[0].find("bus 5") != std::string::npos);
}

TEST_CASE("scale_load") {
  CHECK(scale_load(10, Profile({3, 3, 3, 3}), 4) == std::vector<double>{10, 10, 10, 10});
  const auto two = scale_load(12, Profile({1, 2}), 2);
  CHECK(two[0] == doctest::Approx(8));
  CHECK(two[1] == doctest::Approx(16));
  CHECK(scale_load(0, Profile({1, 5}), 2) == std::vector<double>{0, 0});
  CHECK_THROWS_AS(scale_load(1, Profile({0, 0}), 2), InputError);
  CHECK_THROWS_AS(scale_load(1, Profile({1, 2}), 3), InputError);

  const Profile p({0.3, 1.7, 0.0, 2.2, 0.9});
  double sum = 0;
  for (double v : scale_load(7.5, p, 5)) sum += v;
  CHECK(sum == doctest::Approx(7.5 * 5));
}

TEST_CASE("profile csv") {
  const Profile p = parse_profile_csv("slot,value\n1,0.5\n2,1.5\n");
  CHECK(p.size() == 2);
  CHECK(p.at_slot(2) == 1.5);
  CHECK_THROWS_AS(p.at_slot(3), InputError);
  CHECK(parse_profile_csv(serialize_profile_csv(p)).values() == p.values());
  CHECK_THROWS_AS(parse_profile_csv("slot,value\n1,0.5\n3,1\n"), ParseError);
  CHECK_THROWS_AS(parse_profile_csv("slot,value\n1,-1\n"), ParseError);
  CHECK_THROWS_AS(parse_profile_csv("t,v\n1,1\n"), ParseError);
  CHECK_THROWS_AS(Profile({1.0, -0.1}), InputError);
}
