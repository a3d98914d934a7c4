#include <doctest.h>

#include "evmpc/error.hpp"
#include "evmpc/fleet.hpp"

using namespace evmpc;

namespace {

Pev make(int id, int t_a, int t_d) {
  Pev p;
  p.id = id;
  p.station = 1;
  p.t_a = t_a;
  p.t_d = t_d;
  return p;
}

}  // namespace

TEST_CASE("initial_demand") {
  CHECK(initial_demand(make(1, 1, 24)) == doctest::Approx(80.0));
  Pev full = make(1, 1, 24);
  full.soc0 = 1.0;
  CHECK(initial_demand(full) == 0.0);
  Pev half = make(1, 1, 24);
  half.capacity_kwh = 50;
  half.soc0 = 0.5;
  CHECK(initial_demand(half) == doctest::Approx(25.0));
}

TEST_CASE("active_set and horizon") {
  FleetState fleet(24, 0.5);
  CHECK(fleet.active_set(1).empty());
  CHECK(fleet.horizon(7) == 7);

  fleet.admit(make(1, 3, 10));
  CHECK(fleet.active_set(2).empty());
  const auto at5 = fleet.active_set(5);
  REQUIRE(at5.size() == 1);
  CHECK(at5[0]->id == 1);
  CHECK(fleet.active_set(11).empty());

  fleet.admit(make(2, 4, 5));
  fleet.admit(make(3, 4, 9));
  fleet.admit(make(4, 6, 12));
  CHECK(fleet.horizon(4) == 10);
  CHECK(fleet.horizon(10) == 12);
  CHECK(fleet.horizon(12) == 12);

  // fully charged before departure drops out
  Pev quick = make(5, 1, 24);
  quick.capacity_kwh = 5;
  quick.soc0 = 0.1;
  fleet.admit(quick);
  fleet.apply_charge(5, 10);
  CHECK(fleet.remaining(5) == 0.0);
  for (const Pev* p : fleet.active_set(1)) CHECK(p->id != 5);
  CHECK(fleet.delivered(5) == doctest::Approx(4.5));
}

TEST_CASE("apply_charge") {
  FleetState fleet(24, 0.5);
  fleet.admit(make(1, 1, 24));
  fleet.apply_charge(1, 0.0);
  CHECK(fleet.remaining(1) == 80.0);
  fleet.apply_charge(1, 10.0);
  CHECK(fleet.remaining(1) == doctest::Approx(75.5));

  Pev small = make(2, 1, 24);
  small.capacity_kwh = 4.5;
  small.soc0 = 0.0;
  fleet.admit(small);
  fleet.apply_charge(2, 10.0);
  CHECK(fleet.remaining(2) == 0.0);

  CHECK_THROWS_AS(fleet.apply_charge(1, -1.0), InputError);
  CHECK_THROWS_AS(fleet.apply_charge(1, 25.0), InputError);
  CHECK_THROWS_AS(fleet.apply_charge(2, 1.0), InputError);
  CHECK_THROWS_AS(fleet.apply_charge(99, 1.0), InputError);
  CHECK_THROWS_AS(fleet.admit(make(1, 1, 2)), InputError);
}

TEST_CASE("check_admissible") {
  // 0.9 * 20 * 0.5 = 9 kWh per slot
  CHECK(check_admissible(make(1, 1, 9), 0.5));   // 81 >= 80
  CHECK_FALSE(check_admissible(make(1, 1, 8), 0.5));  // 72 < 80
  Pev zero = make(1, 5, 5);
  zero.soc0 = 1.0;
  CHECK(check_admissible(zero, 0.5));
}

TEST_CASE("validate_pev") {
  CHECK_NOTHROW(validate_pev(make(1, 1, 24), 24));
  CHECK_THROWS_AS(validate_pev(make(1, 5, 4), 24), InputError);
  CHECK_THROWS_AS(validate_pev(make(1, 1, 25), 24), InputError);
  Pev stay = make(1, 2, 10);
  stay.max_stay = 4;
  CHECK_THROWS_AS(validate_pev(stay, 24), InputError);
  Pev eff = make(1, 1, 2);
  eff.u_h = 0;
  CHECK_THROWS_AS(validate_pev(eff, 24), InputError);
}

TEST_CASE("roster csv round-trip") {
  std::vector<Pev> roster{make(1, 3, 24), make(7, 5, 20)};
  roster[1].station = 2;
  roster[1].u_h = 0.95;
  const auto back = parse_roster_csv(serialize_roster_csv(roster));
  REQUIRE(back.size() == 2);
  CHECK(back[1].id == 7);
  CHECK(back[1].station == 2);
  CHECK(back[1].t_a == 5);
  CHECK(back[1].u_h == 0.95);
  CHECK_THROWS_AS(parse_roster_csv("id,station\n1,2\n"), ParseError);
  CHECK_THROWS_AS(
      parse_roster_csv("id,station,arrival_slot,departure_slot,capacity_kwh,soc0,pmax_kw,uh\n"
                       "1,1,1,24,100,0.2,20,0.9\n1,1,1,24,100,0.2,20,0.9\n"),
      ParseError);
}
