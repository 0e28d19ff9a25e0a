#include <gtest/gtest.h>

#include "common.hpp"

using namespace plvoi;

namespace {

bool has(const std::vector<Violation>& vs, Violation::Kind k) {
  for (const auto& v : vs)
    if (v.kind == k) return true;
  return false;
}

}  // namespace

TEST(Validate, FixturesAreClean) {
  for (const char* f : {"fig1.pl", "fig2.pl", "fig2_per_person.pl"}) {
    auto vs = validate_theory(parse_theory(test::read_fixture(f)));
    EXPECT_TRUE(vs.empty()) << f << ": " << (vs.empty() ? "" : vs[0].message);
  }
}

TEST(Validate, CyclicNegationIsRejected) {
  auto vs = validate_theory(parse_theory(test::read_fixture("cyclic_negation.pl")));
  EXPECT_TRUE(has(vs, Violation::Kind::non_stratified));
  EXPECT_THROW(load_theory(test::read_fixture("cyclic_negation.pl")), Error);
}

TEST(Validate, NegationThroughDifferentInstancesIsStratified) {
  // Negative dependency between instances of one predicate, without a cycle.
  auto vs = validate_theory(parse_theory("0.5::p(1).\np(2) :- not p(1).\np(3) :- not p(2).\n"));
  EXPECT_TRUE(vs.empty());
}

TEST(Validate, AggregateCycleIsRejected) {
  auto vs = validate_theory(parse_theory(
      "0.5::s(1).\n"
      "s(2) :- findall(X, s(X), L), length(L, N), N > 0.\n"));
  EXPECT_TRUE(has(vs, Violation::Kind::non_stratified));
}

TEST(Validate, OverlappingObservables) {
  Theory t = parse_theory(test::read_fixture("fig2.pl") + "observable(tb(2,_), 1).\nobservable(tb(2,1), 1).\n");
  auto vs = validate_theory(t);
  EXPECT_TRUE(has(vs, Violation::Kind::overlapping_observables));
}

TEST(Validate, UnknownObservable) {
  auto vs = validate_theory(parse_theory("0.5::a.\nobservable(b, 1).\n"));
  EXPECT_TRUE(has(vs, Violation::Kind::unknown_observable));
}

TEST(Validate, RangeRestriction) {
  EXPECT_TRUE(has(validate_theory(parse_theory("0.3::x_ray(X,0).")), Violation::Kind::not_range_restricted));
  EXPECT_TRUE(has(validate_theory(parse_theory("p(X) :- not q(X).")), Violation::Kind::not_range_restricted));
  EXPECT_TRUE(has(validate_theory(parse_theory("q(1).\np :- q(X), X > Y.")), Violation::Kind::not_range_restricted));
  EXPECT_TRUE(has(validate_theory(parse_theory("q(1).\np(_) :- q(1).")), Violation::Kind::not_range_restricted));
  EXPECT_TRUE(validate_theory(parse_theory("0.3::x_ray(X,0) :- person(X).\nperson(1).")).empty());
}

TEST(Validate, CountVariableOnlyInComparisons) {
  auto vs = validate_theory(parse_theory("q(1).\np(N) :- findall(X, q(X), L), length(L, N)."));
  EXPECT_TRUE(has(vs, Violation::Kind::unsupported_builtin));
}
