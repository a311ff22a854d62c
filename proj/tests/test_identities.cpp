#include <gtest/gtest.h>

#include <chrono>

#include "qma/identities.hpp"

using namespace qma;

TEST(IdentitySuite, AllPassOnSmallRun) {
  const IdentityReport r = identity_suite(11, 50);
  for (const auto& x : r.results) EXPECT_TRUE(x.passed) << x.name << " n=" << x.n << " err=" << x.max_error;
  EXPECT_TRUE(r.all_passed());
  EXPECT_NE(r.find("cancellation", 3), nullptr);
  EXPECT_EQ(r.find("missing", 2), nullptr);
}

TEST(IdentitySuite, CanaryFailsFieldIdentitiesOnly) {
  const IdentityReport r = identity_suite(11, 5, true);
  for (int n : {2, 3}) {
    EXPECT_FALSE(r.find("s1_half_laplacian", n)->passed);
    EXPECT_FALSE(r.find("ddju_j_reality", n)->passed);
    EXPECT_TRUE(r.find("pf_squared_det", n)->passed);
    EXPECT_TRUE(r.find("gradient_energy", n)->passed);
  }
  EXPECT_FALSE(r.all_passed());
}

TEST(IdentitySuite, DeterministicAndIndependentOfOtherChecks) {
  const IdentityReport a = identity_suite(5, 10);
  const IdentityReport b = identity_suite(5, 10);
  ASSERT_EQ(a.results.size(), b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) EXPECT_EQ(a.results[i].max_error, b.results[i].max_error);
  const IdentityReport c = identity_suite(5, 10, false, {3});
  EXPECT_EQ(c.find("s_m_eigenvalues", 3)->max_error, a.find("s_m_eigenvalues", 3)->max_error);
}

TEST(IdentitySuite, RejectsEmptyRun) { EXPECT_THROW(identity_suite(1, 0), MalformedInput); }
