#include <gtest/gtest.h>

#include <numeric>

#include "fqmps/model/observables.hpp"
#include "fqmps/oracle/constrained_ed.hpp"
#include "fqmps/oracle/dense.hpp"
#include "fqmps/oracle/free_fermions.hpp"
#include "fqmps/solvers/dmrg.hpp"

using namespace fqmps;

namespace {

ModelParams chain(int L, int N, double V, int q_max) {
  ModelParams p;
  p.L = L;
  p.N = N;
  p.V = V;
  p.q_max = q_max;
  return p;
}

Mps<double> from_ed(const oracle::ConstrainedBasis& b, const Eigen::VectorXd& v, int q_max) {
  return mps_from_dense<double>(oracle::embed_in_q_space(b, v, q_max),
                                std::vector<std::size_t>(std::size_t(b.N()), std::size_t(q_max)));
}

}  // namespace

TEST(Leakage, ConfigurationInsideAndOutside) {
  const auto p = chain(12, 6, 0.0, 4);
  EXPECT_NEAR(leakage(product_state<double>({1, 2, 2, 2, 2, 2}, 4), p), 0.0, 1e-14);
  EXPECT_NEAR(leakage(product_state<double>({1, 2, 2, 2, 2, 4}, 4), p), 1.0, 1e-14);
}

TEST(Leakage, TruncatedRepresentationStillUsesExactProjector) {
  auto p = chain(12, 4, 0.0, 3);
  p.projector_rep = ProjectorRep::truncated;
  // x = (3, 6, 9, 12): allowed, although each prefix exceeds n + q_max - 1.
  EXPECT_NEAR(leakage(product_state<double>({3, 3, 3, 3}, 3), p), 0.0, 1e-14);
}

TEST(Leakage, NonNegativeOnRandomStates) {
  const auto p = chain(8, 4, 0.0, 5);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double l = leakage(random_mps<cplx>(4, 5, 6, seed), p);
    EXPECT_GE(l, -1e-12);
    EXPECT_LE(l, 1.0 + 1e-12);
  }
}

TEST(InterparticleProfile, ProductStates) {
  EXPECT_EQ(interparticle_profile(product_state<double>({1, 2, 2, 2}, 4)), (std::vector<double>{1, 2, 2, 2}));
  EXPECT_EQ(interparticle_profile(product_state<cplx>({1, 1, 1}, 3)), (std::vector<double>{1, 1, 1}));
}

TEST(OccupationProfile, DomainWallAndCdw) {
  const auto p = chain(10, 5, 0.0, 4);
  const auto dw = occupation_profile(product_state<double>({1, 1, 1, 1, 1}, 4), p);
  const auto cdw = occupation_profile(product_state<double>({1, 2, 2, 2, 2}, 4), p);
  for (int x = 1; x <= 10; ++x) {
    EXPECT_NEAR(dw[std::size_t(x - 1)], x <= 5 ? 1.0 : 0.0, 1e-14);
    EXPECT_NEAR(cdw[std::size_t(x - 1)], x % 2 == 1 ? 1.0 : 0.0, 1e-14);
  }
}

TEST(OccupationProfile, SweepMatchesNaiveAndEd) {
  const auto p = chain(9, 4, 1.3, 6);
  oracle::ConstrainedBasis b(p.L, p.N);
  const auto gs = oracle::constrained_ed_ground(b, p.t, p.V);
  const auto psi = from_ed(b, gs.state, p.q_max);
  const auto fast = occupation_profile(psi, p);
  const auto naive = occupation_profile_naive(psi, p);
  const auto ed = oracle::ed_occupations(b, gs.state);
  for (std::size_t x = 0; x < fast.size(); ++x) {
    EXPECT_NEAR(fast[x], naive[x], 1e-12) << x;
    EXPECT_NEAR(fast[x], ed[x], 1e-10) << x;
  }
  EXPECT_NEAR(std::accumulate(fast.begin(), fast.end(), 0.0), 4.0, 1e-10);
}

TEST(OccupationProfile, ComplexStateMatchesNaive) {
  const auto p = chain(11, 4, 0.0, 8);
  oracle::ConstrainedBasis b(p.L, p.N);
  const auto v = oracle::constrained_ed_evolve(b, 1.0, 0.5, oracle::ed_domain_wall(b), 1.5);
  const auto psi = mps_from_dense<cplx>(oracle::embed_in_q_space(b, v, 8), std::vector<std::size_t>(4, 8));
  const auto fast = occupation_profile(psi, p);
  const auto naive = occupation_profile_naive(psi, p);
  const auto ed = oracle::ed_occupations(b, v);
  for (std::size_t x = 0; x < fast.size(); ++x) {
    EXPECT_NEAR(fast[x], naive[x], 1e-12);
    EXPECT_NEAR(fast[x], ed[x], 1e-10);
  }
}

TEST(OccupationProfile, HoleModeIsComplement) {
  const auto p = chain(10, 4, 2.0, 7);
  oracle::ConstrainedBasis bp(p.L, p.N);
  const auto gp = oracle::constrained_ed_ground(bp, p.t, p.V);
  const auto np = occupation_profile(from_ed(bp, gp.state, p.q_max), p);
  auto h = hole_params(p).params;
  h.q_max = 5;
  oracle::ConstrainedBasis bh(h.L, h.N);
  const auto gh = oracle::constrained_ed_ground(h);
  const auto nh = occupation_profile(from_ed(bh, gh.state, h.q_max), h);
  for (std::size_t x = 0; x < np.size(); ++x) EXPECT_NEAR(nh[x], 1.0 - np[x], 1e-9) << x;
}

TEST(OccupationProfile, FreeGroundStateMatchesCorrelationMatrix) {
  const auto p = chain(12, 6, 0.0, 7);
  DmrgConfig cfg;
  cfg.bond_schedule = {32, 64};
  auto r = dmrg_run(assemble_hamiltonian(p).mpo,
                    product_state<double>(uniform_configuration(12, 6), 7), cfg);
  const auto n = occupation_profile(r.state, p);
  const auto c = oracle::correlation_matrix(12, 6, 0.0, oracle::FreeInitial::ground);
  for (int x = 0; x < 12; ++x) EXPECT_NEAR(n[std::size_t(x)], c(x, x).real(), 1e-6) << x;
}

TEST(OccupationProfile, LengthMismatchThrows) {
  EXPECT_THROW(occupation_profile(product_state<double>({1, 2}, 3), chain(6, 3, 0.0, 3)), DimensionError);
}

TEST(ParticleEntropyBound, Values) {
  EXPECT_NEAR(particle_entropy_bound(4, 2), std::log(6.0), 1e-14);
  EXPECT_EQ(particle_entropy_bound(7, 0), 0.0);
  EXPECT_NEAR(particle_entropy_bound(20, 10), 12.126791314602455, 1e-12);
  EXPECT_NEAR(particle_entropy_bound(50, 25), 32.47055650581199, 1e-11);
  EXPECT_THROW(particle_entropy_bound(3, 4), DomainError);
}

TEST(ExactQEntropy, MatchesConvergedDmrgProfile) {
  const auto p = chain(12, 6, 0.0, 7);
  oracle::ConstrainedBasis b(p.L, p.N);
  const auto gs = oracle::constrained_ed_ground(b, p.t, p.V);
  const auto dense = oracle::embed_in_q_space(b, gs.state, p.q_max);
  DmrgConfig cfg;
  cfg.bond_schedule = {64, 400};
  auto r = dmrg_run(assemble_hamiltonian(p).mpo, product_state<double>(uniform_configuration(12, 6), 7), cfg);
  const auto s = entropy_profile(r.state);
  for (int n = 1; n < 6; ++n) EXPECT_NEAR(s.values[std::size_t(n - 1)], oracle::exact_q_entropy(dense, 6, 7, n), 1e-6) << n;
}
