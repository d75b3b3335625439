// Copyright 2026 The scarlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "scarlab/scarlab.hpp"

namespace scarlab {
namespace {

std::map<std::string, double> params_for(const std::string& id) {
    std::map<std::string, double> p;
    double v = 0.6;
    for (const auto& n : model_parameters(id)) {
        p[n] = v;
        v += 0.27;
    }
    return p;
}

LindbladModel catalog(const std::string& id, int L, Boundary b = Boundary::open) { return build_model(id, L, b, params_for(id)); }

LindbladModel fig1_model(int L) { return build_model("isolated-2", L, Boundary::open, {{"J", 0.5}, {"D", 1.2}, {"gamma", 1.0}}); }

double min_eigenvalue(const DenseMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

std::vector<double> grid(double t_max, int n) {
    std::vector<double> t;
    for (int i = 0; i <= n; ++i) t.push_back(t_max * i / n);
    return t;
}

// ---------------------------------------------------------------------------
// Liouvillian construction

TEST(Liouvillian, MatchesDenseMasterEquation) {
    std::mt19937_64 rng(21);
    for (const auto& id : catalog_ids()) {
        auto m = catalog(id, 3);
        LiouvillianAction lv(m, WorkingBasis::whole(m.spec()));
        std::vector<oracle::Matrix> ls;
        std::vector<double> rates;
        for (const auto& [g, rate] : m.jumps()) {
            ls.push_back(g->op.dense());
            rates.push_back(rate);
        }
        oracle::Matrix h = m.hamiltonian().dense();
        auto super = liouvillian(m);
        for (int trial = 0; trial < 3; ++trial) {
            oracle::Matrix rho = oracle::random_density(m.spec().dim(), rng);
            oracle::Matrix expect = oracle::lindblad_rhs(h, ls, rates, rho);
            EXPECT_LT((lv.apply(rho) - expect).norm(), 1e-11) << id;
            EXPECT_LT((super.apply(rho) - expect).norm(), 1e-11) << id;
        }
    }
}

TEST(Liouvillian, ZeroCouplingsGiveZero) {
    auto m = build_model("u1", 3, Boundary::open, {{"J", 0.0}, {"h", 0.0}, {"gamma", 0.0}});
    EXPECT_EQ(liouvillian(m).matrix().nonZeros(), 0);
}

TEST(Liouvillian, SectorRestrictionAgreesWithFullSpace) {
    auto m = catalog("tower-2", 3);
    auto b = WorkingBasis::sector(m.spec(), -1);
    LiouvillianAction full(m, WorkingBasis::whole(m.spec())), sec(m, b);
    std::mt19937_64 rng(2);
    DenseMatrix rho = oracle::random_density(b.dim(), rng);
    DenseMatrix big = DenseMatrix::Zero(27, 27);
    for (Index i = 0; i < b.dim(); ++i)
        for (Index j = 0; j < b.dim(); ++j) big(b.indices[i], b.indices[j]) = rho(i, j);
    DenseMatrix lb = full.apply(big), ls = sec.apply(rho);
    for (Index i = 0; i < b.dim(); ++i)
        for (Index j = 0; j < b.dim(); ++j) EXPECT_LT(std::abs(lb(b.indices[i], b.indices[j]) - ls(i, j)), 1e-13);
}

// ---------------------------------------------------------------------------
// Exact evolution

TEST(ExactEvolution, InitialTimeReturnsInput) {
    auto m = fig1_model(4);
    std::mt19937_64 rng(1);
    DenseMatrix rho0 = oracle::random_density(16, rng);
    auto r = evolve_exact(m, rho0, {0.0, 0.3});
    EXPECT_EQ(r.states.front(), rho0);
    EXPECT_THROW(evolve_exact(m, rho0, {0.0, 0.3, 0.2}), std::invalid_argument);
}

TEST(ExactEvolution, PreservesStatePropertiesAcrossCatalog) {
    std::mt19937_64 rng(8);
    for (const auto& id : catalog_ids()) {
        for (int L : {3, 4}) {
            if (model_local_dim(id) == 3 && L == 4) continue;
            auto m = catalog(id, L);
            DenseMatrix rho0 = oracle::random_density(m.spec().dim(), rng);
            auto c = commutant_basis(m.algebra);
            auto r = evolve_exact(m, rho0, grid(3.0, 6));
            for (const auto& rho : r.states) {
                EXPECT_LT(std::abs(rho.trace() - 1.0), 1e-8) << id;
                EXPECT_LT((rho - rho.adjoint()).norm(), 1e-8) << id;
                EXPECT_GT(min_eigenvalue(rho), -1e-7) << id;
                for (const auto& q : c.operators) {
                    Complex q0 = (q.dense() * rho0).trace();
                    EXPECT_LT(std::abs((q.dense() * rho).trace() - q0), 1e-8) << id;
                }
            }
        }
    }
}

TEST(ExactEvolution, ExpmAndIntegratorAgree) {
    auto m = fig1_model(4);
    std::mt19937_64 rng(14);
    DenseMatrix rho0 = oracle::random_density(16, rng);
    LiouvillianAction lv(m, WorkingBasis::whole(m.spec()));
    std::string method;
    auto a = propagate(lv, rho0, {0.0, 0.7, 1.5}, {}, &method);
    EXPECT_EQ(method, "exact-expm");
    RkOptions tight{1e-12, 1e-14, 1e-4, 1e-14, 50'000'000};
    auto f = [&](const DenseMatrix& y) -> DenseMatrix { return lv.apply(y); };
    auto b = integrate_dopri5(f, rho0, {0.0, 0.7, 1.5}, tight);
    EXPECT_LT((a[2] - b[2]).norm(), 1e-9);
}

TEST(ExactEvolution, StationaryStatesAreFixedPoints) {
    std::mt19937_64 rng(31);
    for (const auto& id : catalog_ids()) {
        auto m = catalog(id, 3);
        auto d = irrep_decomposition(m.algebra, commutant_basis(m.algebra));
        LiouvillianAction lv(m, WorkingBasis::whole(m.spec()));
        for (int trial = 0; trial < 20; ++trial) {
            DenseMatrix rho0 = oracle::random_density(m.spec().dim(), rng);
            DenseMatrix ss = stationary_state(d, rho0);
            EXPECT_LT(lv.apply(ss).norm(), 1e-8) << id;
        }
    }
}

TEST(ExactEvolution, IsolatedScarPlateau) {
    const int L = 4;
    auto m = fig1_model(L);
    DenseVector psi = product_state(m.spec(), "ud");
    auto r = evolve_exact(m, pure_density(psi), {0.0, 150.0, 300.0});
    auto f = fidelity_series(r, psi);
    auto z = expectation_series(r, embed_site(L / 2, "z", m.spec()));
    EXPECT_NEAR(f.back(), 1.0 / 14.0, 1e-6);
    EXPECT_NEAR(z.back(), 0.0, 1e-6);
}

TEST(ExactEvolution, SectorViolationIsRejected) {
    auto m = catalog("tower-1", 3);
    DenseVector psi = product_state(m.spec(), "+0-");
    EXPECT_THROW(WorkingBasis::sector(m.spec(), 1).restrict_vector(psi), std::invalid_argument);
    EXPECT_THROW(evolve_exact(m, pure_density(psi), {0.0, 1.0}, 1), std::invalid_argument);
    DenseVector mixed = (product_state(m.spec(), "+0-") + product_state(m.spec(), "++-")) / std::sqrt(2.0);
    EXPECT_THROW(WorkingBasis::sector(m.spec(), 0).restrict_vector(mixed), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Trajectories

TEST(Trajectories, NoDissipationIsUnitary) {
    auto m = build_model("u1", 4, Boundary::open, {{"J", 0.8}, {"h", 0.3}, {"gamma", 0.0}});
    DenseVector psi = product_state(m.spec(), "uudd");
    std::vector<double> ts = {0.0, 0.5, 1.0, 2.0};
    TrajectoryOptions opt;
    opt.n_traj = 2;
    opt.dt = 1e-3;
    auto r = evolve_trajectories(m, psi, ts, {}, opt);
    oracle::Matrix h = m.hamiltonian().dense();
    for (size_t i = 0; i < ts.size(); ++i) {
        oracle::Vector v = (Complex(0, -ts[i]) * h).exp() * psi;
        EXPECT_NEAR(r.mean.at("fidelity")[i], std::norm(psi.dot(v)), 1e-6);
        EXPECT_NEAR(r.stderr_.at("fidelity")[i], 0.0, 1e-12);
    }
}

TEST(Trajectories, ConvergeToExactEvolution) {
    auto m = fig1_model(4);
    DenseVector psi = product_state(m.spec(), "uudd");
    std::vector<double> ts = {0.0, 0.5, 1.0, 1.5};
    auto z2 = embed_site(2, "z", m.spec());
    auto exact = expectation_series(evolve_exact(m, pure_density(psi), ts), z2);
    std::vector<double> mean_err;
    for (int n : {100, 400, 1600}) {
        TrajectoryOptions opt;
        opt.n_traj = n;
        opt.dt = 1e-3;
        opt.seed = 77;
        auto r = evolve_trajectories(m, psi, ts, {{"z2", z2}}, opt);
        double se = 0.0;
        for (size_t i = 1; i < ts.size(); ++i) {
            EXPECT_LT(std::abs(r.mean.at("z2")[i] - exact[i]), 4.0 * r.stderr_.at("z2")[i] + 2e-3) << n;
            se += r.stderr_.at("z2")[i];
        }
        mean_err.push_back(se);
    }
    // Standard error halves when n_traj quadruples.
    EXPECT_NEAR(mean_err[0] / mean_err[1], 2.0, 0.4);
    EXPECT_NEAR(mean_err[1] / mean_err[2], 2.0, 0.4);
}

TEST(Trajectories, ReproducibleAcrossThreadCounts) {
    auto m = fig1_model(4);
    DenseVector psi = product_state(m.spec(), "ud");
    TrajectoryOptions opt;
    opt.n_traj = 30;
    opt.dt = 1e-2;
    opt.seed = 5;
    auto a = evolve_trajectories(m, psi, {0.0, 1.0, 2.0}, {}, opt);
    opt.threads = 3;
    auto b = evolve_trajectories(m, psi, {0.0, 1.0, 2.0}, {}, opt);
    EXPECT_EQ(a.mean.at("fidelity"), b.mean.at("fidelity"));
    EXPECT_EQ(a.stderr_.at("fidelity"), b.stderr_.at("fidelity"));
}

TEST(Trajectories, Errors) {
    auto m = fig1_model(4);
    DenseVector psi = product_state(m.spec(), "ud");
    TrajectoryOptions opt;
    opt.n_traj = 2;
    opt.dt = 0.5;
    EXPECT_THROW(evolve_trajectories(m, psi, {0.0, 1.0}, {}, opt), SolverError);
    opt.dt = 0.3;
    EXPECT_THROW(evolve_trajectories(m, psi, {0.0, 1.0}, {}, opt), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Coherences

TEST(Coherence, BlockDiagonalInitialStateStaysZero) {
    auto m = catalog("isolated-1", 3);
    DenseVector up = product_state(m.spec(), "u");
    DenseMatrix ps = pure_density(up), pt = DenseMatrix::Identity(8, 8) - ps;
    DenseMatrix rho0 = 0.5 * ps + 0.5 * pt / 7.0;
    for (double v : coherence_norm_series(m, rho0, ps, pt, {0.0, 1.0, 2.0})) EXPECT_LT(v, 1e-20);
    DenseMatrix bad = pure_density(product_state(m.spec(), "udu"));
    EXPECT_THROW(coherence_norm_series(m, rho0, bad, DenseMatrix::Identity(8, 8) - bad, {0.0}), std::invalid_argument);
}

TEST(Coherence, DephasingEffectiveOperator) {
    auto m = build_model("isolated-1", 4, Boundary::open, {{"J", 0.4}, {"D", 0.9}, {"h", 0.2}, {"gamma", 0.7}});
    DenseVector up = product_state(m.spec(), "u");
    auto pair = effective_pair(m, up);
    SparseOperator expect = SparseOperator::zero(m.spec());
    for (int j = 1; j <= 4; ++j) expect = expect + (4.0 * 0.7) * embed_site(j, "Pdown", m.spec());
    EXPECT_LT((pair.h2 - expect).norm(), 1e-12);
    EXPECT_LT(pair.verification_residual, 1e-10);
    EXPECT_THROW(effective_pair(m, product_state(m.spec(), "ud")), std::invalid_argument);

    auto m2 = fig1_model(4);
    auto pair2 = effective_pair(m2, up);
    DenseVector down = product_state(m2.spec(), "d");
    EXPECT_NEAR(down.dot(pair2.h2 * down).real(), 4.0 * 4 * 1.0, 1e-12);
}

TEST(Coherence, RateEquationAgainstExactEvolution) {
    auto m = fig1_model(4);
    DenseVector up = product_state(m.spec(), "u");
    std::mt19937_64 rng(40);
    for (double t : {0.0, 0.5, 2.0}) {
        DenseMatrix rho0 = oracle::random_density(16, rng);
        auto r = coherence_rate_check(m, rho0, up, t);
        EXPECT_LT(std::abs(r.lhs - r.rhs), 1e-6 * std::max(1.0, std::abs(r.rhs))) << t;
        EXPECT_LT(r.rhs, 0.0);
    }
    DenseMatrix ps = pure_density(up);
    DenseMatrix block = 0.5 * ps + 0.5 * pure_density(product_state(m.spec(), "ud"));
    auto zero = coherence_rate_check(m, block, up, 0.5);
    EXPECT_NEAR(zero.lhs, 0.0, 1e-10);
    EXPECT_NEAR(zero.rhs, 0.0, 1e-14);
    auto closed = build_model("isolated-2", 4, Boundary::open, {{"J", 0.5}, {"D", 1.2}, {"gamma", 0.0}});
    std::mt19937_64 rng2(41);
    auto free = coherence_rate_check(closed, oracle::random_density(16, rng2), up, 0.5);
    EXPECT_NEAR(free.lhs, 0.0, 1e-8);
    EXPECT_NEAR(free.rhs, 0.0, 1e-14);
}

TEST(Coherence, HeisenbergMapping) {
    EXPECT_LT(heisenberg_map_check(4, 1.0), 1e-10);
    EXPECT_LT(heisenberg_map_check(6, 0.6), 1e-10);
    EXPECT_EQ(heisenberg_map_check(4, 0.0), 0.0);
    EXPECT_THROW(heisenberg_map_check(5, 1.0), std::invalid_argument);
}

TEST(Coherence, ExactDecayLawSmallRing) {
    const int L = 4;
    const double gamma = 1.3;
    auto m = build_model("tower-2", L, Boundary::periodic, {{"D", 0.2}, {"D2", 0.8}, {"h", 1.0}, {"gamma", gamma}});
    const int n0 = L / 2, M = 0;
    DenseVector tower = scar_state({ScarStateSpec::Kind::tower, m.spec(), n0, std::nullopt});
    DenseVector aq = scar_state({ScarStateSpec::Kind::aqmbs, m.spec(), n0, std::nullopt});
    auto b = WorkingBasis::sector(m.spec(), M);
    DenseVector v0 = b.restrict_vector((tower + aq) / std::sqrt(2.0));
    DenseMatrix ps = pure_density(b.restrict_vector(tower));
    DenseMatrix pw = DenseMatrix::Identity(b.dim(), b.dim()) - ps;
    std::vector<double> ts = grid(3.0, 12);
    RkOptions tight{1e-12, 1e-14, 1e-4, 1e-14, 50'000'000};
    auto c = coherence_norm_series(m, pure_density(v0), ps, pw, ts, M, tight);
    for (size_t i = 0; i < ts.size(); ++i)
        EXPECT_NEAR(c[i], 0.25 * std::exp(-2.0 * gamma * ts[i] * 2.0 * std::pow(std::sin(kPi / L), 2)), 1e-8);
}

// ---------------------------------------------------------------------------
// Short-time expansion

TEST(ShortTime, ClosedFormsMatchTraces) {
    for (int L : {4, 5, 6}) {
        auto t1 = build_model("tower-1", L, Boundary::open, {{"J", 2.0}, {"D", 0.2}, {"h", 0.3}, {"gamma", 1.0}});
        auto t2 = build_model("tower-2", L, Boundary::open, {{"D", 0.2}, {"D2", 0.8}, {"h", 1.0}, {"gamma", 4.0}});
        auto o = embed_site(L / 2, "z", t1.spec());
        for (int n = 1; n < L; ++n) {
            auto r1 = short_time_derivatives(t1, {ScarStateSpec::Kind::aqmbs, t1.spec(), n, std::nullopt}, o);
            auto r2 = short_time_derivatives(t2, {ScarStateSpec::Kind::aqmbs, t2.spec(), n, std::nullopt}, o);
            EXPECT_NEAR(r1.l2_numeric, r1.l2_closed, 1e-10);
            EXPECT_NEAR(r1.first_numeric, *r1.first_closed, 1e-10);
            ASSERT_TRUE(r1.second_closed.has_value());
            EXPECT_NEAR(r1.second_numeric, *r1.second_closed, 1e-10 * std::abs(*r1.second_closed));
            EXPECT_NEAR(r2.first_numeric, *r2.first_closed, 1e-10 * std::abs(*r2.first_closed));
            EXPECT_FALSE(r2.second_closed.has_value());
            EXPECT_LE(std::abs(r1.observable_derivative), r1.observable_bound + 1e-12);
            EXPECT_LE(std::abs(r2.observable_derivative), r2.observable_bound + 1e-12);
        }
    }
}

TEST(ShortTime, TowerStatesAreStationaryToFirstOrder) {
    auto t2 = build_model("tower-2", 4, Boundary::open, {{"D", 0.2}, {"D2", 0.8}, {"h", 1.0}, {"gamma", 4.0}});
    auto r = short_time_derivatives(t2, {ScarStateSpec::Kind::tower, t2.spec(), 2, std::nullopt}, embed_site(2, "z", t2.spec()));
    EXPECT_NEAR(r.first_numeric, 0.0, 1e-12);
    EXPECT_NEAR(r.second_numeric, 0.0, 1e-12);
    EXPECT_NEAR(r.observable_bound, 0.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Brownian averages

BondAlgebra qubit_pair_algebra() {
    HilbertSpec s(2, 2);
    return BondAlgebra(s, {{"x_1", "x", embed_site(1, "x", s), Role::hamiltonian},
                           {"z_1", "z", embed_site(1, "z", s), Role::hamiltonian},
                           {"zz_1", "zz", embed({{1, local_operator("z", 2)}, {2, local_operator("z", 2)}}, s), Role::jump}});
}

TEST(Brownian, EffectiveGeneratorIsHalfTheSuperHamiltonian) {
    auto m = catalog("z2", 3);
    // Role::both generators take k and gamma; gamma = 0 so each enters once.
    auto spec = uniform_brownian(m.algebra, 0.5, 0.0);
    SparseMatrix diff = d_eff(spec).matrix() - 0.5 * super_hamiltonian(m.algebra).matrix();
    EXPECT_LT(diff.norm(), 1e-12);
    auto q = qubit_pair_algebra();
    auto s2 = uniform_brownian(q, 0.5, 1.0);
    EXPECT_LT((d_eff(s2).matrix() - 0.5 * super_hamiltonian(q).matrix()).norm(), 1e-12);
}

TEST(Brownian, IdentityIsInKernel) {
    auto m = catalog("u1", 3);
    auto spec = uniform_brownian(m.algebra, 0.3, 0.8);
    DenseVector one = vectorize(DenseMatrix::Identity(8, 8));
    EXPECT_LT((d_eff(spec).matrix() * one).norm(), 1e-14);
}

TEST(Brownian, EffectiveGeneratorIsPositive) {
    for (const auto& id : catalog_ids()) {
        auto m = catalog(id, model_local_dim(id) == 2 ? 3 : 2);
        auto spec = uniform_brownian(m.algebra, 0.4, 0.9);
        if (!m.algebra.conserves_magnetization() && m.spec().dim() > 8) continue;
        SparseMatrix deff = d_eff(spec).matrix();
        for (const auto& idx : detail::operator_blocks(m.algebra)) {
            if (idx.size() > 4096) continue;
            Eigen::SelfAdjointEigenSolver<DenseMatrix> es(DenseMatrix(restrict_matrix(deff, idx)), Eigen::EigenvaluesOnly);
            EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10) << id;
        }
    }
    auto m = catalog("z2", 2);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(DenseMatrix(d_eff(uniform_brownian(m.algebra, 0.4, 0.9)).matrix()), Eigen::EigenvaluesOnly);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(Brownian, AutocorrelationEndpoints) {
    for (const auto& id : catalog_ids()) {
        auto m = catalog(id, 3);
        auto spec = uniform_brownian(m.algebra, 0.4, 0.9);
        auto o = embed_site(2, "z", m.spec());
        auto c = commutant_basis(m.algebra);
        auto a = averaged_autocorrelation(spec, o, {0.0, 1.0});
        double d = static_cast<double>(m.spec().dim());
        EXPECT_NEAR(a.values[0], (o.dense() * o.dense()).trace().real() / d, 1e-12) << id;
        EXPECT_NEAR(a.stationary, mazur_bound(c, o), 1e-8) << id;
        EXPECT_LE(a.values[1], a.values[0] + 1e-12);
    }
    auto u1 = catalog("u1", 3);
    auto sz = site_sum("z", u1.spec());
    auto a = averaged_autocorrelation(uniform_brownian(u1.algebra, 0.4, 0.9), sz, {0.0, 0.5, 5.0});
    for (double v : a.values) EXPECT_NEAR(v, 3.0, 1e-10);
}

TEST(Brownian, DeterministicCurveMatchesDenseOracle) {
    auto q = qubit_pair_algebra();
    BrownianSpec spec{q, {{"x_1", 0.4}, {"z_1", 0.3}}, {{"zz_1", 0.5}}};
    auto o = embed_site(1, "z", q.spec());
    std::vector<double> ts = {0.0, 0.3, 1.0, 2.5};
    auto a = averaged_autocorrelation(spec, o, ts);
    std::vector<oracle::Matrix> hs = {q.find("x_1").op.dense(), q.find("z_1").op.dense()};
    std::vector<oracle::Matrix> ls = {q.find("zz_1").op.dense()};
    oracle::Matrix gen = oracle::brownian_generator(hs, {0.4, 0.3}, ls, {0.5});
    oracle::Vector vo = oracle::vec(o.dense());
    for (size_t i = 0; i < ts.size(); ++i) {
        double expect = (vo.adjoint() * (-ts[i] * gen).exp() * vo)(0).real() / 4.0;
        EXPECT_NEAR(a.values[i], expect, 1e-10);
    }
}

TEST(Brownian, JumpOnlyCircuitIsDeterministic) {
    HilbertSpec s(2, 2);
    BondAlgebra a(s, {{"x_1", "x", embed_site(1, "x", s), Role::jump}, {"zz_1", "zz", embed({{1, local_operator("z", 2)}, {2, local_operator("z", 2)}}, s), Role::jump}});
    BrownianSpec spec{a, {}, {{"x_1", 0.6}, {"zz_1", 0.2}}};
    spec.n_samples = 3;
    auto o = embed_site(1, "z", s);
    std::vector<double> ts = {0.0, 0.5, 1.0};
    auto det = averaged_autocorrelation(spec, o, ts);
    auto smp = sample_circuit_autocorrelation(spec, o, ts);
    for (size_t i = 0; i < ts.size(); ++i) {
        EXPECT_NEAR(smp.mean[i], det.values[i], 1e-10);
        EXPECT_NEAR(smp.stderr_[i], 0.0, 1e-14);
    }
}

TEST(Brownian, CircuitBiasIsFirstOrderInEpsilon) {
    auto q = qubit_pair_algebra();
    std::vector<oracle::Matrix> hs = {q.find("x_1").op.dense(), q.find("z_1").op.dense()};
    std::vector<oracle::Matrix> ls = {q.find("zz_1").op.dense()};
    std::vector<double> k = {0.4, 0.3}, g = {0.5};
    oracle::Vector vo = oracle::vec(embed_site(1, "x", q.spec()).dense());
    const double t = 1.0;
    oracle::Vector exact = (-t * oracle::brownian_generator(hs, k, ls, g)).exp() * vo;
    std::vector<double> err;
    for (double eps : {0.1, 0.05, 0.025}) {
        oracle::Matrix step = oracle::averaged_step(hs, k, ls, g, eps);
        oracle::Vector v = vo;
        for (int i = 0; i < static_cast<int>(std::lround(t / eps)); ++i) v = step * v;
        err.push_back((v - exact).norm());
    }
    EXPECT_NEAR(err[0] / err[1], 2.0, 0.3);
    EXPECT_NEAR(err[1] / err[2], 2.0, 0.3);
}

TEST(Brownian, SampledCircuitMatchesQuadratureAverage) {
    auto q = qubit_pair_algebra();
    BrownianSpec spec{q, {{"x_1", 0.4}, {"z_1", 0.3}}, {{"zz_1", 0.5}}};
    spec.epsilon = 0.05;
    spec.n_samples = 3000;
    spec.seed = 12;
    auto o = embed_site(1, "x", q.spec());
    std::vector<double> ts = {0.0, 0.25, 0.5, 1.0, 1.5};
    auto smp = sample_circuit_autocorrelation(spec, o, ts);
    oracle::Matrix step = oracle::averaged_step({q.find("x_1").op.dense(), q.find("z_1").op.dense()}, {0.4, 0.3},
                                                {q.find("zz_1").op.dense()}, {0.5}, spec.epsilon);
    oracle::Vector vo = oracle::vec(o.dense());
    oracle::Vector v = vo;
    int done = 0;
    for (size_t i = 0; i < ts.size(); ++i) {
        int target = static_cast<int>(std::lround(ts[i] / spec.epsilon));
        for (; done < target; ++done) v = step * v;
        double expect = (vo.adjoint() * v)(0).real() / 4.0;
        EXPECT_LE(std::abs(smp.mean[i] - expect), 3.0 * smp.stderr_[i] + 1e-12) << ts[i];
    }
}

TEST(Brownian, InvalidSpecs) {
    auto m = catalog("u1", 3);
    BrownianSpec missing{m.algebra, {}, {}};
    EXPECT_THROW(missing.validate(), std::invalid_argument);
    auto spec = uniform_brownian(m.algebra, 0.2, 0.2);
    spec.epsilon = 0.0;
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec = uniform_brownian(m.algebra, 0.2, 0.2);
    EXPECT_THROW(sample_circuit_autocorrelation(spec, embed_site(1, "z", m.spec()), {0.0, 0.015}), std::invalid_argument);
}

}  // namespace
}  // namespace scarlab
