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

#pragma once

// Lindblad dynamics: Liouvillians, exact and trajectory evolution, and the
// effective non-hermitian generator that controls coherence decay.

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "scarlab/algebra.hpp"
#include "scarlab/core.hpp"
#include "scarlab/linalg.hpp"
#include "scarlab/models.hpp"

namespace scarlab {

/// Working basis: a list of computational basis indices, or the full space.
struct WorkingBasis {
    HilbertSpec spec;
    std::vector<Index> indices;  // empty means full space
    std::optional<int> magnetization;

    bool full() const { return indices.empty(); }
    Index dim() const { return full() ? spec.dim() : static_cast<Index>(indices.size()); }

    static WorkingBasis whole(const HilbertSpec& spec) { return {spec, {}, std::nullopt}; }
    static WorkingBasis sector(const HilbertSpec& spec, int magnetization) {
        auto part = sector_partition(spec);
        return {spec, part.find(magnetization).indices, magnetization};
    }

    SparseMatrix restrict_operator(const SparseOperator& op) const {
        if (full()) return op.matrix();
        return project_to_sector(op, Sector{*magnetization, indices});
    }

    DenseVector restrict_vector(const DenseVector& v, double tol = 1e-12) const {
        if (v.size() != spec.dim()) throw std::invalid_argument("restrict_vector: wrong dimension");
        if (full()) return v;
        DenseVector out(dim());
        double inside = 0.0;
        for (Index i = 0; i < dim(); ++i) {
            out(i) = v(indices[static_cast<size_t>(i)]);
            inside += std::norm(out(i));
        }
        if (std::abs(v.squaredNorm() - inside) > tol) throw std::invalid_argument("restrict_vector: state leaves the sector");
        return out;
    }

    DenseVector expand_vector(const DenseVector& v) const {
        if (full()) return v;
        DenseVector out = DenseVector::Zero(spec.dim());
        for (Index i = 0; i < dim(); ++i) out(indices[static_cast<size_t>(i)]) = v(i);
        return out;
    }
};

/// Magnetization of a state if it lies in one sector.
inline std::optional<int> state_magnetization(const HilbertSpec& spec, const DenseVector& v, double tol = 1e-12) {
    std::optional<int> m;
    for (Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) <= tol) continue;
        int mi = basis_magnetization(spec, i);
        if (m && *m != mi) return std::nullopt;
        m = mi;
    }
    return m;
}

/// The Lindbladian rho -> H_eff rho + rho H_eff^dagger + sum_j gamma_j l_j rho l_j
/// with H_eff = -i H - (1/2) sum_j gamma_j l_j^2, on a working basis.
class LiouvillianAction {
   public:
    LiouvillianAction(const LindbladModel& model, WorkingBasis basis) : basis_(std::move(basis)) {
        h_ = basis_.restrict_operator(model.hamiltonian());
        const Index n = basis_.dim();
        SparseMatrix k(n, n);
        for (const auto& [g, rate] : model.jumps()) {
            if (rate == 0.0) continue;
            SparseMatrix l = basis_.restrict_operator(g->op);
            k += 0.5 * rate * SparseMatrix(l * l);
            jumps_.emplace_back(std::move(l), rate);
        }
        heff_ = pruned(SparseMatrix(-kI * h_ - k.cast<Complex>()));
        heff_adj_ = SparseMatrix(heff_.adjoint());
    }

    const WorkingBasis& basis() const { return basis_; }
    Index dim() const { return basis_.dim(); }
    const SparseMatrix& hamiltonian() const { return h_; }
    const SparseMatrix& heff() const { return heff_; }
    const std::vector<std::pair<SparseMatrix, double>>& jumps() const { return jumps_; }

    DenseMatrix apply(const DenseMatrix& rho) const {
        DenseMatrix out = heff_ * rho;
        out += rho * heff_adj_;
        for (const auto& [l, rate] : jumps_) {
            DenseMatrix lr = l * rho;
            out += rate * (lr * l);
        }
        return out;
    }

    /// Column-stacked n^2 x n^2 matrix.
    SparseMatrix superop() const {
        const Index n = dim();
        SparseMatrix id = sparse_identity(n);
        SparseMatrix s = kron(id, heff_) + kron(SparseMatrix(heff_.conjugate()), id);
        for (const auto& [l, rate] : jumps_) s += rate * kron(SparseMatrix(l.transpose()), l);
        return pruned(s);
    }

   private:
    WorkingBasis basis_;
    SparseMatrix h_, heff_, heff_adj_;
    std::vector<std::pair<SparseMatrix, double>> jumps_;
};

inline SparseSuperOperator liouvillian(const LindbladModel& model) {
    return {model.spec(), LiouvillianAction(model, WorkingBasis::whole(model.spec())).superop()};
}

// ---------------------------------------------------------------------------
// Exact evolution

struct Plateau {
    double mean = 0.0;
    double spread = 0.0;  // max - min over the window
    double stderr_ = 0.0;  // trajectory runs only
};

struct EvolutionResult {
    std::vector<double> times;
    std::string method;  // "exact-expm", "exact-rk45" or "trajectories"
    WorkingBasis basis;
    std::vector<DenseMatrix> states;  // exact runs, in the working basis
    std::map<std::string, std::vector<double>> mean;     // trajectory runs
    std::map<std::string, std::vector<double>> stderr_;  // trajectory runs
    std::map<std::string, Plateau> plateaus;             // trajectory runs
    int n_traj = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

/// Working-basis dimension up to which exact evolution exponentiates the
/// superoperator; above it the vectorized equation is integrated.
inline constexpr Index kExpmMaxDim = 16;

inline void check_times(const std::vector<double>& times) {
    if (times.empty()) throw std::invalid_argument("time grid is empty");
    for (size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || times[i] < 0) throw std::invalid_argument("time grid must be finite and nonnegative");
        if (i > 0 && times[i] < times[i - 1]) throw std::invalid_argument("time grid must be non-decreasing");
    }
}

/// rho(t) = e^{t L} rho0 for every t in `times` (t may be negative for
/// the finite-difference checks). `times` must be monotone in |t| and share a sign.
inline std::vector<DenseMatrix> propagate(const LiouvillianAction& lv, const DenseMatrix& rho0, const std::vector<double>& times,
                                          const RkOptions& opt = {}, std::string* method = nullptr) {
    const Index n = lv.dim();
    if (rho0.rows() != n || rho0.cols() != n) throw std::invalid_argument("propagate: initial state has wrong shape");
    std::vector<DenseMatrix> out;
    if (n <= kExpmMaxDim) {
        if (method) *method = "exact-expm";
        // Step between consecutive times, reusing the propagator for repeated increments.
        const DenseMatrix s = DenseMatrix(lv.superop());
        std::map<long long, DenseMatrix> cache;  // keyed on the increment in units of 1e-12
        DenseVector v = vectorize(rho0);
        double prev = 0.0;
        for (double t : times) {
            double dt = t - prev;
            if (dt != 0.0) {
                const long long key = std::llround(dt * 1e12);
                auto it = cache.find(key);
                if (it == cache.end()) it = cache.emplace(key, expm(s * dt)).first;
                v = it->second * v;
            }
            prev = t;
            out.push_back(unvectorize(v, n));
        }
        return out;
    }
    if (method) *method = "exact-rk45";
    double sign = 1.0;
    std::vector<double> abs_times;
    for (double t : times) {
        if (t < 0) sign = -1.0;
        abs_times.push_back(std::abs(t));
    }
    std::vector<double> grid = abs_times;
    bool prepend = grid.front() != 0.0;
    if (prepend) grid.insert(grid.begin(), 0.0);
    auto f = [&](const DenseMatrix& r) -> DenseMatrix { return sign * lv.apply(r); };
    auto states = integrate_dopri5(f, rho0, grid, opt);
    if (prepend) states.erase(states.begin());
    return states;
}

/// Exact evolution of a density matrix given in the working basis. If a
/// sector is given, rho0 is n x n in that sector's basis.
inline EvolutionResult evolve_exact(const LindbladModel& model, const DenseMatrix& rho0, const std::vector<double>& times,
                                    std::optional<int> sector = std::nullopt, const RkOptions& opt = {}) {
    check_times(times);
    WorkingBasis basis = sector ? WorkingBasis::sector(model.spec(), *sector) : WorkingBasis::whole(model.spec());
    check_density_matrix(rho0, basis.dim());
    LiouvillianAction lv(model, basis);
    EvolutionResult r;
    r.times = times;
    r.basis = basis;
    r.states = propagate(lv, rho0, times, opt, &r.method);
    return r;
}

inline DenseMatrix pure_density(const DenseVector& v) { return v * v.adjoint(); }

inline std::vector<double> expectation_series(const EvolutionResult& r, const SparseOperator& op) {
    if (r.states.empty()) throw std::invalid_argument("expectation_series: result carries no states");
    SparseMatrix o = r.basis.restrict_operator(op);
    std::vector<double> out;
    for (const auto& rho : r.states) out.push_back((o * rho).trace().real());
    return out;
}

/// F(t) = <psi0| rho(t) |psi0>, psi0 given on the full space.
inline std::vector<double> fidelity_series(const EvolutionResult& r, const DenseVector& psi0) {
    if (r.method == "trajectories") return r.mean.at("fidelity");
    DenseVector v = r.basis.restrict_vector(psi0);
    std::vector<double> out;
    for (const auto& rho : r.states) out.push_back(v.dot(rho * v).real());
    return out;
}

/// Mean over the final 10% of a series (at least one point), with max-min spread.
inline Plateau plateau(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("plateau: empty series");
    size_t window = std::max<size_t>(1, values.size() / 10);
    Plateau p;
    double lo = values.back(), hi = values.back();
    for (size_t i = values.size() - window; i < values.size(); ++i) {
        p.mean += values[i];
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
    }
    p.mean /= static_cast<double>(window);
    p.spread = hi - lo;
    return p;
}

// ---------------------------------------------------------------------------
// Quantum trajectories

struct TrajectoryOptions {
    int n_traj = 500;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    int threads = 1;
    std::optional<int> sector;
};

/// First-order unraveling with hermitian jumps. Each step either applies jump
/// j with probability gamma_j dt <l_j^2>, or the no-jump propagator
/// e^{H_eff dt} followed by renormalization. Records fidelity with psi0 and
/// the expectation of each named observable at the grid times, which must be
/// integer multiples of dt.
inline EvolutionResult evolve_trajectories(const LindbladModel& model, const DenseVector& psi0, const std::vector<double>& times,
                                           const std::vector<std::pair<std::string, SparseOperator>>& observables,
                                           const TrajectoryOptions& opt) {
    check_times(times);
    if (opt.n_traj < 2) throw std::invalid_argument("evolve_trajectories: need at least 2 trajectories");
    if (!(opt.dt > 0)) throw std::invalid_argument("evolve_trajectories: dt must be positive");
    if (std::abs(psi0.norm() - 1.0) > 1e-10) throw std::invalid_argument("evolve_trajectories: psi0 not normalized");
    WorkingBasis basis = opt.sector ? WorkingBasis::sector(model.spec(), *opt.sector) : WorkingBasis::whole(model.spec());
    LiouvillianAction lv(model, basis);
    const DenseVector v0 = basis.restrict_vector(psi0);

    std::vector<long> step_of;
    for (double t : times) {
        double s = t / opt.dt;
        long k = std::lround(s);
        if (std::abs(s - static_cast<double>(k)) > 1e-6) throw std::invalid_argument("evolve_trajectories: grid time not a multiple of dt");
        step_of.push_back(k);
    }

    EvolutionResult r;
    r.times = times;
    r.method = "trajectories";
    r.basis = basis;
    r.n_traj = opt.n_traj;
    r.seed = opt.seed;

    double worst = 0.0;
    std::vector<SparseMatrix> l2;
    for (const auto& [l, rate] : lv.jumps()) {
        SparseMatrix sq = l * l;
        worst = std::max(worst, rate * sparse_one_norm(sq));
        l2.push_back(std::move(sq));
    }
    worst = std::max(worst, sparse_one_norm(lv.hamiltonian()));
    if (worst * opt.dt > 0.05)
        r.warnings.push_back("dt * max(gamma ||l^2||, ||H||) = " + std::to_string(worst * opt.dt) + " exceeds 0.05");

    const DenseMatrix propagator = expm(DenseMatrix(lv.heff()) * opt.dt);
    std::vector<SparseMatrix> obs;
    std::vector<std::string> names = {"fidelity"};
    for (const auto& [name, op] : observables) {
        obs.push_back(basis.restrict_operator(op));
        names.push_back(name);
    }
    const size_t nt = times.size(), ns = names.size();
    std::vector<double> values(static_cast<size_t>(opt.n_traj) * nt * ns);

    auto run = [&](size_t traj) {
        auto rng = keyed_stream(opt.seed, traj);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        DenseVector psi = v0;
        long step = 0;
        std::vector<double> probs(lv.jumps().size());
        for (size_t ti = 0; ti < nt; ++ti) {
            for (; step < step_of[ti]; ++step) {
                double total = 0.0;
                for (size_t j = 0; j < l2.size(); ++j) {
                    probs[j] = lv.jumps()[j].second * opt.dt * psi.dot(l2[j] * psi).real();
                    total += probs[j];
                }
                if (total > 1.0) throw SolverError("evolve_trajectories: jump probability exceeds 1; reduce dt");
                double u = uniform(rng);
                if (u < total) {
                    size_t j = 0;
                    double acc = probs[0];
                    while (u >= acc && j + 1 < probs.size()) acc += probs[++j];
                    psi = lv.jumps()[j].first * psi;
                } else {
                    psi = propagator * psi;
                }
                psi /= psi.norm();
            }
            double* slot = &values[(traj * nt + ti) * ns];
            slot[0] = std::norm(v0.dot(psi));
            for (size_t o = 0; o < obs.size(); ++o) slot[o + 1] = psi.dot(obs[o] * psi).real();
        }
    };
    parallel_for(static_cast<size_t>(opt.n_traj), opt.threads, run);

    const double nd = opt.n_traj;
    const size_t window = std::max<size_t>(1, nt / 10);
    for (size_t o = 0; o < ns; ++o) {
        std::vector<double> m(nt, 0.0), se(nt, 0.0), traj_plateau(static_cast<size_t>(opt.n_traj), 0.0);
        for (size_t ti = 0; ti < nt; ++ti) {
            double s = 0.0, s2 = 0.0;
            for (size_t k = 0; k < static_cast<size_t>(opt.n_traj); ++k) {
                double x = values[(k * nt + ti) * ns + o];
                s += x;
                s2 += x * x;
                if (ti >= nt - window) traj_plateau[k] += x / static_cast<double>(window);
            }
            m[ti] = s / nd;
            se[ti] = std::sqrt(std::max(0.0, (s2 / nd - m[ti] * m[ti]) * nd / (nd - 1.0)) / nd);
        }
        Plateau p = plateau(m);
        double pm = 0.0, pv = 0.0;
        for (double x : traj_plateau) pm += x / nd;
        for (double x : traj_plateau) pv += (x - pm) * (x - pm) / (nd - 1.0);
        p.stderr_ = std::sqrt(pv / nd);
        r.mean[names[o]] = std::move(m);
        r.stderr_[names[o]] = std::move(se);
        r.plateaus[names[o]] = p;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Coherences

namespace detail {

inline void check_projector(const DenseMatrix& p, const char* name) {
    if ((p - p.adjoint()).norm() > 1e-10 || (p * p - p).norm() > 1e-10)
        throw std::invalid_argument(std::string("coherence: ") + name + " is not an orthogonal projector");
}

}  // namespace detail

/// ||Pi_s rho(t) Pi_th||^2 along exact evolution. Projectors and rho0 are in
/// the working basis (the sector basis when `sector` is set). Both projectors
/// must commute with every generator.
inline std::vector<double> coherence_norm_series(const LindbladModel& model, const DenseMatrix& rho0, const DenseMatrix& pi_s,
                                                 const DenseMatrix& pi_th, const std::vector<double>& times,
                                                 std::optional<int> sector = std::nullopt, const RkOptions& opt = {}) {
    WorkingBasis basis = sector ? WorkingBasis::sector(model.spec(), *sector) : WorkingBasis::whole(model.spec());
    detail::check_projector(pi_s, "Pi_s");
    detail::check_projector(pi_th, "Pi_th");
    if ((pi_s * pi_th).norm() > 1e-10) throw std::invalid_argument("coherence: projectors are not orthogonal");
    for (const auto& g : model.algebra.generators()) {
        DenseMatrix gm = DenseMatrix(basis.restrict_operator(g.op));
        double scale = std::max(1.0, gm.norm());
        if ((gm * pi_s - pi_s * gm).norm() > 1e-8 * scale || (gm * pi_th - pi_th * gm).norm() > 1e-8 * scale)
            throw std::invalid_argument("coherence: projector does not commute with generator '" + g.label + "'");
    }
    auto r = evolve_exact(model, rho0, times, sector, opt);
    std::vector<double> out;
    for (const auto& rho : r.states) out.push_back((pi_s * rho * pi_th).squaredNorm());
    return out;
}

/// H_eff = -i H1 - H2 / 2 acting on Pi_th rho Pi_s when psi is a singlet.
struct EffectivePair {
    SparseOperator h1;
    SparseOperator h2;
    std::map<std::string, double> epsilon;  // hamiltonian-role eigenvalues
    std::map<std::string, double> lambda;   // jump-role eigenvalues
    double verification_residual = 0.0;

    SparseOperator heff() const { return (-kI) * h1 - 0.5 * h2; }
};

inline EffectivePair effective_pair(const LindbladModel& model, const DenseVector& psi, std::uint64_t seed = 3) {
    auto report = singlet_check(model.algebra, psi);
    if (!report.passed) throw std::invalid_argument("effective_pair: state is not a singlet of the algebra");
    const HilbertSpec& s = model.spec();
    EffectivePair out{SparseOperator::zero(s), SparseOperator::zero(s), {}, {}, 0.0};
    auto id = SparseOperator::identity(s);
    for (const auto& g : model.algebra.generators()) {
        double ev = *report.eigenvalues.at(g.label);
        if (auto it = model.couplings.find(g.label); it != model.couplings.end()) {
            out.epsilon[g.label] = ev;
            out.h1 = out.h1 + it->second * (g.op - ev * id);
        }
        if (auto it = model.rates.find(g.label); it != model.rates.end()) {
            out.lambda[g.label] = ev;
            auto shifted = g.op - ev * id;
            out.h2 = out.h2 + it->second * (shifted * shifted);
        }
    }
    // L(Pi_th rho Pi_s) = H_eff Pi_th rho Pi_s on random rho.
    LiouvillianAction lv(model, WorkingBasis::whole(s));
    const Index D = s.dim();
    DenseMatrix pis = pure_density(psi);
    DenseMatrix pith = DenseMatrix::Identity(D, D) - pis;
    DenseMatrix heff = DenseMatrix(out.heff().matrix());
    auto rng = keyed_stream(seed, 0);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 10; ++trial) {
        DenseMatrix x(D, D);
        for (Index i = 0; i < x.size(); ++i) x.data()[i] = Complex(normal(rng), normal(rng));
        DenseMatrix rho = x * x.adjoint();
        rho /= rho.trace().real();
        DenseMatrix y = pith * rho * pis;
        double res = (lv.apply(y) - heff * y).norm();
        out.verification_residual = std::max(out.verification_residual, res);
    }
    if (out.verification_residual > 1e-10)
        throw SolverError("effective_pair: H_eff relation fails (residual " + std::to_string(out.verification_residual) + ")");
    return out;
}

struct RateCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool richardson = false;
};

/// Compares d/dt ||Pi_s rho(t) Pi_th||^2 (central difference, h = 1e-4, with
/// one Richardson step if needed) with -Tr[Y0^dag e^{t H_eff^dag} H2 e^{t H_eff} Y0],
/// Y0 = Pi_th rho0 Pi_s, Pi_s = |psi><psi|, Pi_th = 1 - Pi_s.
inline RateCheck coherence_rate_check(const LindbladModel& model, const DenseMatrix& rho0, const DenseVector& psi, double t) {
    const HilbertSpec& s = model.spec();
    const Index D = s.dim();
    check_density_matrix(rho0, D);
    auto pair = effective_pair(model, psi);
    DenseMatrix pis = pure_density(psi);
    DenseMatrix pith = DenseMatrix::Identity(D, D) - pis;
    DenseMatrix y0 = pith * rho0 * pis;
    DenseMatrix yt = expm(DenseMatrix(pair.heff().matrix()) * t) * y0;
    RateCheck out;
    out.rhs = -(yt.adjoint() * pair.h2.matrix() * yt).trace().real();

    LiouvillianAction lv(model, WorkingBasis::whole(s));
    RkOptions tight{1e-13, 1e-15, 1e-4, 1e-14, 50'000'000};
    auto coherence = [&](double tt) {
        DenseMatrix rho = propagate(lv, rho0, {tt}, tight).front();
        return (pis * rho * pith).squaredNorm();
    };
    auto central = [&](double h) { return (coherence(t + h) - coherence(t - h)) / (2.0 * h); };
    const double h = 1e-4;
    out.lhs = central(h);
    if (std::abs(out.lhs - out.rhs) >= 1e-6 * std::max(1.0, std::abs(out.rhs))) {
        out.lhs = (4.0 * central(h / 2) - out.lhs) / 3.0;
        out.richardson = true;
    }
    return out;
}

/// ||U^dag H2|_S U - 2 gamma H_Heis|| for the exchange-jump spin-1 chain with
/// PBC, where S is spanned by local states +/- (mapped to up/down) and U
/// rotates odd sites by pi about z.
inline double heisenberg_map_check(int L, double gamma) {
    if (L < 4 || L % 2 != 0) throw std::invalid_argument("heisenberg_map_check: L must be even and >= 4");
    if (L > 8) throw std::invalid_argument("heisenberg_map_check: L too large");
    const HilbertSpec s1(L, 3, Boundary::periodic);
    const HilbertSpec s12(L, 2, Boundary::periodic);
    SparseMatrix h2(s1.dim(), s1.dim());
    for (int j = 1; j <= L; ++j) {
        SparseMatrix l = detail::exchange(j, s1).matrix();
        h2 += gamma * SparseMatrix(l * l);
    }
    // Isometry W: |tau config> -> |spin-1 config>, up -> +, down -> -.
    std::vector<Triplet> wt;
    for (Index i = 0; i < s12.dim(); ++i) {
        auto dig = s12.digits(i);
        for (auto& d : dig) d = d == 0 ? 0 : 2;
        wt.emplace_back(s1.encode(dig), i, 1.0);
    }
    SparseMatrix w(s1.dim(), s12.dim());
    w.setFromTriplets(wt.begin(), wt.end());
    DenseMatrix restricted = DenseMatrix(SparseMatrix(w.adjoint()) * h2 * w);
    // The restriction must be exact: H2 leaves S invariant.
    DenseMatrix leak = DenseMatrix(h2 * w) - DenseMatrix(w) * restricted;
    if (leak.norm() > 1e-12) throw SolverError("heisenberg_map_check: subspace is not invariant");

    DenseMatrix rot = DenseMatrix::Zero(2, 2);
    rot(0, 0) = -kI;
    rot(1, 1) = kI;
    std::vector<SiteOp> odd;
    for (int j = 1; j <= L; j += 2) odd.push_back({j, rot});
    DenseMatrix u = embed(odd, s12).dense();
    DenseMatrix heis = DenseMatrix::Zero(s12.dim(), s12.dim());
    auto id = SparseOperator::identity(s12);
    for (int j = 1; j <= L; ++j) {
        SparseOperator dot = SparseOperator::zero(s12);
        for (auto k : {LocalKind::x, LocalKind::y, LocalKind::z})
            dot = dot + 0.25 * embed({{j, local_operator(k, 2)}, {j + 1, local_operator(k, 2)}}, s12);
        heis += (0.25 * id - dot).dense();
    }
    return (u.adjoint() * restricted * u - 2.0 * gamma * heis).norm();
}

// ---------------------------------------------------------------------------
// Short-time expansion around aqmbs states

struct ShortTimeReport {
    double first_numeric = 0.0;   // Tr[rho L(rho)]
    double second_numeric = 0.0;  // Tr[rho L^2(rho)]
    double l2_numeric = 0.0;      // mean over exchange bonds of <l_j^2>
    double l2_closed = 0.0;       // (4/L) cos^2(k/2), zero for singlets
    std::optional<double> first_closed, second_closed;          // exact finite-L forms
    std::optional<double> first_asymptotic, second_asymptotic;  // -8 pi^2 gt / L^2, -16 pi^2 g2t / L^2
    double observable_derivative = 0.0;  // Tr[O L(rho)]
    double observable_bound = 0.0;       // ||O|| (sum |g| ||[h,rho]|| + 1/2 sum gamma ||[l,[l,rho]]||)
    double observable_bound_closed = 0.0;
    double observable_bound_asymptotic = 0.0;
};

/// Short-time derivatives of the fidelity and of <O> for the initial state
/// `st` (a tower or aqmbs state). Closed forms use <l_j> = 0,
/// <l_j^2> = (4/L) cos^2(k/2) and <h_j h_l> = 0 (j != l) for the exchange family.
namespace detail {

/// ||[l,[l,|psi><psi|]]|| from vectors only: the operator is
/// |l^2 psi><psi| - 2 |l psi><l psi| + |psi><l^2 psi|.
inline double double_commutator_norm(const SparseOperator& l, const DenseVector& psi) {
    DenseVector a = l * psi;
    DenseVector b = l * a;
    const std::array<std::pair<const DenseVector*, const DenseVector*>, 3> terms = {{{&b, &psi}, {&a, &a}, {&psi, &b}}};
    const std::array<double, 3> c = {1.0, -2.0, 1.0};
    Complex sum = 0.0;
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 3; ++j)
            sum += c[i] * c[j] * terms[i].first->dot(*terms[j].first) * terms[j].second->dot(*terms[i].second);
    return std::sqrt(std::max(0.0, sum.real()));
}

}  // namespace detail

inline ShortTimeReport short_time_derivatives(const LindbladModel& model, const ScarStateSpec& st, const SparseOperator& observable) {
    using Kind = ScarStateSpec::Kind;
    if (st.kind != Kind::tower && st.kind != Kind::aqmbs) throw std::invalid_argument("short_time_derivatives: needs a tower or aqmbs state");
    if (!(st.spec == model.spec())) throw std::invalid_argument("short_time_derivatives: state and model live on different chains");
    const HilbertSpec& s = model.spec();
    const int L = s.L;
    const DenseVector psi = scar_state(st);
    auto m = state_magnetization(s, psi);
    WorkingBasis basis = (m && model.algebra.conserves_magnetization()) ? WorkingBasis::sector(s, *m) : WorkingBasis::whole(s);
    LiouvillianAction lv(model, basis);
    DenseVector v = basis.restrict_vector(psi);
    DenseMatrix rho = pure_density(v);
    DenseMatrix l1 = lv.apply(rho);
    ShortTimeReport out;
    out.first_numeric = (rho * l1).trace().real();
    out.second_numeric = (rho * lv.apply(l1)).trace().real();
    out.observable_derivative = (basis.restrict_operator(observable) * l1).trace().real();

    const bool singlet = st.kind == Kind::tower || st.n == L;
    const double k = st.k.value_or(default_momentum(L));
    out.l2_closed = singlet ? 0.0 : (4.0 / L) * std::pow(std::cos(k / 2), 2);

    double sum_gamma = 0.0, sum_g2 = 0.0, max_g = 0.0, max_gamma = 0.0, count = 0.0;
    bool exchange_jumps = false;
    double bound = 0.0, bound_closed = 0.0;
    double c_norm = 0.0;
    {
        const HilbertSpec two(2, s.local_dim, Boundary::open);
        Eigen::SelfAdjointEigenSolver<DenseMatrix> e(detail::exchange(1, two).dense(), Eigen::EigenvaluesOnly);
        c_norm = e.eigenvalues().cwiseAbs().maxCoeff();
    }
    const double cl = out.l2_closed;
    for (const auto& g : model.algebra.generators()) {
        DenseVector gv = g.op * psi;
        double mean = psi.dot(gv).real();
        double var = std::max(0.0, gv.squaredNorm() - mean * mean);
        if (auto it = model.couplings.find(g.label); it != model.couplings.end()) {
            bound += std::abs(it->second) * std::sqrt(2.0 * var);
            if (g.family == "exchange") {
                sum_g2 += it->second * it->second;
                max_g = std::max(max_g, std::abs(it->second));
                bound_closed += std::abs(it->second) * std::sqrt(2.0 * cl);
            }
        }
        if (auto it = model.rates.find(g.label); it != model.rates.end()) {
            bound += 0.5 * it->second * detail::double_commutator_norm(g.op, psi);
            if (g.family == "exchange") {
                exchange_jumps = exchange_jumps || it->second != 0.0;
                sum_gamma += it->second;
                max_gamma = std::max(max_gamma, it->second);
                bound_closed += 0.5 * it->second * std::sqrt(2.0 * c_norm * c_norm * cl + 6.0 * cl * cl);
            }
        }
        if (g.family == "exchange") {
            out.l2_numeric += gv.squaredNorm();
            count += 1.0;
        }
    }
    if (count > 0) out.l2_numeric /= count;

    const double o_norm = spectral_norm(observable.matrix());
    out.observable_bound = o_norm * bound;
    out.observable_bound_closed = o_norm * bound_closed;
    const double sl = std::sqrt(static_cast<double>(L));
    out.observable_bound_asymptotic =
        o_norm * (4.0 * kPi / sl * max_g + 2.0 * kPi * c_norm / sl * std::sqrt(1.0 + 24.0 * kPi * kPi / (c_norm * c_norm * L * L * L)) * max_gamma);

    // First order: only the dissipator acts. Second order closed form holds
    // when exchange terms are absent from the jumps.
    out.first_closed = -cl * sum_gamma;
    out.first_asymptotic = -8.0 * kPi * kPi / (L * L) * (sum_gamma / L);
    if (!exchange_jumps) {
        out.second_closed = -2.0 * cl * sum_g2;
        out.second_asymptotic = -16.0 * kPi * kPi / (L * L) * (sum_g2 / L);
    }
    if (singlet) {
        out.first_asymptotic = 0.0;
        if (out.second_asymptotic) out.second_asymptotic = 0.0;
    }
    return out;
}

}  // namespace scarlab
