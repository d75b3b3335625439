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

// Lindbladian Brownian circuits. Hamiltonian couplings are redrawn every
// step eps from N(0, 2 k_a / eps); jump rates are fixed. The ensemble-averaged
// Heisenberg evolution is generated by
//   D_eff = 1/2 sum_l gamma_l [l,[l,.]] + sum_a k_a [h_a,[h_a,.]].

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "scarlab/algebra.hpp"
#include "scarlab/core.hpp"
#include "scarlab/linalg.hpp"

namespace scarlab {

struct BrownianSpec {
    BondAlgebra algebra;
    std::map<std::string, double> variances;  // k_a, hamiltonian-role labels
    std::map<std::string, double> rates;      // gamma_l, jump-role labels
    double epsilon = 1e-2;
    int n_samples = 2000;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const {
        if (!(epsilon > 0)) throw std::invalid_argument("BrownianSpec: epsilon must be positive");
        if (n_samples < 2) throw std::invalid_argument("BrownianSpec: need at least 2 samples");
        for (const auto& g : algebra.generators()) {
            if (acts_in_hamiltonian(g.role)) {
                auto it = variances.find(g.label);
                if (it == variances.end() || !(it->second > 0))
                    throw std::invalid_argument("BrownianSpec: variance for '" + g.label + "' must be given and positive");
            }
            if (acts_as_jump(g.role)) {
                auto it = rates.find(g.label);
                if (it == rates.end() || !(it->second >= 0))
                    throw std::invalid_argument("BrownianSpec: rate for '" + g.label + "' must be given and nonnegative");
            }
        }
        for (const auto& [label, v] : variances)
            if (!acts_in_hamiltonian(algebra.find(label).role)) throw std::invalid_argument("BrownianSpec: '" + label + "' is not a hamiltonian term");
        for (const auto& [label, v] : rates)
            if (!acts_as_jump(algebra.find(label).role)) throw std::invalid_argument("BrownianSpec: '" + label + "' is not a jump operator");
    }
};

/// Uniform variances and rates over the roles of every generator.
inline BrownianSpec uniform_brownian(const BondAlgebra& a, double k, double gamma) {
    BrownianSpec s{a, {}, {}};
    for (const auto& g : a.generators()) {
        if (acts_in_hamiltonian(g.role)) s.variances[g.label] = k;
        if (acts_as_jump(g.role)) s.rates[g.label] = gamma;
    }
    return s;
}

inline SparseSuperOperator d_eff(const BrownianSpec& spec) {
    spec.validate();
    const Index d2 = spec.algebra.spec().dim() * spec.algebra.spec().dim();
    SparseMatrix out(d2, d2);
    for (const auto& g : spec.algebra.generators()) {
        SparseMatrix ad = adjoint_superop(g.op).matrix();
        SparseMatrix ad2 = ad * ad;
        if (auto it = spec.variances.find(g.label); it != spec.variances.end()) out += it->second * ad2;
        if (auto it = spec.rates.find(g.label); it != spec.rates.end()) out += 0.5 * it->second * ad2;
    }
    return {spec.algebra.spec(), out};
}

namespace detail {

/// Operator-space blocks preserved by D_eff: pairs (M, M') of magnetization
/// sectors when every generator conserves magnetization, else one block.
inline std::vector<std::vector<Index>> operator_blocks(const BondAlgebra& a) {
    const HilbertSpec& s = a.spec();
    const Index D = s.dim();
    std::vector<std::vector<Index>> blocks;
    if (!a.conserves_magnetization()) {
        blocks.emplace_back(static_cast<size_t>(D * D));
        std::iota(blocks.back().begin(), blocks.back().end(), Index{0});
        return blocks;
    }
    auto part = sector_partition(s);
    for (const auto& col : part.sectors)
        for (const auto& row : part.sectors) {
            std::vector<Index> idx;
            for (Index j : col.indices)
                for (Index i : row.indices) idx.push_back(i + D * j);
            std::sort(idx.begin(), idx.end());
            blocks.push_back(std::move(idx));
        }
    return blocks;
}

}  // namespace detail

struct AutocorrelationSeries {
    std::vector<double> values;
    double stationary = 0.0;  // t -> infinity, from the kernel of D_eff
    Index kernel_dim = 0;     // kernel dimension within the blocks O touches
};

/// <O(t) O> = Tr[e^{-t D_eff}(O) O] / D by eigendecomposition of D_eff on
/// each operator block that O touches.
inline AutocorrelationSeries averaged_autocorrelation(const BrownianSpec& spec, const SparseOperator& o, const std::vector<double>& times,
                                                      double kernel_tol = 1e-10) {
    if (!o.hermitian()) throw std::invalid_argument("averaged_autocorrelation: observable must be hermitian");
    const HilbertSpec& s = spec.algebra.spec();
    if (!(o.spec() == s)) throw std::invalid_argument("averaged_autocorrelation: observable on wrong space");
    const double D = static_cast<double>(s.dim());
    const SparseMatrix deff = d_eff(spec).matrix();
    const DenseVector vo = vectorize(o.dense());

    AutocorrelationSeries out;
    out.values.assign(times.size(), 0.0);
    for (const auto& idx : detail::operator_blocks(spec.algebra)) {
        DenseVector ob(static_cast<Index>(idx.size()));
        for (size_t r = 0; r < idx.size(); ++r) ob(static_cast<Index>(r)) = vo(idx[r]);
        if (ob.norm() == 0.0) continue;
        if (idx.size() > 8192) throw std::invalid_argument("averaged_autocorrelation: operator block too large for dense eigensolve");
        Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(DenseMatrix(restrict_matrix(deff, idx)));
        DenseVector c = eig.eigenvectors().adjoint() * ob;
        const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
        for (Index m = 0; m < c.size(); ++m) {
            double w = std::norm(c(m)) / D;
            double ev = eig.eigenvalues()(m);
            if (ev <= kernel_tol * scale) {
                out.stationary += w;
                ++out.kernel_dim;
            }
            for (size_t ti = 0; ti < times.size(); ++ti) out.values[ti] += w * std::exp(-times[ti] * std::max(ev, 0.0));
        }
    }
    return out;
}

/// Dimension of the kernel of D_eff over the whole operator space.
inline Index d_eff_kernel_dim(const BrownianSpec& spec, double kernel_tol = 1e-10) {
    const SparseMatrix deff = d_eff(spec).matrix();
    Index k = 0;
    for (const auto& idx : detail::operator_blocks(spec.algebra)) {
        Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(DenseMatrix(restrict_matrix(deff, idx)), Eigen::EigenvaluesOnly);
        const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
        for (Index m = 0; m < eig.eigenvalues().size(); ++m)
            if (eig.eigenvalues()(m) <= kernel_tol * scale) ++k;
    }
    return k;
}

struct CircuitSeries {
    std::vector<double> mean;
    std::vector<double> stderr_;
    std::vector<std::string> warnings;
};

/// One circuit step X -> exp(eps L^dag_g) X with
/// L^dag_g(X) = i[H_g, X] - 1/2 sum_l gamma_l [l,[l,X]], H_g = sum_a g_a h_a.
inline DenseMatrix circuit_step(const std::vector<std::pair<const SparseMatrix*, double>>& terms,
                                const std::vector<std::pair<const SparseMatrix*, double>>& jumps, const DenseMatrix& x, double eps) {
    const Index D = x.rows();
    SparseMatrix h(D, D);
    double norm = 0.0;
    for (const auto& [op, g] : terms) {
        h += g * (*op);
        norm += 2.0 * std::abs(g) * sparse_one_norm(*op);
    }
    for (const auto& [l, rate] : jumps) norm += 2.0 * rate * std::pow(sparse_one_norm(*l), 2);
    auto apply = [&](const DenseVector& v) -> DenseVector {
        DenseMatrix m = unvectorize(v, D);
        DenseMatrix r = kI * (h * m - m * h);
        for (const auto& [l, rate] : jumps) {
            DenseMatrix c = (*l) * m - m * (*l);
            r -= 0.5 * rate * ((*l) * c - c * (*l));
        }
        return DenseVector(eps * vectorize(r));
    };
    return unvectorize(expmv(apply, vectorize(x), eps * norm), D);
}

/// Monte Carlo average of Tr[O(t) O] / D over circuit realizations. Output
/// times must be integer multiples of eps. Gaussian draws come from one
/// stream per (sample, step).
inline CircuitSeries sample_circuit_autocorrelation(const BrownianSpec& spec, const SparseOperator& o, const std::vector<double>& times) {
    spec.validate();
    if (!o.hermitian()) throw std::invalid_argument("sample_circuit_autocorrelation: observable must be hermitian");
    const HilbertSpec& s = spec.algebra.spec();
    const double eps = spec.epsilon;
    std::vector<long> step_of;
    for (size_t i = 0; i < times.size(); ++i) {
        double q = times[i] / eps;
        long k = std::lround(q);
        if (times[i] < 0 || std::abs(q - static_cast<double>(k)) > 1e-6)
            throw std::invalid_argument("sample_circuit_autocorrelation: times must be nonnegative multiples of epsilon");
        if (i > 0 && k < step_of.back()) throw std::invalid_argument("sample_circuit_autocorrelation: times must be non-decreasing");
        step_of.push_back(k);
    }
    std::vector<std::pair<const SparseMatrix*, double>> terms, jumps;
    std::vector<double> sigma;
    double typical = 0.0;
    for (const auto& g : spec.algebra.generators()) {
        if (auto it = spec.variances.find(g.label); it != spec.variances.end()) {
            terms.emplace_back(&g.op.matrix(), 0.0);
            sigma.push_back(std::sqrt(2.0 * it->second / eps));
            typical = std::max(typical, eps * sigma.back() * sparse_one_norm(g.op.matrix()));
        }
        if (auto it = spec.rates.find(g.label); it != spec.rates.end() && it->second != 0.0) jumps.emplace_back(&g.op.matrix(), it->second);
    }
    CircuitSeries out;
    if (typical > 0.1) out.warnings.push_back("eps * |g| * ||h|| is typically " + std::to_string(typical) + " (> 0.1)");

    const DenseMatrix od = o.dense();
    const double D = static_cast<double>(s.dim());
    const size_t nt = times.size();
    std::vector<double> values(static_cast<size_t>(spec.n_samples) * nt);
    auto run = [&](size_t sample) {
        auto local_terms = terms;
        DenseMatrix x = od;
        long step = 0;
        for (size_t ti = 0; ti < nt; ++ti) {
            for (; step < step_of[ti]; ++step) {
                auto rng = keyed_stream(spec.seed, (static_cast<std::uint64_t>(sample) << 32) | static_cast<std::uint64_t>(step));
                std::normal_distribution<double> normal;
                for (size_t a = 0; a < local_terms.size(); ++a) local_terms[a].second = sigma[a] * normal(rng);
                x = circuit_step(local_terms, jumps, x, eps);
            }
            values[sample * nt + ti] = (x * od).trace().real() / D;
        }
    };
    parallel_for(static_cast<size_t>(spec.n_samples), spec.threads, run);

    const double n = spec.n_samples;
    out.mean.assign(nt, 0.0);
    out.stderr_.assign(nt, 0.0);
    for (size_t ti = 0; ti < nt; ++ti) {
        double m = 0.0, v = 0.0;
        for (size_t k = 0; k < static_cast<size_t>(spec.n_samples); ++k) m += values[k * nt + ti];
        m /= n;
        for (size_t k = 0; k < static_cast<size_t>(spec.n_samples); ++k) v += std::pow(values[k * nt + ti] - m, 2);
        out.mean[ti] = m;
        out.stderr_[ti] = std::sqrt(v / (n - 1.0) / n);
    }
    return out;
}

}  // namespace scarlab
