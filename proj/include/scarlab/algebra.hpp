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

// Bond algebras, their commutants, and everything derived from the
// commutant: Krylov-subspace decomposition, strong symmetries, stationary
// states and Mazur bounds.

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "scarlab/core.hpp"
#include "scarlab/linalg.hpp"

namespace scarlab {

enum class Role { hamiltonian, jump, both };

inline bool acts_in_hamiltonian(Role r) { return r != Role::jump; }
inline bool acts_as_jump(Role r) { return r != Role::hamiltonian; }

struct Generator {
    std::string label;   // unique, e.g. "exchange_3"
    std::string family;  // shared by translates, e.g. "exchange"
    SparseOperator op;
    Role role = Role::hamiltonian;
};

/// Hermitian generators of a bond algebra; the identity is implicit.
class BondAlgebra {
   public:
    BondAlgebra(HilbertSpec spec, std::vector<Generator> generators) : spec_(spec), generators_(std::move(generators)) {
        for (const auto& g : generators_) {
            if (!(g.op.spec() == spec_)) throw std::invalid_argument("BondAlgebra: generator '" + g.label + "' on wrong space");
            if (!g.op.hermitian()) throw std::invalid_argument("BondAlgebra: generator '" + g.label + "' is not hermitian");
        }
        for (size_t i = 0; i < generators_.size(); ++i)
            for (size_t j = i + 1; j < generators_.size(); ++j)
                if (generators_[i].label == generators_[j].label)
                    throw std::invalid_argument("BondAlgebra: duplicate label '" + generators_[i].label + "'");
    }

    const HilbertSpec& spec() const { return spec_; }
    const std::vector<Generator>& generators() const { return generators_; }

    const Generator& find(const std::string& label) const {
        for (const auto& g : generators_)
            if (g.label == label) return g;
        throw std::invalid_argument("BondAlgebra: no generator '" + label + "'");
    }

    bool conserves_magnetization() const {
        return std::all_of(generators_.begin(), generators_.end(), [](const Generator& g) { return scarlab::conserves_magnetization(g.op); });
    }

   private:
    HilbertSpec spec_;
    std::vector<Generator> generators_;
};

/// Sum over generators of ad_g^dagger ad_g. Its kernel is the commutant.
inline SparseSuperOperator super_hamiltonian(const BondAlgebra& a) {
    const Index d2 = a.spec().dim() * a.spec().dim();
    SparseMatrix p(d2, d2);
    for (const auto& g : a.generators()) {
        SparseMatrix ad = adjoint_superop(g.op).matrix();
        p += SparseMatrix(ad.adjoint()) * ad;
    }
    return {a.spec(), p};
}

/// Hilbert-Schmidt orthonormal basis of the commutant.
struct CommutantBasis {
    std::vector<SparseOperator> operators;
    double kernel_tol = 1e-10;
    /// Smallest eigenvalue of the (possibly compressed) super-Hamiltonian above
    /// the kernel; infinity when the searched space is exactly the kernel.
    double gap = 0.0;
    /// "reduced" (random-element reduction) or "super-hamiltonian" (dense kernel).
    std::string method;

    Index dim() const { return static_cast<Index>(operators.size()); }
};

namespace detail {

/// Columns of `k` (vectorized operators) -> canonical orthonormal operator list.
inline std::vector<SparseOperator> canonical_operators(const HilbertSpec& spec, const DenseMatrix& k) {
    std::vector<SparseOperator> out;
    if (k.cols() == 0) return out;
    DenseMatrix basis = canonical_basis(k);
    for (Index c = 0; c < basis.cols(); ++c) out.emplace_back(spec, unvectorize(basis.col(c), spec.dim()));
    return out;
}

inline void verify_commutant(const BondAlgebra& a, const CommutantBasis& c) {
    for (const auto& q : c.operators) {
        for (const auto& g : a.generators()) {
            double r = commutator(q, g.op).norm();
            if (r > c.kernel_tol * std::max(1.0, g.op.norm()))
                throw SolverError("commutant_basis: element fails to commute with '" + g.label +
                                  "' (residual " + std::to_string(r) + ")");
        }
    }
}

/// Clusters of numerically equal sorted values.
inline std::vector<std::pair<Index, Index>> clusters(const Eigen::VectorXd& sorted, double tol) {
    std::vector<std::pair<Index, Index>> out;  // (start, size)
    Index start = 0;
    for (Index i = 1; i <= sorted.size(); ++i) {
        if (i == sorted.size() || sorted(i) - sorted(i - 1) > tol) {
            out.emplace_back(start, i - start);
            start = i;
        }
    }
    return out;
}

}  // namespace detail

/// Commutant by reduction to the commutant of one random element. Any X in
/// the commutant commutes with H = sum_i r_i g_i, so X is block diagonal in
/// the eigenspaces of H. The remaining commutation conditions are imposed
/// on that much smaller space through the compressed super-Hamiltonian.
inline CommutantBasis commutant_basis(const BondAlgebra& a, double tol = 1e-10, std::uint64_t seed = 20240611) {
    if (!(tol > 0)) throw std::invalid_argument("commutant_basis: tol must be positive");
    const Index D = a.spec().dim();
    std::vector<DenseMatrix> gens;
    gens.reserve(a.generators().size());
    for (const auto& g : a.generators()) gens.push_back(g.op.dense());

    auto rng = keyed_stream(seed, 0);
    std::normal_distribution<double> normal;
    DenseMatrix h = DenseMatrix::Zero(D, D);
    for (const auto& g : gens) h += normal(rng) * g;
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(h);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    auto groups = detail::clusters(eig.eigenvalues(), 1e-8 * scale);
    const DenseMatrix& v = eig.eigenvectors();

    // Flattened coordinates (p, q) with p, q inside the same eigenvalue cluster.
    std::vector<std::pair<Index, Index>> coords;
    for (auto [start, size] : groups)
        for (Index q = start; q < start + size; ++q)
            for (Index p = start; p < start + size; ++p) coords.emplace_back(p, q);
    const Index n = static_cast<Index>(coords.size());

    // Gram matrix of the map Y -> ([g, Y])_g on the coordinates, using
    // <[G,E_pq],[G,E_p'q']> = d_qq'(G^2)_pp' + d_pp'(G^2)_q'q - 2 G_pp' G_q'q.
    DenseMatrix gram = DenseMatrix::Zero(n, n);
    for (const auto& g : gens) {
        DenseMatrix gt = v.adjoint() * g * v;
        DenseMatrix g2 = gt * gt;
        for (Index f = 0; f < n; ++f) {
            auto [p, q] = coords[static_cast<size_t>(f)];
            for (Index f2 = 0; f2 < n; ++f2) {
                auto [p2, q2] = coords[static_cast<size_t>(f2)];
                Complex val = -2.0 * gt(p, p2) * gt(q2, q);
                if (q == q2) val += g2(p, p2);
                if (p == p2) val += g2(q2, q);
                gram(f, f2) += val;
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> geig(gram);
    const double gscale = std::max(1.0, geig.eigenvalues().cwiseAbs().maxCoeff());
    const double threshold = tol * gscale;

    CommutantBasis out;
    out.kernel_tol = tol;
    out.method = "reduced";
    out.gap = std::numeric_limits<double>::infinity();
    std::vector<Index> kernel;
    for (Index i = 0; i < n; ++i) {
        if (geig.eigenvalues()(i) <= threshold)
            kernel.push_back(i);
        else
            out.gap = std::min(out.gap, geig.eigenvalues()(i));
    }
    DenseMatrix k(D * D, static_cast<Index>(kernel.size()));
    for (size_t c = 0; c < kernel.size(); ++c) {
        DenseMatrix y = DenseMatrix::Zero(D, D);
        for (Index f = 0; f < n; ++f) {
            auto [p, q] = coords[static_cast<size_t>(f)];
            y(p, q) = geig.eigenvectors()(f, kernel[c]);
        }
        DenseMatrix x = v * y * v.adjoint();
        k.col(static_cast<Index>(c)) = vectorize(x);
    }
    out.operators = detail::canonical_operators(a.spec(), k);
    detail::verify_commutant(a, out);
    return out;
}

/// Commutant as the dense null space of the super-Hamiltonian. When every
/// generator conserves magnetization the super-Hamiltonian is block diagonal
/// over operator blocks (M, M') and each block is solved separately.
inline CommutantBasis super_hamiltonian_kernel(const BondAlgebra& a, double tol = 1e-10) {
    const HilbertSpec& spec = a.spec();
    const Index D = spec.dim();
    const SparseMatrix p = super_hamiltonian(a).matrix();

    std::vector<std::vector<Index>> blocks;
    if (a.conserves_magnetization()) {
        auto part = sector_partition(spec);
        for (const auto& row : part.sectors)
            for (const auto& col : part.sectors) {
                std::vector<Index> idx;
                for (Index j : col.indices)
                    for (Index i : row.indices) idx.push_back(i + D * j);
                std::sort(idx.begin(), idx.end());
                blocks.push_back(std::move(idx));
            }
    } else {
        blocks.emplace_back(static_cast<size_t>(D * D));
        std::iota(blocks.back().begin(), blocks.back().end(), Index{0});
    }
    if (!blocks.empty() && blocks.front().size() > 8192 && blocks.size() == 1)
        throw std::invalid_argument("super_hamiltonian_kernel: dense kernel too large (D^2 = " + std::to_string(D * D) + ")");

    CommutantBasis out;
    out.kernel_tol = tol;
    out.method = "super-hamiltonian";
    out.gap = std::numeric_limits<double>::infinity();
    std::vector<DenseVector> kernel;
    for (const auto& idx : blocks) {
        DenseMatrix sub = DenseMatrix(restrict_matrix(p, idx));
        Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(sub);
        const double threshold = tol * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
        for (Index i = 0; i < sub.rows(); ++i) {
            if (eig.eigenvalues()(i) <= threshold) {
                DenseVector full = DenseVector::Zero(D * D);
                for (size_t r = 0; r < idx.size(); ++r) full(idx[r]) = eig.eigenvectors()(static_cast<Index>(r), i);
                kernel.push_back(std::move(full));
            } else {
                out.gap = std::min(out.gap, eig.eigenvalues()(i));
            }
        }
    }
    DenseMatrix k(D * D, static_cast<Index>(kernel.size()));
    for (size_t c = 0; c < kernel.size(); ++c) k.col(static_cast<Index>(c)) = kernel[c];
    out.operators = detail::canonical_operators(spec, k);
    detail::verify_commutant(a, out);
    return out;
}

// ---------------------------------------------------------------------------
// Krylov-subspace decomposition

/// One block lambda of H = sum_lambda H_lambda^(A) (x) H_lambda^(C).
/// `copies[m]` is an isometry D x D_lambda onto the m-th Krylov subspace;
/// the copies are aligned so that V_m V_m'^dagger is the intertwiner.
struct IrrepBlock {
    int label = 0;
    Index krylov_dim = 0;    // D_lambda
    Index multiplicity = 0;  // d_lambda
    std::vector<DenseMatrix> copies;

    DenseMatrix intertwiner(Index m, Index mp) const { return copies.at(static_cast<size_t>(m)) * copies.at(static_cast<size_t>(mp)).adjoint(); }
    DenseMatrix projector(Index m) const { return intertwiner(m, m); }
    DenseMatrix block_projector() const {
        DenseMatrix p = DenseMatrix::Zero(copies.front().rows(), copies.front().rows());
        for (Index m = 0; m < multiplicity; ++m) p += projector(m);
        return p;
    }
};

struct IrrepDecomposition {
    HilbertSpec spec;
    std::vector<IrrepBlock> blocks;
    int attempts = 1;

    /// Number of Krylov subspaces, sum_lambda d_lambda.
    Index krylov_count() const {
        Index n = 0;
        for (const auto& b : blocks) n += b.multiplicity;
        return n;
    }
    const IrrepBlock& block(int label) const {
        for (const auto& b : blocks)
            if (b.label == label) return b;
        throw std::invalid_argument("IrrepDecomposition: no block with label " + std::to_string(label));
    }
};

namespace detail {

inline DenseMatrix polar_isometry(const DenseMatrix& a) {
    Eigen::JacobiSVD<DenseMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU() * svd.matrixV().adjoint();
}

inline std::optional<IrrepDecomposition> try_decompose(const HilbertSpec& spec, const std::vector<DenseMatrix>& c, std::uint64_t seed) {
    const Index D = spec.dim();
    auto rng = keyed_stream(seed, 1);
    std::normal_distribution<double> normal;
    DenseMatrix q = DenseMatrix::Zero(D, D);
    for (const auto& x : c) {
        q += normal(rng) * 0.5 * (x + x.adjoint());
        q += normal(rng) * 0.5 * kI * (x - x.adjoint());
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(q);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    auto groups = clusters(eig.eigenvalues(), 1e-8 * scale);
    std::vector<DenseMatrix> spaces;
    for (auto [start, size] : groups) spaces.push_back(eig.eigenvectors().middleCols(start, size));

    // Each eigenspace must be a single Krylov subspace: C compresses to scalars on it.
    for (const auto& s : spaces)
        for (const auto& x : c) {
            DenseMatrix comp = s.adjoint() * x * s;
            Complex mean = comp.trace() / static_cast<double>(comp.rows());
            if ((comp - mean * DenseMatrix::Identity(comp.rows(), comp.cols())).norm() > 1e-7) return std::nullopt;
        }

    const size_t ns = spaces.size();
    std::vector<size_t> parent(ns);
    std::iota(parent.begin(), parent.end(), size_t{0});
    auto find = [&](size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (size_t i = 0; i < ns; ++i)
        for (size_t j = i + 1; j < ns; ++j)
            for (const auto& x : c)
                if ((spaces[i].adjoint() * x * spaces[j]).norm() > 1e-8) {
                    parent[find(j)] = find(i);
                    break;
                }

    std::vector<std::vector<size_t>> members(ns);
    for (size_t i = 0; i < ns; ++i) members[find(i)].push_back(i);

    IrrepDecomposition out;
    out.spec = spec;
    std::vector<std::pair<std::vector<double>, IrrepBlock>> keyed;
    for (const auto& group : members) {
        if (group.empty()) continue;
        IrrepBlock b;
        b.krylov_dim = spaces[group.front()].cols();
        b.multiplicity = static_cast<Index>(group.size());
        for (size_t m : group)
            if (spaces[m].cols() != b.krylov_dim) return std::nullopt;
        const DenseMatrix& v0 = spaces[group.front()];
        b.copies.push_back(v0);
        for (size_t k = 1; k < group.size(); ++k) {
            const DenseMatrix& vm = spaces[group[k]];
            // Find an element of C that maps copy 0 onto copy k.
            DenseMatrix best;
            double best_norm = 0.0;
            for (const auto& x : c) {
                DenseMatrix t = vm.adjoint() * x * v0;
                double nt = t.norm();
                if (nt > best_norm) {
                    best_norm = nt;
                    best = t;
                }
            }
            if (best_norm < 1e-8) return std::nullopt;
            b.copies.push_back(vm * polar_isometry(best));
        }
        // Canonical ordering key: smallest basis index carried by the block.
        DenseMatrix proj = b.block_projector();
        double first = static_cast<double>(D);
        for (Index i = 0; i < D; ++i)
            if (std::abs(proj(i, i)) > 1e-10) {
                first = static_cast<double>(i);
                break;
            }
        keyed.push_back({{first, static_cast<double>(b.krylov_dim), static_cast<double>(b.multiplicity)}, std::move(b)});
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
    Index total = 0, csum = 0;
    for (auto& [key, b] : keyed) {
        b.label = static_cast<int>(out.blocks.size());
        total += b.krylov_dim * b.multiplicity;
        csum += b.multiplicity * b.multiplicity;
        out.blocks.push_back(std::move(b));
    }
    if (total != D || csum != static_cast<Index>(c.size())) return std::nullopt;
    return out;
}

}  // namespace detail

/// Simultaneous block diagonalization of the commutant. A random hermitian
/// element of C splits H into Krylov subspaces; subspaces connected by some
/// element of C are merged into one block lambda.
inline IrrepDecomposition irrep_decomposition(const BondAlgebra& a, const CommutantBasis& c, std::uint64_t seed = 7) {
    if (c.operators.empty()) throw std::invalid_argument("irrep_decomposition: empty commutant");
    if (!(c.operators.front().spec() == a.spec())) throw std::invalid_argument("irrep_decomposition: commutant on wrong space");
    std::vector<DenseMatrix> dense;
    for (const auto& q : c.operators) dense.push_back(q.dense());
    constexpr int kMaxRetries = 5;
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
        auto result = detail::try_decompose(a.spec(), dense, splitmix64(seed + static_cast<std::uint64_t>(attempt)));
        if (result) {
            result->attempts = attempt + 1;
            return *result;
        }
    }
    throw SolverError("irrep_decomposition: eigenvalue collision persisted after retries");
}

// ---------------------------------------------------------------------------

struct StrongSymmetry {
    SparseOperator unitary;
    int lambda = 0;
    Index n = 1;  // 1-based copy index
    double theta = 0.0;
};

/// Phase e^{i theta} on copy n of block lambda, identity elsewhere.
inline StrongSymmetry strong_symmetry(const IrrepDecomposition& decomp, int lambda, Index n, double theta) {
    const IrrepBlock& b = decomp.block(lambda);
    if (n < 1 || n > b.multiplicity) throw std::invalid_argument("strong_symmetry: copy index out of range");
    if (theta == 0.0) throw std::invalid_argument("strong_symmetry: theta must be nonzero");
    const Index D = decomp.spec.dim();
    DenseMatrix u = DenseMatrix::Identity(D, D) + (std::exp(kI * theta) - 1.0) * b.projector(n - 1);
    return {SparseOperator(decomp.spec, SparseMatrix(u.sparseView(1.0, 1e-13))), lambda, n, theta};
}

inline void check_density_matrix(const DenseMatrix& rho, Index dim, double tol = 1e-10) {
    if (rho.rows() != dim || rho.cols() != dim) throw std::invalid_argument("density matrix has wrong shape");
    if ((rho - rho.adjoint()).norm() > tol) throw std::invalid_argument("density matrix is not hermitian");
    if (std::abs(rho.trace() - 1.0) > tol) throw std::invalid_argument("density matrix does not have unit trace");
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -tol) throw std::invalid_argument("density matrix is not positive semidefinite");
}

/// rho_ss = sum_{lambda,m,m'} Tr[Pi_{m',m} rho0] Pi_{m,m'} / D_lambda.
inline DenseMatrix stationary_state(const IrrepDecomposition& decomp, const DenseMatrix& rho0) {
    const Index D = decomp.spec.dim();
    check_density_matrix(rho0, D);
    DenseMatrix out = DenseMatrix::Zero(D, D);
    for (const auto& b : decomp.blocks)
        for (Index m = 0; m < b.multiplicity; ++m)
            for (Index mp = 0; mp < b.multiplicity; ++mp) {
                const DenseMatrix& vm = b.copies[static_cast<size_t>(m)];
                const DenseMatrix& vmp = b.copies[static_cast<size_t>(mp)];
                Complex w = (vm.adjoint() * rho0 * vmp).trace();
                out += (w / static_cast<double>(b.krylov_dim)) * vm * vmp.adjoint();
            }
    return out;
}

/// (1/D) sum_alpha |Tr[Q_alpha^dagger O]|^2 over an orthonormal commutant basis.
inline double mazur_bound(const CommutantBasis& c, const SparseOperator& o) {
    if (!o.hermitian()) throw std::invalid_argument("mazur_bound: observable must be hermitian");
    double sum = 0.0;
    for (const auto& q : c.operators) {
        if (!(q.spec() == o.spec())) throw std::invalid_argument("mazur_bound: Hilbert space mismatch");
        Complex overlap = 0.0;
        const SparseMatrix qa = q.matrix().adjoint();
        SparseMatrix prod = qa * o.matrix();
        for (Index k = 0; k < prod.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(prod, k); it; ++it)
                if (it.row() == it.col()) overlap += it.value();
        sum += std::norm(overlap);
    }
    return sum / static_cast<double>(o.dim());
}

}  // namespace scarlab
