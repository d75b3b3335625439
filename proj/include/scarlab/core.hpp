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

// Sparse operators on spin-1/2 and spin-1 chains.
//
// Conventions used everywhere in scarlab:
//  * Site 1 is the most significant digit of a computational-basis index, so
//    embedding is the ordinary Kronecker product op_1 (x) op_2 (x) ... (x) op_L.
//  * Local basis order is (up, down) for spin-1/2 and (+, 0, -) for spin-1.
//  * Operators are vectorized by column stacking: vec(X)[i + D*j] = X(i, j).
//    Hence vec(A X B) = (B^T (x) A) vec(X) and [A, .] = I (x) A - A^T (x) I.
//  * User-facing site labels are 1-based, internal loops are 0-based.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace scarlab {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using DenseMatrix = Eigen::MatrixXcd;
using DenseVector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<Complex>;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;
/// Entries with magnitude at or below this are dropped from sparse storage.
inline constexpr double kPruneTol = 1e-14;

/// Raised when a numerical routine cannot deliver a result to the requested
/// accuracy (non-convergence, step-size underflow, failed verification).
class SolverError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

enum class Boundary { open, periodic };

inline std::string to_string(Boundary b) { return b == Boundary::open ? "open" : "periodic"; }

inline Boundary parse_boundary(std::string_view s) {
    if (s == "open" || s == "obc") return Boundary::open;
    if (s == "periodic" || s == "pbc") return Boundary::periodic;
    throw std::invalid_argument("unknown boundary '" + std::string(s) + "' (expected open|periodic)");
}

struct HilbertSpec {
    int L = 2;
    int local_dim = 2;
    Boundary boundary = Boundary::open;

    HilbertSpec() = default;
    HilbertSpec(int sites, int ldim, Boundary bc = Boundary::open) : L(sites), local_dim(ldim), boundary(bc) {
        if (L < 2) throw std::invalid_argument("HilbertSpec: need L >= 2, got " + std::to_string(L));
        if (local_dim != 2 && local_dim != 3)
            throw std::invalid_argument("HilbertSpec: local_dim must be 2 or 3, got " + std::to_string(local_dim));
        if (L > 16) throw std::invalid_argument("HilbertSpec: L too large for exact methods");
    }

    Index dim() const {
        Index d = 1;
        for (int j = 0; j < L; ++j) d *= local_dim;
        return d;
    }

    /// Digit of basis state `index` on internal site `site` (0-based).
    int digit(Index index, int site) const {
        Index stride = 1;
        for (int j = L - 1; j > site; --j) stride *= local_dim;
        return static_cast<int>((index / stride) % local_dim);
    }

    std::vector<int> digits(Index index) const {
        std::vector<int> out(L);
        for (int j = L - 1; j >= 0; --j) {
            out[j] = static_cast<int>(index % local_dim);
            index /= local_dim;
        }
        return out;
    }

    Index encode(const std::vector<int>& digits) const {
        Index out = 0;
        for (int j = 0; j < L; ++j) out = out * local_dim + digits[j];
        return out;
    }

    bool operator==(const HilbertSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Local operators

enum class LocalKind { x, y, z, plus, minus, z2, proj_up, proj_down, proj_plus, proj_zero, proj_minus, identity };

inline LocalKind parse_local_kind(std::string_view s) {
    static const std::map<std::string, LocalKind, std::less<>> table = {
        {"x", LocalKind::x},           {"y", LocalKind::y},
        {"z", LocalKind::z},           {"+", LocalKind::plus},
        {"-", LocalKind::minus},       {"z2", LocalKind::z2},
        {"Pup", LocalKind::proj_up},   {"Pdown", LocalKind::proj_down},
        {"P+", LocalKind::proj_plus},  {"P0", LocalKind::proj_zero},
        {"P-", LocalKind::proj_minus}, {"1", LocalKind::identity},
    };
    auto it = table.find(s);
    if (it == table.end()) throw std::invalid_argument("unknown local operator kind '" + std::string(s) + "'");
    return it->second;
}

/// Pauli matrices for local_dim = 2 (sigma^z = diag(1,-1), sigma^+ = |up><down|)
/// and spin-1 matrices S^a for local_dim = 3 in the basis (+, 0, -).
inline DenseMatrix local_operator(LocalKind kind, int local_dim) {
    if (local_dim != 2 && local_dim != 3) throw std::invalid_argument("local_operator: local_dim must be 2 or 3");
    DenseMatrix m = DenseMatrix::Zero(local_dim, local_dim);
    if (kind == LocalKind::identity) return DenseMatrix::Identity(local_dim, local_dim);
    if (local_dim == 2) {
        switch (kind) {
            case LocalKind::x: m(0, 1) = m(1, 0) = 1.0; return m;
            case LocalKind::y: m(0, 1) = -kI; m(1, 0) = kI; return m;
            case LocalKind::z: m(0, 0) = 1.0; m(1, 1) = -1.0; return m;
            case LocalKind::plus: m(0, 1) = 1.0; return m;
            case LocalKind::minus: m(1, 0) = 1.0; return m;
            case LocalKind::proj_up: m(0, 0) = 1.0; return m;
            case LocalKind::proj_down: m(1, 1) = 1.0; return m;
            default: throw std::invalid_argument("local_operator: kind not defined for spin-1/2");
        }
    }
    const double r2 = std::sqrt(2.0);
    DenseMatrix sp = DenseMatrix::Zero(3, 3);
    sp(0, 1) = r2;
    sp(1, 2) = r2;
    switch (kind) {
        case LocalKind::x: return 0.5 * (sp + sp.adjoint());
        case LocalKind::y: return (sp - sp.adjoint()) / (2.0 * kI);
        case LocalKind::z: m(0, 0) = 1.0; m(2, 2) = -1.0; return m;
        case LocalKind::z2: m(0, 0) = 1.0; m(2, 2) = 1.0; return m;
        case LocalKind::plus: return sp;
        case LocalKind::minus: return sp.adjoint();
        case LocalKind::proj_plus: m(0, 0) = 1.0; return m;
        case LocalKind::proj_zero: m(1, 1) = 1.0; return m;
        case LocalKind::proj_minus: m(2, 2) = 1.0; return m;
        default: throw std::invalid_argument("local_operator: kind not defined for spin-1");
    }
}

inline DenseMatrix local_operator(std::string_view kind, int local_dim) {
    return local_operator(parse_local_kind(kind), local_dim);
}

// ---------------------------------------------------------------------------
// Sparse operators

inline SparseMatrix pruned(SparseMatrix m, double tol = kPruneTol) {
    m.prune([tol](const Index&, const Index&, const Complex& v) { return std::abs(v) > tol; });
    m.makeCompressed();
    return m;
}

inline double frobenius_norm(const SparseMatrix& m) { return m.norm(); }

/// Complex sparse D x D matrix tagged with the chain it acts on.
class SparseOperator {
   public:
    SparseOperator() = default;
    SparseOperator(HilbertSpec spec, SparseMatrix matrix) : spec_(spec), matrix_(pruned(std::move(matrix))) {
        if (matrix_.rows() != spec_.dim() || matrix_.cols() != spec_.dim())
            throw std::invalid_argument("SparseOperator: matrix shape does not match Hilbert space dimension");
        hermitian_ = (SparseMatrix(matrix_.adjoint()) - matrix_).norm() < 1e-12;
    }
    SparseOperator(HilbertSpec spec, const DenseMatrix& dense) : SparseOperator(spec, SparseMatrix(dense.sparseView(1.0, kPruneTol))) {}

    static SparseOperator identity(const HilbertSpec& spec) {
        SparseMatrix id(spec.dim(), spec.dim());
        id.setIdentity();
        return {spec, id};
    }
    static SparseOperator zero(const HilbertSpec& spec) { return {spec, SparseMatrix(spec.dim(), spec.dim())}; }

    const HilbertSpec& spec() const { return spec_; }
    const SparseMatrix& matrix() const { return matrix_; }
    Index dim() const { return matrix_.rows(); }
    bool hermitian() const { return hermitian_; }
    DenseMatrix dense() const { return DenseMatrix(matrix_); }
    double norm() const { return matrix_.norm(); }

    SparseOperator adjoint() const { return {spec_, SparseMatrix(matrix_.adjoint())}; }

    friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
        check_same(a, b);
        return {a.spec_, SparseMatrix(a.matrix_ + b.matrix_)};
    }
    friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
        check_same(a, b);
        return {a.spec_, SparseMatrix(a.matrix_ - b.matrix_)};
    }
    friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
        check_same(a, b);
        return {a.spec_, SparseMatrix(a.matrix_ * b.matrix_)};
    }
    friend SparseOperator operator*(Complex c, const SparseOperator& a) { return {a.spec_, SparseMatrix(c * a.matrix_)}; }
    friend SparseOperator operator*(double c, const SparseOperator& a) { return {a.spec_, SparseMatrix(c * a.matrix_)}; }
    friend DenseVector operator*(const SparseOperator& a, const DenseVector& v) { return a.matrix_ * v; }

   private:
    static void check_same(const SparseOperator& a, const SparseOperator& b) {
        if (!(a.spec_ == b.spec_)) throw std::invalid_argument("SparseOperator: Hilbert space mismatch");
    }

    HilbertSpec spec_{};
    SparseMatrix matrix_{};
    bool hermitian_ = true;
};

inline SparseOperator commutator(const SparseOperator& a, const SparseOperator& b) { return a * b - b * a; }

/// A local factor placed on a 1-based site. Sites L+1, L+2, ... denote the
/// periodic wrap and are only accepted for periodic chains.
struct SiteOp {
    int site;
    DenseMatrix op;
};

/// Kronecker embedding of single-site factors with identity elsewhere.
inline SparseOperator embed(const std::vector<SiteOp>& local_ops, const HilbertSpec& spec) {
    const int d = spec.local_dim;
    std::vector<std::pair<int, const DenseMatrix*>> placed;
    std::vector<bool> used(spec.L, false);
    for (const auto& so : local_ops) {
        if (so.site < 1 || so.site > 2 * spec.L)
            throw std::invalid_argument("embed: site " + std::to_string(so.site) + " out of range");
        if (so.site > spec.L && spec.boundary != Boundary::periodic)
            throw std::invalid_argument("embed: wrap to site " + std::to_string(so.site) + " requires periodic boundary");
        if (so.op.rows() != d || so.op.cols() != d) throw std::invalid_argument("embed: local matrix has wrong size");
        int s = (so.site - 1) % spec.L;
        if (used[s]) throw std::invalid_argument("embed: site " + std::to_string(s + 1) + " used twice");
        used[s] = true;
        placed.emplace_back(s, &so.op);
    }
    const Index D = spec.dim();
    std::vector<Triplet> triplets;
    std::vector<std::pair<std::vector<int>, Complex>> frontier, next;
    for (Index col = 0; col < D; ++col) {
        frontier.assign(1, {spec.digits(col), Complex(1.0)});
        for (const auto& [s, m] : placed) {
            next.clear();
            for (const auto& [dig, amp] : frontier) {
                for (int r = 0; r < d; ++r) {
                    Complex v = (*m)(r, dig[s]);
                    if (std::abs(v) <= kPruneTol) continue;
                    auto nd = dig;
                    nd[s] = r;
                    next.emplace_back(std::move(nd), amp * v);
                }
            }
            std::swap(frontier, next);
        }
        for (const auto& [dig, amp] : frontier) triplets.emplace_back(spec.encode(dig), col, amp);
    }
    SparseMatrix out(D, D);
    out.setFromTriplets(triplets.begin(), triplets.end());
    return {spec, out};
}

inline SparseOperator embed_site(int site, const DenseMatrix& op, const HilbertSpec& spec) { return embed({{site, op}}, spec); }

inline SparseOperator embed_site(int site, std::string_view kind, const HilbertSpec& spec) {
    return embed_site(site, local_operator(kind, spec.local_dim), spec);
}

/// Sum over j of op on site j, e.g. total magnetization for kind "z".
inline SparseOperator site_sum(std::string_view kind, const HilbertSpec& spec) {
    auto out = SparseOperator::zero(spec);
    for (int j = 1; j <= spec.L; ++j) out = out + embed_site(j, kind, spec);
    return out;
}

// ---------------------------------------------------------------------------
// Superoperators

/// D^2 x D^2 matrix acting on column-stacked operators.
class SparseSuperOperator {
   public:
    SparseSuperOperator() = default;
    SparseSuperOperator(HilbertSpec spec, SparseMatrix matrix) : spec_(spec), matrix_(pruned(std::move(matrix))) {
        const Index d2 = spec_.dim() * spec_.dim();
        if (matrix_.rows() != d2 || matrix_.cols() != d2)
            throw std::invalid_argument("SparseSuperOperator: matrix must be D^2 x D^2");
    }

    const HilbertSpec& spec() const { return spec_; }
    const SparseMatrix& matrix() const { return matrix_; }
    Index dim() const { return matrix_.rows(); }

    DenseMatrix apply(const DenseMatrix& x) const;

    friend SparseSuperOperator operator+(const SparseSuperOperator& a, const SparseSuperOperator& b) {
        return {a.spec_, SparseMatrix(a.matrix_ + b.matrix_)};
    }
    friend SparseSuperOperator operator*(double c, const SparseSuperOperator& a) { return {a.spec_, SparseMatrix(c * a.matrix_)}; }

   private:
    HilbertSpec spec_{};
    SparseMatrix matrix_{};
};

inline DenseVector vectorize(const DenseMatrix& x) { return Eigen::Map<const DenseVector>(x.data(), x.size()); }

inline DenseMatrix unvectorize(const DenseVector& v, Index dim) {
    if (v.size() != dim * dim) throw std::invalid_argument("unvectorize: size mismatch");
    return Eigen::Map<const DenseMatrix>(v.data(), dim, dim);
}

inline DenseMatrix SparseSuperOperator::apply(const DenseMatrix& x) const {
    return unvectorize(matrix_ * vectorize(x), spec_.dim());
}

inline SparseMatrix sparse_identity(Index n) {
    SparseMatrix id(n, n);
    id.setIdentity();
    return id;
}

/// Kronecker product of sparse matrices.
inline SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(a.nonZeros() * b.nonZeros()));
    for (Index ka = 0; ka < a.outerSize(); ++ka)
        for (SparseMatrix::InnerIterator ia(a, ka); ia; ++ia)
            for (Index kb = 0; kb < b.outerSize(); ++kb)
                for (SparseMatrix::InnerIterator ib(b, kb); ib; ++ib)
                    t.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(), ia.value() * ib.value());
    SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

/// Left multiplication X -> A X.
inline SparseMatrix left_superop(const SparseMatrix& a) { return kron(sparse_identity(a.rows()), a); }
/// Right multiplication X -> X A.
inline SparseMatrix right_superop(const SparseMatrix& a) { return kron(SparseMatrix(a.transpose()), sparse_identity(a.rows())); }

/// The adjoint action [A, .] in vectorized form.
inline SparseSuperOperator adjoint_superop(const SparseOperator& a) {
    return {a.spec(), SparseMatrix(left_superop(a.matrix()) - right_superop(a.matrix()))};
}

// ---------------------------------------------------------------------------
// Magnetization sectors

struct Sector {
    int magnetization;  // in units of sigma^z (spin-1/2) or S^z (spin-1)
    std::vector<Index> indices;
    Index size() const { return static_cast<Index>(indices.size()); }
};

struct SectorPartition {
    std::vector<Sector> sectors;  // ascending magnetization

    const Sector& find(int magnetization) const {
        for (const auto& s : sectors)
            if (s.magnetization == magnetization) return s;
        throw std::invalid_argument("no sector with magnetization " + std::to_string(magnetization));
    }
};

/// Magnetization of a basis state: +1/-1 per spin-1/2 site, +1/0/-1 per spin-1 site.
inline int basis_magnetization(const HilbertSpec& spec, Index index) {
    int m = 0;
    for (int d : spec.digits(index)) m += (spec.local_dim == 2) ? (d == 0 ? 1 : -1) : (1 - d);
    return m;
}

inline SectorPartition sector_partition(const HilbertSpec& spec) {
    std::map<int, std::vector<Index>> groups;
    for (Index i = 0; i < spec.dim(); ++i) groups[basis_magnetization(spec, i)].push_back(i);
    SectorPartition out;
    for (auto& [m, idx] : groups) out.sectors.push_back({m, std::move(idx)});
    return out;
}

/// Largest matrix element connecting different sectors.
inline double inter_sector_weight(const SparseMatrix& a, const HilbertSpec& spec) {
    double worst = 0.0;
    for (Index k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it)
            if (basis_magnetization(spec, it.row()) != basis_magnetization(spec, it.col()))
                worst = std::max(worst, std::abs(it.value()));
    return worst;
}

inline bool conserves_magnetization(const SparseOperator& a, double tol = 1e-12) {
    return inter_sector_weight(a.matrix(), a.spec()) <= tol;
}

/// Dense-index restriction of `a` to the rows/columns listed in `basis`.
inline SparseMatrix restrict_matrix(const SparseMatrix& a, const std::vector<Index>& basis) {
    std::vector<Index> pos(static_cast<size_t>(a.rows()), -1);
    for (size_t k = 0; k < basis.size(); ++k) pos[static_cast<size_t>(basis[k])] = static_cast<Index>(k);
    std::vector<Triplet> t;
    for (Index c : basis)
        for (SparseMatrix::InnerIterator it(a, c); it; ++it)
            if (pos[static_cast<size_t>(it.row())] >= 0) t.emplace_back(pos[static_cast<size_t>(it.row())], pos[static_cast<size_t>(c)], it.value());
    SparseMatrix out(static_cast<Index>(basis.size()), static_cast<Index>(basis.size()));
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

/// Restriction of an operator that does not couple `sector` to the rest of
/// the Hilbert space.
inline SparseMatrix project_to_sector(const SparseOperator& a, const Sector& sector, double tol = 1e-12) {
    std::vector<char> inside(static_cast<size_t>(a.dim()), 0);
    for (Index i : sector.indices) inside[static_cast<size_t>(i)] = 1;
    const auto& m = a.matrix();
    for (Index k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it)
            if (inside[static_cast<size_t>(it.row())] != inside[static_cast<size_t>(it.col())] && std::abs(it.value()) > tol)
                throw std::invalid_argument("project_to_sector: operator couples sector M=" +
                                            std::to_string(sector.magnetization) + " to other sectors");
    return restrict_matrix(m, sector.indices);
}

}  // namespace scarlab
