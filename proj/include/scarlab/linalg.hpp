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

// Numerical kernels shared by the algebra, dynamics and brownian modules.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "scarlab/core.hpp"

namespace scarlab {

inline DenseMatrix expm(const DenseMatrix& a) { return a.exp(); }

/// exp(A) v for an operator given only through its action, by truncated
/// Taylor series with scaling. `one_norm` must bound ||A||_1 (any
/// consistent norm works; it only sets the number of sub-steps).
template <typename Apply>
DenseVector expmv(Apply&& apply, DenseVector v, double one_norm, double tol = 1e-15) {
    const int substeps = std::max(1, static_cast<int>(std::ceil(one_norm / 1.5)));
    const double scale = 1.0 / substeps;
    for (int s = 0; s < substeps; ++s) {
        DenseVector term = v;
        DenseVector sum = v;
        double vnorm = std::max(v.norm(), 1e-300);
        for (int k = 1; k <= 60; ++k) {
            term = apply(term) * (scale / k);
            sum += term;
            if (term.norm() <= tol * vnorm) break;
            if (k == 60) throw SolverError("expmv: Taylor series did not converge");
        }
        v = std::move(sum);
    }
    return v;
}

inline double sparse_one_norm(const SparseMatrix& a) {
    double best = 0.0;
    for (Index k = 0; k < a.outerSize(); ++k) {
        double col = 0.0;
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) col += std::abs(it.value());
        best = std::max(best, col);
    }
    return best;
}

/// Largest singular value by power iteration on A^dagger A.
inline double spectral_norm(const SparseMatrix& a, int iterations = 500, double tol = 1e-13) {
    if (a.nonZeros() == 0) return 0.0;
    DenseVector v(a.cols());
    for (Index i = 0; i < v.size(); ++i) v(i) = Complex(1.0 + 0.37 * std::sin(1.0 + i), 0.21 * std::cos(2.0 + i));
    v.normalize();
    double prev = 0.0;
    for (int it = 0; it < iterations; ++it) {
        DenseVector w = a.adjoint() * (a * v);
        double lam = w.norm();
        if (lam == 0.0) return 0.0;
        v = w / lam;
        if (std::abs(lam - prev) <= tol * lam) return std::sqrt(lam);
        prev = lam;
    }
    return std::sqrt(prev);
}

/// Orthonormal basis of the column span of `k`, in a canonical form: vector
/// i has its first nonzero coordinate at pivot_i with pivot_0 < pivot_1 < ...,
/// and that coordinate is real positive. Two inputs with the same span give
/// the same output (up to round-off).
inline DenseMatrix canonical_basis(const DenseMatrix& k, double tol = 1e-9) {
    // Row echelon form of k^T: rows = spanning vectors as coordinate rows.
    DenseMatrix r = k.transpose();
    const Index n = r.rows();
    const Index m = r.cols();
    std::vector<Index> pivots;
    Index row = 0;
    for (Index col = 0; col < m && row < n; ++col) {
        Index best = row;
        for (Index i = row + 1; i < n; ++i)
            if (std::abs(r(i, col)) > std::abs(r(best, col))) best = i;
        if (std::abs(r(best, col)) <= tol) continue;
        r.row(row).swap(r.row(best));
        r.row(row) /= r(row, col);
        for (Index i = 0; i < n; ++i)
            if (i != row) r.row(i) -= r(i, col) * r.row(row);
        pivots.push_back(col);
        ++row;
    }
    const Index rank = row;
    DenseMatrix out(m, rank);
    // Reverse Gram-Schmidt keeps the leading coordinate of each row.
    for (Index i = rank - 1; i >= 0; --i) {
        DenseVector v = r.row(i).transpose();
        for (Index j = i + 1; j < rank; ++j) v -= out.col(j).dot(v) * out.col(j);
        for (Index j = i + 1; j < rank; ++j) v -= out.col(j).dot(v) * out.col(j);
        v /= v.norm();
        Complex lead = v(pivots[static_cast<size_t>(i)]);
        v *= std::abs(lead) / lead;
        out.col(i) = v;
    }
    return out;
}

/// Dormand-Prince 5(4) integration of dy/dt = f(y) with dense output only at
/// the requested times. State type is any Eigen dense matrix.
struct RkOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double initial_step = 1e-3;
    double min_step = 1e-13;
    long max_steps = 50'000'000;
};

template <typename F>
std::vector<DenseMatrix> integrate_dopri5(F&& f, DenseMatrix y, const std::vector<double>& times, const RkOptions& opt = {}) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    std::vector<DenseMatrix> out;
    out.reserve(times.size());
    if (times.empty()) return out;
    double t = times.front();
    out.push_back(y);
    double h = opt.initial_step;
    long steps = 0;
    DenseMatrix k1 = f(y);
    for (size_t idx = 1; idx < times.size(); ++idx) {
        const double target = times[idx];
        if (target < t) throw std::invalid_argument("integrate_dopri5: times must be non-decreasing");
        while (t < target) {
            if (++steps > opt.max_steps) throw SolverError("integrate_dopri5: step budget exhausted");
            bool last = false;
            double step = h;
            if (t + step >= target) {
                step = target - t;
                last = true;
            }
            DenseMatrix k2 = f(y + step * (a21 * k1));
            DenseMatrix k3 = f(y + step * (a31 * k1 + a32 * k2));
            DenseMatrix k4 = f(y + step * (a41 * k1 + a42 * k2 + a43 * k3));
            DenseMatrix k5 = f(y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            DenseMatrix k6 = f(y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            DenseMatrix ynew = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            DenseMatrix k7 = f(ynew);
            DenseMatrix err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double en = 0.0;
            for (Index i = 0; i < err.size(); ++i) {
                double sc = opt.atol + opt.rtol * std::max(std::abs(y.data()[i]), std::abs(ynew.data()[i]));
                en = std::max(en, std::abs(err.data()[i]) / sc);
            }
            if (en <= 1.0) {
                t = last ? target : t + step;
                y = std::move(ynew);
                k1 = std::move(k7);
                double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
                if (!last || fac < 1.0) h = step * fac;
            } else {
                h = step * std::max(0.2, 0.9 * std::pow(en, -0.2));
                if (h < opt.min_step) throw SolverError("integrate_dopri5: step size underflow");
            }
        }
        out.push_back(y);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Generator for the independent stream identified by (seed, stream). The
/// result depends only on the key, never on which thread draws from it.
inline std::mt19937_64 keyed_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(splitmix64(stream)), static_cast<std::uint32_t>(splitmix64(stream) >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

/// Run `task(i)` for i in [0, n) on `threads` workers. Work items are
/// assigned by an atomic counter; results must be written by index.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& task) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), n));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace scarlab
