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

// Multi-size pipelines shared by the command-line runner and the acceptance
// suite: fidelity collapse across chain lengths and the two coherence setups.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scarlab/dynamics.hpp"
#include "scarlab/models.hpp"

namespace scarlab {

enum class Scaling { t2_over_L2, t_over_L2 };

inline Scaling parse_scaling(const std::string& s) {
    if (s == "t2/L2") return Scaling::t2_over_L2;
    if (s == "t/L2") return Scaling::t_over_L2;
    throw std::invalid_argument("unknown scaling '" + s + "' (expected t2/L2 or t/L2)");
}

inline std::string to_string(Scaling s) { return s == Scaling::t2_over_L2 ? "t2/L2" : "t/L2"; }

/// Time at which a chain of length L reaches scaling variable x.
inline double time_for(Scaling s, double x, int L) { return s == Scaling::t2_over_L2 ? std::sqrt(x) * L : x * L * L; }

/// Piecewise-linear interpolation of (xs, ys) at x; xs ascending.
inline double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("interpolate: bad samples");
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    size_t i = static_cast<size_t>(it - xs.begin());
    double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return (1.0 - w) * ys[i - 1] + w * ys[i];
}

struct CollapseMetric {
    double all_above = 0.0;  // points where every curve has F >= threshold
    double any_above = 0.0;  // points where at least one curve does
    int points_all = 0;
};

/// Max pairwise spread of the curves on the common grid `x`, each curve
/// given on its own grid and linearly interpolated.
inline CollapseMetric collapse_metric(const std::vector<double>& x, const std::vector<std::vector<double>>& curve_x,
                                      const std::vector<std::vector<double>>& curve_f, double threshold = 0.8) {
    CollapseMetric m;
    for (double xv : x) {
        double lo = 1e300, hi = -1e300;
        for (size_t c = 0; c < curve_f.size(); ++c) {
            double f = interpolate(curve_x[c], curve_f[c], xv);
            lo = std::min(lo, f);
            hi = std::max(hi, f);
        }
        if (lo >= threshold) {
            m.all_above = std::max(m.all_above, hi - lo);
            ++m.points_all;
        }
        if (hi >= threshold) m.any_above = std::max(m.any_above, hi - lo);
    }
    return m;
}

struct CollapseRun {
    std::vector<int> sizes;
    std::vector<double> x;                     // common scaling grid
    std::vector<std::vector<double>> fidelity;  // one curve per size, on x
    std::vector<std::string> methods;
    CollapseMetric metric;
};

/// Fidelity of |n,k> under the model at every size, sampled on the common
/// grid x_i = x_max i / (points - 1) and evolved exactly in the state's
/// magnetization sector.
inline CollapseRun fidelity_collapse(const std::string& model_id, const std::map<std::string, double>& params, const std::vector<int>& sizes,
                                     Boundary boundary, int n, std::optional<double> k, Scaling scaling, double x_max, int points,
                                     double threshold = 0.8, const RkOptions& opt = {}) {
    if (points < 2) throw std::invalid_argument("collapse: need at least 2 grid points");
    if (!(x_max > 0)) throw std::invalid_argument("collapse: x_max must be positive");
    CollapseRun run;
    run.sizes = sizes;
    for (int i = 0; i < points; ++i) run.x.push_back(x_max * i / (points - 1));
    for (int L : sizes) {
        auto model = build_model(model_id, L, boundary, params);
        ScarStateSpec st{ScarStateSpec::Kind::aqmbs, model.spec(), n, k};
        DenseVector psi = scar_state(st);
        auto m = state_magnetization(model.spec(), psi);
        std::optional<int> sector;
        if (m && model.algebra.conserves_magnetization()) sector = *m;
        WorkingBasis basis = sector ? WorkingBasis::sector(model.spec(), *sector) : WorkingBasis::whole(model.spec());
        std::vector<double> ts;
        for (double xv : run.x) ts.push_back(time_for(scaling, xv, L));
        auto r = evolve_exact(model, pure_density(basis.restrict_vector(psi)), ts, sector, opt);
        run.fidelity.push_back(fidelity_series(r, psi));
        run.methods.push_back(r.method);
    }
    std::vector<std::vector<double>> xs(sizes.size(), run.x);
    run.metric = collapse_metric(run.x, xs, run.fidelity, threshold);
    return run;
}

struct CoherenceRun {
    std::vector<double> times;
    std::vector<double> coherence;
    std::vector<double> reference;  // exact law or upper bound
    double rate = 0.0;               // exponent of the reference curve
};

/// Exchange-dephased spin-1 ring: psi0 = (|psi_n0> + |n0,k>)/sqrt(2) in the
/// sector M = -L + 2 n0, Pi_s = |psi_n0><psi_n0|, Pi' = sector - Pi_s.
/// Reference is 1/4 exp(-2 gamma t eps_q), eps_q = 2 sin^2(q/2), q = k - pi.
inline CoherenceRun tower_coherence_law(const LindbladModel& model, int n0, std::optional<double> k, const std::vector<double>& times,
                                        const RkOptions& opt) {
    const HilbertSpec& s = model.spec();
    if (model.id != "tower-2") throw std::invalid_argument("coherence law: needs the tower-2 model");
    if (s.boundary != Boundary::periodic) throw std::invalid_argument("coherence law: needs periodic boundary");
    double gamma = -1.0;
    for (const auto& [g, rate] : model.jumps()) {
        if (gamma < 0) gamma = rate;
        if (std::abs(rate - gamma) > 1e-15) throw std::invalid_argument("coherence law: needs uniform rates");
    }
    const int L = s.L;
    const double kk = k.value_or(default_momentum(L));
    DenseVector tower = scar_state({ScarStateSpec::Kind::tower, s, n0, std::nullopt});
    DenseVector aq = scar_state({ScarStateSpec::Kind::aqmbs, s, n0, kk});
    const int M = -L + 2 * n0;
    WorkingBasis b = WorkingBasis::sector(s, M);
    DenseVector v0 = b.restrict_vector((tower + aq) / std::sqrt(2.0));
    DenseMatrix ps = pure_density(b.restrict_vector(tower));
    DenseMatrix pw = DenseMatrix::Identity(b.dim(), b.dim()) - ps;
    CoherenceRun out;
    out.times = times;
    out.coherence = coherence_norm_series(model, pure_density(v0), ps, pw, times, M, opt);
    out.rate = 2.0 * gamma * 2.0 * std::pow(std::sin((kk - kPi) / 2.0), 2);
    for (double t : times) out.reference.push_back(0.25 * std::exp(-out.rate * t));
    return out;
}

/// Coherence between a ferromagnetic scar and its complement under
/// dephasing, with the bound ||X0||^2 exp(-g t), g = min spec of H2 on the
/// complement of the scar.
inline CoherenceRun dephasing_coherence_bound(const LindbladModel& model, const DenseVector& scar, const DenseVector& other,
                                              const std::vector<double>& times, const RkOptions& opt = {}) {
    const Index D = model.spec().dim();
    auto pair = effective_pair(model, scar);
    DenseMatrix ps = pure_density(scar);
    DenseMatrix pt = DenseMatrix::Identity(D, D) - ps;
    DenseVector orth = pt * other;
    if (orth.norm() < 1e-12) throw std::invalid_argument("coherence bound: second state lies along the scar");
    DenseVector phi = (scar + orth / orth.norm()) / std::sqrt(2.0);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(pt * DenseMatrix(pair.h2.matrix()) * pt + 1e6 * ps, Eigen::EigenvaluesOnly);
    CoherenceRun out;
    out.times = times;
    out.rate = es.eigenvalues().minCoeff();
    DenseMatrix rho0 = pure_density(phi);
    out.coherence = coherence_norm_series(model, rho0, ps, pt, times, std::nullopt, opt);
    const double c0 = (ps * rho0 * pt).squaredNorm();
    for (double t : times) out.reference.push_back(c0 * std::exp(-out.rate * t));
    return out;
}

}  // namespace scarlab
