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

// Model catalog and special states.
//
// Catalog ids and their generator families (coupling name in parentheses):
//   full        XX (J), X (hx) in H; Z jumps (gamma)
//   z2          XX (J) in H; Z in H (h) and as jumps (gamma)
//   double-z2   XX (J) in H; ZZ in H (Jz) and as jumps (gamma)
//   u1          XX+YY (J) in H; Z in H (h) and as jumps (gamma)
//   isolated-1  XX+YY (J), X(1-Z) and (1-Z)X (D) in H; Z in H (h) and as jumps (gamma)
//   isolated-2  -J (XX+YY), D (s+ s+ s- + h.c.) in H; Z jumps (gamma)
//   tower-1     spin-1: J exchange, D dterm, -h Sz_tot in H; (Sz)^2 jumps (gamma)
//   tower-2     spin-1: D2 (Sz)^2, D dterm, -h Sz_tot in H; exchange jumps (gamma)
// where dterm_j = (Sz_j + Sz_{j+1})(1 - Sz_j Sz_{j+1}).

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scarlab/algebra.hpp"
#include "scarlab/core.hpp"

namespace scarlab {

/// A Lindbladian drawn from a bond algebra: H = sum_a J_a h_a, jumps l_j
/// with rates gamma_j.
struct LindbladModel {
    std::string id;
    BondAlgebra algebra;
    std::map<std::string, double> couplings;  // hamiltonian-role labels
    std::map<std::string, double> rates;      // jump-role labels

    const HilbertSpec& spec() const { return algebra.spec(); }

    SparseOperator hamiltonian() const {
        auto h = SparseOperator::zero(spec());
        for (const auto& g : algebra.generators())
            if (auto it = couplings.find(g.label); it != couplings.end() && it->second != 0.0) h = h + it->second * g.op;
        return h;
    }

    /// (label, operator, rate) for every jump-role generator.
    std::vector<std::pair<const Generator*, double>> jumps() const {
        std::vector<std::pair<const Generator*, double>> out;
        for (const auto& g : algebra.generators())
            if (auto it = rates.find(g.label); it != rates.end()) out.emplace_back(&g, it->second);
        return out;
    }

    void validate() const {
        for (const auto& g : algebra.generators()) {
            bool has_c = couplings.count(g.label) > 0;
            bool has_r = rates.count(g.label) > 0;
            if (has_c != acts_in_hamiltonian(g.role)) throw std::invalid_argument("LindbladModel: coupling keys do not match roles at '" + g.label + "'");
            if (has_r != acts_as_jump(g.role)) throw std::invalid_argument("LindbladModel: rate keys do not match roles at '" + g.label + "'");
        }
        for (const auto& [label, r] : rates)
            if (!(r >= 0.0)) throw std::invalid_argument("LindbladModel: negative rate for '" + label + "'");
        for (const auto& [label, c] : couplings) (void)algebra.find(label);
        for (const auto& [label, r] : rates) (void)algebra.find(label);
    }
};

inline const std::vector<std::string>& catalog_ids() {
    static const std::vector<std::string> ids = {"full", "z2", "double-z2", "u1", "isolated-1", "isolated-2", "tower-1", "tower-2"};
    return ids;
}

/// Coupling names each catalog id expects.
inline const std::vector<std::string>& model_parameters(const std::string& id) {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"full", {"J", "hx", "gamma"}},
        {"z2", {"J", "h", "gamma"}},
        {"double-z2", {"J", "Jz", "gamma"}},
        {"u1", {"J", "h", "gamma"}},
        {"isolated-1", {"J", "D", "h", "gamma"}},
        {"isolated-2", {"J", "D", "gamma"}},
        {"tower-1", {"J", "D", "h", "gamma"}},
        {"tower-2", {"D", "D2", "h", "gamma"}},
    };
    auto it = table.find(id);
    if (it == table.end()) throw std::invalid_argument("unknown model id '" + id + "'");
    return it->second;
}

inline int model_local_dim(const std::string& id) { return id.rfind("tower", 0) == 0 ? 3 : 2; }

namespace detail {

/// Bonds (j, j+1), 1-based, with the periodic wrap when requested.
inline std::vector<int> bond_starts(const HilbertSpec& spec, int range) {
    std::vector<int> out;
    int last = spec.boundary == Boundary::periodic ? spec.L : spec.L - range + 1;
    for (int j = 1; j <= last; ++j) out.push_back(j);
    return out;
}

inline SparseOperator exchange(int j, const HilbertSpec& s) {
    const int d = s.local_dim;
    return embed({{j, local_operator(LocalKind::x, d)}, {j + 1, local_operator(LocalKind::x, d)}}, s) +
           embed({{j, local_operator(LocalKind::y, d)}, {j + 1, local_operator(LocalKind::y, d)}}, s);
}

inline SparseOperator dterm(int j, const HilbertSpec& s) {
    auto zj = embed_site(j, "z", s);
    auto zk = embed({{j + 1, local_operator(LocalKind::z, 3)}}, s);
    auto zz = embed({{j, local_operator(LocalKind::z, 3)}, {j + 1, local_operator(LocalKind::z, 3)}}, s);
    return (zj + zk) * (SparseOperator::identity(s) - zz);
}

}  // namespace detail

/// Build a catalog model. `params` must contain every name listed by
/// model_parameters(id); extra keys are rejected.
inline LindbladModel build_model(const std::string& id, int L, Boundary boundary, const std::map<std::string, double>& params) {
    const auto& names = model_parameters(id);
    for (const auto& n : names)
        if (!params.count(n)) throw std::invalid_argument("model '" + id + "': missing parameter '" + n + "'");
    for (const auto& [k, v] : params) {
        if (std::find(names.begin(), names.end(), k) == names.end())
            throw std::invalid_argument("model '" + id + "': unknown parameter '" + k + "'");
        if (!std::isfinite(v)) throw std::invalid_argument("model '" + id + "': parameter '" + k + "' is not finite");
    }
    if (params.at("gamma") < 0) throw std::invalid_argument("model '" + id + "': gamma must be nonnegative");
    if ((id == "isolated-2") && L < 3) throw std::invalid_argument("model '" + id + "' needs L >= 3");

    const HilbertSpec s(L, model_local_dim(id), boundary);
    const double gamma = params.at("gamma");
    std::vector<Generator> gens;
    std::map<std::string, double> couplings, rates;
    auto add = [&](std::string family, int j, SparseOperator op, Role role, double coupling, double rate) {
        std::string label = j > 0 ? family + "_" + std::to_string(j) : family;
        if (acts_in_hamiltonian(role)) couplings[label] = coupling;
        if (acts_as_jump(role)) rates[label] = rate;
        gens.push_back({label, std::move(family), std::move(op), role});
    };
    auto p = [&](const char* n) { return params.at(n); };
    const auto pauli = [&](LocalKind k) { return local_operator(k, 2); };

    if (id == "full" || id == "z2" || id == "double-z2") {
        for (int j : detail::bond_starts(s, 2)) add("xx", j, embed({{j, pauli(LocalKind::x)}, {j + 1, pauli(LocalKind::x)}}, s), Role::hamiltonian, p("J"), 0);
        if (id == "full") {
            for (int j = 1; j <= L; ++j) add("x", j, embed_site(j, "x", s), Role::hamiltonian, p("hx"), 0);
            for (int j = 1; j <= L; ++j) add("z", j, embed_site(j, "z", s), Role::jump, 0, gamma);
        } else if (id == "z2") {
            for (int j = 1; j <= L; ++j) add("z", j, embed_site(j, "z", s), Role::both, p("h"), gamma);
        } else {
            for (int j : detail::bond_starts(s, 2))
                add("zz", j, embed({{j, pauli(LocalKind::z)}, {j + 1, pauli(LocalKind::z)}}, s), Role::both, p("Jz"), gamma);
        }
    } else if (id == "u1" || id == "isolated-1") {
        for (int j : detail::bond_starts(s, 2)) add("exchange", j, detail::exchange(j, s), Role::hamiltonian, p("J"), 0);
        if (id == "isolated-1") {
            DenseMatrix one_minus_z = DenseMatrix::Identity(2, 2) - pauli(LocalKind::z);
            for (int j : detail::bond_starts(s, 2)) add("xf", j, embed({{j, pauli(LocalKind::x)}, {j + 1, one_minus_z}}, s), Role::hamiltonian, p("D"), 0);
            for (int j : detail::bond_starts(s, 2)) add("fx", j, embed({{j, one_minus_z}, {j + 1, pauli(LocalKind::x)}}, s), Role::hamiltonian, p("D"), 0);
        }
        for (int j = 1; j <= L; ++j) add("z", j, embed_site(j, "z", s), Role::both, p("h"), gamma);
    } else if (id == "isolated-2") {
        for (int j : detail::bond_starts(s, 2)) add("exchange", j, detail::exchange(j, s), Role::hamiltonian, -p("J"), 0);
        const DenseMatrix sp = pauli(LocalKind::plus), sm = pauli(LocalKind::minus);
        for (int j : detail::bond_starts(s, 3)) {
            auto t = embed({{j, sp}, {j + 1, sp}, {j + 2, sm}}, s);
            add("ppm", j, t + t.adjoint(), Role::hamiltonian, p("D"), 0);
        }
        for (int j = 1; j <= L; ++j) add("z", j, embed_site(j, "z", s), Role::jump, 0, gamma);
    } else {  // tower-1, tower-2
        const bool first = id == "tower-1";
        for (int j : detail::bond_starts(s, 2)) add("exchange", j, detail::exchange(j, s), first ? Role::hamiltonian : Role::jump, first ? p("J") : 0.0, gamma);
        for (int j = 1; j <= L; ++j) add("sz2", j, embed_site(j, "z2", s), first ? Role::jump : Role::hamiltonian, first ? 0.0 : p("D2"), gamma);
        for (int j : detail::bond_starts(s, 2)) add("dterm", j, detail::dterm(j, s), Role::hamiltonian, p("D"), 0);
        add("sztot", 0, site_sum("z", s), Role::hamiltonian, -p("h"), 0);
    }
    LindbladModel m{id, BondAlgebra(s, std::move(gens)), std::move(couplings), std::move(rates)};
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// States

struct ScarStateSpec {
    enum class Kind { ferro_up, ferro_down, tower, aqmbs };
    Kind kind = Kind::ferro_up;
    HilbertSpec spec;
    int n = 0;
    std::optional<double> k;  // aqmbs momentum; defaults to pi + 2 pi / L
};

inline double default_momentum(int L) { return kPi + 2.0 * kPi / L; }

/// Basis state from a pattern repeated until the chain is filled. Symbols:
/// 'u'/'d' for spin-1/2, '+'/'0'/'-' for spin-1.
inline DenseVector product_state(const HilbertSpec& spec, const std::string& pattern) {
    if (pattern.empty()) throw std::invalid_argument("product_state: empty pattern");
    std::vector<int> digits(spec.L);
    for (int j = 0; j < spec.L; ++j) {
        char c = pattern[static_cast<size_t>(j) % pattern.size()];
        int d = -1;
        if (spec.local_dim == 2) d = c == 'u' ? 0 : c == 'd' ? 1 : -1;
        else d = c == '+' ? 0 : c == '0' ? 1 : c == '-' ? 2 : -1;
        if (d < 0) throw std::invalid_argument(std::string("product_state: bad symbol '") + c + "' for local_dim " + std::to_string(spec.local_dim));
        digits[j] = d;
    }
    DenseVector v = DenseVector::Zero(spec.dim());
    v(spec.encode(digits)) = 1.0;
    return v;
}

/// J_k^+ = (1/2) sum_j e^{i k j} (S_j^+)^2, 1-based j.
inline SparseOperator bimagnon_creation(const HilbertSpec& spec, double k) {
    if (spec.local_dim != 3) throw std::invalid_argument("bimagnon_creation: needs spin-1");
    DenseMatrix sp = local_operator(LocalKind::plus, 3);
    DenseMatrix sp2 = 0.5 * sp * sp;
    auto out = SparseOperator::zero(spec);
    for (int j = 1; j <= spec.L; ++j) out = out + std::exp(kI * (k * j)) * embed_site(j, sp2, spec);
    return out;
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

inline DenseVector scar_state(const ScarStateSpec& st) {
    const HilbertSpec& s = st.spec;
    switch (st.kind) {
        case ScarStateSpec::Kind::ferro_up: return product_state(s, s.local_dim == 2 ? "u" : "+");
        case ScarStateSpec::Kind::ferro_down: return product_state(s, s.local_dim == 2 ? "d" : "-");
        case ScarStateSpec::Kind::tower: {
            if (s.local_dim != 3) throw std::invalid_argument("tower state needs spin-1");
            if (st.n < 0 || st.n > s.L) throw std::invalid_argument("tower state: n out of range");
            auto jp = bimagnon_creation(s, kPi);
            DenseVector v = product_state(s, "-");
            double factorial = 1.0;
            for (int i = 1; i <= st.n; ++i) {
                v = jp * v;
                factorial *= i;
            }
            return v / (factorial * std::sqrt(binomial(s.L, st.n)));
        }
        case ScarStateSpec::Kind::aqmbs: {
            if (s.local_dim != 3) throw std::invalid_argument("aqmbs state needs spin-1");
            if (st.n < 1 || st.n > s.L) throw std::invalid_argument("aqmbs state: n out of range");
            const double k = st.k.value_or(default_momentum(s.L));
            double m = (k - kPi) * s.L / (2.0 * kPi);
            if (std::abs(m - std::round(m)) > 1e-9) throw std::invalid_argument("aqmbs state: k must equal pi + 2 pi m / L");
            DenseVector v = bimagnon_creation(s, k) * scar_state({ScarStateSpec::Kind::tower, s, st.n - 1, std::nullopt});
            double norm = v.norm();
            if (norm < 1e-12) throw std::invalid_argument("aqmbs state: J_k^+ annihilates the tower state");
            return v / norm;
        }
    }
    throw std::invalid_argument("scar_state: bad kind");
}

struct SingletReport {
    bool passed = true;
    std::map<std::string, std::optional<double>> eigenvalues;  // nullopt marks failure
};

/// Checks whether `state` is a simultaneous eigenvector of every generator.
inline SingletReport singlet_check(const BondAlgebra& a, const DenseVector& state, double tol = 1e-10) {
    if (state.size() != a.spec().dim()) throw std::invalid_argument("singlet_check: state has wrong dimension");
    if (std::abs(state.norm() - 1.0) > 1e-10) throw std::invalid_argument("singlet_check: state is not normalized");
    SingletReport out;
    for (const auto& g : a.generators()) {
        DenseVector gv = g.op * state;
        double eps = state.dot(gv).real();
        if ((gv - eps * state).norm() < tol) {
            out.eigenvalues[g.label] = eps;
        } else {
            out.eigenvalues[g.label] = std::nullopt;
            out.passed = false;
        }
    }
    return out;
}

/// Dimension of the zero-magnetization sector of a spin-1 chain,
/// sum_k C(L, 2k) C(2k, k).
inline Index spin1_zero_sector_dim(int L) {
    double d = 0.0;
    for (int k = 0; 2 * k <= L; ++k) d += binomial(L, 2 * k) * binomial(2 * k, k);
    return static_cast<Index>(std::llround(d));
}

}  // namespace scarlab
