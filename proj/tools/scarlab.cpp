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

// Experiment runner. Each subcommand reads a JSON config, fills in defaults,
// and writes CSV (or a JSON report) whose '#' header echoes the effective
// config, its hash, the seed and the artifact version.
//
// Exit codes: 0 success, 2 invalid config or usage, 3 solver failure,
// 4 output I/O failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "scarlab/scarlab.hpp"

namespace {

using json = nlohmann::json;
using namespace scarlab;

constexpr const char* kArtifactVersion = "0.1.0";

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct OutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// Config access. Every getter writes the default it applies back into the
// object so that the echoed config is the effective one.

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

json& require(json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    return j[key];
}

double number(json& j, const char* key, const std::string& where, std::optional<double> def = std::nullopt) {
    if (!j.contains(key)) {
        if (!def) throw ConfigError(where + ": missing key '" + key + "'");
        j[key] = *def;
    }
    if (!j[key].is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
    double v = j[key].get<double>();
    if (!std::isfinite(v)) throw ConfigError(where + ": '" + key + "' must be finite");
    return v;
}

long integer(json& j, const char* key, const std::string& where, std::optional<long> def = std::nullopt) {
    if (!j.contains(key)) {
        if (!def) throw ConfigError(where + ": missing key '" + key + "'");
        j[key] = *def;
    }
    if (!j[key].is_number_integer()) throw ConfigError(where + ": '" + key + "' must be an integer");
    return j[key].get<long>();
}

std::string text(json& j, const char* key, const std::string& where, std::optional<std::string> def = std::nullopt) {
    if (!j.contains(key)) {
        if (!def) throw ConfigError(where + ": missing key '" + key + "'");
        j[key] = *def;
    }
    if (!j[key].is_string()) throw ConfigError(where + ": '" + key + "' must be a string");
    return j[key].get<std::string>();
}

struct ModelChoice {
    std::string id;
    std::map<std::string, double> params;
};

ModelChoice parse_model(json& cfg) {
    json& m = require(cfg, "model", "config");
    allow_keys(m, {"id", "params"}, "model");
    ModelChoice out;
    out.id = text(m, "id", "model");
    json& p = require(m, "params", "model");
    if (!p.is_object()) throw ConfigError("model.params: expected an object");
    for (const auto& [k, v] : p.items()) {
        if (!v.is_number()) throw ConfigError("model.params: '" + k + "' must be a number");
        out.params[k] = v.get<double>();
    }
    model_parameters(out.id);  // rejects unknown ids
    return out;
}

int parse_L(json& cfg) {
    long L = integer(cfg, "L", "config");
    if (L < 2 || L > 16) throw ConfigError("config: L must lie in [2, 16]");
    return static_cast<int>(L);
}

Boundary parse_bc(json& cfg) {
    std::string b = text(cfg, "boundary", "config", "open");
    try {
        return parse_boundary(b);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::vector<int> parse_sizes(json& cfg) {
    json& ls = require(cfg, "Ls", "config");
    if (!ls.is_array() || ls.empty()) throw ConfigError("config: 'Ls' must be a non-empty array");
    std::vector<int> out;
    for (const auto& v : ls) {
        if (!v.is_number_integer() || v.get<int>() < 2 || v.get<int>() > 16) throw ConfigError("config: 'Ls' entries must be integers in [2, 16]");
        out.push_back(v.get<int>());
    }
    return out;
}

std::vector<double> parse_times(json& cfg) {
    json& t = require(cfg, "times", "config");
    std::vector<double> out;
    if (t.is_array()) {
        for (const auto& v : t) {
            if (!v.is_number()) throw ConfigError("times: entries must be numbers");
            out.push_back(v.get<double>());
        }
    } else {
        allow_keys(t, {"start", "stop", "count"}, "times");
        double a = number(t, "start", "times", 0.0), b = number(t, "stop", "times");
        long n = integer(t, "count", "times");
        if (n < 2) throw ConfigError("times: count must be at least 2");
        for (long i = 0; i < n; ++i) out.push_back(i == n - 1 ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    try {
        check_times(out);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("times: ") + e.what());
    }
    return out;
}

ScarStateSpec::Kind parse_kind(const std::string& k) {
    if (k == "ferro_up") return ScarStateSpec::Kind::ferro_up;
    if (k == "ferro_down") return ScarStateSpec::Kind::ferro_down;
    if (k == "tower") return ScarStateSpec::Kind::tower;
    if (k == "aqmbs") return ScarStateSpec::Kind::aqmbs;
    throw ConfigError("state: unknown kind '" + k + "'");
}

/// {"kind": "product", "pattern": "ud"} or a scar-state kind with n (and k).
DenseVector parse_state(json& s, const HilbertSpec& spec, const std::string& where) {
    allow_keys(s, {"kind", "pattern", "n", "k"}, where);
    std::string kind = text(s, "kind", where);
    if (kind == "product") return product_state(spec, text(s, "pattern", where));
    ScarStateSpec st{parse_kind(kind), spec, static_cast<int>(integer(s, "n", where, 0)), std::nullopt};
    if (s.contains("k")) st.k = number(s, "k", where);
    return scar_state(st);
}

SparseOperator parse_observable(json& cfg, const HilbertSpec& spec) {
    if (!cfg.contains("observable")) cfg["observable"] = json{{"op", "z"}, {"site", spec.L / 2}};
    json& o = cfg["observable"];
    allow_keys(o, {"op", "site"}, "observable");
    std::string op = text(o, "op", "observable");
    if (o.contains("site") && o["site"].is_string()) {
        if (o["site"] != "sum") throw ConfigError("observable: site must be an integer or \"sum\"");
        return site_sum(op, spec);
    }
    long site = integer(o, "site", "observable", spec.L / 2);
    if (site < 1 || site > spec.L) throw ConfigError("observable: site out of range");
    return embed_site(static_cast<int>(site), op, spec);
}

// ---------------------------------------------------------------------------
// Output

struct Output {
    std::string command;
    json config;
    std::uint64_t seed = 0;
    std::vector<std::string> notes;  // extra '#' lines
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::string csv() const {
        std::ostringstream os;
        const std::string dump = config.dump();
        os << "# scarlab " << kArtifactVersion << "\n";
        os << "# command: " << command << "\n";
        os << "# config_hash: fnv1a64:" << hex(fnv1a(dump)) << "\n";
        os << "# seed: " << seed << "\n";
        os << "# config: " << dump << "\n";
        for (const auto& n : notes) os << "# " << n << "\n";
        for (size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
        os << "\n";
        for (const auto& r : rows) {
            for (size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << fmt(r[c]);
            os << "\n";
        }
        return os.str();
    }
};

json report_header(const std::string& command, const json& config, std::uint64_t seed) {
    return json{{"artifact_version", kArtifactVersion}, {"command", command}, {"config_hash", "fnv1a64:" + hex(fnv1a(config.dump()))},
                {"seed", seed},
                {"config", config}};
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        if (!std::cout) throw OutputError("failed writing to standard output");
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw OutputError("cannot open output file '" + path + "'");
    f << text;
    f.close();
    if (!f) throw OutputError("failed writing output file '" + path + "'");
}

// json numbers for reports: NaN/inf become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json num(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Subcommands

struct Context {
    json config;
    std::uint64_t seed = 1;
    int threads = 1;
};

std::string cmd_commutant(Context& ctx) {
    json& cfg = ctx.config;
    allow_keys(cfg, {"experiment", "model", "L", "boundary", "seed", "method", "irreps"}, "config");
    auto mc = parse_model(cfg);
    int L = parse_L(cfg);
    Boundary bc = parse_bc(cfg);
    std::string method = text(cfg, "method", "config", "reduced");
    if (method != "reduced" && method != "super-hamiltonian") throw ConfigError("config: method must be reduced or super-hamiltonian");
    if (!cfg.contains("irreps")) cfg["irreps"] = true;
    if (!cfg["irreps"].is_boolean()) throw ConfigError("config: irreps must be a boolean");

    auto model = build_model(mc.id, L, bc, mc.params);
    CommutantBasis c = method == "reduced" ? commutant_basis(model.algebra, 1e-10, ctx.seed) : super_hamiltonian_kernel(model.algebra);
    json rep = report_header("commutant", cfg, ctx.seed);
    rep["hilbert_dim"] = model.spec().dim();
    rep["dim_commutant"] = c.dim();
    rep["method"] = c.method;
    rep["kernel_tol"] = c.kernel_tol;
    rep["gap"] = num(c.gap);
    if (cfg["irreps"].get<bool>()) {
        auto d = irrep_decomposition(model.algebra, c, ctx.seed);
        json blocks = json::array();
        Index sum_dd = 0, sum_d2 = 0;
        for (const auto& b : d.blocks) {
            blocks.push_back({{"lambda", b.label}, {"D", b.krylov_dim}, {"d", b.multiplicity}});
            sum_dd += b.krylov_dim * b.multiplicity;
            sum_d2 += b.multiplicity * b.multiplicity;
        }
        rep["blocks"] = blocks;
        rep["sum_D_d"] = sum_dd;
        rep["sum_d_squared"] = sum_d2;
        rep["sum_D_d_matches_dim"] = sum_dd == model.spec().dim();
        rep["sum_d_squared_matches_dim_commutant"] = sum_d2 == c.dim();
        rep["attempts"] = d.attempts;
    }
    return rep.dump(2) + "\n";
}

std::string cmd_evolve(Context& ctx) {
    json& cfg = ctx.config;
    allow_keys(cfg, {"experiment", "model", "L", "boundary", "seed", "initial_state", "times", "observable", "method", "sector"}, "config");
    auto mc = parse_model(cfg);
    int L = parse_L(cfg);
    Boundary bc = parse_bc(cfg);
    auto model = build_model(mc.id, L, bc, mc.params);
    const HilbertSpec& s = model.spec();
    DenseVector psi = parse_state(require(cfg, "initial_state", "config"), s, "initial_state");
    auto times = parse_times(cfg);
    SparseOperator obs = parse_observable(cfg, s);
    if (!cfg.contains("method")) cfg["method"] = json{{"kind", "exact"}};
    json& meth = cfg["method"];
    allow_keys(meth, {"kind", "n_traj", "dt"}, "method");
    std::string kind = text(meth, "kind", "method");
    if (kind != "exact" && kind != "trajectories") throw ConfigError("method: kind must be exact or trajectories");

    std::optional<int> sector;
    if (!cfg.contains("sector")) cfg["sector"] = "auto";
    if (cfg["sector"].is_string()) {
        if (cfg["sector"] != "auto") throw ConfigError("config: sector must be an integer, null or \"auto\"");
        auto m = state_magnetization(s, psi);
        if (m && model.algebra.conserves_magnetization()) sector = *m;
    } else if (cfg["sector"].is_number_integer()) {
        sector = cfg["sector"].get<int>();
    } else if (!cfg["sector"].is_null()) {
        throw ConfigError("config: sector must be an integer, null or \"auto\"");
    }

    Output out{"evolve", cfg, ctx.seed};
    if (kind == "exact") {
        WorkingBasis basis = sector ? WorkingBasis::sector(s, *sector) : WorkingBasis::whole(s);
        auto r = evolve_exact(model, pure_density(basis.restrict_vector(psi)), times, sector);
        auto o = expectation_series(r, obs);
        auto f = fidelity_series(r, psi);
        out.notes.push_back("method: " + r.method + (sector ? ", sector M=" + std::to_string(*sector) : ""));
        auto po = plateau(o), pf = plateau(f);
        out.notes.push_back("plateau observable: mean=" + fmt(po.mean) + " spread=" + fmt(po.spread));
        out.notes.push_back("plateau fidelity: mean=" + fmt(pf.mean) + " spread=" + fmt(pf.spread));
        out.columns = {"time", "observable", "fidelity"};
        for (size_t i = 0; i < times.size(); ++i) out.rows.push_back({times[i], o[i], f[i]});
    } else {
        TrajectoryOptions opt;
        opt.n_traj = static_cast<int>(integer(meth, "n_traj", "method", 500));
        opt.dt = number(meth, "dt", "method", 1e-3);
        opt.seed = ctx.seed;
        opt.threads = ctx.threads;
        opt.sector = sector;
        out.config = cfg;
        auto r = evolve_trajectories(model, psi, times, {{"observable", obs}}, opt);
        out.notes.push_back("method: trajectories, n_traj=" + std::to_string(r.n_traj) + (sector ? ", sector M=" + std::to_string(*sector) : ""));
        for (const auto& name : {"observable", "fidelity"}) {
            const auto& p = r.plateaus.at(name);
            out.notes.push_back(std::string("plateau ") + name + ": mean=" + fmt(p.mean) + " stderr=" + fmt(p.stderr_) + " spread=" + fmt(p.spread));
        }
        for (const auto& w : r.warnings) out.notes.push_back("warning: " + w);
        out.columns = {"time", "observable", "observable_stderr", "fidelity", "fidelity_stderr"};
        for (size_t i = 0; i < times.size(); ++i)
            out.rows.push_back({times[i], r.mean.at("observable")[i], r.stderr_.at("observable")[i], r.mean.at("fidelity")[i], r.stderr_.at("fidelity")[i]});
    }
    out.config = cfg;
    return out.csv();
}

std::string cmd_collapse(Context& ctx) {
    json& cfg = ctx.config;
    allow_keys(cfg, {"experiment", "model", "Ls", "boundary", "seed", "n", "k", "scaling", "x_max", "points", "threshold"}, "config");
    auto mc = parse_model(cfg);
    auto sizes = parse_sizes(cfg);
    Boundary bc = parse_bc(cfg);
    int n = static_cast<int>(integer(cfg, "n", "config", 1));
    std::optional<double> k;
    if (cfg.contains("k")) k = number(cfg, "k", "config");
    Scaling sc;
    try {
        sc = parse_scaling(text(cfg, "scaling", "config", mc.id == "tower-2" ? "t/L2" : "t2/L2"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    double x_max = number(cfg, "x_max", "config");
    int points = static_cast<int>(integer(cfg, "points", "config", 200));
    double threshold = number(cfg, "threshold", "config", 0.8);

    auto run = fidelity_collapse(mc.id, mc.params, sizes, bc, n, k, sc, x_max, points, threshold);
    Output out{"collapse", cfg, ctx.seed};
    out.notes.push_back("scaling: " + to_string(sc));
    out.notes.push_back("collapse_metric (max pairwise |dF| where every curve has F >= " + short_fmt(threshold) + "): " + fmt(run.metric.all_above) +
                        " over " + std::to_string(run.metric.points_all) + " grid points");
    out.notes.push_back("collapse_metric_any (where some curve has F >= " + short_fmt(threshold) + "): " + fmt(run.metric.any_above));
    out.columns = {"x", "fidelity", "L"};
    for (size_t c = 0; c < sizes.size(); ++c)
        for (size_t i = 0; i < run.x.size(); ++i) out.rows.push_back({run.x[i], run.fidelity[c][i], static_cast<double>(sizes[c])});
    return out.csv();
}

std::string cmd_coherence(Context& ctx) {
    json& cfg = ctx.config;
    allow_keys(cfg, {"experiment", "model", "L", "boundary", "seed", "mode", "times", "n0", "k", "scar", "partner"}, "config");
    auto mc = parse_model(cfg);
    int L = parse_L(cfg);
    Boundary bc = parse_bc(cfg);
    std::string mode = text(cfg, "mode", "config");
    auto times = parse_times(cfg);
    auto model = build_model(mc.id, L, bc, mc.params);
    Output out{"coherence", cfg, ctx.seed};
    CoherenceRun run;
    if (mode == "exact-law") {
        int n0 = static_cast<int>(integer(cfg, "n0", "config", L / 2));
        std::optional<double> k;
        if (cfg.contains("k")) k = number(cfg, "k", "config");
        run = tower_coherence_law(model, n0, k, times, RkOptions{1e-12, 1e-14, 1e-4, 1e-14, 50'000'000});
        out.notes.push_back("reference: exact law 1/4 exp(-rate t), rate=" + fmt(run.rate));
    } else if (mode == "dephasing-bound") {
        std::string scar = text(cfg, "scar", "config", "ferro_up");
        if (scar != "ferro_up" && scar != "ferro_down") throw ConfigError("config: scar must be ferro_up or ferro_down");
        DenseVector sv = scar_state({parse_kind(scar), model.spec(), 0, std::nullopt});
        if (!cfg.contains("partner")) cfg["partner"] = json{{"kind", "product"}, {"pattern", "ud"}};
        DenseVector partner = parse_state(cfg["partner"], model.spec(), "partner");
        run = dephasing_coherence_bound(model, sv, partner, times);
        out.notes.push_back("reference: upper bound c0 exp(-g t), g=" + fmt(run.rate));
    } else {
        throw ConfigError("config: mode must be exact-law or dephasing-bound");
    }
    out.config = cfg;
    out.columns = {"time", "coherence", "reference"};
    for (size_t i = 0; i < times.size(); ++i) out.rows.push_back({times[i], run.coherence[i], run.reference[i]});
    return out.csv();
}

std::string cmd_brownian(Context& ctx) {
    json& cfg = ctx.config;
    allow_keys(cfg, {"experiment", "model", "L", "boundary", "seed", "k", "gamma", "variances", "rates", "observable", "times", "epsilon",
                     "n_samples"},
               "config");
    auto mc = parse_model(cfg);
    int L = parse_L(cfg);
    Boundary bc = parse_bc(cfg);
    auto model = build_model(mc.id, L, bc, mc.params);
    double k = number(cfg, "k", "config", 0.1);
    double gamma = number(cfg, "gamma", "config", 0.2);
    BrownianSpec spec = uniform_brownian(model.algebra, k, gamma);
    for (const char* key : {"variances", "rates"}) {
        if (!cfg.contains(key)) continue;
        if (!cfg[key].is_object()) throw ConfigError(std::string("config: ") + key + " must be an object");
        auto& target = std::string(key) == "variances" ? spec.variances : spec.rates;
        for (const auto& [label, v] : cfg[key].items()) {
            if (!v.is_number()) throw ConfigError(std::string(key) + ": '" + label + "' must be a number");
            target[label] = v.get<double>();
        }
    }
    spec.epsilon = number(cfg, "epsilon", "config", 1e-2);
    spec.n_samples = static_cast<int>(integer(cfg, "n_samples", "config", 2000));
    spec.seed = ctx.seed;
    spec.threads = ctx.threads;
    spec.validate();
    SparseOperator obs = parse_observable(cfg, model.spec());
    auto times = parse_times(cfg);

    auto det = averaged_autocorrelation(spec, obs, times);
    auto smp = sample_circuit_autocorrelation(spec, obs, times);
    double mazur = mazur_bound(commutant_basis(model.algebra), obs);
    Output out{"brownian", cfg, ctx.seed};
    out.notes.push_back("stationary value from D_eff kernel: " + fmt(det.stationary));
    for (const auto& w : smp.warnings) out.notes.push_back("warning: " + w);
    out.columns = {"time", "sampled_mean", "stderr", "deterministic", "mazur_bound"};
    for (size_t i = 0; i < times.size(); ++i) out.rows.push_back({times[i], smp.mean[i], smp.stderr_[i], det.values[i], mazur});
    return out.csv();
}

std::string cmd_derivatives(Context& ctx) {
    json& cfg = ctx.config;
    allow_keys(cfg, {"experiment", "model", "Ls", "boundary", "seed", "state", "observable"}, "config");
    auto mc = parse_model(cfg);
    auto sizes = parse_sizes(cfg);
    Boundary bc = parse_bc(cfg);
    if (!cfg.contains("state")) cfg["state"] = json{{"kind", "aqmbs"}, {"n", 1}};
    json& st = cfg["state"];
    allow_keys(st, {"kind", "n", "k"}, "state");
    auto kind = parse_kind(text(st, "kind", "state"));
    int n = static_cast<int>(integer(st, "n", "state", 1));
    std::optional<double> k;
    if (st.contains("k")) k = number(st, "k", "state");
    if (!cfg.contains("observable")) cfg["observable"] = json{{"op", "z"}, {"site", "center"}};
    json& ob = cfg["observable"];
    allow_keys(ob, {"op", "site"}, "observable");
    std::string op = text(ob, "op", "observable");
    if (!(ob["site"].is_string() && ob["site"] == "center") && !ob["site"].is_number_integer())
        throw ConfigError("observable: site must be an integer or \"center\"");

    json rep = report_header("derivatives", cfg, ctx.seed);
    json rows = json::array();
    std::vector<double> bounds;
    for (int L : sizes) {
        auto model = build_model(mc.id, L, bc, mc.params);
        int site = ob["site"].is_string() ? L / 2 : ob["site"].get<int>();
        if (site < 1 || site > L) throw ConfigError("observable: site out of range");
        auto r = short_time_derivatives(model, {kind, model.spec(), n, k}, embed_site(site, op, model.spec()));
        bounds.push_back(r.observable_bound);
        rows.push_back({{"L", L},
                        {"first_numeric", num(r.first_numeric)},
                        {"first_closed", num(r.first_closed)},
                        {"first_asymptotic", num(r.first_asymptotic)},
                        {"second_numeric", num(r.second_numeric)},
                        {"second_closed", num(r.second_closed)},
                        {"second_asymptotic", num(r.second_asymptotic)},
                        {"l2_numeric", num(r.l2_numeric)},
                        {"l2_closed", num(r.l2_closed)},
                        {"observable_derivative", num(r.observable_derivative)},
                        {"observable_bound", num(r.observable_bound)},
                        {"observable_bound_closed", num(r.observable_bound_closed)},
                        {"observable_bound_asymptotic", num(r.observable_bound_asymptotic)}});
    }
    bool monotone = true;
    for (size_t i = 1; i < bounds.size(); ++i) monotone = monotone && bounds[i] < bounds[i - 1];
    rep["sizes"] = rows;
    rep["bound_monotone_decreasing"] = monotone;
    return rep.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scarlab: commutant algebras and open-system scars"};
    std::string config_path, out_path;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--out", out_path, "output file (default: standard output)");
    app.add_option("--seed", seed, "seed, overrides the config value");
    app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256));
    app.require_subcommand(1);
    const std::map<std::string, std::string (*)(Context&)> commands = {
        {"commutant", cmd_commutant}, {"evolve", cmd_evolve},     {"collapse", cmd_collapse},
        {"coherence", cmd_coherence}, {"brownian", cmd_brownian}, {"derivatives", cmd_derivatives},
    };
    for (const auto& [name, fn] : commands) app.add_subcommand(name)->fallthrough();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    Context ctx;
    ctx.threads = threads;
    try {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
        try {
            ctx.config = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!ctx.config.is_object()) throw ConfigError("config: expected a JSON object");
        if (ctx.config.contains("experiment") && !ctx.config["experiment"].is_string())
            throw ConfigError("config: experiment must be a string");
        if (seed) ctx.config["seed"] = *seed;
        if (!ctx.config.contains("seed")) ctx.config["seed"] = std::uint64_t{1};
        if (!ctx.config["seed"].is_number_unsigned()) throw ConfigError("config: seed must be a nonnegative integer");
        ctx.seed = ctx.config["seed"].get<std::uint64_t>();
        std::string text = commands.at(command)(ctx);
        emit(text, out_path);
    } catch (const OutputError& e) {
        std::cerr << "scarlab: output error: " << e.what() << "\n";
        return 4;
    } catch (const SolverError& e) {
        std::cerr << "scarlab: solver failure: " << e.what() << "\n";
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "scarlab: invalid config: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "scarlab: invalid config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "scarlab: solver failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
