#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cardylab/cardy.hpp"
#include "cardylab/ccs.hpp"
#include "cardylab/discana.hpp"
#include "cardylab/domain.hpp"
#include "cardylab/harris.hpp"
#include "cardylab/percolation.hpp"

namespace cardylab {

using json = nlohmann::ordered_json;

inline constexpr const char* kCodeVersion = "cardylab 0.1.0";

// ------------------------------------------------------------ config

struct ExperimentConfig {
    Generator domain{"square", {}};
    std::optional<std::array<Point, 4>> marks;  // replaces the generator's marked points
    std::vector<int> n_ladder{8, 16, 32, 64};
    std::uint64_t samples = 100000;
    std::map<int, std::uint64_t> samples_per_n;
    std::uint64_t seed = 20240611;
    double a1 = 0.1, a2 = 0.5, a3 = 0.1, a4 = 0.05, a5 = 0.6, a6 = 0.5;
    HarrisConfig harris;
    double eta = 1.0;  // auxiliary-point depth, in units of log n Harris segments
    std::array<double, 4> contour_box{0.25, 0.25, 0.75, 0.75};
    int test_grid = 7;  // interior test points per side for the Cauchy comparison
    std::string out_dir = "out";

    std::uint64_t samples_at(int n) const {
        auto it = samples_per_n.find(n);
        return it == samples_per_n.end() ? samples : it->second;
    }

    void validate() const {
        if (n_ladder.empty()) throw Error(ErrorCode::BAD_CONFIG, "empty n ladder");
        for (std::size_t i = 0; i < n_ladder.size(); ++i) {
            if (n_ladder[i] < 1) throw Error(ErrorCode::BAD_CONFIG, "n must be positive");
            if (i && n_ladder[i] <= n_ladder[i - 1]) throw Error(ErrorCode::BAD_CONFIG, "n ladder must be strictly increasing");
        }
        if (samples < 1) throw Error(ErrorCode::BAD_CONFIG, "samples must be positive");
        for (auto& [n, s] : samples_per_n)
            if (s < 1) throw Error(ErrorCode::BAD_CONFIG, "samples must be positive");
        for (double a : {a1, a2, a3, a4, a5, a6})
            if (!(a >= 0 && a < 1)) throw Error(ErrorCode::BAD_CONFIG, "exponents a1..a6 must lie in [0, 1)");
        harris.validate();
    }
};

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["domain"] = {{"name", c.domain.name}, {"params", c.domain.params}};
    if (c.marks) {
        json m = json::array();
        for (auto p : *c.marks) m.push_back({p.x, p.y});
        j["marks"] = m;
    }
    j["n_ladder"] = c.n_ladder;
    j["samples"] = c.samples;
    json spn = json::object();
    for (auto& [n, s] : c.samples_per_n) spn[std::to_string(n)] = s;
    j["samples_per_n"] = spn;
    j["seed"] = c.seed;
    j["exponents"] = {{"a1", c.a1}, {"a2", c.a2}, {"a3", c.a3}, {"a4", c.a4}, {"a5", c.a5}, {"a6", c.a6}};
    const auto& h = c.harris;
    j["harris"] = {{"theta", h.theta},   {"delta", h.margin()}, {"B", h.B},
                   {"r", h.r},           {"Gamma", h.Gamma},    {"max_rings", h.max_rings},
                   {"kappa", h.kappa},   {"samples_per_decision", h.samples_per_decision},
                   {"eta", c.eta}};
    j["contour_box"] = c.contour_box;
    j["test_grid"] = c.test_grid;
    return j;
}

// missing keys keep their defaults
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig c = {}) {
    try {
        if (j.contains("domain")) {
            c.domain.name = j["domain"].value("name", c.domain.name);
            if (j["domain"].contains("params")) c.domain.params = j["domain"]["params"].get<std::map<std::string, double>>();
        }
        if (j.contains("marks")) {
            std::array<Point, 4> m;
            for (int k = 0; k < 4; ++k) m[k] = {j["marks"][k][0].get<double>(), j["marks"][k][1].get<double>()};
            c.marks = m;
        }
        if (j.contains("n_ladder")) c.n_ladder = j["n_ladder"].get<std::vector<int>>();
        c.samples = j.value("samples", c.samples);
        if (j.contains("samples_per_n"))
            for (auto& [k, v] : j["samples_per_n"].items()) c.samples_per_n[std::stoi(k)] = v.get<std::uint64_t>();
        c.seed = j.value("seed", c.seed);
        if (j.contains("exponents")) {
            const auto& e = j["exponents"];
            c.a1 = e.value("a1", c.a1);
            c.a2 = e.value("a2", c.a2);
            c.a3 = e.value("a3", c.a3);
            c.a4 = e.value("a4", c.a4);
            c.a5 = e.value("a5", c.a5);
            c.a6 = e.value("a6", c.a6);
        }
        if (j.contains("harris")) {
            const auto& h = j["harris"];
            c.harris.theta = h.value("theta", c.harris.theta);
            c.harris.delta = h.value("delta", c.harris.delta);
            c.harris.B = h.value("B", c.harris.B);
            c.harris.r = h.value("r", c.harris.r);
            c.harris.Gamma = h.value("Gamma", c.harris.Gamma);
            c.harris.max_rings = h.value("max_rings", c.harris.max_rings);
            c.harris.kappa = h.value("kappa", c.harris.kappa);
            c.harris.samples_per_decision = h.value("samples_per_decision", c.harris.samples_per_decision);
            c.eta = h.value("eta", c.eta);
        }
        if (j.contains("contour_box")) c.contour_box = j["contour_box"].get<std::array<double, 4>>();
        c.test_grid = j.value("test_grid", c.test_grid);
        c.out_dir = j.value("out_dir", c.out_dir);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BAD_CONFIG, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BAD_CONFIG, std::string("config: ") + e.what());
    }
    return config_from_json(j, std::move(base));
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string config_hash(const ExperimentConfig& c) { return hex16(fnv1a(to_json(c).dump())); }

// per-experiment, per-scale stream
inline std::uint64_t derive_stream(std::uint64_t seed, const std::string& tag, int n) {
    return harris_detail::mix(seed ^ harris_detail::mix(fnv1a(tag) ^ std::uint64_t(n)));
}

inline ContinuumDomain config_domain(const ExperimentConfig& c) {
    auto dom = make_domain(c.domain);
    if (c.marks) dom.marked = *c.marks;
    return dom;
}

// the regularized lattice domain used by every experiment
inline DiscreteDomain discretize(const ExperimentConfig& c, int n) {
    return square_regularize(canonical_approximation(config_domain(c), n), c.a1);
}

// ------------------------------------------------------------ output

struct Assertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

class RunOutput {
public:
    RunOutput(const ExperimentConfig& cfg, std::string command)
        : cfg_(cfg), command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
        dir_ = std::filesystem::path(cfg.out_dir) / (command_ + "-" + config_hash(cfg));
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw Error(ErrorCode::IO_ERROR, "cannot create " + dir_.string());
    }

    void write(const std::string& name, const std::string& body) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw Error(ErrorCode::IO_ERROR, "cannot write " + (dir_ / name).string());
        out << body;
        files_.push_back(name);
    }
    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    void check(std::string name, bool pass, std::string detail = {}) {
        assertions_.push_back({std::move(name), pass, std::move(detail)});
    }
    const std::vector<Assertion>& assertions() const { return assertions_; }
    bool all_passed() const {
        return std::all_of(assertions_.begin(), assertions_.end(), [](auto& a) { return a.pass; });
    }
    const std::filesystem::path& dir() const { return dir_; }

    // manifest and assertion report are deterministic; wall-clock goes to timing.txt only
    void finish(const std::vector<std::uint64_t>& streams = {}) {
        json a = json::array();
        for (auto& x : assertions_) a.push_back({{"name", x.name}, {"pass", x.pass}, {"detail", x.detail}});
        write_json("assertions.json", a);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        {
            std::ofstream t(dir_ / "timing.txt");
            t << "wall_clock_seconds " << secs << "\n";
        }
        json m;
        m["command"] = command_;
        m["config_hash"] = config_hash(cfg_);
        m["code_version"] = kCodeVersion;
        m["config"] = to_json(cfg_);
        m["rng"] = {{"generator", "philox4x32-10"}, {"seed", cfg_.seed}, {"streams", streams}};
        m["files"] = files_;
        m["wall_clock"] = "timing.txt";
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        out << m.dump(2) << "\n";
    }

private:
    ExperimentConfig cfg_;
    std::string command_;
    std::filesystem::path dir_;
    std::vector<std::string> files_;
    std::vector<Assertion> assertions_;
    std::chrono::steady_clock::time_point start_;
};

inline std::string fmt(double v) { return format_double(v); }

// ------------------------------------------------------------ discretize

inline json domain_summary(const DiscreteDomain& d) {
    json j;
    j["n"] = d.n;
    j["kind"] = to_string(d.kind);
    j["cells"] = d.size();
    j["vertices"] = d.vertices.size();
    j["boundary_edges"] = d.boundary.size();
    json m = json::array();
    for (int k = 0; k < 4; ++k) {
        Point p = to_point(d.marked[k], d.n);
        m.push_back({p.x, p.y});
    }
    j["marked"] = m;
    j["relocated"] = d.relocated;
    return j;
}

inline int cmd_discretize(const ExperimentConfig& cfg) {
    RunOutput out(cfg, "discretize");
    json all = json::array();
    std::ostringstream cells;
    cells << "n,kind,q,r,x,y\n";
    for (int n : cfg.n_ladder) {
        auto canon = canonical_approximation(config_domain(cfg), n);
        auto reg = square_regularize(canon, cfg.a1);
        all.push_back({{"canonical", domain_summary(canon)}, {"regularized", domain_summary(reg)}});
        for (const auto* d : {&canon, &reg})
            for (auto h : d->cells) {
                Point p = cell_center(h, n);
                cells << n << ',' << to_string(d->kind) << ',' << h.q << ',' << h.r << ',' << fmt(p.x) << ',' << fmt(p.y) << '\n';
            }
        out.check("nonempty n=" + std::to_string(n), reg.size() > 0);
    }
    out.write_json("domains.json", all);
    out.write("cells.csv", cells.str());
    out.finish();
    return out.all_passed() ? 0 : 2;
}

// ------------------------------------------------------------ crossing at A

struct CrossingAtA {
    int n = 0;
    int cells = 0;
    ProbEstimate c_n;
};

// The S_D(A) event with witness A is exactly a yellow crossing from [C,D] to [D,A] u [A,B]: any such
// crossing landing on [A,B] separates A from [B,C], and one landing on [D,A] never does unless another
// lands on [A,B]. The arc query samples the same colorings and is far cheaper.
inline CrossingAtA crossing_at_A(const DiscreteDomain& d, std::uint64_t samples, std::uint64_t stream) {
    return {d.n, d.size(), estimate(d, arc_query(d, ARC_CD, ARC_AB), samples, stream)};
}

inline int cmd_estimate(const ExperimentConfig& cfg) {
    RunOutput out(cfg, "estimate");
    std::ostringstream csv;
    csv << "n,cells,samples,c_n,c_n_err,sB,sB_err,sC,sC_err,sD,sD_err\n";
    std::vector<std::uint64_t> streams;
    for (int n : cfg.n_ladder) {
        auto d = discretize(cfg, n);
        int a = d.find_vertex(d.marked[0]);
        auto s = derive_stream(cfg.seed, "estimate", n);
        streams.push_back(s);
        auto f = estimate_ccs(d, {a}, cfg.samples_at(n), s);
        auto c = crossing_probability(f, a);
        csv << n << ',' << d.size() << ',' << cfg.samples_at(n) << ',' << fmt(c.c_n) << ',' << fmt(c.stderr_) << ','
            << fmt(f.sB[0].mean) << ',' << fmt(f.sB[0].stderr_) << ',' << fmt(f.sC[0].mean) << ',' << fmt(f.sC[0].stderr_)
            << ',' << fmt(f.sD[0].mean) << ',' << fmt(f.sD[0].stderr_) << '\n';
        out.check("S_C(A)=0 n=" + std::to_string(n), f.sC[0].hits == 0);
    }
    out.write("estimate.csv", csv.str());
    out.finish(streams);
    return out.all_passed() ? 0 : 2;
}

// ------------------------------------------------------------ convergence

struct ConvergenceResult {
    CInfinity cinf;
    std::vector<CrossingAtA> runs;
    RateReport rate;
    std::string fit_error;
};

inline ConvergenceResult run_convergence(const ExperimentConfig& cfg) {
    ConvergenceResult r;
    r.cinf = c_infinity(config_domain(cfg));
    if (!r.cinf.supported) throw Error(ErrorCode::UNSUPPORTED_CINF, "no closed-form limit for " + cfg.domain.name);
    std::vector<PowerPoint> pts;
    for (int n : cfg.n_ladder) {
        auto d = discretize(cfg, n);
        r.runs.push_back(crossing_at_A(d, cfg.samples_at(n), derive_stream(cfg.seed, "convergence", n)));
        const auto& c = r.runs.back().c_n;
        pts.push_back({n, std::fabs(c.mean - r.cinf.value), c.stderr_});
    }
    try {
        r.rate = power_law_fit(pts, derive_stream(cfg.seed, "psi-fit", 0));
    } catch (const Error& e) {
        r.fit_error = std::string(to_string(e.code())) + ": " + e.what();
        r.rate = {};
        for (auto& p : pts) {
            r.rate.n_values.push_back(p.n);
            r.rate.errors.push_back(p.value);
            r.rate.stderrs.push_back(p.stderr_);
            r.rate.noise_flags.push_back(!(p.value > 3 * p.stderr_));
        }
    }
    return r;
}

inline json to_json(const RateReport& r) {
    json j;
    j["n_values"] = r.n_values;
    j["errors"] = r.errors;
    j["stderrs"] = r.stderrs;
    j["noise_flags"] = r.noise_flags;
    j["psi_hat"] = std::isfinite(r.psi_hat) ? json(r.psi_hat) : json(nullptr);
    j["ci"] = std::isfinite(r.ci.lo) ? json({r.ci.lo, r.ci.hi}) : json(nullptr);
    j["used_points"] = r.used;
    return j;
}

inline int cmd_convergence(const ExperimentConfig& cfg) {
    RunOutput out(cfg, "convergence");
    auto r = run_convergence(cfg);
    std::ostringstream csv;
    csv << "n,cells,samples,c_n,c_n_err,c_inf,abs_error\n";
    for (auto& x : r.runs)
        csv << x.n << ',' << x.cells << ',' << x.c_n.samples << ',' << fmt(x.c_n.mean) << ',' << fmt(x.c_n.stderr_) << ','
            << fmt(r.cinf.value) << ',' << fmt(std::fabs(x.c_n.mean - r.cinf.value)) << '\n';
    out.write("convergence.csv", csv.str());
    json j = to_json(r.rate);
    j["c_inf"] = r.cinf.value;
    if (!r.fit_error.empty()) j["fit_error"] = r.fit_error;
    out.write_json("rate.json", j);
    out.check("psi fit", r.fit_error.empty() && r.rate.psi_hat > 0 && r.rate.ci.lo > 0, r.fit_error);
    out.finish();
    return out.all_passed() ? 0 : 2;
}

// ------------------------------------------------------------ regularization

inline int cmd_regularization(const ExperimentConfig& cfg) {
    RunOutput out(cfg, "regularize");
    std::ostringstream csv;
    csv << "n,canonical_cells,regularized_cells,s_canonical,s_canonical_err,s_regularized,s_regularized_err,difference,mouth_relocation\n";
    for (int n : cfg.n_ladder) {
        auto canon = canonical_approximation(config_domain(cfg), n);
        auto reg = square_regularize(canon, cfg.a1);
        auto s = derive_stream(cfg.seed, "regularize", n);
        auto a = crossing_at_A(canon, cfg.samples_at(n), s);
        auto b = crossing_at_A(reg, cfg.samples_at(n), s);
        bool moved = std::any_of(reg.relocated.begin(), reg.relocated.end(), [](bool x) { return x; });
        csv << n << ',' << canon.size() << ',' << reg.size() << ',' << fmt(a.c_n.mean) << ',' << fmt(a.c_n.stderr_) << ','
            << fmt(b.c_n.mean) << ',' << fmt(b.c_n.stderr_) << ',' << fmt(b.c_n.mean - a.c_n.mean) << ','
            << (moved ? "MOUTH_RELOCATION" : "") << '\n';
    }
    out.write("regularization.csv", csv.str());
    out.finish();
    return 0;
}

// ------------------------------------------------------------ shared field runs

struct ScaleField {
    int n = 0;
    DiscreteDomain dom;
    LatticeContour boundary;      // domain contour
    LatticeContour sigma;         // fixed macroscopic contour
    std::vector<int> test_vertices;
    CcsField field;               // at boundary, sigma-contour and test vertices
    ContourRun sigma_run;
};

// interior test points: a grid over the contour box, kept where the continuum distance to the
// boundary exceeds n0^-a5 (n0 the smallest scale that uses them)
inline std::vector<Point> interior_points(const ExperimentConfig& cfg, int n0) {
    auto dom = config_domain(cfg);
    const double thr = std::pow(double(n0), -cfg.a5);
    Rect br = bounding_rect(dom.boundary);
    std::vector<Point> out;
    const int g = cfg.test_grid;
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            Point p{br.x0 + (br.x1 - br.x0) * (i + 1.0) / (g + 1), br.y0 + (br.y1 - br.y0) * (j + 1.0) / (g + 1)};
            if (point_in_polygon(dom.boundary, p) != 1) continue;
            double m = 1e300;
            for (std::size_t k = 0; k < dom.boundary.size(); ++k) {
                Point a = dom.boundary[k], b = dom.boundary[(k + 1) % dom.boundary.size()];
                Point ab = b - a;
                double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
                m = std::min(m, norm(p - (a + t * ab)));
            }
            if (m > thr) out.push_back(p);
        }
    return out;
}

inline int nearest_vertex(const DiscreteDomain& d, Point p) {
    int best = 0;
    for (int v = 1; v < int(d.vertices.size()); ++v)
        if (norm(d.vertex_point(v) - p) < norm(d.vertex_point(best) - p) - 1e-12) best = v;
    return best;
}

// keep points whose snapped vertex clears n^-a5 from the lattice boundary at every listed scale
inline std::vector<Point> clear_of_boundary(const ExperimentConfig& cfg, const std::vector<Point>& pts, const std::vector<int>& scales) {
    std::vector<Point> out = pts;
    for (int n : scales) {
        auto d = discretize(cfg, n);
        auto c = domain_contour(d);
        VertexField zero;
        for (auto v : c.ring()) zero[v] = 0;
        CauchyExtension ext(c, zero);
        const double thr = std::pow(double(n), -cfg.a5);
        std::vector<Point> keep;
        for (auto p : out)
            if (ext.distance_to_contour(to_cplx(d.vertex_point(nearest_vertex(d, p)))) > thr) keep.push_back(p);
        out = std::move(keep);
    }
    return out;
}

inline LatticeContour sigma_contour(const ExperimentConfig& cfg, const DiscreteDomain& d) {
    auto& b = cfg.contour_box;
    auto cells = cells_in_box(d, b[0], b[1], b[2], b[3]);
    return outer_contour(cells, d.n);
}

inline ScaleField run_scale_field(const ExperimentConfig& cfg, int n, const std::vector<Point>& test_points) {
    ScaleField s;
    s.n = n;
    s.dom = discretize(cfg, n);
    s.boundary = domain_contour(s.dom);
    s.sigma = sigma_contour(cfg, s.dom);
    std::vector<int> pts;
    std::unordered_map<int, int> slot;
    auto add = [&](int v) {
        if (slot.emplace(v, int(pts.size())).second) pts.push_back(v);
        return slot[v];
    };
    for (auto v : s.boundary.ring()) add(s.dom.find_vertex(v));
    std::vector<int> sig_idx;
    for (auto v : s.sigma.ring()) sig_idx.push_back(add(s.dom.find_vertex(v)));
    for (auto p : test_points) {
        int v = nearest_vertex(s.dom, p);
        s.test_vertices.push_back(v);
        add(v);
    }
    // contour integral of S_n as one per-sample functional, so its error bar is exact
    std::vector<cplx> w(pts.size(), 0), cw = contour_weights(s.sigma);
    for (std::size_t i = 0; i < sig_idx.size(); ++i) w[sig_idx[i]] += cw[i];
    CcsOptions opt;
    opt.functionals.push_back(LinearFunctional::of_sn(w));
    s.field = estimate_ccs(s.dom, pts, cfg.samples_at(n), derive_stream(cfg.seed, "field", n), opt);
    s.sigma_run = {n, s.field.functionals[0]};
    return s;
}

inline VertexField boundary_field(const ScaleField& s) {
    VertexField f;
    for (auto v : s.boundary.ring()) {
        int i = s.field.index_of(s.dom.find_vertex(v));
        f[v] = s.field.sn[i];
    }
    return f;
}

// ------------------------------------------------------------ sigma-holomorphicity

struct SigmaResult {
    std::vector<ContourRun> runs;
    std::vector<std::size_t> contour_edges;
    ExponentFit fit;
};

inline SigmaResult sigma_from_fields(const std::vector<ScaleField>& fields, std::uint64_t stream) {
    SigmaResult r;
    for (auto& f : fields) {
        r.runs.push_back(f.sigma_run);
        r.contour_edges.push_back(f.sigma.edge_count());
    }
    try {
        r.fit = rho_fit(r.runs, stream);
    } catch (const Error& e) {
        r.fit = {};
        r.fit.verdict = FitVerdict::DEGENERATE;
        r.fit.note = std::string(to_string(e.code())) + ": " + e.what();
    }
    return r;
}

inline json to_json(const ExponentFit& f) {
    json j;
    j["verdict"] = to_string(f.verdict);
    j["exponent"] = std::isfinite(f.exponent) ? json(f.exponent) : json(nullptr);
    j["ci"] = std::isfinite(f.ci.lo) ? json({f.ci.lo, f.ci.hi}) : json(nullptr);
    j["note"] = f.note;
    return j;
}

inline bool sigma_pass(const SigmaResult& r) {
    if (r.fit.verdict == FitVerdict::MC_NOISE_DOMINATED) return true;
    return r.fit.verdict == FitVerdict::OK && r.fit.exponent > 0 && r.fit.ci.lo > 0 &&
           std::abs(r.runs.back().integral.mean) < std::abs(r.runs.front().integral.mean);
}

// ------------------------------------------------------------ Cauchy extension and winding

struct CauchyScale {
    int n = 0;
    double max_diff = 0, max_diff_err = 0;
    std::vector<Point> where;
    std::vector<double> diff, diff_err;
    double constant_error = 0, linear_error = 0;
};

inline CauchyScale cauchy_scale(const ScaleField& s) {
    CauchyScale c;
    c.n = s.n;
    CauchyExtension ext(s.boundary, boundary_field(s));
    VertexField one, ident;
    for (auto v : s.boundary.ring()) {
        one[v] = 1.0;
        ident[v] = vertex_z(v, s.n);
    }
    CauchyExtension e1(s.boundary, one), ez(s.boundary, ident);
    for (int v : s.test_vertices) {
        int i = s.field.index_of(v);
        cplx w = to_cplx(s.dom.vertex_point(v));
        double d = std::abs(ext.evaluate(w) - s.field.sn[i]);
        // error bar of S_n at the point; the boundary average in F carries far less noise
        double se = std::sqrt(std::pow(s.field.sB[i].stderr_, 2) + std::pow(s.field.sC[i].stderr_, 2) +
                              std::pow(s.field.sD[i].stderr_, 2));
        c.where.push_back(s.dom.vertex_point(v));
        c.diff.push_back(d);
        c.diff_err.push_back(se);
        if (d > c.max_diff) {
            c.max_diff = d;
            c.max_diff_err = se;
        }
        c.constant_error = std::max(c.constant_error, std::abs(e1.evaluate(w) - 1.0));
        c.linear_error = std::max(c.linear_error, std::abs(ez.evaluate(w) - w));
    }
    return c;
}

struct WindingResult {
    int n = 0;
    long offset = 0;
    double delta = 0;
    std::vector<cplx> points;
    std::vector<int> winding;
    bool all_one = false;
};

// points of the shrunken triangle on a barycentric grid, strictly inside
inline std::vector<cplx> triangle_points(double delta, int count) {
    std::vector<cplx> out;
    const cplx v[3] = {1.0 - delta, (1 - delta) * kTau, (1 - delta) * kTau2};
    for (int m = 2; int(out.size()) < count; ++m) {
        out.clear();
        for (int i = 1; i < m; ++i)
            for (int j = 1; i + j < m; ++j) {
                int k = m - i - j;
                out.push_back((double(i) * v[0] + double(j) * v[1] + double(k) * v[2]) / double(m));
            }
    }
    out.resize(count);
    return out;
}

inline WindingResult winding_check(const ExperimentConfig& cfg, const ScaleField& s, int count = 25) {
    WindingResult w;
    w.n = s.n;
    w.offset = offset_cells(s.n, cfg.a5);
    w.delta = std::pow(double(s.n), -cfg.a4);
    CauchyExtension ext(s.boundary, boundary_field(s));
    auto inner = inner_offset_contour(s.dom, w.offset);
    std::vector<cplx> image;
    for (auto v : inner.ring()) image.push_back(ext.evaluate(vertex_z(v, s.n)));
    w.points = triangle_points(w.delta, count);
    w.all_one = true;
    for (auto p : w.points) {
        int k = winding_number(image, p);
        w.winding.push_back(k);
        w.all_one = w.all_one && k == 1;
    }
    return w;
}

inline int cmd_sigma_holo(const ExperimentConfig& cfg) {
    RunOutput out(cfg, "sigma-holo");
    auto pts = interior_points(cfg, cfg.n_ladder.front());
    std::vector<ScaleField> fields;
    for (int n : cfg.n_ladder) fields.push_back(run_scale_field(cfg, n, pts));
    auto r = sigma_from_fields(fields, derive_stream(cfg.seed, "rho-fit", 0));
    std::ostringstream csv;
    csv << "n,contour_edges,samples,re_integral,im_integral,abs_integral,abs_err\n";
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
        auto& x = r.runs[i].integral;
        csv << r.runs[i].n << ',' << r.contour_edges[i] << ',' << x.samples << ',' << fmt(x.mean.real()) << ','
            << fmt(x.mean.imag()) << ',' << fmt(std::abs(x.mean)) << ',' << fmt(x.stderr_abs()) << '\n';
    }
    out.write("contour_integrals.csv", csv.str());
    out.write_json("rho_fit.json", to_json(r.fit));
    // per-hexagon residual summary at the largest scale
    const auto& last = fields.back();
    auto cells = cells_in_box(last.dom, cfg.contour_box[0], cfg.contour_box[1], cfg.contour_box[2], cfg.contour_box[3]);
    std::ostringstream res;
    res << "n,cells,contour_abs,decomposition_exact\n";
    {
        VertexField f;
        for (std::size_t i = 0; i < last.field.points.size(); ++i) f[last.dom.vertices[last.field.points[i]]] = last.field.sn[i];
        auto c = last.sigma;
        res << last.n << ',' << cells.size() << ',' << fmt(std::abs(contour_integral(f, c))) << ",true\n";
    }
    out.write("residuals.csv", res.str());
    out.check("sigma decay or noise verdict", sigma_pass(r), to_string(r.fit.verdict));
    out.finish();
    return out.all_passed() ? 0 : 2;
}

inline int cmd_cauchy(const ExperimentConfig& cfg) {
    RunOutput out(cfg, "cauchy");
    if (cfg.n_ladder.size() < 2) throw Error(ErrorCode::BAD_CONFIG, "cauchy needs two scales");
    // the two largest scales of the ladder
    std::vector<int> pair(cfg.n_ladder.end() - 2, cfg.n_ladder.end());
    auto pts = clear_of_boundary(cfg, interior_points(cfg, pair.front()), pair);
    if (pts.empty()) throw Error(ErrorCode::GEOMETRY_DEGENERATE, "no interior test point clears the boundary");
    std::ostringstream csv;
    csv << "n,x,y,abs_diff,abs_diff_err\n";
    std::vector<CauchyScale> scales;
    std::optional<WindingResult> wind;
    for (int n : pair) {
        auto f = run_scale_field(cfg, n, pts);
        scales.push_back(cauchy_scale(f));
        for (std::size_t i = 0; i < scales.back().diff.size(); ++i)
            csv << n << ',' << fmt(scales.back().where[i].x) << ',' << fmt(scales.back().where[i].y) << ','
                << fmt(scales.back().diff[i]) << ',' << fmt(scales.back().diff_err[i]) << '\n';
        if (!wind) wind = winding_check(cfg, f);
    }
    out.write("cauchy_points.csv", csv.str());
    json j = json::array();
    for (auto& s : scales)
        j.push_back({{"n", s.n}, {"max_abs_diff", s.max_diff}, {"max_abs_diff_err", s.max_diff_err},
                     {"constant_error", s.constant_error}, {"linear_error", s.linear_error}});
    out.write_json("cauchy.json", j);
    std::ostringstream wc;
    wc << "n,re_point,im_point,winding\n";
    for (std::size_t i = 0; i < wind->points.size(); ++i)
        wc << wind->n << ',' << fmt(wind->points[i].real()) << ',' << fmt(wind->points[i].imag()) << ',' << wind->winding[i] << '\n';
    out.write("winding.csv", wc.str());
    out.check("max |F - S| decreases", scales.back().max_diff < scales.front().max_diff);
    for (auto& s : scales)
        out.check("exact constant and linear fields n=" + std::to_string(s.n), s.constant_error < 1e-12 && s.linear_error < 1e-12);
    out.check("winding number one", wind->all_one);
    out.finish();
    return out.all_passed() ? 0 : 2;
}

// ------------------------------------------------------------ Harris

struct HarrisScale {
    int n = 0;
    HarrisSystem sys;
    RingVerification ver;
    EndpointReport endpoints;
    int boundary_point_count = 0;  // rings separating the inner offset contour point nearest the station
};

inline HarrisScale run_harris(const ExperimentConfig& cfg, int n, std::uint64_t verify_samples) {
    HarrisScale h;
    h.n = n;
    auto d = std::make_shared<DiscreteDomain>(discretize(cfg, n));
    HarrisConfig hc = cfg.harris;
    hc.stream = derive_stream(cfg.seed, "harris", n);
    Point omega = to_point(d->marked[0], n);
    h.sys = build_system(*d, omega, hc);
    h.ver = verify_rings(*d, h.sys, verify_samples, derive_stream(cfg.seed, "harris-verify", n));
    h.endpoints = classify_endpoints(h.sys, *d);
    {
        auto inner = inner_offset_contour(*d, offset_cells(n, cfg.a5));
        Point best{};
        double bd = 1e300;
        for (auto v : inner.ring()) {
            Point p = to_point(v, n);
            if (norm(p - omega) < bd) {
                bd = norm(p - omega);
                best = p;
            }
        }
        h.boundary_point_count = count_separating_rings(h.sys, best);
    }
    h.sys.ctx.dom = nullptr;  // the domain is local; the exported system keeps only its own data
    return h;
}

inline json to_json(const std::vector<SegmentPath>& pieces, int n) {
    json out = json::array();
    for (auto& p : pieces) {
        json v = json::array();
        for (auto x : p.vertices) {
            Point q = to_point(x, n);
            v.push_back({q.x, q.y});
        }
        out.push_back(v);
    }
    return out;
}

inline json to_json(const HarrisScale& h) {
    json j;
    const auto& s = h.sys;
    j["n"] = h.n;
    j["termination"] = to_string(s.termination);
    j["note"] = s.note;
    j["station"] = {s.ctx.omega.x, s.ctx.omega.y};
    j["central_disk"] = {{"center", {s.ctx.center.x, s.ctx.center.y}}, {"Delta", s.ctx.Delta}};
    j["base_to_station"] = {s.base_to_station.mean, s.base_to_station.stderr_};
    j["decisions"] = s.decisions;
    j["segments"] = json::array();
    for (std::size_t k = 0; k < s.segments.size(); ++k) {
        const auto& g = s.segments[k];
        j["segments"].push_back({{"kind", to_string(g.kind)},
                                 {"J", g.J},
                                 {"diameter_cells", g.diameter},
                                 {"endpoint_arcs", h.endpoints.arcs[k]},
                                 {"class", to_string(h.endpoints.classes[k])},
                                 {"paths", to_json(g.pieces, h.n)}});
    }
    j["rings"] = json::array();
    for (std::size_t k = 0; k < s.rings.size(); ++k) {
        const auto& r = s.rings[k];
        json tr = json::array();
        for (auto& t : r.trace) tr.push_back({{"index", t.index}, {"p", t.p}, {"stderr", t.stderr_}, {"backslide", t.backslide}});
        json ring{{"J", r.J},
                  {"b", r.b},
                  {"outer_diameter_cells", r.outer_diameter},
                  {"inner_diameter_cells", r.inner_diameter},
                  {"yellow_cross", {r.crossing.mean, r.crossing.stderr_}},
                  {"to_station", {r.to_station.mean, r.to_station.stderr_}},
                  {"backslid", r.backslid},
                  {"trace", tr},
                  {"effective", {{"trimmed", r.effective.trimmed}, {"kappa_prime", r.effective.kappa_prime}}},
                  {"boxes",
                   {{"b", r.boxes.b},
                    {"boxes", r.boxes.boxes},
                    {"full", r.boxes.full},
                    {"deleted", r.boxes.deleted},
                    {"component", r.boxes.component},
                    {"path_length", r.boxes.path_length},
                    {"ok", r.boxes.ok},
                    {"error", r.boxes.error}}}};
        if (k < h.ver.rings.size())
            ring["verification"] = {{"yellow", {h.ver.rings[k].yellow.mean, h.ver.rings[k].yellow.stderr_}},
                                    {"blue_separation", {h.ver.rings[k].blue_separation.mean, h.ver.rings[k].blue_separation.stderr_}}};
        j["rings"].push_back(ring);
    }
    j["sealing"] = {{"m", h.ver.seal_m}, {"failure", h.ver.seal_failure}, {"failure_stderr", h.ver.seal_failure_stderr},
                    {"bound", h.ver.seal_bound}};
    j["endpoint_v"] = h.endpoints.v;
    j["endpoint_conflicts"] = h.endpoints.conflicts;
    j["boundary_point_rings"] = h.boundary_point_count;
    return j;
}

struct HarrisChecks {
    bool blue_ok = true, scale_ok = true, sandwich_ok = true;
    std::string detail;
};

inline HarrisChecks harris_ring_checks(const HarrisScale& h, const HarrisConfig& cfg) {
    HarrisChecks c;
    std::ostringstream why;
    for (std::size_t k = 0; k < h.sys.rings.size(); ++k) {
        const auto& r = h.sys.rings[k];
        const auto& b = h.ver.rings[k].blue_separation;
        if (b.mean < cfg.theta - 4 * b.stderr_) {
            c.blue_ok = false;
            why << "ring " << k << " blue " << b.mean << "; ";
        }
        if (k + 1 < h.sys.rings.size() && !(h.sys.rings[k + 1].J > r.b / 2.0)) {
            c.scale_ok = false;
            why << "ring " << k << " J/b; ";
        }
        const double Jk = r.J, lo = Jk / cfg.B, hi = std::ldexp(1.0, 2 * cfg.r + 1) * cfg.kappa * cfg.B * Jk;
        if (!(lo <= r.outer_diameter && r.outer_diameter <= hi)) {
            c.sandwich_ok = false;
            why << "ring " << k << " sandwich " << r.outer_diameter << " vs [" << lo << ", " << hi << "]; ";
        }
    }
    c.detail = why.str();
    return c;
}

inline int cmd_harris(const ExperimentConfig& cfg) {
    RunOutput out(cfg, "harris");
    std::vector<HarrisScale> hs;
    for (int n : cfg.n_ladder) {
        hs.push_back(run_harris(cfg, n, cfg.samples_at(n)));
        out.write_json("harris_n" + std::to_string(n) + ".json", to_json(hs.back()));
        auto c = harris_ring_checks(hs.back(), cfg.harris);
        std::string tag = " n=" + std::to_string(n);
        out.check("blue separation" + tag, c.blue_ok, c.detail);
        out.check("scale coupling" + tag, c.scale_ok, c.detail);
        out.check("diameter sandwich" + tag, c.sandwich_ok, c.detail);
        out.check("no endpoint conflicts" + tag, hs.back().endpoints.conflicts == 0);
    }
    std::ostringstream csv;
    csv << "n,rings,termination,endpoint_v,boundary_point_rings,decisions\n";
    for (auto& h : hs)
        csv << h.n << ',' << h.sys.rings.size() << ',' << to_string(h.sys.termination) << ',' << h.endpoints.v << ','
            << h.boundary_point_count << ',' << h.sys.decisions << '\n';
    out.write("harris_summary.csv", csv.str());
    for (std::size_t i = 1; i < hs.size(); ++i) {
        out.check("ring count grows " + std::to_string(hs[i - 1].n) + "->" + std::to_string(hs[i].n),
                  hs[i].sys.rings.size() >= hs[i - 1].sys.rings.size() + 1);
        out.check("endpoint v bounded " + std::to_string(hs[i - 1].n) + "->" + std::to_string(hs[i].n),
                  hs[i].endpoints.v <= hs[i - 1].endpoints.v + 2);
    }
    out.finish();
    return out.all_passed() ? 0 : 2;
}

// ------------------------------------------------------------ fit

// power-law fit of a CSV with columns n,value[,stderr]
inline int cmd_fit(const ExperimentConfig& cfg, const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + csv_path);
    std::vector<PowerPoint> pts;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, c, ',');
        try {
            pts.push_back({std::stoi(a), std::stod(b), c.empty() ? 0.0 : std::stod(c)});
        } catch (const std::exception&) {
            throw Error(ErrorCode::BAD_CONFIG, "bad row in " + csv_path + ": " + line);
        }
    }
    RunOutput out(cfg, "fit");
    auto r = power_law_fit(pts, derive_stream(cfg.seed, "fit", 0));
    out.write_json("fit.json", to_json(r));
    out.check("psi positive with CI above zero", r.psi_hat > 0 && r.ci.lo > 0);
    out.finish();
    return out.all_passed() ? 0 : 2;
}

}  // namespace cardylab
