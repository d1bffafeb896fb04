#include "config.hpp"

#include "clayer/assembler.hpp"
#include "clayer/errors.hpp"
#include "clayer/field2d.hpp"
#include "clayer/geometry.hpp"
#include "clayer/profile1d.hpp"
#include "clayer/toda.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace clayer;
using namespace clayer::cli;
using Eigen::VectorXd;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json jnum(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

/// Writes hash-stamped files into the output directory and removes them again on failure.
class Output {
 public:
  Output(const ExperimentConfig& c, std::string command, std::uint64_t seed)
      : cfg_(c), dir_(c.output.directory), command_(std::move(command)), seed_(seed) {
    fs::create_directories(dir_);
    const fs::path m = dir_ / "manifest.json";
    if (fs::exists(m)) {
      std::ifstream in(m);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception&) {
        throw ValidationError("unreadable manifest in " + dir_.string());
      }
      if (j.value("config_hash", std::string()) != c.hash_hex())
        throw ValidationError("output directory " + dir_.string() + " holds results of a different config");
      manifest_ = j;
    }
  }

  ~Output() {
    if (!committed_)
      for (const auto& f : written_) fs::remove(f);
  }

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows, const std::vector<std::vector<std::string>>& text = {}) {
    if (!cfg_.output.csv) return;
    std::ofstream out(path(name + ".csv"));
    out << "# config_hash=" << cfg_.hash_hex() << "\n";
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (size_t r = 0; r < rows.size(); ++r) {
      bool first = true;
      if (r < text.size())
        for (const auto& t : text[r]) {
          out << (first ? "" : ",") << t;
          first = false;
        }
      for (double v : rows[r]) {
        out << (first ? "" : ",") << num(v);
        first = false;
      }
      out << "\n";
    }
  }

  void json_file(const std::string& name, json j) {
    if (!cfg_.output.json) return;
    j["config_hash"] = cfg_.hash_hex();
    std::ofstream(path(name + ".json")) << j.dump(2) << "\n";
  }

  void commit(double seconds) {
    json run;
    run["seed"] = seed_;
    run["seconds"] = seconds;
    json files = json::array();
    for (const auto& f : written_) files.push_back(f.filename().string());
    run["files"] = files;
    manifest_["config_hash"] = cfg_.hash_hex();
    manifest_["config"] = json::parse(cfg_.canonical);
    manifest_["versions"] = {{"clayer", kVersion},
                             {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                           "." + std::to_string(EIGEN_MINOR_VERSION)},
                             {"boost", std::to_string(BOOST_VERSION / 100000) + "." +
                                           std::to_string(BOOST_VERSION / 100 % 1000)}};
    manifest_["runs"][command_] = run;
    std::ofstream(dir_ / "manifest.json") << manifest_.dump(2) << "\n";
    committed_ = true;
  }

 private:
  fs::path path(const std::string& file) {
    fs::path p = dir_ / file;
    written_.push_back(p);
    return p;
  }

  const ExperimentConfig& cfg_;
  fs::path dir_;
  std::string command_;
  std::uint64_t seed_;
  json manifest_ = json::object();
  std::vector<fs::path> written_;
  bool committed_ = false;
};

/// Upstream objects, built on first use.
struct Context {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  MatrixField A;
  std::optional<field2d::EigenField> ef;
  std::optional<ScalarField> psi, q;
  std::optional<geometry::CurveGeometry> curve;
  int curve_iterations = 0;
  std::vector<double> defect_history;
  std::unique_ptr<profile1d::ProfileSet> ps;

  Context(const ExperimentConfig& c, std::uint64_t s) : cfg(c), seed(s), A(make_matrix_field(c.problem.matrix_field)) {}

  const field2d::EigenField& field() {
    if (ef) return *ef;
    const auto& P = cfg.problem;
    auto grid = make_grid(P);
    if (P.psi == "bessel") {
      if (P.domain.at("name") != "disk" || P.matrix_field.at("name") != "identity")
        throw ValidationError("block 'problem': psi = bessel needs a disk domain and the identity field");
      const double R = P.domain.value("radius", 1.0);
      Vec2 c = Vec2::Zero();
      if (P.domain.contains("center")) c = {P.domain["center"][0].get<double>(), P.domain["center"][1].get<double>()};
      psi = ScalarField::bessel_disk(c, R);
      const double j = bessel_j0_zero() / R;
      ef = field2d::sampled_eigenfield(grid, A, *psi, j * j);
    } else {
      ef = field2d::first_eigenpair(grid, A);
      psi = field2d::interpolate(ef->grid, ef->psi, "psi");
    }
    q = ScalarField::power(*psi, 1.0 / P.p);
    return *ef;
  }

  const geometry::CurveGeometry& geometry() {
    if (curve) return *curve;
    if (!cfg.curve) throw ValidationError("block 'curve' is required for this command");
    field();
    geometry::BuildOptions bo;
    bo.p = cfg.problem.p;
    bo.delta0 = cfg.curve->delta0;
    auto initial = make_curve(cfg, seed);
    if (cfg.curve->optimize) {
      geometry::CriticalOptions co;
      co.tol = cfg.curve->tol;
      co.max_iter = cfg.curve->max_iter;
      auto r = geometry::find_critical_curve(initial, A, *q, bo, co);
      curve = std::move(r.curve);
      curve_iterations = r.iterations;
      defect_history = r.defect_history;
    } else {
      curve = geometry::build_curve(initial, A, *q, bo);
    }
    return *curve;
  }

  const profile1d::ProfileSet& profile() {
    if (!ps) ps = std::make_unique<profile1d::ProfileSet>(profile1d::build_profile(cfg.problem.p));
    return *ps;
  }

  const LayersBlock& layers() const {
    if (!cfg.layers) throw ValidationError("block 'layers' is required for this command");
    return *cfg.layers;
  }

  assembler::SweepSetup setup() {
    assembler::SweepSetup s;
    s.ef = &field();
    s.A = &A;
    s.g = &geometry();
    s.ps = &profile();
    const auto& L = layers();
    s.N = L.N;
    s.cfg.order = L.order;
    s.cfg.amplitudes = L.e_coupling;
    s.cfg.delta = L.delta;
    s.cfg.delta0 = cfg.curve->delta0;
    s.gap = gap_options(cfg.toda);
    s.refine_k = L.refine_k;
    return s;
  }
};

void cmd_profile(Context& ctx, Output& out) {
  std::vector<std::vector<double>> rows;
  json list = json::array();
  for (double p : ctx.cfg.problem.profile_p) {
    auto ps = profile1d::build_profile(p);
    auto ids = profile1d::verify_profile_identities(ps);
    double worst = 0.0;
    json jid = json::object();
    for (const auto& id : ids) {
      worst = std::max(worst, std::abs(id.residual()));
      jid[id.name] = jnum(id.residual());
    }
    const double ode = profile1d::ode_residual(ps);
    rows.push_back({p, ps.w_center, ps.decay.alpha_fit, ps.decay.alpha_int, ps.decay.rel_gap, ps.lambda0, ps.C0,
                    ps.C1, ode, worst, ps.fredholm_defect});
    list.push_back({{"p", p},
                    {"w0", ps.w_center},
                    {"alpha_fit", ps.decay.alpha_fit},
                    {"alpha_int", ps.decay.alpha_int},
                    {"alpha_rel_gap", ps.decay.rel_gap},
                    {"lambda0", ps.lambda0},
                    {"C0", ps.C0},
                    {"C1", ps.C1},
                    {"ode_residual", ode},
                    {"fredholm_defect", ps.fredholm_defect},
                    {"identities", jid}});
  }
  out.csv("profile", {"p", "w0", "alpha_fit", "alpha_int", "alpha_rel_gap", "lambda0", "C0", "C1", "ode_residual",
                      "identity_max", "fredholm_defect"},
          rows);
  out.json_file("profile", {{"profiles", list}});
}

void cmd_geometry(Context& ctx, Output& out) {
  const auto& g = ctx.geometry();
  const auto crit = geometry::criticality_residual(g);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < g.m; ++i)
    rows.push_back({g.s[i], g.x[i], g.y[i], g.nx[i], g.ny[i], g.alpha[i], g.beta[i], g.qt[i], g.U2[i], g.U1[i],
                    g.U0[i], crit[i]});
  out.csv("curve", {"s", "x", "y", "nx", "ny", "alpha", "beta", "qt", "U2", "U1", "U0", "criticality"}, rows);
  out.json_file("geometry", {{"length", g.length},
                             {"l1", g.l1},
                             {"l2", g.l2},
                             {"U0_positive", g.U0_positive},
                             {"K", geometry::functional_K(g, ctx.A, *ctx.q)},
                             {"criticality_defect", geometry::criticality_defect(g)},
                             {"jacobi_smallest_singular_value", geometry::jacobi_smallest_singular_value(g)},
                             {"optimized", ctx.cfg.curve->optimize},
                             {"iterations", ctx.curve_iterations},
                             {"defect_history", ctx.defect_history}});
}

void cmd_field(Context& ctx, Output& out) {
  const auto& ef = ctx.field();
  std::vector<double> eps = ctx.cfg.layers ? ctx.cfg.layers->eps : std::vector<double>{0.2, 0.1, 0.05};
  auto rep = field2d::verify_negative_expansion(ef, ctx.cfg.problem.p, eps);
  std::vector<std::string> header{"x", "y", "psi"};
  for (size_t k = 0; k < eps.size(); ++k) header.push_back("ubar_" + std::to_string(k + 1));
  std::vector<std::vector<double>> rows;
  for (int u = 0; u < ef.grid.unknowns(); ++u) {
    Vec2 x = ef.grid.point(u);
    std::vector<double> r{x[0], x[1], ef.psi[u]};
    for (const auto& b : rep.branches) r.push_back(b.u[u]);
    rows.push_back(r);
  }
  out.csv("field", header, rows);
  json br = json::array();
  for (const auto& b : rep.branches)
    br.push_back({{"eps", b.eps}, {"newton_iterations", b.newton_iterations}, {"used_fallback", b.used_fallback}});
  out.json_file("field", {{"lambda1", ef.lambda1},
                          {"eigen_residual", ef.residual},
                          {"unknowns", ef.grid.unknowns()},
                          {"eps", rep.eps},
                          {"E", rep.E},
                          {"min_gap", rep.min_gap},
                          {"max_u", rep.max_u},
                          {"f_max_on_K", rep.f_max_on_K},
                          {"monotone_E", rep.monotone_E},
                          {"monotone_in_eps", rep.monotone_in_eps},
                          {"branches", br}});
}

json gap_json(const toda::GapReport& g) {
  return {{"pass", g.pass},
          {"toda_gap_margin", jnum(g.toda_gap_margin)},
          {"toda_gap_i", g.toda_gap_i},
          {"toda_gap_j", g.toda_gap_j},
          {"amplitude_gap_margin", jnum(g.amplitude_gap_margin)},
          {"amplitude_gap_k", g.amplitude_gap_k}};
}

void cmd_toda(Context& ctx, Output& out) {
  auto s = ctx.setup();
  const auto& g = *s.g;
  const auto& L = ctx.layers();
  const auto T = toda::toda_matrices(L.N, g.p);
  std::vector<std::vector<double>> rows, pos;
  std::vector<std::vector<std::string>> status;
  json list = json::array();
  for (double e : L.eps) {
    auto pt = assembler::classify(s, e);
    auto rho = toda::solve_rho(e, g.p, s.ps->alpha_p, s.ps->C0);
    std::string st = pt.gap.pass ? (pt.admissible ? "admissible" : "unfit") : "resonant";
    json row{{"eps", e}, {"rho", rho.rho}, {"rho_asymptotic", rho.asymptotic}, {"status", st}, {"gap", gap_json(pt.gap)}};
    if (pt.gap.pass) {
      try {
        auto ls = assembler::layer_state(s, e);
        for (int i = 0; i < g.m; ++i) {
          std::vector<double> r{e, g.s[i]};
          for (int k = 0; k < L.N; ++k) r.push_back(ls.f(k, i));
          for (int k = 0; k < L.N; ++k) r.push_back(ls.e(k, i));
          pos.push_back(r);
        }
        auto jt = toda::jacobi_toda_residual(ls, g,
                                             {g.p, s.ps->alpha_p, s.ps->C0, s.ps->C1, s.ps->lambda0,
                                              s.ps->zx_wx / s.ps->I_w});
        row["norm_position"] = jt.norm_position;
        row["norm_amplitude"] = jt.norm_amplitude;
        row["separation_margin"] = jnum(pt.separation);
        row["plateau_margin"] = jnum(pt.plateau);
      } catch (const ResonanceError&) {
        st = "resonant";
        row["status"] = st;
      }
    }
    rows.push_back({e, rho.rho, pt.gap.toda_gap_margin, pt.gap.amplitude_gap_margin});
    status.push_back({st});
    list.push_back(row);
  }
  out.csv("toda", {"status", "eps", "rho", "toda_gap_margin", "amplitude_gap_margin"}, rows, status);
  std::vector<std::string> ph{"eps", "s"};
  for (int k = 0; k < L.N; ++k) ph.push_back("f_" + std::to_string(k + 1));
  for (int k = 0; k < L.N; ++k) ph.push_back("e_" + std::to_string(k + 1));
  out.csv("toda_positions", ph, pos);
  out.json_file("toda", {{"N", L.N},
                         {"p", g.p},
                         {"Lambda", std::vector<double>(T.Lambda.data(), T.Lambda.data() + T.Lambda.size())},
                         {"lambda_star", toda::lambda_star(s.ps->lambda0, g.l2, s.gap)},
                         {"l1", g.l1},
                         {"l2", g.l2},
                         {"rows", list}});
}

void cmd_assemble(Context& ctx, Output& out) {
  if (!ctx.cfg.curve) throw ValidationError("block 'curve' is required for assemble");
  auto s = ctx.setup();
  const auto& L = ctx.layers();
  const auto& ef = *s.ef;
  const auto chart = assembler::fermi_chart(*s.g, ef.grid, s.cfg.delta0);
  json list = json::array();
  int idx = 0;
  for (double e : L.eps) {
    ++idx;
    auto pt = assembler::classify(s, e);
    json row{{"eps", e}, {"gap", gap_json(pt.gap)}};
    if (!pt.gap.pass) {
      row["status"] = "resonant";
      list.push_back(row);
      continue;
    }
    auto ls = assembler::layer_state(s, e);
    assembler::LayerField lf(*s.g, *s.ps, ls, s.cfg);
    auto br = field2d::solve_negative_branch(ef, e, s.g->p);
    auto a = assembler::build_ansatz(ef, br, *s.g, lf, chart);
    auto norms = assembler::pde_residual(a, ef, lf, *s.g, *s.A);
    const VectorXd r = assembler::grid_residual(ef, a.u, e, s.g->p);
    row["status"] = pt.admissible ? "admissible" : "unfit";
    row["order"] = L.order;
    row["residual"] = {{"tube", norms.tube},     {"band", norms.band},     {"tube_sup", norms.tube_sup},
                       {"global", norms.global}, {"sup", norms.sup}};
    std::vector<std::string> header{"x", "y", "u", "ubar", "residual"};
    std::optional<VectorXd> refined;
    if (L.newton) {
      auto ref = assembler::newton_refine(ef, a.u, e, s.g->p);
      auto census = assembler::layer_census(ef, ref.u, *s.g, s.g->p, 0.9 * s.cfg.delta0);
      if (census.mode != L.N) std::cerr << "warning: layer census " << census.mode << " differs from N = " << L.N
                                        << " at eps = " << e << "\n";
      row["newton"] = {{"iterations", ref.iterations},
                       {"residuals", ref.residuals},
                       {"census", census.counts},
                       {"census_mode", census.mode},
                       {"distance_inf", (ref.u - a.u).lpNorm<Eigen::Infinity>()}};
      refined = ref.u;
      header.push_back("u_refined");
    }
    std::vector<std::vector<double>> rows;
    for (int u = 0; u < ef.grid.unknowns(); ++u) {
      Vec2 x = ef.grid.point(u);
      std::vector<double> v{x[0], x[1], a.u[u], a.ubar[u], r[u]};
      if (refined) v.push_back((*refined)[u]);
      rows.push_back(v);
    }
    char name[32];
    std::snprintf(name, sizeof name, "assemble_%02d", idx);
    out.csv(name, header, rows);
    row["file"] = std::string(name) + ".csv";
    list.push_back(row);
  }
  out.json_file("assemble", {{"N", L.N}, {"rows", list}});
}

json norms_json(const assembler::ResidualNorms& n) {
  return {{"tube", n.tube}, {"band", n.band}, {"tube_sup", n.tube_sup}, {"global", n.global}, {"sup", n.sup}};
}

void cmd_sweep(Context& ctx, Output& out) {
  auto s = ctx.setup();
  const auto& L = ctx.layers();
  auto rep = assembler::residual_sweep(s, L.eps);
  std::vector<std::vector<double>> rows;
  json pts = json::array(), rej = json::array();
  for (const auto& p : rep.points) {
    rows.push_back({p.eps, p.rho, p.order0.tube, p.order1.tube, p.order1.band, p.order1.global, p.order1.sup});
    pts.push_back({{"eps", p.eps},
                   {"rho", p.rho},
                   {"gap", gap_json(p.gap)},
                   {"order0", norms_json(p.order0)},
                   {"order1", norms_json(p.order1)},
                   {"band_over_tube", p.order1.band / p.order1.tube}});
  }
  for (const auto& p : rep.rejected)
    rej.push_back({{"eps", p.eps},
                   {"gap", gap_json(p.gap)},
                   {"separation_margin", jnum(p.separation)},
                   {"plateau_margin", jnum(p.plateau)}});
  if (rep.points.size() < 4)
    std::cerr << "warning: only " << rep.points.size() << " admissible eps values (4 needed for a slope report)\n";
  if (!rep.monotone0 || !rep.monotone1) std::cerr << "warning: residuals are not monotone in eps\n";
  out.csv("sweep", {"eps", "rho", "tube_order0", "tube_order1", "band_order1", "global_order1", "sup_order1"}, rows);
  out.json_file("sweep", {{"N", L.N},
                          {"points", pts},
                          {"rejected", rej},
                          {"slope_order0", rep.points.size() >= 2 ? json(rep.slope0) : json(nullptr)},
                          {"slope_order1", rep.points.size() >= 2 ? json(rep.slope1) : json(nullptr)},
                          {"monotone_order0", rep.monotone0},
                          {"monotone_order1", rep.monotone1}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered layer experiments: profiles, curves, fields, layer dynamics and ansatz residuals"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::string config_path, out_dir;
  int threads = 1;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (overrides output.directory)");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed for randomized initial curves");
  struct Cmd {
    const char* name;
    const char* help;
    void (*run)(Context&, Output&);
  };
  const Cmd cmds[] = {{"profile", "Profile constants table", cmd_profile},
                      {"geometry", "Curve frame and Jacobi coefficients", cmd_geometry},
                      {"field", "Eigenfield and negative branch expansion", cmd_field},
                      {"toda", "Layer positions, amplitudes and resonance classification", cmd_toda},
                      {"assemble", "Ansatz on the lattice with residual norms", cmd_assemble},
                      {"sweep", "Residual decay over eps for order 0 and 1", cmd_sweep}};
  for (const auto& c : cmds) app.add_subcommand(c.name, c.help);
  app.option_defaults()->always_capture_default();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    ExperimentConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output.directory = out_dir;
    cfg.hash = fnv1a(cfg.canonical + "|seed=" + std::to_string(seed));
    Eigen::setNbThreads(threads);
    for (const auto& c : cmds) {
      if (!app.got_subcommand(c.name)) continue;
      const auto t0 = std::chrono::steady_clock::now();
      Context ctx(cfg, seed);
      Output out(cfg, c.name, seed);
      c.run(ctx, out);
      out.commit(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      std::cout << c.name << ": wrote " << cfg.output.directory << " (config " << cfg.hash_hex() << ")\n";
    }
    return 0;
  } catch (const ResonanceError& e) {
    std::cerr << "resonance: " << e.what() << "\n";
    return 4;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
