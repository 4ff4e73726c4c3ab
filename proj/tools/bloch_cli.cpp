// Command-line front end: band-structure scans, crossing classification,
// mode decomposition, time evolution, effective-mass comparisons, and
// hypothesis audits, with reproducible run manifests.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bloch/effmass.hpp"
#include "bloch/hill.hpp"
#include "bloch/landscape.hpp"
#include "bloch/propagate.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bloch;

namespace {

constexpr const char* kToolVersion = "1.0.0";
const double pi = std::numbers::pi;

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.12g", v);
  return b;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Per-run output directory with a manifest (config echo + hash, tool
/// version, tolerances, output list, status). Partial runs keep status
/// FAILED.
struct Emitter {
  fs::path dir;
  json manifest;

  Emitter(const std::string& out_dir, const std::string& sub, const json& config,
          const json& tolerances) {
    dir = fs::path(out_dir) / sub;
    fs::create_directories(dir);
    manifest["tool_version"] = kToolVersion;
    manifest["subcommand"] = sub;
    manifest["config"] = config;
    char hb[24];
    std::snprintf(hb, sizeof hb, "%016llx",
                  static_cast<unsigned long long>(fnv1a(config.dump())));
    manifest["config_hash"] = hb;
    manifest["tolerances"] = tolerances;
    manifest["outputs"] = json::array();
    manifest["status"] = "FAILED";
    flush();
  }

  fs::path path(const std::string& name) {
    manifest["outputs"].push_back(name);
    return dir / name;
  }

  void flush() const {
    std::ofstream f(dir / "manifest.json");
    f << manifest.dump(2) << "\n";
  }

  void finish() {
    manifest["status"] = "ok";
    flush();
  }
};

PeriodicPotential get_potential(const std::string& preset, const std::string& file) {
  if (!file.empty()) {
    std::ifstream f(file);
    if (!f) throw std::invalid_argument("cannot open potential file: " + file);
    return PeriodicPotential::from_json(json::parse(f));
  }
  return PeriodicPotential::preset(preset);
}

std::function<double(double)> phi_preset(const std::string& name, double radius) {
  if (name == "one") return [](double) { return 1.0; };
  if (name == "bump") return [radius](double x) { return smooth_bump(x, radius); };
  throw std::invalid_argument("unknown phi preset: " + name);
}

std::function<double(double)> vext_preset(const std::string& name, double radius, double amp) {
  if (name == "zero") return {};
  if (name == "bump") return [radius, amp](double x) { return smooth_bump(x, radius, amp); };
  if (name == "harmonic") return [radius](double x) { return harmonic_window(x, radius); };
  throw std::invalid_argument("unknown external potential preset: " + name);
}

int grid_rule(double eps, double L, int refine) {
  int n = 2;
  while (L / n >= eps / 4) n *= 2;
  return n * refine;
}

void write_plot_script(const fs::path& p, const std::string& body) {
  std::ofstream f(p);
  f << "#!/usr/bin/env python3\n"
    << "import csv, sys\n"
    << "import matplotlib.pyplot as plt\n\n"
    << body;
}

json verdict_json(const Verdict& v) {
  const char* s = v.status == Verdict::Status::holds    ? "holds"
                  : v.status == Verdict::Status::fails  ? "fails"
                                                        : "untestable";
  return json{{"status", s},
              {"margin", v.margin},
              {"witness", {v.witness[0], v.witness[1]}},
              {"reason", v.reason}};
}

json cluster_json(const Cluster& c) {
  return json{{"rep", {c.rep[0], c.rep[1]}},
              {"objective", c.objective},
              {"cells", c.cells.size()},
              {"polished", c.polished}};
}

json class_json(const CrossingClass& c) {
  const char* kind = c.kind == CrossingKind::conical      ? "conical"
                     : c.kind == CrossingKind::degenerate ? "degenerate"
                                                          : "unresolved";
  return json{{"kind", kind},   {"q", c.q},
              {"c", c.c},       {"slope_min", c.slope_min},
              {"slope_max", c.slope_max}};
}

// ---------------------------------------------------------------- commands

struct CommonOpts {
  std::string preset = "mathieu5";
  std::string potential_file;
  std::string out_dir = "out";
  unsigned seed = 0;
};

int run_discriminant(const CommonOpts& co, double lo, double hi, int samples, double rtol) {
  json cfg{{"preset", co.preset}, {"potential_file", co.potential_file},
           {"range", {lo, hi}},   {"samples", samples},
           {"rtol", rtol},        {"seed", co.seed}};
  Emitter em(co.out_dir, "discriminant", cfg, json{{"ode_rtol", rtol}});
  auto V = get_potential(co.preset, co.potential_file);
  if (!(lo < hi) || samples < 2) throw std::invalid_argument("discriminant: need lo < hi, samples >= 2");
  std::ofstream csv(em.path("discriminant.csv"));
  csv << "lambda,disc,disc_prime\n";
  for (int i = 0; i < samples; ++i) {
    const double lam = lo + (hi - lo) * i / (samples - 1);
    auto m = monodromy(V, lam, rtol);
    csv << fmt(lam) << "," << fmt(m.disc) << "," << fmt(m.disc_prime) << "\n";
  }
  write_plot_script(em.path("plot_discriminant.py"),
                    "rows = list(csv.DictReader(open('discriminant.csv')))\n"
                    "lam = [float(r['lambda']) for r in rows]\n"
                    "d = [float(r['disc']) for r in rows]\n"
                    "plt.plot(lam, d)\n"
                    "plt.axhline(2, ls='--', c='k'); plt.axhline(-2, ls='--', c='k')\n"
                    "plt.xlabel('lambda'); plt.ylabel('discriminant')\n"
                    "plt.ylim(-6, 10)\n"
                    "plt.savefig('discriminant.png', dpi=150)\n");
  em.finish();
  return 0;
}

int run_bands(const CommonOpts& co, int n_bands, int res, double rtol) {
  json cfg{{"preset", co.preset}, {"potential_file", co.potential_file},
           {"n_bands", n_bands},  {"res", res},
           {"rtol", rtol},        {"seed", co.seed}};
  Emitter em(co.out_dir, "bands", cfg, json{{"ode_rtol", rtol}, {"touch_tol", 1e-7}});
  auto V = get_potential(co.preset, co.potential_file);
  BandTable1D table(V, n_bands, rtol);
  {
    std::ofstream csv(em.path("edges.csv"));
    csv << "index,lambda,sign,coincident\n";
    const auto& e = table.edges();
    for (std::size_t i = 0; i < e.size(); ++i)
      csv << i << "," << fmt(e[i].lambda) << "," << e[i].sign << "," << (e[i].coincident ? 1 : 0)
          << "\n";
  }
  {
    std::ofstream csv(em.path("bands.csv"));
    csv << "xi,band,rho,rho_p,rho_pp\n";
    for (int n = 1; n <= n_bands; ++n)
      for (int i = 0; i <= res; ++i) {
        const double xi = pi * i / res;
        auto b = table.band_value(n, xi);
        csv << fmt(xi) << "," << n << "," << fmt(b.rho) << "," << fmt(b.rho_p) << ","
            << fmt(b.rho_pp) << "\n";
      }
  }
  write_plot_script(em.path("plot_bands.py"),
                    "rows = list(csv.DictReader(open('bands.csv')))\n"
                    "bands = sorted(set(int(r['band']) for r in rows))\n"
                    "for n in bands:\n"
                    "    pts = [(float(r['xi']), float(r['rho'])) for r in rows if int(r['band']) == n]\n"
                    "    plt.plot([p[0] for p in pts], [p[1] for p in pts], label=f'band {n}')\n"
                    "plt.xlabel('xi'); plt.ylabel('rho_n(xi)'); plt.legend()\n"
                    "plt.savefig('bands.png', dpi=150)\n");
  em.finish();
  return 0;
}

struct GridOpts {
  int band = 1;
  int res = 64;
  int K = 24;
  double grad_tol = 1e-6;
  double gap_tol = 1e-8;
  double rank_tol = 1e-6;
};

BandGrid make_grid(const PeriodicPotential& V, const GridOpts& go) {
  return BandGrid::from_potential(V, go.band + 2, go.res, go.K);
}

double band_scale(const BandGrid& g, int n) {
  double s = 1.0;
  for (int i = 0; i < g.resolution(); ++i)
    for (int j = 0; j < (g.dim() == 2 ? g.resolution() : 1); ++j)
      s = std::max(s, 1.0 + std::abs(g.rho(n, i, j)));
  return s;
}

int run_classify(const CommonOpts& co, const GridOpts& go) {
  json cfg{{"preset", co.preset}, {"potential_file", co.potential_file}, {"band", go.band},
           {"res", go.res},       {"K", go.K},                           {"gap_tol", go.gap_tol},
           {"seed", co.seed}};
  Emitter em(co.out_dir, "classify", cfg,
             json{{"gap_tol", go.gap_tol}, {"slope_window", {0.9, 1.1}}, {"q_tol", 0.1}});
  auto V = get_potential(co.preset, co.potential_file);
  auto g = make_grid(V, go);
  const double scale = band_scale(g, go.band);
  auto crossings = find_crossings(g, go.band, go.gap_tol * scale);
  json out = json::array();
  for (const auto& cl : crossings) {
    ClassifyOptions opts;
    opts.directions = normal_directions(g, cl);
    auto cc = classify_crossing(g, go.band, cl.rep, opts);
    json row = cluster_json(cl);
    row["class"] = class_json(cc);
    out.push_back(row);
  }
  std::ofstream f(em.path("crossings.json"));
  f << out.dump(2) << "\n";
  em.finish();
  return 0;
}

int run_normal_form(const CommonOpts& co, const GridOpts& go, std::vector<double> sigma,
                    double radius) {
  json cfg{{"preset", co.preset}, {"potential_file", co.potential_file}, {"band", go.band},
           {"res", go.res},       {"K", go.K},                           {"sigma", sigma},
           {"radius", radius},    {"seed", co.seed}};
  Emitter em(co.out_dir, "normal-form", cfg, json{{"gap_tol", go.gap_tol}});
  auto V = get_potential(co.preset, co.potential_file);
  auto g = make_grid(V, go);
  Vec2 s{0.0, 0.0};
  if (sigma.empty()) {
    auto crossings = find_crossings(g, go.band, go.gap_tol * band_scale(g, go.band));
    if (crossings.empty())
      throw std::invalid_argument("normal-form: no crossing found; pass --sigma");
    s = crossings.front().rep;
  } else {
    s[0] = sigma[0];
    if (sigma.size() > 1) s[1] = sigma[1];
  }
  auto nf = extract_normal_form(g, go.band, s, radius);
  json out{{"sigma", {nf.sigma[0], nf.sigma[1]}},
           {"theta", nf.theta},
           {"m", nf.m},
           {"homogeneity", nf.homogeneity}};
  out["hess_lambda"] = json::array();
  for (int i = 0; i < nf.hess_lambda.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < nf.hess_lambda.cols(); ++j) row.push_back(nf.hess_lambda(i, j));
    out["hess_lambda"].push_back(row);
  }
  json samples = json::array();
  for (const auto& r : nf.samples) samples.push_back({r[0], r[1], r[2], r[3]});
  out["samples"] = samples;
  std::ofstream f(em.path("normal_form.json"));
  f << out.dump(2) << "\n";
  em.finish();
  return 0;
}

int run_audit(const CommonOpts& co, const GridOpts& go) {
  json cfg{{"preset", co.preset},     {"potential_file", co.potential_file},
           {"band", go.band},         {"res", go.res},
           {"K", go.K},               {"grad_tol", go.grad_tol},
           {"gap_tol", go.gap_tol},   {"rank_tol", go.rank_tol},
           {"seed", co.seed}};
  Emitter em(co.out_dir, "audit", cfg,
             json{{"grad_tol", go.grad_tol}, {"gap_tol", go.gap_tol}, {"rank_tol", go.rank_tol}});
  auto V = get_potential(co.preset, co.potential_file);
  auto g = make_grid(V, go);
  const double scale = band_scale(g, go.band);
  auto verdicts = audit_hypotheses(g, go.band, go.grad_tol * scale, go.gap_tol * scale,
                                   go.rank_tol);
  json out{{"h1", verdict_json(verdicts.h1)},   {"h2", verdict_json(verdicts.h2)},
           {"h3", verdict_json(verdicts.h3)},   {"h1p", verdict_json(verdicts.h1p)},
           {"h2p", verdict_json(verdicts.h2p)}, {"h3p", verdict_json(verdicts.h3p)}};
  out["critical"] = json::array();
  for (const auto& c : verdicts.critical) out["critical"].push_back(cluster_json(c));
  out["crossings"] = json::array();
  for (std::size_t i = 0; i < verdicts.crossings.size(); ++i) {
    json row = cluster_json(verdicts.crossings[i]);
    if (i < verdicts.classes.size()) row["class"] = class_json(verdicts.classes[i]);
    out["crossings"].push_back(row);
  }
  std::ofstream f(em.path("audit.json"));
  f << out.dump(2) << "\n";
  em.finish();
  return 0;
}

struct FieldOpts {
  double eps = 0.125;
  double L = 4.0;
  int refine = 2;
  int K = 20;
  int n_modes = 12;
  double xi0 = 0.25 * pi;
  double sigma = 0.35;
  std::string input;  // optional saved field
};

WaveField make_field(const FieldOpts& fo) {
  if (!fo.input.empty()) return load_field(fo.input);
  const int N = grid_rule(fo.eps, fo.L, fo.refine);
  return gaussian_packet(N, fo.L, fo.eps, fo.xi0, fo.sigma);
}

int run_decompose(const CommonOpts& co, const FieldOpts& fo, int n_modes_out) {
  json cfg{{"preset", co.preset}, {"potential_file", co.potential_file},
           {"eps", fo.eps},       {"L", fo.L},
           {"refine", fo.refine}, {"K", fo.K},
           {"modes", n_modes_out}, {"xi0", fo.xi0},
           {"sigma", fo.sigma},   {"input", fo.input},
           {"seed", co.seed}};
  Emitter em(co.out_dir, "decompose", cfg, json{{"round_trip_tol", 1e-6}});
  auto V = get_potential(co.preset, co.potential_file);
  auto psi = make_field(fo);
  ModeBasis basis(V, psi.eps, psi.L, fo.K, n_modes_out);
  auto mc = decompose(psi, basis, n_modes_out);
  std::ofstream csv(em.path("modes.csv"));
  csv << "mode,mass\n";
  for (int n = 1; n <= n_modes_out; ++n) csv << n << "," << fmt(mc.mode_mass(n)) << "\n";
  const double tail = tail_norm(psi, basis, n_modes_out);
  std::ofstream tf(em.path("tail.json"));
  tf << json{{"tail", tail}, {"total_mass", psi.mass()}}.dump(2) << "\n";
  em.finish();
  return 0;
}

int run_evolve(const CommonOpts& co, const FieldOpts& fo, const std::string& scheme,
               double t_final, double dt, long snap_every, const std::string& vext_name,
               double vext_radius, double vext_amp) {
  json cfg{{"preset", co.preset}, {"potential_file", co.potential_file},
           {"scheme", scheme},    {"eps", fo.eps},
           {"L", fo.L},           {"refine", fo.refine},
           {"K", fo.K},           {"n_modes", fo.n_modes},
           {"xi0", fo.xi0},       {"sigma", fo.sigma},
           {"tfinal", t_final},   {"dt", dt},
           {"snap_every", snap_every}, {"vext", vext_name},
           {"vext_radius", vext_radius}, {"vext_amp", vext_amp},
           {"input", fo.input},   {"seed", co.seed}};
  Emitter em(co.out_dir, "evolve", cfg,
             json{{"tail_tol", 1e-6},
                  {"mass_tol_fourier", 1e-10},
                  {"mass_tol_bloch", 1e-6},
                  {"dt_bound_fourier", "0.1*eps^2"}});
  auto V = get_potential(co.preset, co.potential_file);
  auto psi = make_field(fo);
  auto vfn = vext_preset(vext_name, vext_radius, vext_amp);
  std::vector<double> vg;
  if (vfn) {
    vg.resize(psi.N_g);
    for (int i = 0; i < psi.N_g; ++i) vg[i] = vfn(psi.x(i));
  }
  const double mass0 = psi.mass();
  DensityRecord rec;
  WaveField out;
  double mass_tol;
  if (scheme == "bloch_strang") {
    ModeBasis basis(V, psi.eps, psi.L, fo.K, fo.n_modes);
    BlochPropagator bp(basis);
    out = bp.run(psi, t_final, dt, vg, &rec, snap_every);
    mass_tol = 1e-6;
  } else if (scheme == "fourier_split") {
    FourierSplitter fs(V, psi.eps);
    out = fs.run(psi, t_final, dt, vg, &rec, snap_every);
    mass_tol = 1e-10;
  } else {
    throw std::invalid_argument("evolve: scheme must be bloch_strang or fourier_split");
  }
  const double drift = std::abs(out.mass() - mass0);
  if (drift > mass_tol)
    throw std::runtime_error("mass_conservation: |mass(T) - mass(0)| = " + fmt(drift) +
                             " exceeds " + fmt(mass_tol));
  {
    std::ofstream csv(em.path("density.csv"));
    csv << "t,x,density\n";
    for (std::size_t s = 0; s < rec.times.size(); ++s)
      for (int i = 0; i < rec.N_g; ++i)
        csv << fmt(rec.times[s]) << "," << fmt(rec.x(i)) << "," << fmt(rec.densities[s][i])
            << "\n";
  }
  save_field(out, (em.path("final_field.c64")).string());
  em.path("final_field.c64.json");
  write_plot_script(em.path("plot_density.py"),
                    "rows = list(csv.DictReader(open('density.csv')))\n"
                    "ts = sorted(set(float(r['t']) for r in rows))\n"
                    "xs = sorted(set(float(r['x']) for r in rows))\n"
                    "import numpy as np\n"
                    "z = np.zeros((len(ts), len(xs)))\n"
                    "ti = {t: i for i, t in enumerate(ts)}; xi = {x: i for i, x in enumerate(xs)}\n"
                    "for r in rows: z[ti[float(r['t'])], xi[float(r['x'])]] = float(r['density'])\n"
                    "plt.imshow(z, aspect='auto', origin='lower',\n"
                    "           extent=[xs[0], xs[-1], ts[0], ts[-1]])\n"
                    "plt.xlabel('x'); plt.ylabel('t'); plt.colorbar(label='|psi|^2')\n"
                    "plt.savefig('density.png', dpi=150)\n");
  em.finish();
  return 0;
}

int run_effmass_compare(const CommonOpts& co, std::vector<double> eps_list, int band,
                        double xi_c, double a, double b, double dt, long snap_every,
                        const std::string& phi_name, double phi_radius,
                        const std::string& vext_name, double vext_radius, double vext_amp,
                        double sigma, double lowpass_width, bool check_trend) {
  json cfg{{"preset", co.preset}, {"potential_file", co.potential_file},
           {"eps_list", eps_list}, {"band", band},
           {"xi_c", xi_c},        {"window", {a, b}},
           {"dt", dt},            {"snap_every", snap_every},
           {"phi", phi_name},     {"phi_radius", phi_radius},
           {"vext", vext_name},   {"vext_radius", vext_radius},
           {"vext_amp", vext_amp}, {"sigma", sigma},
           {"lowpass_width", lowpass_width}, {"check_trend", check_trend},
           {"seed", co.seed}};
  Emitter em(co.out_dir, "effmass-compare", cfg,
             json{{"tail_tol", 1e-6}, {"grad_tol", 1e-6}, {"lowpass_width", lowpass_width}});
  auto V = get_potential(co.preset, co.potential_file);
  CompareOptions opt;
  opt.band = band;
  opt.xi_c = xi_c;
  opt.a = a;
  opt.b = b;
  opt.dt = dt;
  opt.snap_every = snap_every;
  opt.lowpass_width = lowpass_width;
  auto vfn = vext_preset(vext_name, vext_radius, vext_amp);
  auto phi = phi_preset(phi_name, phi_radius);
  auto rows = effmass_compare(
      V, eps_list, [sigma](double x) { return complexd{std::pow(pi * sigma * sigma, -0.25) *
                                                           std::exp(-x * x / (2 * sigma * sigma)),
                                                       0.0}; },
      vfn, phi, opt);
  std::ofstream csv(em.path("convergence.csv"));
  csv << "eps,full_value,predicted,err\n";
  for (const auto& r : rows)
    csv << fmt(r.eps) << "," << fmt(r.full_value) << "," << fmt(r.predicted) << "," << fmt(r.err)
        << "\n";
  write_plot_script(em.path("plot_convergence.py"),
                    "rows = list(csv.DictReader(open('convergence.csv')))\n"
                    "eps = [float(r['eps']) for r in rows]\n"
                    "err = [float(r['err']) for r in rows]\n"
                    "plt.loglog(eps, err, 'o-')\n"
                    "plt.xlabel('eps'); plt.ylabel('|full - predicted|')\n"
                    "plt.savefig('convergence.png', dpi=150)\n");
  if (check_trend)
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (!(rows[i].err < rows[i - 1].err))
        throw std::runtime_error("convergence_trend: err(eps) not strictly decreasing at eps = " +
                                 fmt(rows[i].eps));
  em.finish();
  return 0;
}

int run_interaction(const CommonOpts& co, std::vector<double> eps_list, int band, double sigma0,
                    double xi1, double xi2, double sigma, double offset2) {
  json cfg{{"preset", co.preset}, {"potential_file", co.potential_file},
           {"eps_list", eps_list}, {"band", band},
           {"sigma0", sigma0},    {"xi1", xi1},
           {"xi2", xi2},          {"sigma", sigma},
           {"offset2", offset2},  {"seed", co.seed}};
  Emitter em(co.out_dir, "interaction", cfg,
             json{{"matched_rel_tol", 0.05}, {"mismatch_factor", 10.0}});
  auto V = get_potential(co.preset, co.potential_file);
  InteractionOptions opt;
  opt.band = band;
  opt.sigma0 = sigma0;
  opt.xi1 = xi1;
  opt.xi2 = xi2;
  const double norm = std::pow(pi * sigma * sigma, -0.25);
  auto rows = interaction_offdiagonal(
      V, eps_list,
      [=](double x) { return complexd{norm * std::exp(-x * x / (2 * sigma * sigma)), 0.0}; },
      [=](double x) {
        const double u = x - offset2;
        return complexd{norm * std::exp(-u * u / (2 * sigma * sigma)), 0.0};
      },
      opt);
  std::ofstream csv(em.path("interaction.csv"));
  csv << "eps,overlap_re,overlap_im,predicted_re,predicted_im\n";
  for (const auto& r : rows)
    csv << fmt(r.eps) << "," << fmt(r.overlap.real()) << "," << fmt(r.overlap.imag()) << ","
        << fmt(r.predicted.real()) << "," << fmt(r.predicted.imag()) << "\n";
  em.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floquet-Bloch band structure, crossing classification, and "
               "effective-mass limit verification"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOpts co;
  app.add_option("--out", co.out_dir, "output directory");
  app.add_option("--seed", co.seed, "seed for randomized diagnostics");

  auto add_pot = [&co](CLI::App* c) {
    c->add_option("--preset", co.preset, "potential preset (free, mathieu5)");
    c->add_option("--potential", co.potential_file, "potential descriptor JSON file");
  };

  // discriminant
  double lo = -6.0, hi = 60.0;
  int samples = 1001;
  double rtol = 1e-10;
  std::string range_str;
  auto* cd = app.add_subcommand("discriminant", "Hill discriminant scan");
  add_pot(cd);
  cd->add_option("--range", range_str, "lambda range lo:hi");
  cd->add_option("--samples", samples, "sample count");
  cd->add_option("--rtol", rtol, "ODE relative tolerance");

  // bands
  int n_bands = 6, band_res = 64;
  double band_rtol = 1e-11;
  auto* cb = app.add_subcommand("bands", "band functions and edges (1-D)");
  add_pot(cb);
  cb->add_option("--n-bands", n_bands, "number of bands");
  cb->add_option("--res", band_res, "xi samples over [0, pi]");
  cb->add_option("--rtol", band_rtol, "ODE relative tolerance");

  GridOpts go;
  auto add_grid = [&go](CLI::App* c) {
    c->add_option("--band", go.band, "band index n");
    c->add_option("--res", go.res, "grid resolution");
    c->add_option("--cutoff", go.K, "Galerkin cutoff K");
    c->add_option("--grad-tol", go.grad_tol, "critical-point gradient tolerance (x scale)");
    c->add_option("--gap-tol", go.gap_tol, "crossing gap tolerance (x scale)");
    c->add_option("--rank-tol", go.rank_tol, "Hessian rank tolerance");
  };
  auto* cc = app.add_subcommand("classify", "find and classify band crossings");
  add_pot(cc);
  add_grid(cc);

  std::vector<double> sigma_opt;
  double nf_radius = 0.25;
  auto* cn = app.add_subcommand("normal-form", "normal form data at a crossing");
  add_pot(cn);
  add_grid(cn);
  cn->add_option("--sigma", sigma_opt, "crossing location (auto-detected if omitted)");
  cn->add_option("--radius", nf_radius, "sampling radius");

  auto* ca = app.add_subcommand("audit", "audit hypotheses H1-H3 / H1'-H3'");
  add_pot(ca);
  add_grid(ca);

  FieldOpts fo;
  auto add_field = [&fo](CLI::App* c) {
    c->add_option("--eps", fo.eps, "semiclassical parameter");
    c->add_option("--box", fo.L, "box length L (L/eps must be an integer)");
    c->add_option("--refine", fo.refine, "grid refinement factor");
    c->add_option("--cutoff", fo.K, "Galerkin cutoff K");
    c->add_option("--xi0", fo.xi0, "carrier frequency (scaled variable)");
    c->add_option("--sigma", fo.sigma, "Gaussian envelope width");
    c->add_option("--input", fo.input, "load initial field instead of Gaussian data");
  };
  int modes_out = 8;
  auto* cdec = app.add_subcommand("decompose", "Bloch mode decomposition of a field");
  add_pot(cdec);
  add_field(cdec);
  cdec->add_option("--modes", modes_out, "retained mode count");

  std::string scheme = "bloch_strang", vext_name = "zero";
  double t_final = 0.1, dt = 1e-3, vext_radius = 1.0, vext_amp = 1.0;
  long snap_every = 10;
  auto* cev = app.add_subcommand("evolve", "time evolution of the full eps-problem");
  add_pot(cev);
  add_field(cev);
  cev->add_option("--scheme", scheme, "bloch_strang or fourier_split");
  cev->add_option("--tfinal", t_final, "final time");
  cev->add_option("--dt", dt, "time step");
  cev->add_option("--snap-every", snap_every, "snapshot stride in steps");
  cev->add_option("--n-modes", fo.n_modes, "retained modes (bloch_strang)");
  cev->add_option("--vext", vext_name, "external potential: zero, bump, harmonic");
  cev->add_option("--vext-radius", vext_radius, "external potential radius");
  cev->add_option("--vext-amp", vext_amp, "external potential amplitude");

  std::vector<double> eps_list{0.125, 0.0625, 0.03125};
  int em_band = 1;
  double xi_c = 0.0, win_a = 0.0, win_b = 0.5, em_dt = 1e-3, em_sigma = 0.35;
  long em_snap = 10;
  std::string phi_name = "bump";
  double phi_radius = 1.0;
  std::string em_vext = "bump";
  double em_vr = 1.0, em_va = 1.0, lowpass_width = 8.0 * pi;
  bool check_trend = false;
  auto* cem = app.add_subcommand("effmass-compare",
                                 "full dynamics vs effective-mass limit across eps");
  add_pot(cem);
  cem->add_option("--eps-list", eps_list, "eps values")->delimiter(',');
  cem->add_option("--band", em_band, "band index");
  cem->add_option("--xi-c", xi_c, "critical point (scaled variable)");
  std::string window_str;
  cem->add_option("--window", window_str, "time window a,b");
  cem->add_option("--dt", em_dt, "time step (both solvers)");
  cem->add_option("--snap-every", em_snap, "snapshot stride");
  cem->add_option("--phi", phi_name, "observable preset: one, bump");
  cem->add_option("--phi-radius", phi_radius, "observable radius");
  cem->add_option("--vext", em_vext, "external potential preset");
  cem->add_option("--vext-radius", em_vr, "external potential radius");
  cem->add_option("--vext-amp", em_va, "external potential amplitude");
  cem->add_option("--sigma", em_sigma, "envelope width");
  cem->add_option("--lowpass-width", lowpass_width, "profile filter width");
  cem->add_flag("--check-trend", check_trend, "fail (exit 3) unless err(eps) decreases");

  std::vector<double> in_eps{0.0625, 0.03125, 0.015625};
  int in_band = 1;
  double sigma0 = 0.5 * pi, xi1 = 0.5 * pi, xi2 = 0.5 * pi, in_sigma = 0.35, offset2 = 0.2;
  auto* cin = app.add_subcommand("interaction", "two-band off-diagonal overlap vs eps");
  add_pot(cin);
  cin->add_option("--eps-list", in_eps, "eps values")->delimiter(',');
  cin->add_option("--band", in_band, "lower band index");
  cin->add_option("--sigma0", sigma0, "demodulation center");
  cin->add_option("--xi1", xi1, "carrier of the band-n component");
  cin->add_option("--xi2", xi2, "carrier of the band-(n+1) component");
  cin->add_option("--sigma", in_sigma, "envelope width");
  cin->add_option("--offset2", offset2, "spatial offset of the second envelope");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto parse_pair = [](const std::string& s, char sep, double& a, double& b, const char* what) {
    if (s.empty()) return;
    const auto k = s.find(sep);
    if (k == std::string::npos)
      throw std::invalid_argument(std::string(what) + ": expected two values separated by '" +
                                  sep + "'");
    a = std::stod(s.substr(0, k));
    b = std::stod(s.substr(k + 1));
  };

  try {
    parse_pair(range_str, ':', lo, hi, "--range");
    parse_pair(window_str, ',', win_a, win_b, "--window");
    if (*cd) return run_discriminant(co, lo, hi, samples, rtol);
    if (*cb) return run_bands(co, n_bands, band_res, band_rtol);
    if (*cc) return run_classify(co, go);
    if (*cn) return run_normal_form(co, go, sigma_opt, nf_radius);
    if (*ca) return run_audit(co, go);
    if (*cdec) return run_decompose(co, fo, modes_out);
    if (*cev)
      return run_evolve(co, fo, scheme, t_final, dt, snap_every, vext_name, vext_radius,
                        vext_amp);
    if (*cem)
      return run_effmass_compare(co, eps_list, em_band, xi_c, win_a, win_b, em_dt, em_snap,
                                 phi_name, phi_radius, em_vext, em_vr, em_va, em_sigma,
                                 lowpass_width, check_trend);
    if (*cin) return run_interaction(co, in_eps, in_band, sigma0, xi1, xi2, in_sigma, offset2);
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical assertion failed: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
