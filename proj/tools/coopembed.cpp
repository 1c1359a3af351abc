// coopembed: build, simulate, march and verify the embedded cooperative
// system. Exit codes: 0 success, 1 verification failure or blow-up,
// 2 usage or configuration error.

#include "coopembed/verifier.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace coopembed;

namespace {

constexpr int kOk = 0, kFail = 1, kUsage = 2;

SystemConfig load(const std::string& path) {
  SystemConfig cfg = load_config(path);
  apply_env_overrides(cfg);
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "'");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write '" + p.string() + "'");
  return os;
}

// ---------------------------------------------------------------------------
// build

int cmd_build(const std::string& cfg_path, unsigned jobs) {
  const BuiltSystem sys = build_system(load(cfg_path), jobs);
  std::cout << json_string(resolved_json(sys));
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config, system = "embedded", ic, out = ".";
  bool on_h = false;
  double T = 0.0;
};

std::vector<VecX> read_ic_csv(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open initial-condition file '" + path + "'");
  std::vector<VecX> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (std::isalpha(static_cast<unsigned char>(line[0]))) continue;  // header
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    try {
      while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError("initial-condition file: malformed number in '" + line + "'");
    }
    if (static_cast<int>(vals.size()) != dim)
      throw ConfigError("initial-condition file: expected " + std::to_string(dim) + " columns");
    out.push_back(Eigen::Map<VecX>(vals.data(), dim));
  }
  if (out.empty()) throw ConfigError("initial-condition file has no rows");
  return out;
}

template <int Dim>
void write_traj(const fs::path& p, const Trajectory<Dim>& traj, const double* blowup_t) {
  auto os = open_out(p);
  write_trajectory_csv(os, traj);
  if (blowup_t) os << "#blowup t=" << format_double(*blowup_t) << '\n';
}

template <int Dim, class Field>
int simulate_batch(const Field& field, const std::vector<VecX>& ics, const SimulateArgs& a, const SystemConfig& cfg,
                   const std::vector<std::pair<std::string, Vec<Dim>>>& candidates) {
  IntegrateOptions ode;
  ode.rtol = cfg.run.rtol;
  ode.atol = cfg.run.atol;
  const double T = a.T > 0.0 ? a.T : cfg.run.T;
  std::vector<std::size_t> counts(candidates.size(), 0);
  std::size_t unresolved = 0, blowups = 0;
  std::vector<Vec<Dim>> cand;
  for (const auto& c : candidates) cand.push_back(c.second);
  for (std::size_t k = 0; k < ics.size(); ++k) {
    const Vec<Dim> u0 = ics[k];
    char name[32];
    std::snprintf(name, sizeof name, "traj_%04zu.csv", k);
    const fs::path path = fs::path(a.out) / name;
    try {
      const auto traj = a.on_h ? integrate_on_H<Dim>(field, u0, T, ode) : integrate<Dim>(field, u0, T, ode);
      write_traj<Dim>(path, traj, nullptr);
      if (const auto c = classify_limit<Dim>(traj, cand))
        ++counts[*c];
      else
        ++unresolved;
    } catch (const IntegrationError<Dim>& e) {
      const double t = e.time();
      write_traj<Dim>(path, e.partial(), &t);
      ++blowups;
      std::cerr << "trajectory " << k << ": integration stopped at t=" << format_double(t) << " (" << e.what() << ")\n";
    }
  }
  const std::size_t n = ics.size();
  std::cout << "wrote " << n << " trajectories to " << a.out << '\n';
  for (std::size_t c = 0; c < candidates.size(); ++c)
    std::cout << counts[c] << "/" << n << " -> " << candidates[c].first << '\n';
  std::cout << unresolved << "/" << n << " unresolved\n";
  if (blowups) {
    std::cout << blowups << "/" << n << " blow-ups\n";
    return kFail;
  }
  return kOk;
}

int cmd_simulate(const SimulateArgs& a, unsigned jobs) {
  const SystemConfig cfg = load(a.config);
  if (a.system != "template" && a.system != "planar" && a.system != "embedded")
    throw ConfigError("--system must be template, planar or embedded");
  if (a.on_h && a.system == "planar") throw ConfigError("--on-h applies to template and embedded systems");
  const BuiltSystem sys = build_system(cfg, jobs);
  const int dim = a.system == "planar" ? 2 : 3;

  std::vector<VecX> ics;
  if (a.ic.rfind("random:", 0) == 0) {
    int k = 0;
    try {
      k = std::stoi(a.ic.substr(7));
    } catch (const std::exception&) {
      throw ConfigError("--ic random:<k> needs an integer k");
    }
    if (k < 1) throw ConfigError("--ic random:<k> needs k >= 1");
    const CounterRng rng(cfg.run.seed, 401);
    const double hw = dim == 2 ? 2.0 * sys.planar.region_radius() : 2.0 * sys.P();
    for (int i = 0; i < k; ++i) {
      VecX u(dim);
      for (int j = 0; j < dim; ++j) u[j] = rng.uniform(static_cast<std::uint64_t>(i) * dim + j, -hw, hw);
      if (a.on_h) u.array() -= u.sum() / dim;
      ics.push_back(u);
    }
  } else {
    ics = read_ic_csv(a.ic, dim);
  }
  if (a.on_h)
    for (const auto& u : ics)
      if (!(std::abs(u.sum()) <= 1e-12)) throw ConfigError("--on-h: initial condition is not on H");
  ensure_dir(a.out);

  const double P = sys.P();
  if (dim == 2) return simulate_batch<2>(sys.planar, ics, a, cfg, {{"e", sys.planar.rest_point()}});
  std::vector<std::pair<std::string, Vec3>> cand{{"(P,P,P)", Vec3::Constant(P)}, {"-(P,P,P)", Vec3::Constant(-P)}};
  if (a.system == "embedded") {
    cand.push_back({"lift(sigma e)", sys.planar_rest()});
    return simulate_batch<3>(sys.f, ics, a, cfg, cand);
  }
  return simulate_batch<3>(sys.tmpl, ics, a, cfg, cand);
}

// ---------------------------------------------------------------------------
// pde

struct PdeArgs {
  std::string config, profile, out = ".";
  double march = 0.0, perturb = 0.0;
  bool residual = false;
  std::size_t snapshot_every = 0;
};

struct ProfileSpec {
  std::optional<double> lambda;  // arc profiles
  std::function<GridFunction<3>(const Grid1D&)> make;
};

ProfileSpec parse_profile(const std::string& spec, const BuiltSystem& sys) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("--profile must be arc:<lambda>, homog:<c|P> or file:<path>");
  const std::string kind = spec.substr(0, colon), arg = spec.substr(colon + 1);
  const auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("--profile: '" + s + "' is not a number");
    }
  };
  ProfileSpec out;
  if (kind == "arc") {
    const double lambda = number(arg);
    const PartitionSpec part = sys.config.partition();
    if (!(lambda >= part.lambda1 && lambda <= part.lambda2))
      throw ConfigError("--profile arc: lambda outside [lambda1, lambda2]");
    out.lambda = lambda;
    const double sigma = sys.sigma();
    out.make = [lambda, sigma, part](const Grid1D& g) { return arc_profile(lambda, g, sigma, part); };
  } else if (kind == "homog") {
    double c = 0.0;
    if (arg == "P")
      c = sys.P();
    else if (arg == "-P")
      c = -sys.P();
    else
      c = number(arg);
    out.make = [c](const Grid1D& g) { return homogeneous_profile<3>(g, Vec3::Constant(c)); };
  } else if (kind == "file") {
    std::ifstream in(arg);
    if (!in) throw ConfigError("--profile file: cannot open '" + arg + "'");
    const GridFunction<3> gf = read_profile_csv<3>(in, 3);
    out.make = [gf](const Grid1D& g) {
      if (g.N != gf.grid.N) throw ConfigError("--profile file: node count differs from pde.N");
      return gf;
    };
  } else {
    throw ConfigError("--profile kind must be arc, homog or file");
  }
  return out;
}

std::string snapshot_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snap_%.6f.csv", t);
  return buf;
}

int cmd_pde(const PdeArgs& a, unsigned jobs) {
  const SystemConfig cfg = load(a.config);
  if (a.residual == (a.march > 0.0)) throw ConfigError("pde: give exactly one of --march T or --residual");
  const BuiltSystem sys = build_system(cfg, jobs);
  const ProfileSpec prof = parse_profile(a.profile, sys);
  const Grid1D grid(cfg.pde.N);

  if (a.residual) {
    const double r = steady_residual<3>(sys.f, prof.make(grid), cfg.pde.d);
    json j;
    j["lambda"] = prof.lambda ? json(*prof.lambda) : json();
    j["N"] = cfg.pde.N;
    j["residual"] = r;
    json ratio;  // residual(N/2) / residual(N), for arc and homogeneous profiles
    if (a.profile.rfind("file:", 0) != 0 && cfg.pde.N / 2 >= 3 && r > 0.0)
      ratio = steady_residual<3>(sys.f, prof.make(Grid1D(cfg.pde.N / 2)), cfg.pde.d) / r;
    j["ratio_vs_halfN"] = ratio;
    std::cout << json_string(j);
    return kOk;
  }

  ensure_dir(a.out);
  GridFunction<3> u0 = prof.make(grid);
  const GridFunction<3> base = u0;
  if (a.perturb > 0.0) {
    const CounterRng rng(cfg.run.seed, 73);
    for (std::size_t k = 0; k < u0.values.size(); ++k)
      for (int i = 0; i < 3; ++i) u0.values[k][i] += a.perturb * rng.uniform(k * 3 + i, -1.0, 1.0);
  }
  const auto write_snap = [&](double t, const GridFunction<3>& s) {
    auto os = open_out(fs::path(a.out) / snapshot_name(t));
    write_profile_csv(os, s);
  };
  write_snap(0.0, u0);
  const double dt = cfg.pde.time_step(grid);
  const std::size_t total = static_cast<std::size_t>(std::ceil(a.march / dt - 1e-12));
  MarchOptions<3> mo;
  mo.snapshot_every = a.snapshot_every > 0 ? a.snapshot_every : std::max<std::size_t>(1, total / 20);
  double last_distance = sup_distance(u0, base);
  mo.on_snapshot = [&](double t, const GridFunction<3>& s) {
    write_snap(t, s);
    last_distance = sup_distance(s, base);
    return true;
  };
  try {
    time_march<3>(sys.f, u0, a.march, cfg.pde, mo);
  } catch (const BlowupError& e) {
    std::cerr << "pde: blow-up at t=" << format_double(e.time()) << '\n';
    return kFail;
  }
  std::cout << "initial sup-distance " << format_double(sup_distance(u0, base)) << ", final "
            << format_double(last_distance) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const std::string& cfg_path, const std::string& out, bool times, bool quiet, unsigned jobs) {
  const SystemConfig cfg = load(cfg_path);
  SuiteOptions so;
  so.jobs = jobs;
  if (!quiet)
    so.on_check = [](const CheckRecord& r) {
      std::cerr << (r.passed ? "PASS " : "FAIL ") << r.name << "  value=" << format_double(r.value)
                << "  tol=" << format_double(r.tol) << '\n';
    };
  const VerificationReport report = run_full_suite(cfg, so);
  {
    auto os = open_out(out);
    os << json_string(report.to_json(times));
  }
  std::cout << "verdict: " << report.verdict() << '\n';
  for (const auto& name : report.failed_checks()) std::cout << "failed: " << name << '\n';
  if (report.aborted) {
    std::cerr << "aborted: " << report.abort_reason << '\n';
    return kUsage;
  }
  return report.passed() ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative embedding of planar dynamics: construction, simulation and verification"};
  app.require_subcommand(1);
  unsigned jobs = 0;
  app.add_option("--jobs", jobs, "Worker threads (0: hardware concurrency)");

  std::string build_cfg;
  auto* build = app.add_subcommand("build", "Resolve the automatic constants and print the config");
  build->add_option("config", build_cfg, "Config JSON")->required();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Integrate trajectories and write CSVs");
  simulate->add_option("config", sim.config, "Config JSON")->required();
  simulate->add_option("--system", sim.system, "template, planar or embedded")->required();
  simulate->add_option("--ic", sim.ic, "CSV of initial conditions or random:<k>")->required();
  simulate->add_flag("--on-h", sim.on_h, "Constrain to the hyperplane S = 0");
  simulate->add_option("--T", sim.T, "Horizon (default run.T)");
  simulate->add_option("-o,--out", sim.out, "Output directory");

  PdeArgs pde;
  auto* pde_cmd = app.add_subcommand("pde", "Steady residuals and time marches of the reaction-diffusion system");
  pde_cmd->add_option("config", pde.config, "Config JSON")->required();
  pde_cmd->add_option("--profile", pde.profile, "arc:<lambda>, homog:<c|P> or file:<path>")->required();
  auto* march = pde_cmd->add_option("--march", pde.march, "March to time T, writing snapshots");
  auto* resid = pde_cmd->add_flag("--residual", pde.residual, "Print the steady residual as JSON");
  march->excludes(resid);
  pde_cmd->add_option("--perturb", pde.perturb, "Uniform perturbation amplitude for --march");
  pde_cmd->add_option("--snapshot-every", pde.snapshot_every, "Steps between snapshots");
  pde_cmd->add_option("-o,--out", pde.out, "Output directory");

  std::string verify_cfg, report_path = "report.json";
  bool with_times = false, quiet = false;
  auto* verify = app.add_subcommand("verify", "Run the full verification suite");
  verify->add_option("config", verify_cfg, "Config JSON")->required();
  verify->add_option("-o,--out", report_path, "Report JSON path");
  verify->add_flag("--times", with_times, "Include wall times in the report");
  verify->add_flag("-q,--quiet", quiet, "No per-check progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*build) return cmd_build(build_cfg, jobs);
    if (*simulate) return cmd_simulate(sim, jobs);
    if (*pde_cmd) return cmd_pde(pde, jobs);
    if (*verify) return cmd_verify(verify_cfg, report_path, with_times, quiet, jobs);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConstructionError& e) {
    std::cerr << "construction failed: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
