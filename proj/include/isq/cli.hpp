#pragma once

// Subcommand implementations behind tools/isq. Each command writes its outputs plus a
// manifest.json (canonical config, git-style SHA-1 blob hashes, wall times) into the
// output directory and returns the process exit code.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isq/acceptance.hpp"
#include "isq/analyze.hpp"
#include "isq/assemble.hpp"
#include "isq/bspec.hpp"
#include "isq/config.hpp"
#include "isq/eigensolve.hpp"
#include "isq/mesh.hpp"
#include "isq/radial_oracle.hpp"

namespace isq::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kPass = 0, kFail = 1, kAssumption = 2 };

/// sha1("blob <size>\0" + content), as printed by `git hash-object`.
inline std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) && EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error(ErrorCode::Io, "SHA-1 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

struct Options {
  std::string config_path;
  std::string out_dir;  // overrides [output] directory when set
  int threads = 1;
  unsigned seed = 20240601u;
  bool export_arrays = false;  // write mesh and matrices in full, not only their hashes
};

/// Output directory, timing and hash bookkeeping for one run.
class Run {
 public:
  Run(std::string command, std::string out_dir, const Options& opts, std::ostream& log)
      : command_(std::move(command)), dir_(std::move(out_dir)), opts_(opts), log_(log),
        t0_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(dir_);
  }

  std::ostream& log() { return log_; }
  const Options& options() const { return opts_; }
  const std::string& dir() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(std::filesystem::path(dir_) / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + (std::filesystem::path(dir_) / name).string());
    f << content;
    outputs_[name] = git_blob_sha1(content);
  }

  /// Records the hash of an artifact that is only written with --export.
  void record(const std::string& name, const std::string& content) {
    if (opts_.export_arrays)
      write(name, content);
    else
      hashes_[name] = git_blob_sha1(content);
  }

  template <class F>
  auto timed(const std::string& stage, F&& f) {
    const auto t = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      wall_[stage] += seconds_since(t);
    } else {
      auto r = f();
      wall_[stage] += seconds_since(t);
      return r;
    }
  }

  void set_config(const std::string& canonical) { config_ = canonical; }
  void note(const std::string& key, nlohmann::json v) { notes_[key] = std::move(v); }

  int finish(int code) {
    nlohmann::json m;
    m["schema_version"] = kSchemaVersion;
    m["command"] = command_;
    m["threads"] = opts_.threads;
    m["seed"] = opts_.seed;
    m["exit_code"] = code;
    if (!config_.empty()) {
      m["config_canonical"] = config_;
      m["config_hash"] = git_blob_sha1(config_);
    }
    m["outputs"] = outputs_;
    m["unwritten_hashes"] = hashes_;
    wall_["total"] = seconds_since(t0_);
    m["wall_seconds"] = wall_;
    if (!notes_.empty()) m["notes"] = notes_;
    std::ofstream f(std::filesystem::path(dir_) / "manifest.json");
    f << m.dump(2) << '\n';
    return code;
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
  }

  std::string command_, dir_;
  Options opts_;
  std::ostream& log_;
  std::chrono::steady_clock::time_point t0_;
  std::string config_;
  std::map<std::string, std::string> outputs_, hashes_;
  std::map<std::string, double> wall_;
  nlohmann::json notes_ = nlohmann::json::object();
};

namespace detail {

inline nlohmann::json cplx_json(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

inline const char* kind_name(RootKind k) { return k == RootKind::BetaPlus ? "beta_plus" : "alpha_minus"; }

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class Scalar>
std::string matrix_text(const SparseRow<Scalar>& S) {
  std::ostringstream os;
  export_matrix(S, os);
  return os.str();
}

/// ASCII eigenvector file: "isq-eigvec 1", "vertices <nv> eigs <ne> k <k1> <k2> <k3>", then
/// one line per mesh vertex holding "re im" for each eigenvector.
inline std::string eigvec_text(const std::vector<DiscreteFunction>& fs, const Point& k) {
  std::ostringstream os;
  const std::size_t nv = fs.empty() ? 0 : fs[0].values.size();
  os << "isq-eigvec 1\nvertices " << nv << " eigs " << fs.size() << " k " << fmt(k[0]) << ' ' << fmt(k[1]) << ' '
     << fmt(k[2]) << '\n';
  for (std::size_t v = 0; v < nv; ++v) {
    for (std::size_t j = 0; j < fs.size(); ++j)
      os << (j ? " " : "") << fmt(fs[j].values[v].real()) << ' ' << fmt(fs[j].values[v].imag());
    os << '\n';
  }
  return os.str();
}

inline const MeshConfig& need_mesh(const RunConfig& cfg) {
  if (!cfg.mesh) throw Error(ErrorCode::Config, "this command needs a [mesh] section");
  return *cfg.mesh;
}

inline const SolveConfig& need_solve(const RunConfig& cfg) {
  if (!cfg.solve) throw Error(ErrorCode::Config, "this command needs a [solve] section");
  return *cfg.solve;
}

inline MeshPtr build_mesh(const RunConfig& cfg, int n) {
  const auto& mc = need_mesh(cfg);
  const auto& pts = cfg.spec.singular();
  for (const auto& [i, mu] : mc.mu)
    if (i < 0 || std::size_t(i) >= pts.size())
      throw Error(ErrorCode::Config, "[mesh] mu_" + std::to_string(i) + " names no singular point");
  if (cfg.spec.domain().is_torus()) {
    std::vector<double> mu;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto it = mc.mu.find(int(i));
      mu.push_back(it != mc.mu.end() ? it->second : default_grading(pts[i].Z));
    }
    return build_torus_mesh(cfg.spec, n, mu);
  }
  std::optional<double> mu;
  if (const auto it = mc.mu.find(0); it != mc.mu.end()) mu = it->second;
  return build_ball_mesh(cfg.spec, n, mu);
}

inline bool uniform_mesh(const GradedMesh& m) {
  for (double g : m.grading)
    if (g != 1.0) return false;
  return true;
}

/// Exact spectrum when one is available: free torus (|k + 2 pi m|^2) or a ball with at most
/// one centred point and no smooth part (squared Bessel zeros with multiplicity 2l+1).
inline std::optional<std::vector<double>> exact_spectrum(const PotentialSpec& spec, const Point& k, int count) {
  if (!smooth_is_zero(spec.smooth_part())) return std::nullopt;
  std::vector<double> ev;
  if (spec.domain().is_torus()) {
    if (!spec.singular().empty()) return std::nullopt;
    const int M = 1 + int(std::ceil(std::sqrt(double(count))));
    for (int a = -M; a <= M; ++a)
      for (int b = -M; b <= M; ++b)
        for (int c = -M; c <= M; ++c)
          ev.push_back((k + 2.0 * std::numbers::pi * Point(a, b, c)).squaredNorm());
  } else {
    double Z = 0.0;
    if (spec.singular().size() > 1) return std::nullopt;
    if (spec.singular().size() == 1) {
      const auto& p = spec.singular()[0];
      if (p.position.norm() != 0.0 || p.cutoff.inner < spec.domain().radius) return std::nullopt;
      Z = p.Z;
    }
    const double R = spec.domain().radius;
    for (int l = 0; l <= count; ++l)
      for (int kk = 1; kk <= count; ++kk) {
        const double lam = model_eigenvalue(Z, l, kk, R);
        for (int m = 0; m < 2 * l + 1; ++m) ev.push_back(lam);
      }
  }
  std::sort(ev.begin(), ev.end());
  ev.resize(std::min<std::size_t>(ev.size(), std::size_t(count)));
  return ev;
}

}  // namespace detail

/// JSON b-spectral report for every singular point of the configuration.
inline nlohmann::json bspec_report(const PotentialSpec& spec, int L_max) {
  using nlohmann::json;
  json rep;
  rep["schema_version"] = kSchemaVersion;
  rep["assumption2_satisfied"] = spec.assumption2_satisfied();
  if (spec.assumption2_satisfied()) {
    const double e = eta(spec);
    rep["eta"] = std::isfinite(e) ? json(e) : json(nullptr);
    json gens = json::array();
    for (const auto& g : singular_space_Ws(spec)) gens.push_back({{"point", g.point}, {"exponent", g.exponent}});
    rep["Ws_generators"] = gens;
  } else {
    rep["eta"] = nullptr;
    rep["Ws_generators"] = json::array();
  }
  json points = json::array();
  for (std::size_t i = 0; i < spec.singular().size(); ++i) {
    const double Z = spec.singular()[i].Z;
    const auto bs = boundary_spectrum(Z, L_max);
    json p;
    p["index"] = i;
    p["Z"] = Z;
    p["L_max"] = L_max;
    p["nu0"] = bs.nu0;
    p["eta"] = bs.eta ? json(*bs.eta) : json(nullptr);
    p["double_root_l"] = bs.double_root_l ? json(*bs.double_root_l) : json(nullptr);
    json roots = json::array();
    for (const auto& r : bs.roots)
      roots.push_back({{"l", r.l},
                       {"kind", detail::kind_name(r.kind)},
                       {"value", detail::cplx_json(r.value)},
                       {"pole_order_minus_one", r.pole_order_minus_one},
                       {"multiplicity", r.multiplicity}});
    p["roots"] = roots;
    const auto cls = classify_extension(Z);
    json basis = json::array();
    for (const auto& f : cls.extension_basis) basis.push_back(f.describe());
    p["classification"] = {{"regime", to_string(cls.regime)}, {"domain", cls.domain_description}, {"basis", basis}};
    json table = json::array();
    for (int j = -4; j <= 4; ++j) {
      const double a = 0.5 * j;
      json row{{"a", a}};
      try {
        row["index"] = fredholm_index(Z, a);
      } catch (const Error& e) {
        row["index"] = nullptr;
        row["error"] = to_string(e.code());
      }
      table.push_back(row);
    }
    p["fredholm"] = table;
    points.push_back(p);
  }
  rep["points"] = points;
  return rep;
}

/// CSV Z,l,k,nu,j,lambda for every singular strength (Z = 0 without points), l <= l_max,
/// k <= k_max, on the ball radius.
inline std::string oracle_table(const RunConfig& cfg) {
  if (!cfg.oracle) throw Error(ErrorCode::Config, "oracle needs an [oracle] section");
  if (cfg.spec.domain().is_torus()) throw Error(ErrorCode::Config, "oracle tables need a ball domain");
  const double R = cfg.spec.domain().radius;
  std::vector<double> Zs;
  for (const auto& p : cfg.spec.singular()) Zs.push_back(p.Z);
  if (Zs.empty()) Zs.push_back(0.0);
  std::ostringstream os;
  os << "Z,l,k,nu,j,lambda\n";
  for (double Z : Zs)
    for (int l = 0; l <= cfg.oracle->l_max; ++l)
      for (int k = 1; k <= cfg.oracle->k_max; ++k) {
        const double nu = radial_order(Z, l);
        const double j = bessel_zero(nu, k);
        os << detail::fmt(Z) << ',' << l << ',' << k << ',' << detail::fmt(nu) << ',' << detail::fmt(j) << ','
           << detail::fmt(model_eigenvalue(Z, l, k, R)) << '\n';
      }
  return os.str();
}

/// Eigenpairs at one quasi-momentum.
struct KSolve {
  Point k = Point::Zero();
  std::vector<double> eigenvalues, residuals;
  std::vector<DiscreteFunction> functions;
  long dofs = 0;
  bool converged = false;
  std::string diagnostic;
  double shift = 0.0;
};

struct SolveOutput {
  MeshPtr mesh;
  std::vector<KSolve> ks;
};

namespace detail {

template <class Scalar>
KSolve solve_operator(Run& run, const DiscreteOperator<Scalar>& op, const PotentialSpec& spec, const SolveConfig& sc,
                      const std::string& tag) {
  run.record("matrix_A" + tag + ".coo", matrix_text(op.A));
  run.record("matrix_M" + tag + ".coo", matrix_text(op.M));
  EigenOptions o;
  o.n_eigs = sc.n_eigs;
  o.tol = sc.tol;
  o.max_iter = sc.max_iter;
  o.seed = run.options().seed;
  o.shift = sc.shift ? *sc.shift : run.timed("shift", [&] { return coercive_shift(spec, op).C; });
  o.validate();
  const auto r = run.timed("eigensolve", [&] { return smallest_eigenpairs(op, o); });
  KSolve ks;
  ks.k = op.k;
  ks.eigenvalues = r.eigenvalues;
  ks.residuals = r.residuals;
  ks.functions = r.functions;
  ks.dofs = long(op.size());
  ks.converged = r.converged;
  ks.diagnostic = r.diagnostic;
  ks.shift = o.shift;
  return ks;
}

}  // namespace detail

/// Mesh, assembly and eigensolve for every k of the path (k = 0 when empty).
inline SolveOutput solve(Run& run, const RunConfig& cfg, int n) {
  const auto& sc = detail::need_solve(cfg);
  if (!cfg.spec.assumption2_satisfied())
    throw Error(ErrorCode::AssumptionViolation, "min Z(p) <= -1/4: H is not bounded below, solve refused");
  SolveOutput out;
  out.mesh = run.timed("mesh", [&] { return detail::build_mesh(cfg, n); });
  const std::string sfx = "_n" + std::to_string(n);
  {
    std::ostringstream os;
    export_mesh(*out.mesh, os);
    run.record("mesh" + sfx + ".txt", os.str());
  }
  if (!cfg.spec.domain().is_torus()) {
    if (!sc.k_path.empty()) throw Error(ErrorCode::Config, "k_path applies to torus domains only");
    const auto op = run.timed("assemble", [&] { return assemble_dirichlet(out.mesh, cfg.spec, 0.0); });
    out.ks.push_back(detail::solve_operator(run, op, cfg.spec, sc, sfx));
    return out;
  }
  std::vector<Point> path = sc.k_path;
  if (path.empty()) path.push_back(Point::Zero());
  for (std::size_t i = 0; i < path.size(); ++i) {
    const BlochVector k(path[i]);
    const std::string tag = sfx + "_k" + std::to_string(i);
    if (k.k().isZero(0.0)) {
      const auto op = run.timed("assemble", [&] { return assemble_hk<double>(out.mesh, cfg.spec, k); });
      out.ks.push_back(detail::solve_operator(run, op, cfg.spec, sc, tag));
    } else {
      const auto op = run.timed("assemble", [&] { return assemble_hk<cplx>(out.mesh, cfg.spec, k); });
      out.ks.push_back(detail::solve_operator(run, op, cfg.spec, sc, tag));
    }
  }
  return out;
}

inline std::string eigenvalue_csv(const SolveOutput& s) {
  std::vector<BandRow> rows;
  for (std::size_t i = 0; i < s.ks.size(); ++i)
    for (std::size_t b = 0; b < s.ks[i].eigenvalues.size(); ++b)
      rows.push_back({int(i), s.ks[i].k, int(b), s.ks[i].eigenvalues[b], s.ks[i].residuals[b]});
  std::ostringstream os;
  write_band_csv(rows, os);
  return os.str();
}

namespace detail {

inline void persist_solve(Run& run, const SolveOutput& s) {
  run.write("eigenvalues.csv", eigenvalue_csv(s));
  for (std::size_t i = 0; i < s.ks.size(); ++i)
    run.write("eigenvectors_k" + std::to_string(i) + ".txt", eigvec_text(s.ks[i].functions, s.ks[i].k));
}

inline bool all_converged(Run& run, const SolveOutput& s) {
  bool ok = true;
  for (std::size_t i = 0; i < s.ks.size(); ++i)
    if (!s.ks[i].converged) {
      run.log() << "k_index " << i << ": " << s.ks[i].diagnostic << '\n';
      ok = false;
    }
  return ok;
}

inline std::string out_dir(const RunConfig& cfg, const Options& o) {
  return o.out_dir.empty() ? cfg.output_dir : o.out_dir;
}

inline int l_max(const RunConfig& cfg) { return cfg.oracle ? cfg.oracle->l_max : kDefaultLmax; }

/// Wraps a command body: config loading, thread cap, manifest and exit-code mapping.
template <class Body>
int run_command(const std::string& name, const Options& opts, std::ostream& log, Body&& body) {
  set_num_threads(opts.threads);
  RunConfig cfg;
  try {
    cfg = load_config(opts.config_path);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kFail;
  }
  Run run(name, out_dir(cfg, opts), opts, log);
  run.set_config(serialize_config(cfg));
  try {
    return run.finish(body(run, cfg));
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    run.note("error", e.what());
    return run.finish(e.code() == ErrorCode::AssumptionViolation ? kAssumption : kFail);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    run.note("error", e.what());
    return run.finish(kFail);
  }
}

}  // namespace detail

inline int cmd_bspec(const Options& opts, std::ostream& log = std::cout) {
  return detail::run_command("bspec", opts, log, [&](Run& run, const RunConfig& cfg) {
    const auto rep = bspec_report(cfg.spec, detail::l_max(cfg));
    run.write("bspec.json", rep.dump(2) + "\n");
    log << "wrote " << run.dir() << "/bspec.json\n";
    return int(kPass);
  });
}

inline int cmd_oracle(const Options& opts, std::ostream& log = std::cout) {
  return detail::run_command("oracle", opts, log, [&](Run& run, const RunConfig& cfg) {
    const std::string csv = oracle_table(cfg);
    run.write("oracle.csv", csv);
    log << csv;
    return int(kPass);
  });
}

inline int cmd_solve(const Options& opts, std::ostream& log = std::cout) {
  return detail::run_command("solve", opts, log, [&](Run& run, const RunConfig& cfg) {
    if (!cfg.spec.assumption2_satisfied()) run.write("bspec.json", bspec_report(cfg.spec, detail::l_max(cfg)).dump(2) + "\n");
    const auto s = solve(run, cfg, detail::need_mesh(cfg).n);
    detail::persist_solve(run, s);
    log << eigenvalue_csv(s);
    run.note("h_max", s.mesh->h_max);
    return int(detail::all_converged(run, s) ? kPass : kFail);
  });
}

inline int cmd_analyze(const Options& opts, std::ostream& log = std::cout) {
  return detail::run_command("analyze", opts, log, [&](Run& run, const RunConfig& cfg) {
    using nlohmann::json;
    if (!cfg.spec.assumption2_satisfied()) run.write("bspec.json", bspec_report(cfg.spec, detail::l_max(cfg)).dump(2) + "\n");
    std::vector<int> levels = cfg.analyze ? cfg.analyze->refinements : std::vector<int>{};
    if (levels.empty()) levels.push_back(detail::need_mesh(cfg).n);
    std::sort(levels.begin(), levels.end());
    json summary;
    summary["schema_version"] = kSchemaVersion;
    std::vector<SolveOutput> runs;
    bool converged = true;
    for (int n : levels) {
      runs.push_back(solve(run, cfg, n));
      converged = detail::all_converged(run, runs.back()) && converged;
    }
    const SolveOutput& fine = runs.back();
    detail::persist_solve(run, fine);
    const DiscreteFunction& u = fine.ks[0].functions[0];

    json fits = json::array();
    for (std::size_t i = 0; i < cfg.spec.singular().size(); ++i) {
      FitWindow w;
      if (cfg.analyze && cfg.analyze->fit_window) w = {cfg.analyze->fit_window->first, cfg.analyze->fit_window->second};
      const auto f = run.timed("analyze", [&] { return fit_singular_exponent(u, cfg.spec.singular()[i], w); });
      std::ostringstream os;
      write_exponent_csv(f, os);
      run.write("exponent_point" + std::to_string(i) + ".csv", os.str());
      const double Z = cfg.spec.singular()[i].Z;
      fits.push_back({{"point", i},
                      {"slope", f.slope},
                      {"predicted", std::sqrt(0.25 + Z) - 0.5},
                      {"r_lo", f.r_lo},
                      {"r_hi", f.r_hi},
                      {"r2", f.r2},
                      {"angular_variation", f.angular_variation},
                      {"vanished", f.vanished}});
    }
    summary["exponent_fits"] = fits;

    if (runs.size() >= 3) {
      std::vector<RateSample> samples;
      for (const auto& r : runs) samples.push_back({r.mesh->h_max, r.ks[0].dofs, r.ks[0].eigenvalues[0]});
      const auto exact = detail::exact_spectrum(cfg.spec, runs[0].ks[0].k, 1);
      const Regime regime = detail::uniform_mesh(*fine.mesh) ? Regime::Uniform : Regime::Graded;
      const auto rep = convergence_study(samples, regime, exact ? std::optional<double>((*exact)[0]) : std::nullopt);
      std::ostringstream os;
      write_rate_csv(rep, os);
      run.write("rate.csv", os.str());
      summary["rate"] = {{"regime", to_string(rep.regime)}, {"reference_kind", rep.reference_kind},
                         {"reference", rep.reference},  {"slope", rep.slope},
                         {"r2", rep.r2},                {"preasymptotic", rep.preasymptotic}};
      if (cfg.analyze && !cfg.analyze->a_grid.empty()) {
        std::vector<DiscreteFunction> family;
        for (const auto& r : runs) family.push_back(r.ks[0].functions[0]);
        const auto prof =
            run.timed("analyze", [&] { return weighted_regularity_profile(family, cfg.spec, cfg.analyze->a_grid); });
        std::ostringstream ps;
        write_profile_csv(prof, ps);
        run.write("profile.csv", ps.str());
        summary["profile_transition"] =
            prof.transition ? json{prof.transition->first, prof.transition->second} : json(nullptr);
      }
    }

    if (!cfg.spec.domain().is_torus() && std::holds_alternative<RadialProfile>(cfg.spec.smooth_part()) &&
        cfg.spec.singular().empty()) {
      const double lam = fine.ks[0].eigenvalues[0];
      const auto d = run.timed("analyze", [&] { return decay_fit(u, lam, cfg.spec); });
      const auto sur = run.timed("analyze", [&] { return radial_decay_surrogate(cfg.spec); });
      std::ostringstream os;
      os << "radius,mean_abs_u,surrogate_abs_u\n";
      for (std::size_t i = 0; i < d.radii.size(); ++i)
        os << detail::fmt(d.radii[i]) << ',' << detail::fmt(d.averages[i]) << ','
           << detail::fmt(sur.decay.averages[i]) << '\n';
      run.write("decay.csv", os.str());
      summary["decay"] = {{"epsilon_hat", d.epsilon_hat},          {"r2", d.r2},
                          {"v_inf", d.v_inf},                      {"linear_bound", d.linear_bound},
                          {"sqrt_bound", d.sqrt_bound},            {"surrogate_lambda", sur.lambda},
                          {"surrogate_epsilon_hat", sur.decay.epsilon_hat}};
    }
    run.write("summary.json", summary.dump(2) + "\n");
    log << summary.dump(2) << '\n';
    return int(converged ? kPass : kFail);
  });
}

/// Config verification: b-spectral report, assumption gate, solve and comparison with the
/// exact spectrum when the configuration has one.
inline int cmd_verify(const Options& opts, std::ostream& log = std::cout) {
  return detail::run_command("verify", opts, log, [&](Run& run, const RunConfig& cfg) {
    run.write("bspec.json", bspec_report(cfg.spec, detail::l_max(cfg)).dump(2) + "\n");
    if (!cfg.spec.assumption2_satisfied()) {
      log << "FAIL assumption: min Z(p) = " << cfg.spec.min_Z() << " <= -1/4, solve refused\n";
      return int(kAssumption);
    }
    const auto s = solve(run, cfg, detail::need_mesh(cfg).n);
    detail::persist_solve(run, s);
    bool ok = detail::all_converged(run, s);
    log << (ok ? "PASS" : "FAIL") << " eigensolver converged\n";
    for (std::size_t i = 0; i < s.ks.size(); ++i) {
      const auto exact = detail::exact_spectrum(cfg.spec, s.ks[i].k, int(s.ks[i].eigenvalues.size()));
      if (!exact) {
        log << "SKIP k_index " << i << ": no exact spectrum for this configuration\n";
        continue;
      }
      if (!cfg.oracle || !cfg.oracle->tol_relative)
        throw Error(ErrorCode::Config, "comparison with the exact spectrum needs [oracle] tol_relative");
      const double tol = *cfg.oracle->tol_relative;
      for (std::size_t b = 0; b < exact->size(); ++b) {
        const double ex = (*exact)[b], got = s.ks[i].eigenvalues[b];
        const bool pass = std::abs(got - ex) <= tol * std::max(1.0, std::abs(ex));
        ok = ok && pass;
        log << (pass ? "PASS" : "FAIL") << " k_index " << i << " band " << b << ": lambda " << detail::fmt(got)
            << " exact " << detail::fmt(ex) << '\n';
      }
    }
    return int(ok ? kPass : kFail);
  });
}

/// Full acceptance suite; needs no configuration.
inline int cmd_acceptance(const Options& opts, std::ostream& log = std::cout) {
  set_num_threads(opts.threads);
  Run run("verify --acceptance", opts.out_dir.empty() ? "out/acceptance" : opts.out_dir, opts, log);
  const auto outcomes = acceptance::run_all(log);
  std::ostringstream os;
  os << "name,pass,seconds,limit_seconds,detail\n";
  bool ok = true;
  for (const auto& o : outcomes) {
    ok = ok && o.pass;
    std::string d = o.detail;
    std::replace(d.begin(), d.end(), '"', '\'');
    os << o.name << ',' << (o.pass ? 1 : 0) << ',' << o.seconds << ',' << o.limit_seconds << ",\"" << d << "\"\n";
  }
  run.write("acceptance.csv", os.str());
  return run.finish(ok ? kPass : kFail);
}

}  // namespace isq::cli
