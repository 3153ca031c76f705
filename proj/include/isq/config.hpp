#pragma once

// Run configuration: sectioned key = value text, explicit units in key names.
//
//   [domain]    kind = torus | ball ; radius_length (ball only)
//   [point_N]   position_length = x y z ; Z_dimensionless ; cutoff_radius_length ;
//               cutoff_inner_length ; cutoff_outer_length
//   [smooth]    kind = none | trig | radial
//               trig:   constant_energy ; term_N = cos|sin coeff_energy n1 n2 n3
//               radial: core_value_energy ; far_value_energy ; far_gradient_energy = gx gy gz ;
//                       transition_inner_length ; transition_outer_length
//   [mesh]      n ; mu_N (grading override for point N)
//   [solve]     n_eigs ; tol_residual ; max_iter ; k_path = k1 k2 k3 ; k1 k2 k3 ... ; shift_energy
//   [analyze]   a_grid ; fit_window_length = lo hi ; refinements = n1 n2 n3 ...
//   [oracle]    l_max ; k_max ; tol_relative (verify only)
//   [output]    directory
//
// Z, cutoff radii and the residual tolerance have no defaults. Lists are space separated;
// k-path points are separated by ';'.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isq/error.hpp"
#include "isq/model.hpp"

namespace isq {

struct MeshConfig {
  int n = 0;
  std::map<int, double> mu;  // per singular point index
};

struct SolveConfig {
  int n_eigs = 0;
  double tol = 0.0;
  int max_iter = 300;
  std::vector<Point> k_path;  // empty: k = 0
  std::optional<double> shift;
};

struct AnalyzeConfig {
  std::vector<double> a_grid;
  std::optional<std::pair<double, double>> fit_window;
  std::vector<int> refinements;
};

struct OracleConfig {
  int l_max = 0;
  int k_max = 1;
  std::optional<double> tol_relative;  // verify: allowed relative deviation from the oracle
};

struct RunConfig {
  PotentialSpec spec;
  std::optional<MeshConfig> mesh;
  std::optional<SolveConfig> solve;
  std::optional<AnalyzeConfig> analyze;
  std::optional<OracleConfig> oracle;
  std::string output_dir = "out";
};

namespace detail {

using boost::property_tree::ptree;

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::istringstream is(s);
  std::vector<double> v;
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw Error(ErrorCode::Config, what + ": cannot parse number '" + tok + "'");
    v.push_back(x);
  }
  return v;
}

class Section {
 public:
  Section(const ptree& t, std::string name) : t_(t), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) const {
    const auto it = t_.find(key);
    if (it == t_.not_found()) return std::nullopt;
    used_.push_back(key);
    return it->second.data();
  }
  std::string str(const std::string& key) const {
    auto v = raw(key);
    if (!v) throw Error(ErrorCode::Config, "[" + name_ + "] missing required key '" + key + "'");
    return *v;
  }
  double num(const std::string& key) const { return single(key, str(key)); }
  std::optional<double> opt_num(const std::string& key) const {
    auto v = raw(key);
    return v ? std::optional<double>(single(key, *v)) : std::nullopt;
  }
  int integer(const std::string& key) const {
    const double x = num(key);
    if (x != std::floor(x)) throw Error(ErrorCode::Config, "[" + name_ + "] " + key + " must be an integer");
    return int(x);
  }
  std::vector<double> list(const std::string& key, std::size_t expect = 0) const {
    auto v = parse_list(str(key), "[" + name_ + "] " + key);
    if (expect && v.size() != expect)
      throw Error(ErrorCode::Config, "[" + name_ + "] " + key + " needs " + std::to_string(expect) + " numbers");
    return v;
  }
  /// Rejects keys that were never read (typos would otherwise be silently ignored).
  void finish() const {
    for (const auto& kv : t_)
      if (std::find(used_.begin(), used_.end(), kv.first) == used_.end())
        throw Error(ErrorCode::Config, "[" + name_ + "] unknown key '" + kv.first + "'");
  }
  const ptree& tree() const { return t_; }

 private:
  double single(const std::string& key, const std::string& s) const {
    const auto v = parse_list(s, "[" + name_ + "] " + key);
    if (v.size() != 1) throw Error(ErrorCode::Config, "[" + name_ + "] " + key + " needs one number");
    return v[0];
  }
  const ptree& t_;
  std::string name_;
  mutable std::vector<std::string> used_;
};

inline int suffix_index(const std::string& key, const std::string& prefix) {
  if (key.rfind(prefix, 0) != 0) return -1;
  const std::string rest = key.substr(prefix.size());
  if (rest.empty() || !std::all_of(rest.begin(), rest.end(), ::isdigit)) return -1;
  return std::stoi(rest);
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  using detail::Section;
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::Config, std::string("config syntax: ") + e.what());
  }
  for (const auto& kv : pt)
    if (!kv.second.data().empty()) throw Error(ErrorCode::Config, "key '" + kv.first + "' outside any section");
  RunConfig cfg;
  const auto dom_it = pt.find("domain");
  if (dom_it == pt.not_found()) throw Error(ErrorCode::Config, "missing [domain] section");
  Section dom(dom_it->second, "domain");
  const std::string kind = dom.str("kind");
  Domain domain;
  if (kind == "torus") {
    domain = Domain::torus();
  } else if (kind == "ball") {
    domain = Domain::ball(dom.num("radius_length"));
  } else {
    throw Error(ErrorCode::Config, "[domain] kind must be torus or ball");
  }
  dom.finish();

  std::map<int, SingularPoint> points;
  SmoothPart smooth = TrigPolynomial{};
  for (const auto& kv : pt) {
    const std::string& name = kv.first;
    if (name == "domain") continue;
    if (const int idx = detail::suffix_index(name, "point_"); idx >= 0) {
      Section s(kv.second, name);
      SingularPoint p;
      const auto pos = s.list("position_length", 3);
      p.position = Point(pos[0], pos[1], pos[2]);
      p.Z = s.num("Z_dimensionless");
      p.cutoff_radius = s.num("cutoff_radius_length");
      p.cutoff.inner = s.num("cutoff_inner_length");
      p.cutoff.outer = s.num("cutoff_outer_length");
      s.finish();
      points[idx] = p;
    } else if (name == "smooth") {
      Section s(kv.second, name);
      const std::string k = s.str("kind");
      if (k == "none") {
        smooth = TrigPolynomial{};
      } else if (k == "trig") {
        TrigPolynomial tp;
        tp.constant = s.opt_num("constant_energy").value_or(0.0);
        std::map<int, TrigTerm> terms;
        for (const auto& t : s.tree()) {
          const int ti = detail::suffix_index(t.first, "term_");
          if (ti < 0) continue;
          std::istringstream is(s.str(t.first));
          std::string fn;
          is >> fn;
          std::string rest;
          std::getline(is, rest);
          const auto v = detail::parse_list(rest, "[smooth] " + t.first);
          if ((fn != "cos" && fn != "sin") || v.size() != 4)
            throw Error(ErrorCode::Config, "[smooth] " + t.first + " must read 'cos|sin coeff n1 n2 n3'");
          TrigTerm term;
          term.sine = fn == "sin";
          term.coeff = v[0];
          for (int c = 0; c < 3; ++c) {
            if (v[c + 1] != std::floor(v[c + 1])) throw Error(ErrorCode::Config, "trig wave vector must be integer");
            term.n[c] = int(v[c + 1]);
          }
          terms[ti] = term;
        }
        for (const auto& [i, t] : terms) tp.terms.push_back(t);
        smooth = tp;
      } else if (k == "radial") {
        RadialProfile rp;
        rp.core_value = s.num("core_value_energy");
        rp.far_value = s.num("far_value_energy");
        const auto g = s.list("far_gradient_energy", 3);
        rp.far_gradient = Point(g[0], g[1], g[2]);
        rp.transition_inner = s.num("transition_inner_length");
        rp.transition_outer = s.num("transition_outer_length");
        if (!(rp.transition_inner > 0.0 && rp.transition_outer > rp.transition_inner))
          throw Error(ErrorCode::Config, "[smooth] needs 0 < transition_inner < transition_outer");
        smooth = rp;
      } else {
        throw Error(ErrorCode::Config, "[smooth] kind must be none, trig or radial");
      }
      s.finish();
    } else if (name == "mesh") {
      Section s(kv.second, name);
      MeshConfig m;
      m.n = s.integer("n");
      for (const auto& t : s.tree())
        if (const int i = detail::suffix_index(t.first, "mu_"); i >= 0) m.mu[i] = s.num(t.first);
      s.finish();
      cfg.mesh = m;
    } else if (name == "solve") {
      Section s(kv.second, name);
      SolveConfig sc;
      sc.n_eigs = s.integer("n_eigs");
      sc.tol = s.num("tol_residual");
      if (auto mi = s.opt_num("max_iter")) sc.max_iter = int(*mi);
      if (auto kp = s.raw("k_path")) {
        std::istringstream is(*kp);
        std::string item;
        while (std::getline(is, item, ';')) {
          if (item.find_first_not_of(" \t") == std::string::npos) continue;
          const auto v = detail::parse_list(item, "[solve] k_path");
          if (v.size() != 3) throw Error(ErrorCode::Config, "[solve] k_path entries need three components");
          sc.k_path.push_back(Point(v[0], v[1], v[2]));
        }
      }
      sc.shift = s.opt_num("shift_energy");
      s.finish();
      cfg.solve = sc;
    } else if (name == "analyze") {
      Section s(kv.second, name);
      AnalyzeConfig ac;
      if (s.raw("a_grid")) ac.a_grid = s.list("a_grid");
      if (s.raw("fit_window_length")) {
        const auto w = s.list("fit_window_length", 2);
        ac.fit_window = std::make_pair(w[0], w[1]);
      }
      if (s.raw("refinements"))
        for (double x : s.list("refinements")) ac.refinements.push_back(int(x));
      s.finish();
      cfg.analyze = ac;
    } else if (name == "oracle") {
      Section s(kv.second, name);
      OracleConfig oc;
      oc.l_max = s.integer("l_max");
      oc.k_max = s.integer("k_max");
      oc.tol_relative = s.opt_num("tol_relative");
      s.finish();
      cfg.oracle = oc;
    } else if (name == "output") {
      Section s(kv.second, name);
      cfg.output_dir = s.str("directory");
      s.finish();
    } else {
      throw Error(ErrorCode::Config, "unknown section [" + name + "]");
    }
  }
  std::vector<SingularPoint> pts;
  int expect = 0;
  for (const auto& [i, p] : points) {
    if (i != expect++) throw Error(ErrorCode::Config, "point sections must be numbered 0, 1, 2, ...");
    pts.push_back(p);
  }
  try {
    cfg.spec = PotentialSpec(domain, pts, smooth);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, std::string("invalid potential: ") + e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  return parse_config(in);
}

/// Canonical form: fixed section order, keys sorted within each section, %.17g numbers.
inline std::string serialize_config(const RunConfig& cfg) {
  using detail::fmt;
  std::ostringstream os;
  auto section = [&](const std::string& name, std::map<std::string, std::string> kv) {
    os << '[' << name << "]\n";
    for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
    os << '\n';
  };
  const auto& d = cfg.spec.domain();
  if (d.is_torus())
    section("domain", {{"kind", "torus"}});
  else
    section("domain", {{"kind", "ball"}, {"radius_length", fmt(d.radius)}});
  for (std::size_t i = 0; i < cfg.spec.singular().size(); ++i) {
    const auto& p = cfg.spec.singular()[i];
    section("point_" + std::to_string(i),
            {{"position_length", detail::fmt_list({p.position[0], p.position[1], p.position[2]})},
             {"Z_dimensionless", fmt(p.Z)},
             {"cutoff_radius_length", fmt(p.cutoff_radius)},
             {"cutoff_inner_length", fmt(p.cutoff.inner)},
             {"cutoff_outer_length", fmt(p.cutoff.outer)}});
  }
  if (const auto* tp = std::get_if<TrigPolynomial>(&cfg.spec.smooth_part())) {
    if (tp->constant == 0.0 && tp->terms.empty()) {
      section("smooth", {{"kind", "none"}});
    } else {
      std::map<std::string, std::string> kv{{"kind", "trig"}, {"constant_energy", fmt(tp->constant)}};
      for (std::size_t i = 0; i < tp->terms.size(); ++i) {
        const auto& t = tp->terms[i];
        kv["term_" + std::to_string(i)] = std::string(t.sine ? "sin " : "cos ") + fmt(t.coeff) + " " +
                                          std::to_string(t.n[0]) + " " + std::to_string(t.n[1]) + " " +
                                          std::to_string(t.n[2]);
      }
      section("smooth", kv);
    }
  } else {
    const auto& rp = std::get<RadialProfile>(cfg.spec.smooth_part());
    section("smooth", {{"kind", "radial"},
                       {"core_value_energy", fmt(rp.core_value)},
                       {"far_value_energy", fmt(rp.far_value)},
                       {"far_gradient_energy", detail::fmt_list({rp.far_gradient[0], rp.far_gradient[1], rp.far_gradient[2]})},
                       {"transition_inner_length", fmt(rp.transition_inner)},
                       {"transition_outer_length", fmt(rp.transition_outer)}});
  }
  if (cfg.mesh) {
    std::map<std::string, std::string> kv{{"n", std::to_string(cfg.mesh->n)}};
    for (const auto& [i, mu] : cfg.mesh->mu) kv["mu_" + std::to_string(i)] = fmt(mu);
    section("mesh", kv);
  }
  if (cfg.solve) {
    std::map<std::string, std::string> kv{{"n_eigs", std::to_string(cfg.solve->n_eigs)},
                                          {"tol_residual", fmt(cfg.solve->tol)},
                                          {"max_iter", std::to_string(cfg.solve->max_iter)}};
    if (!cfg.solve->k_path.empty()) {
      std::string s;
      for (std::size_t i = 0; i < cfg.solve->k_path.size(); ++i) {
        const auto& k = cfg.solve->k_path[i];
        s += (i ? " ; " : "") + detail::fmt_list({k[0], k[1], k[2]});
      }
      kv["k_path"] = s;
    }
    if (cfg.solve->shift) kv["shift_energy"] = fmt(*cfg.solve->shift);
    section("solve", kv);
  }
  if (cfg.analyze) {
    std::map<std::string, std::string> kv;
    if (!cfg.analyze->a_grid.empty()) kv["a_grid"] = detail::fmt_list(cfg.analyze->a_grid);
    if (cfg.analyze->fit_window)
      kv["fit_window_length"] = detail::fmt_list({cfg.analyze->fit_window->first, cfg.analyze->fit_window->second});
    if (!cfg.analyze->refinements.empty()) {
      std::string s;
      for (std::size_t i = 0; i < cfg.analyze->refinements.size(); ++i)
        s += (i ? " " : "") + std::to_string(cfg.analyze->refinements[i]);
      kv["refinements"] = s;
    }
    section("analyze", kv);
  }
  if (cfg.oracle) {
    std::map<std::string, std::string> kv{{"l_max", std::to_string(cfg.oracle->l_max)},
                                          {"k_max", std::to_string(cfg.oracle->k_max)}};
    if (cfg.oracle->tol_relative) kv["tol_relative"] = fmt(*cfg.oracle->tol_relative);
    section("oracle", kv);
  }
  section("output", {{"directory", cfg.output_dir}});
  std::string out = os.str();
  out.pop_back();  // single trailing newline
  return out;
}

}  // namespace isq
