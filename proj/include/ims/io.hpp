#pragma once

// Run configuration, presets, persistence and scenario orchestration.
//
// Configurations are JSON documents (// comments allowed); see configs/annotated.json
// for every key.

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ims/diagnostics.hpp"
#include "ims/errors.hpp"
#include "ims/grid.hpp"
#include "ims/integrator.hpp"
#include "ims/mixture.hpp"
#include "ims/run.hpp"
#include "ims/state.hpp"

namespace ims {

using json = nlohmann::json;

struct GridConfig {
  int dim{1};
  int M{64};
};

struct SpeciesConfig {
  int N{2};
  std::vector<double> c_bar{1, 1};
  std::vector<std::vector<double>> delta{{0, 1}, {1, 0}};
};

enum class InitKind { Zero, Mode, Random, File };

struct PerturbationConfig {
  double eps{1e-3};
  InitKind init{InitKind::Zero};
  double amplitude{1};
  std::vector<double> pattern;           // species weights of a mode init; default (1, -1, 0, ...)
  std::vector<MultiIndex> modes{{1, 0, 0}};
  int kmax{2};                           // random init: highest wavenumber per axis
  std::uint64_t seed{1};
  std::optional<double> norm_target;     // rescale so |c~|_{H^s} equals this
  bool norm_target_delta_s{false};       // use the certificate's delta_s as the target
  std::string file;
};

enum class FlowKind { Zero, Constant, Stream };

struct FlowConfig {
  FlowKind preset{FlowKind::Zero};
  double scale{1};
  std::array<double, 3> constant{0, 0, 0};
  std::vector<PotentialMode<double>> modes;
};

struct StepperSection {
  Scheme scheme{Scheme::Explicit};
  std::optional<double> dt;
  double t_end{1};
  double cfl_safety{1};
  double linear_solver_tol{1e-10};
  int max_linear_iters{500};
};

struct DiagnosticsConfig {
  int s_norm{2};
  int cadence{0};
  double C_s_param{1};
  double C_poincare_param{1};
  double fit_t0{0};
  double fit_t1{std::numeric_limits<double>::infinity()};
  NormKind fit_norm{NormKind::Hs};
};

struct OutputConfig {
  std::string directory{"ims-out"};
  bool csv{true};
  bool summary{true};
  bool snapshots{false};
  double snapshot_every{0};
};

struct RunConfig {
  std::string name{"custom"};
  GridConfig grid;
  SpeciesConfig species;
  PerturbationConfig perturbation;
  FlowConfig u_bar;
  StepperSection stepper;
  DiagnosticsConfig diagnostics;
  OutputConfig output;
};

inline std::string_view to_string(InitKind k) {
  switch (k) {
    case InitKind::Zero: return "zero";
    case InitKind::Mode: return "mode";
    case InitKind::Random: return "random";
    case InitKind::File: return "file";
  }
  return "zero";
}

inline std::string_view to_string(FlowKind k) {
  switch (k) {
    case FlowKind::Zero: return "zero";
    case FlowKind::Constant: return "constant";
    case FlowKind::Stream: return "stream";
  }
  return "zero";
}

inline std::string_view to_string(NormKind k) {
  switch (k) {
    case NormKind::L2: return "L2";
    case NormKind::Hs: return "Hs";
    case NormKind::HsWeighted: return "Hs_weighted";
  }
  return "Hs";
}

// --------------------------------------------------------------------------
// Parsing and validation

namespace detail {

class ConfigReader {
 public:
  std::vector<ValidationIssue> issues;

  void issue(const std::string& key, const std::string& reason) { issues.push_back({key, reason}); }

  /// Flags keys of `obj` outside `known`.
  void only(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* name : known) ok = ok || k == name;
      if (!ok) issue(prefix + k, "unknown key");
    }
  }

  const json* section(const json& root, const std::string& key) {
    if (!root.contains(key)) return nullptr;
    const json& s = root.at(key);
    if (!s.is_object()) {
      issue(key, "must be an object");
      return nullptr;
    }
    return &s;
  }

  bool number(const json& obj, const std::string& prefix, const char* key, double& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return false;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      issue(prefix + key, "must be a number");
      return false;
    }
    out = v.get<double>();
    if (!std::isfinite(out)) {
      issue(prefix + key, "must be finite");
      return false;
    }
    return true;
  }

  bool integer(const json& obj, const std::string& prefix, const char* key, long long& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return false;
    const json& v = obj.at(key);
    if (v.is_number_integer() || v.is_number_unsigned()) {
      out = v.is_number_unsigned() ? static_cast<long long>(v.get<unsigned long long>()) : v.get<long long>();
      return true;
    }
    if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() && std::abs(v.get<double>()) < 1e15) {
      out = static_cast<long long>(v.get<double>());
      return true;
    }
    issue(prefix + key, "must be an integer");
    return false;
  }

  bool integer(const json& obj, const std::string& prefix, const char* key, int& out) {
    long long v = 0;
    if (!integer(obj, prefix, key, v)) return false;
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      issue(prefix + key, "out of range");
      return false;
    }
    out = static_cast<int>(v);
    return true;
  }

  bool string(const json& obj, const std::string& prefix, const char* key, std::string& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return false;
    const json& v = obj.at(key);
    if (!v.is_string()) {
      issue(prefix + key, "must be a string");
      return false;
    }
    out = v.get<std::string>();
    return true;
  }

  bool boolean(const json& obj, const std::string& prefix, const char* key, bool& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return false;
    const json& v = obj.at(key);
    if (!v.is_boolean()) {
      issue(prefix + key, "must be true or false");
      return false;
    }
    out = v.get<bool>();
    return true;
  }

  bool numbers(const json& v, const std::string& key, std::vector<double>& out) {
    if (!v.is_array()) {
      issue(key, "must be an array of numbers");
      return false;
    }
    std::vector<double> tmp;
    for (const auto& x : v) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        issue(key, "must be an array of numbers");
        return false;
      }
      tmp.push_back(x.get<double>());
    }
    out = std::move(tmp);
    return true;
  }

  bool wavevector(const json& v, const std::string& key, MultiIndex& out) {
    if (!v.is_array() || v.empty() || v.size() > 3) {
      issue(key, "must be an array of 1 to 3 integers");
      return false;
    }
    MultiIndex k{0, 0, 0};
    for (std::size_t a = 0; a < v.size(); ++a) {
      if (!v[a].is_number_integer()) {
        issue(key, "must be an array of 1 to 3 integers");
        return false;
      }
      k[a] = v[a].get<int>();
    }
    out = k;
    return true;
  }
};

inline bool power_of_two(int m) { return m > 0 && (m & (m - 1)) == 0; }

}  // namespace detail

/// Reads a configuration from a JSON value, collecting every problem before
/// throwing a single ValidationError.
inline RunConfig config_from_json(const json& root) {
  detail::ConfigReader r;
  RunConfig cfg;
  if (!root.is_object()) {
    r.issue("", "configuration must be a JSON object");
    throw ValidationError(r.issues);
  }
  r.only(root, "", {"name", "grid", "species", "perturbation", "u_bar", "stepper", "diagnostics", "output"});
  r.string(root, "", "name", cfg.name);

  if (const json* g = r.section(root, "grid")) {
    r.only(*g, "grid.", {"dim", "M"});
    r.integer(*g, "grid.", "dim", cfg.grid.dim);
    r.integer(*g, "grid.", "M", cfg.grid.M);
  }
  if (cfg.grid.dim < 1 || cfg.grid.dim > 3) r.issue("grid.dim", "must be 1, 2 or 3");
  if (cfg.grid.M < 8 || !detail::power_of_two(cfg.grid.M)) r.issue("grid.M", "must be a power of two >= 8");

  bool n_given = false;
  if (const json* s = r.section(root, "species")) {
    r.only(*s, "species.", {"N", "c_bar", "delta"});
    n_given = r.integer(*s, "species.", "N", cfg.species.N);
    if (s->contains("c_bar")) r.numbers(s->at("c_bar"), "species.c_bar", cfg.species.c_bar);
    if (!n_given) cfg.species.N = static_cast<int>(cfg.species.c_bar.size());
    const int n = cfg.species.N;
    if (n < 2) r.issue("species.N", "at least two species are required");
    if (s->contains("delta") && n >= 2) {
      const json& dv = s->at("delta");
      if (dv.is_number()) {
        const double v = dv.get<double>();
        cfg.species.delta.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), v));
        for (int i = 0; i < n; ++i) cfg.species.delta[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0;
      } else if (dv.is_array()) {
        std::vector<std::vector<double>> rows;
        bool ok = true;
        for (const auto& row : dv) {
          std::vector<double> vals;
          if (!r.numbers(row, "species.delta", vals)) {
            ok = false;
            break;
          }
          rows.push_back(std::move(vals));
        }
        if (ok) cfg.species.delta = std::move(rows);
      } else {
        r.issue("species.delta", "must be a number or an N x N array");
      }
    } else if (n >= 2 && static_cast<int>(cfg.species.delta.size()) != n) {
      cfg.species.delta.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 1.0));
      for (int i = 0; i < n; ++i) cfg.species.delta[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0;
    }
  }
  {
    const auto n = static_cast<std::size_t>(std::max(cfg.species.N, 0));
    if (cfg.species.c_bar.size() != n) {
      r.issue("species.c_bar", "must have N entries");
    } else {
      for (double v : cfg.species.c_bar)
        if (!(v > 0)) {
          r.issue("species.c_bar", "strictly positive required");
          break;
        }
    }
    const auto& dl = cfg.species.delta;
    bool shape = dl.size() == n;
    for (const auto& row : dl) shape = shape && row.size() == n;
    if (!shape) {
      r.issue("species.delta", "must be an N x N array");
    } else {
      bool positive = true, symmetric = true;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          if (!(dl[i][j] > 0)) positive = false;
          if (dl[i][j] != dl[j][i]) symmetric = false;
        }
      if (!positive) r.issue("species.delta", "must be positive");
      if (!symmetric) r.issue("species.delta", "must be symmetric");
    }
  }

  if (const json* p = r.section(root, "perturbation")) {
    const std::string pre = "perturbation.";
    r.only(*p, pre, {"eps", "init", "amplitude", "pattern", "modes", "kmax", "seed", "norm_target", "file"});
    r.number(*p, pre, "eps", cfg.perturbation.eps);
    std::string init;
    if (r.string(*p, pre, "init", init)) {
      if (init == "zero") cfg.perturbation.init = InitKind::Zero;
      else if (init == "mode") cfg.perturbation.init = InitKind::Mode;
      else if (init == "random") cfg.perturbation.init = InitKind::Random;
      else if (init == "file") cfg.perturbation.init = InitKind::File;
      else r.issue(pre + "init", "must be one of zero, mode, random, file");
    }
    r.number(*p, pre, "amplitude", cfg.perturbation.amplitude);
    if (p->contains("pattern")) r.numbers(p->at("pattern"), pre + "pattern", cfg.perturbation.pattern);
    if (p->contains("modes")) {
      const json& mv = p->at("modes");
      if (!mv.is_array() || mv.empty()) {
        r.issue(pre + "modes", "must be a non-empty array of wave vectors");
      } else {
        std::vector<MultiIndex> ks;
        for (const auto& k : mv) {
          MultiIndex kk;
          if (r.wavevector(k, pre + "modes", kk)) ks.push_back(kk);
        }
        if (ks.size() == mv.size()) cfg.perturbation.modes = ks;
      }
    }
    r.integer(*p, pre, "kmax", cfg.perturbation.kmax);
    long long seed = 0;
    if (r.integer(*p, pre, "seed", seed)) {
      if (seed < 0) r.issue(pre + "seed", "must be nonnegative");
      else cfg.perturbation.seed = static_cast<std::uint64_t>(seed);
    }
    if (p->contains("norm_target") && !p->at("norm_target").is_null()) {
      const json& nt = p->at("norm_target");
      if (nt.is_string() && nt.get<std::string>() == "delta_s") {
        cfg.perturbation.norm_target_delta_s = true;
      } else {
        double v = 0;
        if (r.number(*p, pre, "norm_target", v)) {
          if (!(v > 0)) r.issue(pre + "norm_target", "must be positive");
          else cfg.perturbation.norm_target = v;
        }
      }
    }
    r.string(*p, pre, "file", cfg.perturbation.file);
  }
  {
    const auto& pc = cfg.perturbation;
    const std::string pre = "perturbation.";
    if (!(pc.eps > 0) || pc.eps > 1) r.issue(pre + "eps", "must be in (0, 1]");
    if (!(pc.amplitude >= 0)) r.issue(pre + "amplitude", "must be nonnegative");
    if (!pc.pattern.empty()) {
      if (static_cast<int>(pc.pattern.size()) != cfg.species.N) {
        r.issue(pre + "pattern", "must have N entries");
      } else {
        double s = 0, m = 0;
        for (double v : pc.pattern) {
          s += v;
          m = std::max(m, std::abs(v));
        }
        if (std::abs(s) > 1e-12 * std::max(1.0, m)) r.issue(pre + "pattern", "must sum to zero");
      }
    }
    if (pc.init == InitKind::Mode)
      for (const auto& k : pc.modes) {
        bool zero = true;
        for (int a = 0; a < 3; ++a) {
          if (k[a] != 0) zero = false;
          if (a >= cfg.grid.dim && k[a] != 0) r.issue(pre + "modes", "wave vector has more entries than grid.dim");
          if (3 * std::abs(k[a]) >= cfg.grid.M) r.issue(pre + "modes", "wave numbers must satisfy 3|k| < M");
        }
        if (zero) r.issue(pre + "modes", "the zero mode violates mass compatibility");
      }
    if (pc.init == InitKind::Random && (pc.kmax < 1 || 3 * pc.kmax >= cfg.grid.M))
      r.issue(pre + "kmax", "must satisfy 1 <= kmax and 3 kmax < M");
    if (pc.init == InitKind::File && pc.file.empty()) r.issue(pre + "file", "required when init is file");
  }

  if (const json* u = r.section(root, "u_bar")) {
    const std::string pre = "u_bar.";
    r.only(*u, pre, {"preset", "scale", "constant", "modes"});
    std::string preset;
    if (r.string(*u, pre, "preset", preset)) {
      if (preset == "zero") cfg.u_bar.preset = FlowKind::Zero;
      else if (preset == "constant") cfg.u_bar.preset = FlowKind::Constant;
      else if (preset == "stream") cfg.u_bar.preset = FlowKind::Stream;
      else r.issue(pre + "preset", "must be one of zero, constant, stream");
    }
    r.number(*u, pre, "scale", cfg.u_bar.scale);
    if (u->contains("constant")) {
      std::vector<double> v;
      if (r.numbers(u->at("constant"), pre + "constant", v)) {
        if (static_cast<int>(v.size()) != cfg.grid.dim) r.issue(pre + "constant", "must have grid.dim entries");
        else
          for (std::size_t a = 0; a < v.size(); ++a) cfg.u_bar.constant[a] = v[a];
      }
    }
    if (u->contains("modes")) {
      const json& mv = u->at("modes");
      if (!mv.is_array()) {
        r.issue(pre + "modes", "must be an array of {k, amplitude, phase, component}");
      } else {
        for (const auto& m : mv) {
          if (!m.is_object()) {
            r.issue(pre + "modes", "must be an array of {k, amplitude, phase, component}");
            continue;
          }
          r.only(m, pre + "modes.", {"k", "amplitude", "phase", "component"});
          PotentialMode<double> pm;
          if (!m.contains("k") || !r.wavevector(m.at("k"), pre + "modes.k", pm.k)) {
            if (!m.contains("k")) r.issue(pre + "modes.k", "required");
            continue;
          }
          r.number(m, pre + "modes.", "amplitude", pm.amplitude);
          r.number(m, pre + "modes.", "phase", pm.phase);
          r.integer(m, pre + "modes.", "component", pm.component);
          if (pm.component < 0 || pm.component > 2) r.issue(pre + "modes.component", "must be 0, 1 or 2");
          for (int a = 0; a < 3; ++a)
            if (3 * std::abs(pm.k[a]) >= cfg.grid.M) r.issue(pre + "modes.k", "wave numbers must satisfy 3|k| < M");
          cfg.u_bar.modes.push_back(pm);
        }
      }
    }
  }
  if (cfg.u_bar.preset == FlowKind::Stream) {
    if (cfg.grid.dim == 1) r.issue("u_bar.preset", "stream requires grid.dim >= 2");
    if (cfg.u_bar.modes.empty()) cfg.u_bar.modes.push_back({{1, 1, 0}, 1.0, 0.0, 2});
  }

  if (const json* s = r.section(root, "stepper")) {
    const std::string pre = "stepper.";
    r.only(*s, pre, {"scheme", "dt", "t_end", "cfl_safety", "linear_solver_tol", "max_linear_iters"});
    std::string scheme;
    if (r.string(*s, pre, "scheme", scheme)) {
      if (scheme == "explicit") cfg.stepper.scheme = Scheme::Explicit;
      else if (scheme == "semi-implicit") cfg.stepper.scheme = Scheme::SemiImplicit;
      else r.issue(pre + "scheme", "must be explicit or semi-implicit");
    }
    double dt = 0;
    if (r.number(*s, pre, "dt", dt)) cfg.stepper.dt = dt;
    r.number(*s, pre, "t_end", cfg.stepper.t_end);
    r.number(*s, pre, "cfl_safety", cfg.stepper.cfl_safety);
    r.number(*s, pre, "linear_solver_tol", cfg.stepper.linear_solver_tol);
    r.integer(*s, pre, "max_linear_iters", cfg.stepper.max_linear_iters);
  }
  if (cfg.stepper.dt && !(*cfg.stepper.dt > 0)) r.issue("stepper.dt", "must be positive");
  if (!(cfg.stepper.t_end > 0)) r.issue("stepper.t_end", "must be positive");
  if (!(cfg.stepper.cfl_safety > 0) || cfg.stepper.cfl_safety > 1) r.issue("stepper.cfl_safety", "must be in (0, 1]");
  if (!(cfg.stepper.linear_solver_tol > 0)) r.issue("stepper.linear_solver_tol", "must be positive");
  if (cfg.stepper.max_linear_iters < 1) r.issue("stepper.max_linear_iters", "must be at least 1");

  if (const json* d = r.section(root, "diagnostics")) {
    const std::string pre = "diagnostics.";
    r.only(*d, pre, {"s_norm", "cadence", "C_s_param", "C_poincare_param", "fit_window", "fit_norm"});
    r.integer(*d, pre, "s_norm", cfg.diagnostics.s_norm);
    r.integer(*d, pre, "cadence", cfg.diagnostics.cadence);
    r.number(*d, pre, "C_s_param", cfg.diagnostics.C_s_param);
    r.number(*d, pre, "C_poincare_param", cfg.diagnostics.C_poincare_param);
    if (d->contains("fit_window")) {
      std::vector<double> w;
      if (r.numbers(d->at("fit_window"), pre + "fit_window", w)) {
        if (w.size() != 2 || !(w[0] < w[1])) r.issue(pre + "fit_window", "must be [t0, t1] with t0 < t1");
        else {
          cfg.diagnostics.fit_t0 = w[0];
          cfg.diagnostics.fit_t1 = w[1];
        }
      }
    }
    std::string fn;
    if (r.string(*d, pre, "fit_norm", fn)) {
      if (fn == "L2") cfg.diagnostics.fit_norm = NormKind::L2;
      else if (fn == "Hs") cfg.diagnostics.fit_norm = NormKind::Hs;
      else if (fn == "Hs_weighted") cfg.diagnostics.fit_norm = NormKind::HsWeighted;
      else r.issue(pre + "fit_norm", "must be L2, Hs or Hs_weighted");
    }
  }
  if (cfg.diagnostics.s_norm < 0 || cfg.diagnostics.s_norm > SobolevOrder::max_order)
    r.issue("diagnostics.s_norm", "must be in [0, 8]");
  if (cfg.diagnostics.cadence < 0) r.issue("diagnostics.cadence", "must be nonnegative");
  if (!(cfg.diagnostics.C_s_param > 0)) r.issue("diagnostics.C_s_param", "must be positive");
  if (!(cfg.diagnostics.C_poincare_param > 0)) r.issue("diagnostics.C_poincare_param", "must be positive");

  if (const json* o = r.section(root, "output")) {
    const std::string pre = "output.";
    r.only(*o, pre, {"directory", "formats", "snapshot_every"});
    r.string(*o, pre, "directory", cfg.output.directory);
    if (o->contains("formats")) {
      const json& f = o->at("formats");
      if (!f.is_array()) {
        r.issue(pre + "formats", "must be an array drawn from csv, summary, snapshots");
      } else {
        cfg.output.csv = cfg.output.summary = cfg.output.snapshots = false;
        for (const auto& x : f) {
          const std::string v = x.is_string() ? x.get<std::string>() : "";
          if (v == "csv") cfg.output.csv = true;
          else if (v == "summary") cfg.output.summary = true;
          else if (v == "snapshots") cfg.output.snapshots = true;
          else r.issue(pre + "formats", "must be an array drawn from csv, summary, snapshots");
        }
      }
    }
    r.number(*o, pre, "snapshot_every", cfg.output.snapshot_every);
  }
  if (cfg.output.snapshot_every < 0) r.issue("output.snapshot_every", "must be nonnegative");
  if (cfg.output.directory.empty()) r.issue("output.directory", "must not be empty");

  if (!r.issues.empty()) throw ValidationError(r.issues);
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, e.what());
  }
  return config_from_json(root);
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline json config_to_json(const RunConfig& c) {
  json j;
  j["name"] = c.name;
  j["grid"] = {{"dim", c.grid.dim}, {"M", c.grid.M}};
  j["species"] = {{"N", c.species.N}, {"c_bar", c.species.c_bar}, {"delta", c.species.delta}};
  json p = {{"eps", c.perturbation.eps},
            {"init", std::string(to_string(c.perturbation.init))},
            {"amplitude", c.perturbation.amplitude},
            {"kmax", c.perturbation.kmax},
            {"seed", c.perturbation.seed}};
  if (!c.perturbation.pattern.empty()) p["pattern"] = c.perturbation.pattern;
  json modes = json::array();
  for (const auto& k : c.perturbation.modes) {
    json kk = json::array();
    for (int a = 0; a < c.grid.dim; ++a) kk.push_back(k[a]);
    modes.push_back(kk);
  }
  p["modes"] = modes;
  if (c.perturbation.norm_target_delta_s) p["norm_target"] = "delta_s";
  else if (c.perturbation.norm_target) p["norm_target"] = *c.perturbation.norm_target;
  if (!c.perturbation.file.empty()) p["file"] = c.perturbation.file;
  j["perturbation"] = p;
  json u = {{"preset", std::string(to_string(c.u_bar.preset))}, {"scale", c.u_bar.scale}};
  if (c.u_bar.preset == FlowKind::Constant)
    u["constant"] = std::vector<double>(c.u_bar.constant.begin(), c.u_bar.constant.begin() + c.grid.dim);
  if (!c.u_bar.modes.empty()) {
    json um = json::array();
    for (const auto& m : c.u_bar.modes) {
      json kk = json::array();
      for (int a = 0; a < c.grid.dim; ++a) kk.push_back(m.k[a]);
      um.push_back({{"k", kk}, {"amplitude", m.amplitude}, {"phase", m.phase}, {"component", m.component}});
    }
    u["modes"] = um;
  }
  j["u_bar"] = u;
  json s = {{"scheme", std::string(to_string(c.stepper.scheme))},
            {"t_end", c.stepper.t_end},
            {"cfl_safety", c.stepper.cfl_safety},
            {"linear_solver_tol", c.stepper.linear_solver_tol},
            {"max_linear_iters", c.stepper.max_linear_iters}};
  if (c.stepper.dt) s["dt"] = *c.stepper.dt;
  j["stepper"] = s;
  json d = {{"s_norm", c.diagnostics.s_norm},
            {"cadence", c.diagnostics.cadence},
            {"C_s_param", c.diagnostics.C_s_param},
            {"C_poincare_param", c.diagnostics.C_poincare_param},
            {"fit_norm", std::string(to_string(c.diagnostics.fit_norm))}};
  if (std::isfinite(c.diagnostics.fit_t1)) d["fit_window"] = {c.diagnostics.fit_t0, c.diagnostics.fit_t1};
  j["diagnostics"] = d;
  json formats = json::array();
  if (c.output.csv) formats.push_back("csv");
  if (c.output.summary) formats.push_back("summary");
  if (c.output.snapshots) formats.push_back("snapshots");
  j["output"] = {{"directory", c.output.directory}, {"formats", formats}, {"snapshot_every", c.output.snapshot_every}};
  return j;
}

// --------------------------------------------------------------------------
// Presets

struct Preset {
  std::string name;
  std::string description;
  RunConfig config;
};

inline std::vector<Preset> presets() {
  std::vector<Preset> out;

  RunConfig eq;
  eq.name = "equilibrium";
  eq.stepper.t_end = 1;
  out.push_back({eq.name, "N=2, d=1, M=64, zero perturbation; every residual stays at rounding level", eq});

  RunConfig m1;
  m1.name = "two-species-mode-1";
  m1.perturbation.init = InitKind::Mode;
  m1.perturbation.eps = 1e-3;
  m1.perturbation.pattern = {1, -1};
  m1.perturbation.modes = {{1, 0, 0}};
  m1.stepper.t_end = 4;
  m1.diagnostics.fit_norm = NormKind::L2;
  out.push_back({m1.name, "N=2, d=1, M=64, c~ = (sin x, -sin x), eps=1e-3; linearized decay rate 0.5", m1});

  RunConfig m2 = m1;
  m2.name = "two-species-mode-2";
  m2.perturbation.modes = {{2, 0, 0}};
  m2.stepper.t_end = 1;
  out.push_back({m2.name, "as two-species-mode-1 with k=2; linearized decay rate 2.0", m2});

  RunConfig si = m1;
  si.name = "two-species-semi-implicit";
  si.stepper.scheme = Scheme::SemiImplicit;
  si.stepper.dt = 10 * cfl_limit(TorusGrid(1, 64), DiffusionTable<double>::uniform(2, 1.0), 2.0, 1.0);
  out.push_back({si.name, "two-species-mode-1 with frozen-coefficient backward Euler at 10x the explicit limit", si});

  RunConfig t3;
  t3.name = "three-species-2d";
  t3.grid = {2, 32};
  t3.species.N = 3;
  t3.species.c_bar = {0.8, 1.0, 1.2};
  t3.species.delta = {{0, 1, 1.5}, {1, 0, 2}, {1.5, 2, 0}};
  t3.perturbation.eps = 0.1;
  t3.perturbation.init = InitKind::Random;
  t3.perturbation.kmax = 2;
  t3.perturbation.seed = 7;
  t3.perturbation.amplitude = 1;
  t3.u_bar.preset = FlowKind::Stream;
  t3.u_bar.scale = 0.05;
  t3.u_bar.modes = {{{1, 1, 0}, 1.0, 0.3, 2}, {{2, -1, 0}, 0.5, 1.1, 2}};
  t3.stepper.cfl_safety = 0.9;
  t3.stepper.dt = cfl_limit(TorusGrid(2, 32), DiffusionTable<double>(Mat<double>{{0, 1, 1.5}, {1, 0, 2}, {1.5, 2, 0}}),
                            3.0, 0.9);
  t3.stepper.t_end = 1000 * *t3.stepper.dt;
  t3.diagnostics.cadence = 5;
  out.push_back({t3.name, "N=3, d=2, M=32, random perturbation advected by a small solenoidal u_bar; 1000 steps", t3});

  RunConfig cv = m1;
  cv.name = "cfl-violation";
  cv.stepper.dt = 10 * cfl_limit(TorusGrid(1, 64), DiffusionTable<double>::uniform(2, 1.0), 2.0, 1.0);
  out.push_back({cv.name, "explicit scheme at 10x the stability limit; rejected before stepping with CflViolated", cv});

  RunConfig rs;
  rs.name = "random-small";
  rs.grid = {1, 64};
  rs.species.N = 3;
  rs.species.c_bar = {0.8, 1.0, 1.2};
  rs.species.delta = {{0, 1, 1.5}, {1, 0, 2}, {1.5, 2, 0}};
  rs.perturbation.eps = 1;
  rs.perturbation.init = InitKind::Random;
  rs.perturbation.kmax = 4;
  rs.perturbation.norm_target_delta_s = true;
  rs.stepper.t_end = 2;
  out.push_back({rs.name, "N=3, d=1, eps=1, random data rescaled to |c~|_{H^2} = delta_s", rs});
  return out;
}

inline std::optional<RunConfig> find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p.config;
  return std::nullopt;
}

// --------------------------------------------------------------------------
// Snapshots
//
// Layout (little-endian):
//   "IMSF" | u8 version | u32 dim | u32 M | u32 N | f64 t | f64 eps | f64 c_bar[N]
//   | f64 payload[N * M^dim], species-major then row-major points.

inline constexpr std::uint8_t snapshot_version = 1;

struct FieldSnapshot {
  int dim{1};
  int M{8};
  int N{2};
  double t{0};
  double eps{1};
  std::vector<double> c_bar;
  std::vector<double> payload;
};

namespace detail {

template <class T>
void put_le(std::string& buf, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U u;
  std::memcpy(&u, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const std::string& buf, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  if (pos + sizeof(T) > buf.size()) fail(ErrorCode::HeaderMismatch, "snapshot is truncated");
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += sizeof(T);
  T v;
  std::memcpy(&v, &u, sizeof(T));
  return v;
}

}  // namespace detail

inline FieldSnapshot make_snapshot(const TorusGrid& g, const SimulationState<double>& s) {
  FieldSnapshot out{g.dim(), g.points_per_axis(), s.n_species(), s.t, s.eps, {}, s.c_tilde.data()};
  out.c_bar.assign(s.c_bar.data(), s.c_bar.data() + s.c_bar.size());
  return out;
}

inline void write_snapshot(const FieldSnapshot& s, const std::filesystem::path& path) {
  std::string buf = "IMSF";
  buf.push_back(static_cast<char>(snapshot_version));
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(s.dim));
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(s.M));
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(s.N));
  detail::put_le<double>(buf, s.t);
  detail::put_le<double>(buf, s.eps);
  for (double v : s.c_bar) detail::put_le<double>(buf, v);
  for (double v : s.payload) detail::put_le<double>(buf, v);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

inline FieldSnapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  if (buf.size() < 5 || buf.compare(0, 4, "IMSF") != 0) fail(ErrorCode::HeaderMismatch, "not a snapshot file");
  if (static_cast<std::uint8_t>(buf[4]) != snapshot_version)
    fail(ErrorCode::HeaderMismatch, "unsupported snapshot version");
  std::size_t pos = 5;
  FieldSnapshot s;
  s.dim = static_cast<int>(detail::get_le<std::uint32_t>(buf, pos));
  s.M = static_cast<int>(detail::get_le<std::uint32_t>(buf, pos));
  s.N = static_cast<int>(detail::get_le<std::uint32_t>(buf, pos));
  if (s.dim < 1 || s.dim > 3 || s.M < 1 || s.M > (1 << 12) || s.N < 1 || s.N > 4096)
    fail(ErrorCode::HeaderMismatch, "snapshot header out of range");
  s.t = detail::get_le<double>(buf, pos);
  s.eps = detail::get_le<double>(buf, pos);
  for (int i = 0; i < s.N; ++i) s.c_bar.push_back(detail::get_le<double>(buf, pos));
  std::size_t count = static_cast<std::size_t>(s.N);
  for (int a = 0; a < s.dim; ++a) count *= static_cast<std::size_t>(s.M);
  if (buf.size() - pos != count * 8) fail(ErrorCode::HeaderMismatch, "payload length differs from N * M^dim");
  s.payload.resize(count);
  for (std::size_t k = 0; k < count; ++k) s.payload[k] = detail::get_le<double>(buf, pos);
  return s;
}

inline std::string snapshot_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "t_%.6f.bin", t);
  return buf;
}

// --------------------------------------------------------------------------
// Diagnostics CSV and summary

inline constexpr const char* csv_version_line = "# ims diagnostics v1";
inline constexpr const char* csv_header =
    "t,h_s_norm,h_s_weighted,l2_norm,u_tilde_hs_norm,mass_residual,sum_zero_residual,equimolar_residual,"
    "min_concentration,incompressibility_residual";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_row(const Sample& s) {
  const double v[] = {s.t,
                      s.h_s_norm,
                      s.h_s_weighted,
                      s.l2_norm,
                      s.u_tilde_hs_norm,
                      s.mass_residual,
                      s.sum_zero_residual,
                      s.equimolar_residual,
                      s.min_concentration,
                      s.incompressibility_residual};
  std::string out;
  for (std::size_t i = 0; i < std::size(v); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

inline std::string diagnostics_csv(const RunRecord& rec) {
  std::string out = std::string(csv_version_line) + "\n" + csv_header + "\n";
  for (const auto& s : rec.samples) out += csv_row(s) + "\n";
  return out;
}

// --------------------------------------------------------------------------
// Scenario orchestration

struct ScenarioOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> snapshot_every;
  bool write_files{true};
};

struct ScenarioResult {
  RunConfig config;
  RunRecord record;
  RegimeCertificate certificate;
  SimulationState<double> final_state;
  double dt{0};
  double cfl_dt{0};
  std::string summary;
  std::filesystem::path output_dir;
  int exit_code{0};
};

inline DiffusionTable<double> diffusion_table(const SpeciesConfig& s) {
  const auto n = static_cast<Eigen::Index>(s.N);
  Mat<double> d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      d(i, j) = i == j ? 0.0 : s.delta[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return DiffusionTable<double>(d);
}

inline Vec<double> c_bar_vector(const SpeciesConfig& s) {
  return Eigen::Map<const Vec<double>>(s.c_bar.data(), static_cast<Eigen::Index>(s.c_bar.size()));
}

inline RegimeCertificate certificate_for(const RunConfig& cfg) {
  return compute_certificate(c_bar_vector(cfg.species), diffusion_table(cfg.species), cfg.diagnostics.C_s_param,
                             cfg.diagnostics.C_poincare_param);
}

inline VectorField<double> build_flow(const Spectral<double>& sp, const FlowConfig& f) {
  SolenoidalSpec<double> spec;
  if (f.preset == FlowKind::Constant)
    for (int a = 0; a < 3; ++a) spec.constant[a] = f.scale * f.constant[a];
  if (f.preset == FlowKind::Stream)
    for (auto m : f.modes) {
      m.amplitude *= f.scale;
      spec.modes.push_back(m);
    }
  return make_solenoidal(sp, spec);
}

/// Builds the initial state described by the configuration.
inline SimulationState<double> build_initial_state(const RunConfig& cfg, const Spectral<double>& sp) {
  const auto& g = sp.grid();
  const auto& pc = cfg.perturbation;
  const int n = cfg.species.N;
  SpeciesField<double> ct(n, g);
  double t0 = 0;
  switch (pc.init) {
    case InitKind::Zero: break;
    case InitKind::Mode: {
      Vec<double> pattern = Vec<double>::Zero(n);
      if (pc.pattern.empty()) {
        pattern(0) = 1;
        pattern(1) = -1;
      } else {
        for (int i = 0; i < n; ++i) pattern(i) = pc.pattern[static_cast<std::size_t>(i)];
      }
      for (const auto& k : pc.modes) ct.axpy(1.0, mode_perturbation(g, pattern, k, pc.amplitude));
      break;
    }
    case InitKind::Random: ct = random_perturbation<double>(g, n, pc.kmax, pc.amplitude, pc.seed); break;
    case InitKind::File: {
      const auto snap = read_snapshot(pc.file);
      if (snap.dim != g.dim() || snap.M != g.points_per_axis() || snap.N != n)
        fail(ErrorCode::HeaderMismatch, "snapshot grid or species count differs from the configuration");
      ct.data() = snap.payload;
      t0 = snap.t;
      break;
    }
  }
  if ((pc.norm_target || pc.norm_target_delta_s) && pc.init != InitKind::Zero) {
    const double target = pc.norm_target_delta_s ? certificate_for(cfg).delta_s : *pc.norm_target;
    const double now = sp.sobolev_norm(ct, SobolevOrder(cfg.diagnostics.s_norm));
    if (now > 0) ct.scale(target / now);
  }
  return init_state(g, c_bar_vector(cfg.species), pc.eps, std::move(ct), build_flow(sp, cfg.u_bar), t0);
}

inline StepperConfig<double> stepper_config(const RunConfig& cfg, double cfl_dt) {
  StepperConfig<double> s;
  s.scheme = cfg.stepper.scheme;
  s.dt = cfg.stepper.dt ? *cfg.stepper.dt : cfl_dt;
  s.t_end = cfg.stepper.t_end;
  s.cfl_safety = cfg.stepper.cfl_safety;
  s.linear_solver_tol = cfg.stepper.linear_solver_tol;
  s.max_linear_iters = cfg.stepper.max_linear_iters;
  return s;
}

struct Maxima {
  double mass{0}, sum_zero{0}, equimolar{0}, incompressibility{0};
  double min_concentration{std::numeric_limits<double>::infinity()};
};

inline Maxima invariant_maxima(const RunRecord& rec) {
  Maxima m;
  for (const auto& s : rec.samples) {
    m.mass = std::max(m.mass, s.mass_residual);
    m.sum_zero = std::max(m.sum_zero, s.sum_zero_residual);
    m.equimolar = std::max(m.equimolar, s.equimolar_residual);
    m.incompressibility = std::max(m.incompressibility, s.incompressibility_residual);
    m.min_concentration = std::min(m.min_concentration, s.min_concentration);
  }
  return m;
}

inline std::string certificate_text(const RegimeCertificate& c) {
  std::string out;
  auto kv = [&](const char* k, double v) { out += std::string("certificate.") + k + " = " + format_double(v) + "\n"; };
  kv("lambda_A", c.lambda_A);
  kv("mu_A", c.mu_A);
  kv("C0", c.C0);
  kv("min_c_bar", c.min_c_bar);
  kv("C_s_param", c.C_s_param);
  kv("C_poincare_param", c.C_poincare_param);
  kv("delta_s", c.delta_s);
  kv("lambda_s", c.lambda_s);
  kv("delta_residual", c.delta_residual);
  return out;
}

inline std::string summary_text(const ScenarioResult& r) {
  const auto& rec = r.record;
  std::string out = "# ims summary v1\n";
  auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("name", r.config.name);
  kv("status", rec.completed() ? "completed" : "terminated");
  if (rec.termination) {
    kv("termination.reason", std::string(to_string(rec.termination->code)));
    kv("termination.time", format_double(rec.termination->t));
    kv("termination.message", rec.termination->message);
  }
  kv("seed", std::to_string(r.config.perturbation.seed));
  kv("scheme", std::string(to_string(r.config.stepper.scheme)));
  kv("dt", format_double(r.dt));
  kv("explicit_dt_limit", format_double(r.cfl_dt));
  kv("t_end", format_double(r.config.stepper.t_end));
  kv("steps", std::to_string(rec.steps));
  kv("samples", std::to_string(rec.samples.size()));
  kv("s_norm", std::to_string(rec.s_norm));
  kv("fitted_rate", rec.fitted_rate ? format_double(*rec.fitted_rate) : "undefined");
  kv("fit_norm", std::string(to_string(r.config.diagnostics.fit_norm)));
  kv("r_squared", rec.r_squared ? format_double(*rec.r_squared) : "undefined");
  const auto m = invariant_maxima(rec);
  kv("max.mass_residual", format_double(m.mass));
  kv("max.sum_zero_residual", format_double(m.sum_zero));
  kv("max.equimolar_residual", format_double(m.equimolar));
  kv("max.incompressibility_residual", format_double(m.incompressibility));
  kv("min.min_concentration", format_double(m.min_concentration));
  kv("monotone.h_s_norm", first_increase(rec.samples, NormKind::Hs) < 0 ? "true" : "false");
  kv("monotone.h_s_weighted", first_increase(rec.samples, NormKind::HsWeighted) < 0 ? "true" : "false");
  long energy_failures = 0;
  for (std::size_t i = 1; i < rec.samples.size(); ++i)
    if (!check_energy_step(rec.samples[i - 1], rec.samples[i], r.certificate.lambda_A, r.certificate.min_c_bar).holds)
      ++energy_failures;
  kv("energy_inequality.failures", std::to_string(energy_failures));
  kv("velocity_integral", format_double(velocity_integral(rec.samples, r.certificate.lambda_s)));
  if (!rec.samples.empty()) {
    kv("initial.h_s_norm", format_double(rec.samples.front().h_s_norm));
    kv("final.h_s_norm", format_double(rec.samples.back().h_s_norm));
  }
  out += certificate_text(r.certificate);
  return out;
}

/// Runs the configured scenario and writes its artifacts. Errors in setup
/// (validation, I/O, inadmissible data) are thrown; breaches during the run
/// are recorded and give exit code 2.
inline ScenarioResult run_scenario(RunConfig cfg, const ScenarioOverrides& ov = {}) {
  if (ov.output_dir) cfg.output.directory = *ov.output_dir;
  if (ov.seed) cfg.perturbation.seed = *ov.seed;
  if (ov.snapshot_every) {
    cfg.output.snapshot_every = *ov.snapshot_every;
    if (*ov.snapshot_every > 0) cfg.output.snapshots = true;
  }

  const TorusGrid g(cfg.grid.dim, cfg.grid.M);
  const Spectral<double> sp(g);
  const auto table = diffusion_table(cfg.species);
  ScenarioResult res;
  res.config = cfg;
  res.certificate = certificate_for(cfg);
  res.cfl_dt = cfl_limit(g, table, res.certificate.C0, cfg.stepper.cfl_safety);
  const auto state = build_initial_state(cfg, sp);
  const auto step_cfg = stepper_config(cfg, res.cfl_dt);
  res.dt = step_cfg.dt;
  res.output_dir = cfg.output.directory;

  if (ov.write_files) std::filesystem::create_directories(res.output_dir);
  RunOptions<double> opt;
  opt.cadence = cfg.diagnostics.cadence;
  opt.s_norm = cfg.diagnostics.s_norm;
  opt.fit_t0 = cfg.diagnostics.fit_t0;
  opt.fit_t1 = cfg.diagnostics.fit_t1;
  opt.fit_norm = cfg.diagnostics.fit_norm;
  if (ov.write_files && cfg.output.snapshots && cfg.output.snapshot_every > 0) {
    std::filesystem::create_directories(res.output_dir / "snapshots");
    opt.snapshot_every = cfg.output.snapshot_every;
    opt.on_snapshot = [&](const SimulationState<double>& s) {
      write_snapshot(make_snapshot(g, s), res.output_dir / "snapshots" / snapshot_name(s.t));
    };
  }
  auto out = run(sp, table, state, step_cfg, opt);
  res.record = std::move(out.record);
  res.record.config_echo = config_to_json(cfg).dump();
  res.final_state = std::move(out.state);
  if (ov.write_files && cfg.output.snapshots && !(cfg.output.snapshot_every > 0)) {
    std::filesystem::create_directories(res.output_dir / "snapshots");
    write_snapshot(make_snapshot(g, res.final_state), res.output_dir / "snapshots" / snapshot_name(res.final_state.t));
  }
  res.summary = summary_text(res);
  res.summary += "config = " + res.record.config_echo + "\n";
  res.exit_code = res.record.completed() ? 0 : 2;

  if (ov.write_files) {
    auto write = [](const std::filesystem::path& p, const std::string& text) {
      std::ofstream f(p, std::ios::binary | std::ios::trunc);
      if (!f) fail(ErrorCode::IoError, "cannot write " + p.string());
      f << text;
    };
    if (cfg.output.csv) write(res.output_dir / "diagnostics.csv", diagnostics_csv(res.record));
    if (cfg.output.summary) write(res.output_dir / "summary.txt", res.summary);
  }
  return res;
}

}  // namespace ims
