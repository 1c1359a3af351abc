// SystemConfig: every free constant of the construction, its JSON form,
// and the pipeline that resolves "auto" constants into built fields.

#ifndef COOPEMBED_CONFIG_HPP
#define COOPEMBED_CONFIG_HPP

#include "coopembed/embedding.hpp"
#include "coopembed/pde.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

namespace coopembed {

using json = nlohmann::ordered_json;

enum class Defect { none, small_q, gamma_tail_flip, noncooperative };

inline const char* defect_name(Defect d) {
  switch (d) {
    case Defect::small_q: return "small_q";
    case Defect::gamma_tail_flip: return "gamma_tail_flip";
    case Defect::noncooperative: return "noncooperative";
    default: return "none";
  }
}

inline Defect parse_defect(const std::string& s) {
  for (Defect d : {Defect::none, Defect::small_q, Defect::gamma_tail_flip, Defect::noncooperative})
    if (s == defect_name(d)) return d;
  throw ConfigError("config: unknown defect '" + s + "'");
}

/// Q used by the small_q defect.
inline constexpr double kSmallQ = 0.01;

struct SystemConfig {
  int schema = 1;
  int n = 3;
  struct {
    std::optional<double> J;  // empty: auto
    double margin = 1.25;
    double grid_step = 0.05;
  } tmpl;
  struct {
    double lambda1 = 1.0, lambda2 = 2.0, delta_r = 0.2, delta_theta = 0.1, e1 = 3.4;
  } planar;
  struct {
    std::optional<double> Q;  // empty: auto
    double margin = 1.25;
  } embedding;
  PDEConfig pde{};
  struct {
    double T = 200.0;
    double rtol = 1e-10;
    double atol = 1e-12;
    std::uint64_t seed = 1;
    int n_ics = 100;
    int lambda_samples = 11;
    int h_ics = 50;
    int order_pairs = 50;
    double order_T = 20.0;
    int reduction_trajectories = 20;
    double reduction_T = 50.0;
    int cooperativity_samples = 10000;
    double instability_T = 100.0;
    int instability_N = 101;
    double sandwich_T = 10.0;
    int sandwich_N = 101;
  } run;
  Defect defect = Defect::none;

  PartitionSpec partition() const {
    return PartitionSpec(planar.lambda1, planar.lambda2, planar.delta_r, planar.delta_theta);
  }

  /// All ordering and positivity constraints of the construction.
  void validate() const {
    if (schema != 1) throw ConfigError("config: unsupported schema (expected 1)");
    if (n != 3) throw ConfigError("config: only n = 3 is supported by the embedding");
    if (tmpl.J && !(*tmpl.J > 0.0 && std::isfinite(*tmpl.J))) throw ConfigError("config: template.J must be positive");
    if (!(tmpl.margin >= 1.1)) throw ConfigError("config: template.margin must be >= 1.1");
    if (!(tmpl.grid_step > 0.0 && tmpl.grid_step <= 0.05))
      throw ConfigError("config: template.grid_step must lie in (0, 0.05]");
    partition().validate();
    if (!(planar.e1 > planar.lambda2 + 2.0 * planar.delta_r))
      throw ConfigError("config: need planar.e1 > lambda2 + 2 delta_r");
    if (embedding.Q && !(*embedding.Q > 0.0 && std::isfinite(*embedding.Q)))
      throw ConfigError("config: embedding.Q must be positive");
    if (!(embedding.margin >= 1.0)) throw ConfigError("config: embedding.margin must be >= 1");
    pde.validate(n);
    if (!(run.T > 0.0)) throw ConfigError("config: run.T must be positive");
    const auto tol_ok = [](double x) { return x >= 1e-12 && x <= 1e-3; };
    if (!tol_ok(run.rtol) || !tol_ok(run.atol)) throw ConfigError("config: run tolerances must lie in [1e-12, 1e-3]");
    if (run.n_ics < 1 || run.h_ics < 1 || run.order_pairs < 1 || run.reduction_trajectories < 1)
      throw ConfigError("config: sample counts must be positive");
    if (run.lambda_samples < 1) throw ConfigError("config: run.lambda_samples must be positive");
    if (run.cooperativity_samples < 10000) throw ConfigError("config: run.cooperativity_samples must be >= 10000");
    if (!(run.order_T > 0.0 && run.reduction_T > 0.0 && run.instability_T > 0.0 && run.sandwich_T > 0.0))
      throw ConfigError("config: run horizons must be positive");
    if (run.instability_N < 3 || run.sandwich_N < 3) throw ConfigError("config: grid sizes must be >= 3");
  }
};

// ---------------------------------------------------------------------------
// JSON with 17 significant digits for every float

inline void write_json(std::ostream& os, const json& j, int indent = 2, int depth = 0) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << json(it.key()).dump() << ": ";
        write_json(os, it.value(), indent, depth + 1);
      }
      os << '\n' << close_pad << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // numeric arrays stay on one line
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      os << (flat ? "[" : "[\n");
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) os << (flat ? ", " : ",\n");
        if (!flat) os << pad;
        write_json(os, j[k], indent, depth + 1);
      }
      if (!flat) os << '\n' << close_pad;
      os << ']';
      return;
    }
    case json::value_t::number_float: {
      const double x = j.get<double>();
      if (!std::isfinite(x)) {
        os << "null";
        return;
      }
      std::string s = format_double(x);
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      os << s;
      return;
    }
    default:
      os << j.dump();
  }
}

inline std::string json_string(const json& j) {
  std::ostringstream os;
  write_json(os, j);
  os << '\n';
  return os.str();
}

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError("config: unknown key '" + where + "." + it.key() + "'");
  }
}

template <class T>
void read_number(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError("config: '" + where + "." + key + "' must be an integer");
    out = v.get<T>();
  } else {
    if (!v.is_number()) throw ConfigError("config: '" + where + "." + key + "' must be a number");
    out = v.get<T>();
  }
}

inline void read_auto(const json& obj, const char* key, std::optional<double>& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (v.is_string() && v.get<std::string>() == "auto") {
    out.reset();
  } else if (v.is_number()) {
    out = v.get<double>();
  } else {
    throw ConfigError("config: '" + where + "." + key + "' must be a number or \"auto\"");
  }
}

}  // namespace detail

/// Parses a config object; missing keys keep their defaults. The derived
/// block written by build is accepted and ignored (it is recomputed).
inline SystemConfig config_from_json(const json& j) {
  SystemConfig c;
  detail::reject_unknown(j, {"schema", "n", "template", "planar", "embedding", "pde", "run", "defect", "derived"}, "");
  detail::read_number(j, "schema", c.schema, "");
  detail::read_number(j, "n", c.n, "");
  if (j.contains("template")) {
    const json& t = j.at("template");
    detail::reject_unknown(t, {"J", "margin", "grid_step"}, "template");
    detail::read_auto(t, "J", c.tmpl.J, "template");
    detail::read_number(t, "margin", c.tmpl.margin, "template");
    detail::read_number(t, "grid_step", c.tmpl.grid_step, "template");
  }
  if (j.contains("planar")) {
    const json& p = j.at("planar");
    detail::reject_unknown(p, {"lambda1", "lambda2", "delta_r", "delta_theta", "e1"}, "planar");
    detail::read_number(p, "lambda1", c.planar.lambda1, "planar");
    detail::read_number(p, "lambda2", c.planar.lambda2, "planar");
    detail::read_number(p, "delta_r", c.planar.delta_r, "planar");
    detail::read_number(p, "delta_theta", c.planar.delta_theta, "planar");
    detail::read_number(p, "e1", c.planar.e1, "planar");
  }
  if (j.contains("embedding")) {
    const json& e = j.at("embedding");
    detail::reject_unknown(e, {"Q", "margin"}, "embedding");
    detail::read_auto(e, "Q", c.embedding.Q, "embedding");
    detail::read_number(e, "margin", c.embedding.margin, "embedding");
  }
  if (j.contains("pde")) {
    const json& p = j.at("pde");
    detail::reject_unknown(p, {"d", "N", "c_cfl"}, "pde");
    if (p.contains("d")) {
      if (!p.at("d").is_array()) throw ConfigError("config: 'pde.d' must be an array");
      c.pde.d.clear();
      for (const auto& v : p.at("d")) {
        if (!v.is_number()) throw ConfigError("config: 'pde.d' entries must be numbers");
        c.pde.d.push_back(v.get<double>());
      }
    }
    detail::read_number(p, "N", c.pde.N, "pde");
    detail::read_number(p, "c_cfl", c.pde.c_cfl, "pde");
  }
  if (j.contains("run")) {
    const json& r = j.at("run");
    detail::reject_unknown(r,
                           {"T", "rtol", "atol", "seed", "n_ics", "lambda_samples", "h_ics", "order_pairs", "order_T",
                            "reduction_trajectories", "reduction_T", "cooperativity_samples", "instability_T",
                            "instability_N", "sandwich_T", "sandwich_N"},
                           "run");
    detail::read_number(r, "T", c.run.T, "run");
    detail::read_number(r, "rtol", c.run.rtol, "run");
    detail::read_number(r, "atol", c.run.atol, "run");
    if (r.contains("seed")) {
      const json& s = r.at("seed");
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
        throw ConfigError("config: 'run.seed' must be a non-negative integer");
      c.run.seed = s.get<std::uint64_t>();
    }
    detail::read_number(r, "n_ics", c.run.n_ics, "run");
    detail::read_number(r, "lambda_samples", c.run.lambda_samples, "run");
    detail::read_number(r, "h_ics", c.run.h_ics, "run");
    detail::read_number(r, "order_pairs", c.run.order_pairs, "run");
    detail::read_number(r, "order_T", c.run.order_T, "run");
    detail::read_number(r, "reduction_trajectories", c.run.reduction_trajectories, "run");
    detail::read_number(r, "reduction_T", c.run.reduction_T, "run");
    detail::read_number(r, "cooperativity_samples", c.run.cooperativity_samples, "run");
    detail::read_number(r, "instability_T", c.run.instability_T, "run");
    detail::read_number(r, "instability_N", c.run.instability_N, "run");
    detail::read_number(r, "sandwich_T", c.run.sandwich_T, "run");
    detail::read_number(r, "sandwich_N", c.run.sandwich_N, "run");
  }
  if (j.contains("defect")) {
    if (!j.at("defect").is_string()) throw ConfigError("config: 'defect' must be a string");
    c.defect = parse_defect(j.at("defect").get<std::string>());
  }
  c.validate();
  return c;
}

inline SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// COOPEMBED_SEED, when set, replaces run.seed.
inline void apply_env_overrides(SystemConfig& c) {
  const char* s = std::getenv("COOPEMBED_SEED");
  if (!s || !*s) return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (errno != 0 || *end != '\0' || s[0] == '-') throw ConfigError("COOPEMBED_SEED must be a non-negative integer");
  c.run.seed = v;
}

inline json config_to_json(const SystemConfig& c) {
  const auto auto_or = [](const std::optional<double>& v) { return v ? json(*v) : json("auto"); };
  json j;
  j["schema"] = c.schema;
  j["n"] = c.n;
  j["template"] = {{"J", auto_or(c.tmpl.J)}, {"margin", c.tmpl.margin}, {"grid_step", c.tmpl.grid_step}};
  j["planar"] = {{"lambda1", c.planar.lambda1},
                 {"lambda2", c.planar.lambda2},
                 {"delta_r", c.planar.delta_r},
                 {"delta_theta", c.planar.delta_theta},
                 {"e1", c.planar.e1}};
  j["embedding"] = {{"Q", auto_or(c.embedding.Q)}, {"margin", c.embedding.margin}};
  j["pde"] = {{"d", c.pde.d}, {"N", c.pde.N}, {"c_cfl", c.pde.c_cfl}};
  j["run"] = {{"T", c.run.T},
              {"rtol", c.run.rtol},
              {"atol", c.run.atol},
              {"seed", c.run.seed},
              {"n_ics", c.run.n_ics},
              {"lambda_samples", c.run.lambda_samples},
              {"h_ics", c.run.h_ics},
              {"order_pairs", c.run.order_pairs},
              {"order_T", c.run.order_T},
              {"reduction_trajectories", c.run.reduction_trajectories},
              {"reduction_T", c.run.reduction_T},
              {"cooperativity_samples", c.run.cooperativity_samples},
              {"instability_T", c.run.instability_T},
              {"instability_N", c.run.instability_N},
              {"sandwich_T", c.run.sandwich_T},
              {"sandwich_N", c.run.sandwich_N}};
  j["defect"] = defect_name(c.defect);
  return j;
}

// ---------------------------------------------------------------------------
// build pipeline

/// Everything the commands and the verifier need, built from one config.
struct BuiltSystem {
  SystemConfig config;  // with J and Q resolved
  TemplateField<3> tmpl;  // defect applied
  PlanarField planar;
  ScaledPlanarField scaled;
  EmbeddedField embedded;  // defect applied, except the additive perturbation
  VectorField<3> f;        // the embedded field the experiments run on
  std::optional<SelectJResult> j_selection;
  std::optional<SelectQResult> q_selection;

  double P() const { return tmpl.P(); }
  double epsilon() const { return tmpl.disc_radius(); }
  double sigma() const { return scaled.sigma; }
  Vec3 planar_rest() const { return lift(scaled.rest_point()); }
};

/// Additive term kappa theta(u) pi(R pi^{-1}(u - S/n)) with R the quarter
/// turn; tangent to H, so S-dynamics are untouched, but its Jacobian has
/// entries -kappa / sqrt(3) where theta = 1.
inline VectorField<3> with_rotation(const EmbeddedField& f, double kappa) {
  return VectorField<3>(
      3,
      [f, kappa](const Vec3& u) {
        const Vec2 p = IsometryH::coordinates(u);
        const double th = f.template_field().theta()(u);
        return Vec3(f(u) + kappa * th * IsometryH::lift(Vec2(-p[1], p[0])));
      },
      "embedded+rotation");
}

/// Rotation strength used by the noncooperative defect, in units of Q.
inline constexpr double kRotationPerQ = 10.0;

inline BuiltSystem build_system(const SystemConfig& cfg, unsigned jobs = 0) {
  cfg.validate();
  BuiltSystem out;
  out.config = cfg;
  const std::uint64_t seed = cfg.run.seed;

  if (!cfg.tmpl.J) {
    SelectJOptions opts;
    opts.grid_step = cfg.tmpl.grid_step;
    opts.margin = cfg.tmpl.margin;
    opts.seed = seed ^ 0x4A4A4A4AULL;
    opts.jobs = jobs;
    out.j_selection = select_J<3>(ThetaSpec(cfg.n), cfg.n, opts);
    out.config.tmpl.J = out.j_selection->J;
  }
  const TemplateField<3> clean(cfg.n, GammaProfile(cfg.n, *out.config.tmpl.J));
  out.planar = PlanarField(cfg.partition(), cfg.planar.e1);
  out.scaled = rescale_into_disc(out.planar, out.planar.region_radius(), clean.disc_radius());
  const LiftedField G = build_G(out.scaled);

  if (!cfg.embedding.Q) {
    SelectQOptions opts;
    opts.grid_step = cfg.tmpl.grid_step;
    opts.margin = cfg.embedding.margin;
    opts.seed = seed ^ 0x51515151ULL;
    opts.jobs = jobs;
    out.q_selection = select_Q(clean, G, opts);
    out.config.embedding.Q = out.q_selection->Q;
  }
  const double Q = cfg.defect == Defect::small_q ? kSmallQ : *out.config.embedding.Q;

  out.tmpl = cfg.defect == Defect::gamma_tail_flip ? clean.with_gamma(clean.gamma().with_flipped_tail()) : clean;
  out.embedded = EmbeddedField(out.tmpl, G, Q);
  out.f = cfg.defect == Defect::noncooperative ? with_rotation(out.embedded, kRotationPerQ * Q)
                                                : out.embedded.handle();
  return out;
}

/// Resolved config plus the derived constants.
inline json resolved_json(const BuiltSystem& sys) {
  json j = config_to_json(sys.config);
  const auto b = IsometryH::basis();
  j["derived"] = {{"P", sys.P()},
                  {"nP", sys.tmpl.nP()},
                  {"Q_effective", sys.embedded.Q()},
                  {"epsilon", sys.epsilon()},
                  {"sigma", sys.sigma()},
                  {"region_radius", sys.planar.region_radius()},
                  {"basis", json::array({json::array({b(0, 0), b(1, 0), b(2, 0)}),
                                         json::array({b(0, 1), b(1, 1), b(2, 1)})})},
                  {"rescaled", sys.tmpl.rescaled()}};
  return j;
}

}  // namespace coopembed

#endif  // COOPEMBED_CONFIG_HPP
