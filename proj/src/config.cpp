#include "kspde/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace kspde {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ValidationError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

Vec2 vec2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ValidationError(where + ": expected [a, b]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::array<int, 2> ivec2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw ValidationError(where + ": expected [i, j] integers");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

const char* kernel_name(KernelSpec::Kind k) {
  return k == KernelSpec::Kind::kPseudoMaxwellian ? "pseudo_maxwellian" : "hard_sphere";
}

const char* stream_name(StreamFunction::Kind k) { return k == StreamFunction::Kind::kBump ? "bump" : "gauss_tapered"; }

const char* f0_name(InitialCondition::Kind k) {
  switch (k) {
    case InitialCondition::Kind::kMaxwellian: return "maxwellian";
    case InitialCondition::Kind::kDoubleBump: return "double_bump";
    case InitialCondition::Kind::kBox: return "box";
  }
  return "?";
}

std::vector<NoiseMode> wide_streams() {
  std::vector<NoiseMode> m(2);
  m[0].kx = {1, 0};
  m[0].amplitude = 1.0;
  m[0].stream.center = {0.3, 0.2};
  m[0].stream.width = 2.6;
  m[1].kx = {0, 1};
  m[1].amplitude = 0.8;
  m[1].phase = 0.5;
  m[1].stream.kind = StreamFunction::Kind::kGaussTapered;
  m[1].stream.center = {-0.2, 0.1};
  m[1].stream.width = 2.4;
  return m;
}

}  // namespace

int SimConfig::n_steps() const { return aligned_step(T, dt, "T"); }

std::vector<int> SimConfig::output_steps() const {
  std::vector<int> s;
  if (output_times.empty()) {
    for (int k = 0; k <= n_steps(); ++k) s.push_back(k);
    return s;
  }
  for (double t : output_times) s.push_back(aligned_step(t, dt, "output time"));
  return s;
}

NoiseModel SimConfig::noise_model() const { return NoiseModel::make_stream_noise(noise, grid); }

void SimConfig::validate() const {
  grid.validate();
  if (!(dt > 0.0) || !(T > 0.0)) throw ValidationError("T and dt must be positive");
  const int N = n_steps();
  if (N < 1) throw ValidationError("T must span at least one step");
  int prev = -1;
  for (int s : output_steps()) {
    if (s > N) throw ValidationError("output time beyond T");
    if (s <= prev) throw ValidationError("output times must be strictly increasing");
    prev = s;
  }
  if (!(n > 0.0)) throw ValidationError("truncation n must be positive");
  if (kernel.b0 < 0.0 || !(kernel.radius > 0.0)) throw ValidationError("kernel: need b0 >= 0 and radius > 0");
  if (kernel.n_theta < 2 || kernel.n_theta % 2 != 0) throw ValidationError("kernel: n_theta must be even and >= 2");
  if (!(picard.tol > 0.0) || picard.max_iter < 1 || picard.probes < 1 || !(picard.safety > 0.0)) {
    throw ValidationError("picard: need tol > 0, max_iter >= 1, probes >= 1, safety > 0");
  }
  if (M < 1) throw ValidationError("ensemble size M must be >= 1");
  switch (f0.kind) {
    case InitialCondition::Kind::kMaxwellian:
      if (!(f0.theta > 0.0) || f0.rho < 0.0) throw ValidationError("f0 maxwellian: need theta > 0, rho >= 0");
      break;
    case InitialCondition::Kind::kDoubleBump:
      if (!(f0.width > 0.0) || f0.amplitude < 0.0 || f0.centers.empty()) {
        throw ValidationError("f0 double_bump: need width > 0, amplitude >= 0 and at least one centre");
      }
      break;
    case InitialCondition::Kind::kBox:
      if (f0.value < 0.0 || f0.v_lo[0] >= f0.v_hi[0] || f0.v_lo[1] >= f0.v_hi[1]) {
        throw ValidationError("f0 box: need value >= 0 and v_lo < v_hi");
      }
      break;
  }
  if (std::abs(f0.mod_amplitude) > 1.0) throw ValidationError("f0: |mod_amplitude| must be <= 1 to keep f0 >= 0");
  const double support = f0.support_radius();
  if (grid.vmax < std::sqrt(2.0) * support - 1e-9) {
    throw ValidationError("vmax / f0 support radius = " + std::to_string(grid.vmax / support) + " is below sqrt(2)");
  }
  (void)noise_model();
}

json SimConfig::to_json() const {
  json j;
  j["schema"] = kConfigSchema;
  j["grid"] = {{"nx", grid.nx}, {"nv", grid.nv}, {"lx", grid.lx}, {"vmax", grid.vmax}};
  j["kernel"] = {{"kind", kernel_name(kernel.kind)}, {"b0", kernel.b0}, {"radius", kernel.radius},
                 {"n_theta", kernel.n_theta}};
  j["collisions"] = collisions;
  json nz = json::array();
  for (const NoiseMode& m : noise) {
    json s = {{"kind", stream_name(m.stream.kind)},
              {"center", {m.stream.center[0], m.stream.center[1]}},
              {"width", m.stream.width}};
    if (m.stream.kind == StreamFunction::Kind::kGaussTapered) s["kappa"] = m.stream.kappa;
    nz.push_back({{"kx", {m.kx[0], m.kx[1]}}, {"amplitude", m.amplitude}, {"phase", m.phase}, {"stream", s}});
  }
  j["noise"] = nz;
  json f = {{"kind", f0_name(f0.kind)}, {"mod_amplitude", f0.mod_amplitude}, {"mod_k", {f0.mod_k[0], f0.mod_k[1]}}};
  switch (f0.kind) {
    case InitialCondition::Kind::kMaxwellian:
      f["rho"] = f0.rho;
      f["theta"] = f0.theta;
      f["u"] = {f0.u[0], f0.u[1]};
      break;
    case InitialCondition::Kind::kDoubleBump: {
      f["amplitude"] = f0.amplitude;
      f["width"] = f0.width;
      json c = json::array();
      for (const Vec2& v : f0.centers) c.push_back({v[0], v[1]});
      f["centers"] = c;
      break;
    }
    case InitialCondition::Kind::kBox:
      f["value"] = f0.value;
      f["v_lo"] = {f0.v_lo[0], f0.v_lo[1]};
      f["v_hi"] = {f0.v_hi[0], f0.v_hi[1]};
      break;
  }
  j["f0"] = f;
  j["T"] = T;
  j["dt"] = dt;
  j["output_times"] = output_times;
  j["n"] = std::isinf(n) ? json("inf") : json(n);
  j["picard"] = {{"tol", picard.tol},         {"max_iter", picard.max_iter}, {"probes", picard.probes},
                 {"safety", picard.safety},   {"probe_seed", picard.probe_seed}};
  j["M"] = M;
  j["seed"] = seed;
  j["diagnostics"] = {{"dissipation", diagnostics.dissipation},
                      {"snapshots", diagnostics.snapshots},
                      {"balance", diagnostics.balance}};
  return j;
}

SimConfig SimConfig::from_json(const json& j) {
  reject_unknown(j, {"schema", "grid", "kernel", "collisions", "noise", "f0", "T", "dt", "output_times", "n", "picard", "M",
                     "seed", "diagnostics"},
                 "config");
  if (!j.contains("schema") || j["schema"] != kConfigSchema) {
    throw ValidationError(std::string("config: missing or unsupported schema tag (expected ") + kConfigSchema + ")");
  }
  SimConfig c;
  if (j.contains("grid")) {
    const json& g = j["grid"];
    reject_unknown(g, {"nx", "nv", "lx", "vmax"}, "grid");
    c.grid.nx = get_or(g, "nx", c.grid.nx);
    c.grid.nv = get_or(g, "nv", c.grid.nv);
    c.grid.lx = get_or(g, "lx", c.grid.lx);
    c.grid.vmax = get_or(g, "vmax", c.grid.vmax);
  }
  if (j.contains("kernel")) {
    const json& k = j["kernel"];
    reject_unknown(k, {"kind", "b0", "radius", "n_theta"}, "kernel");
    const std::string kind = get_or<std::string>(k, "kind", "pseudo_maxwellian");
    if (kind == "pseudo_maxwellian") c.kernel.kind = KernelSpec::Kind::kPseudoMaxwellian;
    else if (kind == "hard_sphere") c.kernel.kind = KernelSpec::Kind::kMollifiedHardSphere;
    else throw ValidationError("kernel: unknown kind '" + kind + "'");
    c.kernel.b0 = get_or(k, "b0", c.kernel.b0);
    c.kernel.radius = get_or(k, "radius", c.kernel.radius);
    c.kernel.n_theta = get_or(k, "n_theta", c.kernel.n_theta);
  }
  c.collisions = get_or(j, "collisions", c.collisions);
  if (j.contains("noise")) {
    if (!j["noise"].is_array()) throw ValidationError("noise: expected an array of modes");
    for (const json& m : j["noise"]) {
      reject_unknown(m, {"kx", "amplitude", "phase", "stream"}, "noise mode");
      NoiseMode nm;
      if (m.contains("kx")) nm.kx = ivec2(m["kx"], "noise kx");
      nm.amplitude = get_or(m, "amplitude", nm.amplitude);
      nm.phase = get_or(m, "phase", nm.phase);
      if (!m.contains("stream")) throw ValidationError("noise mode: missing stream");
      const json& s = m["stream"];
      reject_unknown(s, {"kind", "center", "width", "kappa"}, "stream");
      const std::string kind = get_or<std::string>(s, "kind", "bump");
      if (kind == "bump") nm.stream.kind = StreamFunction::Kind::kBump;
      else if (kind == "gauss_tapered") nm.stream.kind = StreamFunction::Kind::kGaussTapered;
      else throw ValidationError("stream: unknown kind '" + kind + "'");
      if (s.contains("center")) nm.stream.center = vec2(s["center"], "stream center");
      nm.stream.width = get_or(s, "width", nm.stream.width);
      nm.stream.kappa = get_or(s, "kappa", nm.stream.kappa);
      c.noise.push_back(nm);
    }
  }
  if (j.contains("f0")) {
    const json& f = j["f0"];
    reject_unknown(f, {"kind", "mod_amplitude", "mod_k", "rho", "theta", "u", "amplitude", "width", "centers", "value",
                       "v_lo", "v_hi"},
                   "f0");
    const std::string kind = get_or<std::string>(f, "kind", "double_bump");
    if (kind == "maxwellian") c.f0.kind = InitialCondition::Kind::kMaxwellian;
    else if (kind == "double_bump") c.f0.kind = InitialCondition::Kind::kDoubleBump;
    else if (kind == "box") c.f0.kind = InitialCondition::Kind::kBox;
    else throw ValidationError("f0: unknown built-in '" + kind + "'");
    c.f0.mod_amplitude = get_or(f, "mod_amplitude", c.f0.mod_amplitude);
    if (f.contains("mod_k")) c.f0.mod_k = ivec2(f["mod_k"], "f0 mod_k");
    c.f0.rho = get_or(f, "rho", c.f0.rho);
    c.f0.theta = get_or(f, "theta", c.f0.theta);
    if (f.contains("u")) c.f0.u = vec2(f["u"], "f0 u");
    c.f0.amplitude = get_or(f, "amplitude", c.f0.amplitude);
    c.f0.width = get_or(f, "width", c.f0.width);
    if (f.contains("centers")) {
      if (!f["centers"].is_array()) throw ValidationError("f0 centers: expected an array");
      c.f0.centers.clear();
      for (const json& v : f["centers"]) c.f0.centers.push_back(vec2(v, "f0 centre"));
    }
    c.f0.value = get_or(f, "value", c.f0.value);
    if (f.contains("v_lo")) c.f0.v_lo = vec2(f["v_lo"], "f0 v_lo");
    if (f.contains("v_hi")) c.f0.v_hi = vec2(f["v_hi"], "f0 v_hi");
  }
  c.T = get_or(j, "T", c.T);
  c.dt = get_or(j, "dt", c.dt);
  c.output_times = get_or(j, "output_times", c.output_times);
  if (j.contains("n")) {
    if (j["n"].is_string() && j["n"] == "inf") c.n = kNoTruncation;
    else c.n = get_or(j, "n", c.n);
  }
  if (j.contains("picard")) {
    const json& p = j["picard"];
    reject_unknown(p, {"tol", "max_iter", "probes", "safety", "probe_seed"}, "picard");
    c.picard.tol = get_or(p, "tol", c.picard.tol);
    c.picard.max_iter = get_or(p, "max_iter", c.picard.max_iter);
    c.picard.probes = get_or(p, "probes", c.picard.probes);
    c.picard.safety = get_or(p, "safety", c.picard.safety);
    c.picard.probe_seed = get_or(p, "probe_seed", c.picard.probe_seed);
  }
  c.M = get_or(j, "M", c.M);
  c.seed = get_or(j, "seed", c.seed);
  if (j.contains("diagnostics")) {
    const json& d = j["diagnostics"];
    reject_unknown(d, {"dissipation", "snapshots", "balance"}, "diagnostics");
    c.diagnostics.dissipation = get_or(d, "dissipation", c.diagnostics.dissipation);
    c.diagnostics.snapshots = get_or(d, "snapshots", c.diagnostics.snapshots);
    c.diagnostics.balance = get_or(d, "balance", c.diagnostics.balance);
  }
  c.validate();
  return c;
}

SimConfig SimConfig::load(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot read config file: " + file);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError("config file " + file + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void SimConfig::save(const std::string& file) const {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write " + file);
  os << to_json().dump(2) << "\n";
}

SimConfig SimConfig::standard() {
  SimConfig c;
  c.grid = PhaseGrid{8, 16, 2.0 * kPi, 4.0};
  c.kernel.kind = KernelSpec::Kind::kPseudoMaxwellian;
  c.kernel.b0 = 0.3;
  c.kernel.radius = 6.0;
  c.kernel.n_theta = 8;
  c.noise = wide_streams();
  c.f0.kind = InitialCondition::Kind::kDoubleBump;
  c.f0.amplitude = 0.1;
  c.f0.width = 0.75;
  c.f0.centers = {{-0.55, 0.165}, {0.55, -0.165}};
  c.f0.mod_amplitude = 0.5;
  c.f0.mod_k = {1, 0};
  c.T = 0.25;
  c.dt = 0.01;
  c.n = 10.0;
  c.M = 1;
  c.seed = 7;
  return c;
}

SimConfig SimConfig::coarse() {
  SimConfig c = standard();
  c.grid = PhaseGrid{4, 12, 2.0 * kPi, 4.0};
  c.noise[0].stream.width = 2.2;
  c.noise[1].stream.width = 2.1;
  c.T = 0.24;
  c.dt = 0.02;
  c.M = 64;
  c.seed = 99;
  return c;
}

}  // namespace kspde
