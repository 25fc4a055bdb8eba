#include "rbtr/bench.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace rbtr {

namespace {

using json = nlohmann::json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(const std::string& v) { return v; }

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("invalid value '" + value + "' for key '" + key + "': expected " + what);
}

void parse(const std::string& key, const std::string& s, double& out) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) bad_value(key, s, "a finite number");
  out = v;
}
void parse(const std::string& key, const std::string& s, int& out) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE || v < INT32_MIN || v > INT32_MAX) bad_value(key, s, "an integer");
  out = static_cast<int>(v);
}
void parse(const std::string& key, const std::string& s, std::uint64_t& out) {
  errno = 0;
  char* end = nullptr;
  if (s.empty() || s[0] == '-') bad_value(key, s, "a nonnegative integer");
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) bad_value(key, s, "a nonnegative integer");
  out = v;
}
void parse(const std::string&, const std::string& s, std::string& out) { out = s; }

struct Key {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Access>
Key make_key(const std::string& name, Access access) {
  return {[access](const RunConfig& c) { return fmt(access(const_cast<RunConfig&>(c))); },
          [access, name](RunConfig& c, const std::string& v) { parse(name, v, access(c)); }};
}

template <typename Select>
void add_alpha_keys(std::map<std::string, Key>& keys, const std::string& prefix, Select sel) {
  keys[prefix + "alpha.theta"] = make_key(prefix + "alpha.theta", [sel](RunConfig& c) -> double& { return sel(c).theta; });
  keys[prefix + "alpha.Theta"] = make_key(prefix + "alpha.Theta", [sel](RunConfig& c) -> double& { return sel(c).Theta; });
  keys[prefix + "alpha.floor"] =
      make_key(prefix + "alpha.floor", [sel](RunConfig& c) -> double& { return sel(c).alpha_floor; });
  keys[prefix + "alpha.max_trials"] =
      make_key(prefix + "alpha.max_trials", [sel](RunConfig& c) -> int& { return sel(c).max_trials; });
  keys[prefix + "pgd.max_iterations"] =
      make_key(prefix + "pgd.max_iterations", [sel](RunConfig& c) -> int& { return sel(c).pgd.max_iterations; });
  keys[prefix + "pgd.tolerance"] =
      make_key(prefix + "pgd.tolerance", [sel](RunConfig& c) -> double& { return sel(c).pgd.tolerance; });
  keys[prefix + "pgd.stagnation_window"] = make_key(
      prefix + "pgd.stagnation_window", [sel](RunConfig& c) -> int& { return sel(c).pgd.stagnation_window; });
  keys[prefix + "pgd.stagnation_tol"] =
      make_key(prefix + "pgd.stagnation_tol", [sel](RunConfig& c) -> double& { return sel(c).pgd.stagnation_tol; });
  keys[prefix + "pgd.nonmonotone_window"] = make_key(
      prefix + "pgd.nonmonotone_window", [sel](RunConfig& c) -> int& { return sel(c).pgd.nonmonotone_window; });
  keys[prefix + "pgd.sufficient_decrease"] = make_key(
      prefix + "pgd.sufficient_decrease", [sel](RunConfig& c) -> double& { return sel(c).pgd.sufficient_decrease; });
  keys[prefix + "pgd.max_halvings"] =
      make_key(prefix + "pgd.max_halvings", [sel](RunConfig& c) -> int& { return sel(c).pgd.max_halvings; });
}

const std::map<std::string, Key>& registry() {
  static const std::map<std::string, Key> keys = [] {
    std::map<std::string, Key> k;
    k["run"] = make_key("run", [](RunConfig& c) -> int& { return c.run_id; });
    k["cells"] = make_key("cells", [](RunConfig& c) -> int& { return c.cells; });
    k["K"] = make_key("K", [](RunConfig& c) -> int& { return c.K; });
    k["delta"] = make_key("delta", [](RunConfig& c) -> double& { return c.delta; });
    k["seed"] = make_key("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; });
    k["algorithm"] = make_key("algorithm", [](RunConfig& c) -> std::string& { return c.algorithm; });

    k["irgnm.tau"] = make_key("irgnm.tau", [](RunConfig& c) -> double& { return c.irgnm.tau; });
    k["irgnm.alpha_initial"] =
        make_key("irgnm.alpha_initial", [](RunConfig& c) -> double& { return c.irgnm.alpha_initial; });
    k["irgnm.max_outer"] = make_key("irgnm.max_outer", [](RunConfig& c) -> int& { return c.irgnm.max_outer; });
    add_alpha_keys(k, "irgnm.", [](RunConfig& c) -> AlphaSettings& { return c.irgnm.alpha; });

    auto tr_double = [&k](const std::string& name, double TrSettings::*m) {
      k["tr." + name] = make_key("tr." + name, [m](RunConfig& c) -> double& { return c.tr.*m; });
    };
    auto tr_int = [&k](const std::string& name, int TrSettings::*m) {
      k["tr." + name] = make_key("tr." + name, [m](RunConfig& c) -> int& { return c.tr.*m; });
    };
    tr_double("tau", &TrSettings::tau);
    tr_double("tau_tilde", &TrSettings::tau_tilde);
    tr_double("delta_tilde", &TrSettings::delta_tilde);
    tr_double("alpha_initial", &TrSettings::alpha_initial);
    tr_double("eta0", &TrSettings::eta0);
    tr_double("beta1", &TrSettings::beta1);
    tr_double("beta2", &TrSettings::beta2);
    tr_double("beta3", &TrSettings::beta3);
    tr_double("kappa_arm", &TrSettings::kappa_arm);
    tr_double("eps_pod", &TrSettings::eps_pod);
    tr_double("eps_reduction", &TrSettings::eps_reduction);
    tr_int("max_backtracking", &TrSettings::max_backtracking);
    tr_int("max_inner", &TrSettings::max_inner);
    tr_int("max_outer", &TrSettings::max_outer);
    tr_int("max_rejects", &TrSettings::max_rejects);
    tr_int("max_failure_enrichments", &TrSettings::max_failure_enrichments);
    add_alpha_keys(k, "tr.", [](RunConfig& c) -> AlphaSettings& { return c.tr.alpha; });
    return k;
  }();
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}
void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}
std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("truncated field file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

constexpr char kMagic[8] = {'R', 'B', 'T', 'R', 'F', 'L', 'D', '\0'};
constexpr std::uint32_t kFieldVersion = 1;

json read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("no manifest.json in " + dir.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("unreadable manifest in " + dir.string() + ": " + e.what());
  }
}

RunConfig config_from_manifest(const json& m) {
  RunConfig c;
  for (const auto& [key, value] : m.at("config").items()) apply_setting(c, key, value.get<std::string>());
  return c;
}

// sqrt(weight * sum_k x_k' G x_k)
double trajectory_norm(const SparseMatrix& G, const Matrix& x, double weight) {
  const Matrix gx = G * x;
  return std::sqrt(std::max(0.0, weight * (x.array() * gx.array()).sum()));
}

}  // namespace

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& keys = registry();
  const auto it = keys.find(key);
  if (it == keys.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second.set(config, trim(value));
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(number) + ": expected key=value, got '" + line + "'");
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  return parse_config(in, std::move(base));
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, key] : registry()) out += name + "=" + key.get(config) + "\n";
  return out;
}

void validate(const RunConfig& c) {
  run_setup(c.run_id);
  if (c.cells < 2) throw ConfigError("cells must be at least 2 (got " + std::to_string(c.cells) + ")");
  if (c.K < 1) throw ConfigError("K must be at least 1 (got " + std::to_string(c.K) + ")");
  if (!(c.delta > 0.0)) throw ConfigError("delta must be positive; the discrepancy principle needs a noise level");
  if (c.algorithm != "fom" && c.algorithm != "tr" && c.algorithm != "both")
    throw ConfigError("algorithm must be fom, tr or both (got '" + c.algorithm + "')");
  check_settings(irgnm_settings(c));
  check_settings(tr_settings(c));
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t problem_hash(const RunConfig& c) {
  return fnv1a("run=" + fmt(c.run_id) + "\ncells=" + fmt(c.cells) + "\nK=" + fmt(c.K) + "\ndelta=" + fmt(c.delta) +
               "\nseed=" + fmt(c.seed) + "\n");
}

IrgnmSettings irgnm_settings(const RunConfig& c) {
  IrgnmSettings s = c.irgnm;
  s.delta = c.delta;
  return s;
}

TrSettings tr_settings(const RunConfig& c) {
  TrSettings s = c.tr;
  s.delta = c.delta;
  return s;
}

void write_field(const std::filesystem::path& path, const Matrix& field, const std::map<std::string, std::string>& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kMagic, 8);
  write_u32(out, kFieldVersion);
  write_u32(out, 0);
  write_u64(out, static_cast<std::uint64_t>(field.rows()));
  write_u64(out, static_cast<std::uint64_t>(field.cols()));
  for (Index i = 0; i < field.rows(); ++i)
    for (Index j = 0; j < field.cols(); ++j) {
      std::uint64_t bits;
      const double v = field(i, j);
      std::memcpy(&bits, &v, 8);
      write_u64(out, bits);
    }
  if (!out) throw ConfigError("failed writing " + path.string());

  std::ofstream m(path.string() + ".meta");
  m << "rows=" << field.rows() << "\ncols=" << field.cols() << "\nlayout=row-major float64 little-endian\n";
  for (const auto& [k, v] : meta)
    if (k != "rows" && k != "cols" && k != "layout") m << k << "=" << v << "\n";
}

Matrix read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open field file " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError(path.string() + " is not a field dump");
  const std::uint64_t version_word = read_u64(in);
  if ((version_word & 0xffffffffu) != kFieldVersion) throw ConfigError("unsupported field dump version");
  const std::uint64_t rows = read_u64(in), cols = read_u64(in);
  if (rows > (1u << 28) || cols > (1u << 20)) throw ConfigError("implausible field dimensions in " + path.string());
  Matrix f(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < f.rows(); ++i)
    for (Index j = 0; j < f.cols(); ++j) {
      const std::uint64_t bits = read_u64(in);
      double v;
      std::memcpy(&v, &bits, 8);
      f(i, j) = v;
    }
  return f;
}

std::map<std::string, std::string> read_meta(const std::filesystem::path& field_path) {
  std::ifstream in(field_path.string() + ".meta");
  if (!in) throw ConfigError("missing metadata for " + field_path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

const char* const kFomHistoryHeader = "iteration,J,alpha,inner_iterations,alpha_trials,bracketed,fom_solves,wall_time";
const char* const kTrHistoryHeader =
    "iteration,J,alpha,inner_iterations,alpha_trials,bracketed,fom_solves,eta,n_q,n_v,branch,delta_J,eta_before,"
    "J_r_trial,J_r_agc,rho,failure_enrichments,decision_fom_evaluations,max_inner_indicator,wall_time";

void write_history(std::ostream& out, const IrgnmResult& result) {
  out << kFomHistoryHeader << "\n";
  for (const IterationRecord& r : result.history)
    out << r.iteration << "," << fmt(r.J) << "," << fmt(r.alpha) << "," << r.inner_iterations << "," << r.alpha_trials
        << "," << (r.bracketed ? 1 : 0) << "," << r.fom_solves << "," << fmt(r.wall_time) << "\n";
}

void write_history(std::ostream& out, const TrResult& result) {
  out << kTrHistoryHeader << "\n";
  for (const TrRecord& r : result.history)
    out << r.iteration << "," << fmt(r.J) << "," << fmt(r.alpha) << "," << r.inner_iterations << "," << r.alpha_trials
        << "," << (r.bracketed ? 1 : 0) << "," << r.fom_solves << "," << fmt(r.eta) << "," << r.n_q << "," << r.n_v
        << "," << to_string(r.branch) << "," << fmt(r.delta_J) << "," << fmt(r.eta_before) << "," << fmt(r.J_r_trial)
        << "," << fmt(r.J_r_agc) << "," << fmt(r.rho) << "," << r.failure_enrichments << ","
        << r.decision_fom_evaluations << "," << fmt(r.max_inner_indicator) << "," << fmt(r.wall_time) << "\n";
}

RunSummary execute(const RunConfig& config, const std::string& algorithm, const std::filesystem::path& dir) {
  validate(config);
  if (algorithm != "fom" && algorithm != "tr") throw ConfigError("execute runs fom or tr, not '" + algorithm + "'");
  const RunSetup setup = run_setup(config.run_id);
  ProblemSpec spec;
  spec.kind = setup.kind;
  spec.stationary = setup.stationary;
  spec.cells_per_side = config.cells;
  spec.time_steps = config.K;
  const FomProblem problem(spec);
  const Matrix q_exact = exact_parameter(config.run_id, problem.mesh(), config.K);
  const Observation data = make_noisy_data(problem, q_exact, config.delta, config.seed);
  const Matrix q0 = default_center(problem);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());

  RunSummary s;
  s.algorithm = algorithm;
  Matrix q;
  std::ofstream hist(dir / "history.csv");
  if (!hist) throw ConfigError("cannot write into " + dir.string());
  if (algorithm == "fom") {
    const IrgnmResult r = run_fom_irgnm(problem, data, irgnm_settings(config), q0);
    write_history(hist, r);
    q = r.q;
    s.converged = r.converged;
    s.outer_iterations = r.history.back().iteration;
    s.J = r.history.back().J;
    s.target = r.target;
    s.wall_time = r.history.back().wall_time;
    s.fom_solves = r.history.back().fom_solves;
  } else {
    const TrResult r = run_tr_irgnm(problem, data, tr_settings(config), q0);
    write_history(hist, r);
    q = r.q;
    s.converged = r.converged;
    s.outer_iterations = r.history.back().iteration;
    s.J = r.history.back().J;
    s.target = r.target;
    s.wall_time = r.history.back().wall_time;
    s.fom_solves = r.history.back().fom_solves;
    s.n_q = r.history.back().n_q;
    s.n_v = r.history.back().n_v;
    s.eps_pod = config.tr.eps_pod;
  }
  const double w = problem.parameter_weight();
  s.rel_error_exact = trajectory_norm(problem.mass(), q - q_exact, w) / trajectory_norm(problem.mass(), q_exact, w);

  const std::map<std::string, std::string> meta = {{"run", fmt(config.run_id)},
                                                    {"cells", fmt(config.cells)},
                                                    {"K", fmt(config.K)},
                                                    {"columns", setup.stationary ? "stationary" : "time steps 1..K"},
                                                    {"nodes", "row-major, node = iy * (cells + 1) + ix"}};
  write_field(dir / "q_final.bin", q, meta);
  write_field(dir / "q_exact.bin", q_exact, meta);

  json m;
  m["format"] = "rbtr-manifest";
  m["format_version"] = 1;
  m["tool_version"] = "1.0.0";
  m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  m["compiler"] = __VERSION__;
  m["seed"] = config.seed;
  m["algorithm"] = algorithm;
  m["problem_hash"] = hex(problem_hash(config));
  m["noise"] = "observation dofs, uniform [-1, 1] (mt19937_64), scaled to delta in the dt-weighted H1 trajectory norm";
  json cfg = json::object();
  for (const auto& [name, key] : registry()) cfg[name] = key.get(config);
  cfg["algorithm"] = algorithm;
  m["config"] = cfg;
  m["summary"] = {{"converged", s.converged},         {"outer_iterations", s.outer_iterations},
                  {"J", s.J},                         {"target", s.target},
                  {"wall_time", s.wall_time},         {"fom_solves", s.fom_solves},
                  {"n_q", s.n_q},                     {"n_v", s.n_v},
                  {"eps_pod", s.eps_pod},             {"rel_error_exact", s.rel_error_exact}};
  std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
  return s;
}

CompareRow compare(const std::filesystem::path& dir_fom, const std::filesystem::path& dir_tr) {
  const json a = read_manifest(dir_fom), b = read_manifest(dir_tr);
  if (a.at("problem_hash") != b.at("problem_hash"))
    throw ConfigError("runs in " + dir_fom.string() + " and " + dir_tr.string() +
                      " solve different problems (manifest hash mismatch)");
  const RunConfig cfg = config_from_manifest(a);
  const Matrix qa = read_field(dir_fom / "q_final.bin"), qb = read_field(dir_tr / "q_final.bin");
  if (qa.rows() != qb.rows() || qa.cols() != qb.cols()) throw ConfigError("final fields have different shapes");

  const Mesh mesh = build_mesh(cfg.cells);
  if (qa.rows() != mesh.num_nodes()) throw ConfigError("final field does not match the recorded mesh");
  const SparseMatrix mass = assemble_mass(mesh), h1 = assemble_h1_product(mesh);
  const double w = qa.cols() == 1 ? 1.0 : 1.0 / cfg.K;

  CompareRow r;
  const json& sa = a.at("summary");
  const json& sb = b.at("summary");
  r.eps_pod = sb.at("eps_pod").get<double>();
  const double na = trajectory_norm(mass, qa, w), ha = trajectory_norm(h1, qa, w);
  r.l2_rel_error = na > 0.0 ? trajectory_norm(mass, qa - qb, w) / na : 0.0;
  r.h1_rel_error = ha > 0.0 ? trajectory_norm(h1, qa - qb, w) / ha : 0.0;
  r.time_fom = sa.at("wall_time").get<double>();
  r.time_tr = sb.at("wall_time").get<double>();
  r.speedup = r.time_tr > 0.0 ? r.time_fom / r.time_tr : 0.0;
  r.fom_solves_fom = sa.at("fom_solves").get<long>();
  r.fom_solves_tr = sb.at("fom_solves").get<long>();
  r.n_q = sb.at("n_q").get<Index>();
  r.n_v = sb.at("n_v").get<Index>();
  r.outer_fom = sa.at("outer_iterations").get<int>();
  r.outer_tr = sb.at("outer_iterations").get<int>();
  return r;
}

std::string format_table(const std::vector<CompareRow>& rows) {
  std::string out =
      "eps_pod,l2_rel_err,h1_rel_err,time_fom,time_tr,speedup,fom_solves_fom,fom_solves_tr,n_q,n_v,outer_fom,outer_tr\n";
  for (const CompareRow& r : rows)
    out += fmt(r.eps_pod) + "," + fmt(r.l2_rel_error) + "," + fmt(r.h1_rel_error) + "," + fmt(r.time_fom) + "," +
           fmt(r.time_tr) + "," + fmt(r.speedup) + "," + std::to_string(r.fom_solves_fom) + "," +
           std::to_string(r.fom_solves_tr) + "," + std::to_string(r.n_q) + "," + std::to_string(r.n_v) + "," +
           std::to_string(r.outer_fom) + "," + std::to_string(r.outer_tr) + "\n";
  return out;
}

std::vector<double> eps_grid(int points) {
  if (points < 2) throw ConfigError("an eps grid needs at least two points");
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(std::pow(10.0, -9.0 - 5.0 * i / (points - 1)));
  return out;
}

std::filesystem::path output_root() {
  const char* env = std::getenv("RBTR_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("rbtr_output");
}

}  // namespace rbtr
