#include "nahmlab/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace nahmlab {

namespace {

struct ModeName {
  RunMode mode;
  const char* name;
};
constexpr ModeName kModes[] = {
    {RunMode::VerifyLie, "verify-lie"},   {RunMode::VerifyToda, "verify-toda"}, {RunMode::VerifyModels, "verify-models"},
    {RunMode::Hitchin2D, "hitchin2d"},    {RunMode::Solve, "solve"},            {RunMode::KnotSolve, "knot-solve"},
    {RunMode::Donaldson, "donaldson"},    {RunMode::Uniqueness, "uniqueness"},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Parsing context for one key/value line.
struct Entry {
  std::string key, value;
  int line;

  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError("line " + std::to_string(line) + ": " + key + ": " + why, key, line);
  }
  double real() const {
    double v = 0.0;
    const auto* end = value.data() + value.size();
    const auto [p, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || p != end || !std::isfinite(v)) fail("expected a finite number, got '" + value + "'");
    return v;
  }
  long integer() const {
    long v = 0;
    const auto* end = value.data() + value.size();
    const auto [p, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || p != end) fail("expected an integer, got '" + value + "'");
    return v;
  }
  double real_in(double lo, double hi, bool open_lo = false) const {
    const double v = real();
    if (v > hi || v < lo || (open_lo && v == lo))
      fail("value " + value + " outside " + (open_lo ? "(" : "[") + fmt(lo) + ", " + fmt(hi) + "]");
    return v;
  }
  int int_in(long lo, long hi) const {
    const long v = integer();
    if (v < lo || v > hi) fail("value " + value + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return int(v);
  }
  bool boolean() const {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail("expected true or false, got '" + value + "'");
  }
  std::vector<int> int_list(long lo, long hi) const {
    std::vector<int> out;
    for (const auto& part : split(value, ',')) {
      Entry e{key, part, line};
      out.push_back(e.int_in(lo, hi));
    }
    if (out.empty()) fail("empty list");
    return out;
  }
  // Terms "re[,im[,k2,k3]]" separated by ';'.
  TrigPoly trig() const {
    TrigPoly p;
    for (const auto& term : split(value, ';')) {
      if (term.empty()) continue;
      const auto f = split(term, ',');
      if (f.size() != 1 && f.size() != 2 && f.size() != 4) fail("trig term '" + term + "' needs re[,im[,k2,k3]]");
      TrigTerm t;
      const double re = Entry{key, f[0], line}.real();
      const double im = f.size() > 1 ? Entry{key, f[1], line}.real() : 0.0;
      t.coef = cplx(re, im);
      if (f.size() == 4) {
        t.k2 = Entry{key, f[2], line}.int_in(-64, 64);
        t.k3 = Entry{key, f[3], line}.int_in(-64, 64);
      }
      if (t.coef != cplx(0.0)) p.push_back(t);
    }
    return p;
  }
};

std::string trig_text(const TrigPoly& p) {
  std::string out;
  for (const auto& t : p) {
    if (!out.empty()) out += ";";
    out += fmt(t.coef.real()) + "," + fmt(t.coef.imag()) + "," + std::to_string(t.k2) + "," + std::to_string(t.k3);
  }
  return out.empty() ? "0" : out;
}

std::string int_list_text(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

using Setter = std::function<void(RunConfig&, const Entry&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["mode"] = [](RunConfig& c, const Entry& e) {
      for (const auto& mn : kModes)
        if (e.value == mn.name) {
          c.mode = mn.mode;
          return;
        }
      e.fail("unknown mode '" + e.value + "'");
    };
    m["n"] = [](RunConfig& c, const Entry& e) { c.n = e.int_in(1, 8); };
    m["nx"] = [](RunConfig& c, const Entry& e) { c.grid.nx = e.int_in(4, 1024); };
    m["nz"] = [](RunConfig& c, const Entry& e) { c.grid.nz = e.int_in(4, 1024); };
    m["y_min"] = [](RunConfig& c, const Entry& e) { c.grid.y_min = e.real_in(0.0, 1.0, true); };
    m["y_max"] = [](RunConfig& c, const Entry& e) { c.grid.y_max = e.real_in(0.0, 1e3, true); };
    m["ny"] = [](RunConfig& c, const Entry& e) { c.grid.ny = e.int_in(0, 4096); };
    m["nodes_per_decade"] = [](RunConfig& c, const Entry& e) { c.grid.nodes_per_decade = e.real_in(1.0, 1000.0); };
    m["kind"] = [](RunConfig& c, const Entry& e) {
      if (e.value == "hitchin-section")
        c.higgs.kind = HiggsKind::HitchinSection;
      else if (e.value == "knot-local")
        c.higgs.kind = HiggsKind::KnotLocal;
      else
        e.fail("expected hitchin-section or knot-local");
    };
    for (int j = 2; j <= 9; ++j)
      m["q" + std::to_string(j)] = [j](RunConfig& c, const Entry& e) {
        if (int(c.higgs.q.size()) < j - 1) c.higgs.q.resize(j - 1);
        c.higgs.q[j - 2] = e.trig();
      };
    m["knot_weights"] = [](RunConfig& c, const Entry& e) { c.higgs.knot_weights = e.int_list(0, 16); };
    m["knot_x2"] = [](RunConfig& c, const Entry& e) { c.higgs.knot_x2 = e.real_in(0.0, 1.0); };
    m["knot_x3"] = [](RunConfig& c, const Entry& e) { c.higgs.knot_x3 = e.real_in(0.0, 1.0); };
    m["tol"] = [](RunConfig& c, const Entry& e) { c.solver.tol = e.real_in(0.0, 1.0, true); };
    m["path_tol_factor"] = [](RunConfig& c, const Entry& e) { c.solver.path_tol_factor = e.real_in(1.0, 1e6); };
    m["t_step"] = [](RunConfig& c, const Entry& e) { c.solver.t_step = e.real_in(0.0, 1.0, true); };
    m["t_step_max"] = [](RunConfig& c, const Entry& e) { c.solver.t_step_max = e.real_in(0.0, 1.0, true); };
    m["t_step_min"] = [](RunConfig& c, const Entry& e) { c.solver.t_step_min = e.real_in(0.0, 1.0, true); };
    m["max_newton"] = [](RunConfig& c, const Entry& e) { c.solver.max_newton = e.int_in(1, 1000); };
    m["armijo"] = [](RunConfig& c, const Entry& e) { c.solver.armijo = e.real_in(0.0, 0.5); };
    m["max_backtracks"] = [](RunConfig& c, const Entry& e) { c.solver.max_backtracks = e.int_in(0, 60); };
    m["gmres_tol"] = [](RunConfig& c, const Entry& e) { c.solver.gmres_tol = e.real_in(0.0, 1.0, true); };
    m["gmres_restart"] = [](RunConfig& c, const Entry& e) { c.solver.gmres_restart = e.int_in(1, 1000); };
    m["gmres_max_iter"] = [](RunConfig& c, const Entry& e) { c.solver.gmres_max_iter = e.int_in(1, 100000); };
    m["precond"] = [](RunConfig& c, const Entry& e) {
      if (e.value == "fourier-line")
        c.solver.precond = Preconditioner::FourierLine;
      else if (e.value == "diagonal")
        c.solver.precond = Preconditioner::Diagonal;
      else
        e.fail("expected fourier-line or diagonal");
    };
    m["precond_shift"] = [](RunConfig& c, const Entry& e) { c.solver.precond_shift = e.real_in(0.0, 1.0); };
    m["shift_clamp"] = [](RunConfig& c, const Entry& e) { c.solver.shift_clamp = e.real_in(0.0, 30.0, true); };
    m["linearization_check_every"] = [](RunConfig& c, const Entry& e) {
      c.solver.linearization_check_every = e.int_in(0, 1000);
    };
    m["max_principle"] = [](RunConfig& c, const Entry& e) { c.solver.max_principle = e.boolean(); };
    m["fit_y_lo_factor"] = [](RunConfig& c, const Entry& e) { c.solver.fit_y_lo_factor = e.real_in(1.0, 1e6); };
    m["fit_y_hi"] = [](RunConfig& c, const Entry& e) { c.solver.fit_y_hi = e.real_in(0.0, 1e3, true); };
    m["y_c"] = [](RunConfig& c, const Entry& e) { c.y_c = e.real_in(0.0, 1e3, true); };
    m["background_order"] = [](RunConfig& c, const Entry& e) { c.background_order = e.int_in(0, 1); };
    m["toda_weights"] = [](RunConfig& c, const Entry& e) {
      c.toda_weights.clear();
      for (const auto& grp : split(e.value, ';')) c.toda_weights.push_back(Entry{e.key, grp, e.line}.int_list(0, 16));
    };
    m["perturbation"] = [](RunConfig& c, const Entry& e) { c.perturbation = e.real_in(0.0, 5.0); };
    m["directions"] = [](RunConfig& c, const Entry& e) { c.directions = e.int_in(1, 100000); };
    m["seed"] = [](RunConfig& c, const Entry& e) { c.seed = unsigned(e.int_in(0, 2147483647L)); };
    m["quad_nodes"] = [](RunConfig& c, const Entry& e) {
      c.quad_nodes = e.int_in(8, 16);
      if (c.quad_nodes != 8 && c.quad_nodes != 16) e.fail("Gauss-Legendre rule must have 8 or 16 nodes");
    };
    m["report"] = [](RunConfig& c, const Entry& e) {
      if (e.value.empty()) e.fail("empty path");
      c.report = e.value;
    };
    m["csv"] = [](RunConfig& c, const Entry& e) {
      if (e.value.empty()) e.fail("empty path");
      c.csv = e.value;
    };
    return m;
  }();
  return table;
}

const std::set<std::string> kSections = {"run", "grid", "higgs", "solver", "background", "variational", "toda",
                                         "output"};

}  // namespace

ParseError::ParseError(const std::string& msg, std::string key, int line)
    : DomainError(msg), key_(std::move(key)), line_(line) {}

std::string to_string(RunMode m) {
  for (const auto& mn : kModes)
    if (mn.mode == m) return mn.name;
  return "?";
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (const auto h = s.find('#'); h != std::string::npos) s.resize(h);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("line " + std::to_string(line) + ": unterminated section header", "", line);
      const std::string name = trim(std::string_view(s).substr(1, s.size() - 2));
      if (!kSections.count(name))
        throw ParseError("line " + std::to_string(line) + ": unknown section [" + name + "]", name, line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(line) + ": expected key = value", "", line);
    const Entry e{trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)), line};
    const auto it = setters().find(e.key);
    if (it == setters().end()) e.fail("unknown key");
    if (auto [pos, fresh] = seen.emplace(e.key, line); !fresh)
      e.fail("duplicate key (first set on line " + std::to_string(pos->second) + ")");
    it->second(c, e);
  }
  for (const char* req : {"mode", "n"})
    if (!seen.count(req)) throw ParseError(std::string("missing required key ") + req, req, 0);

  // Cross-key checks, reported against the later of the lines involved.
  const auto at = [&](const std::string& k) { return seen.count(k) ? seen[k] : 0; };
  if (c.grid.y_max <= c.grid.y_min)
    throw ParseError("y_max must exceed y_min", "y_max", std::max(at("y_max"), at("y_min")));
  if (c.grid.ny != 0 && c.grid.ny < 5) throw ParseError("ny must be 0 (use nodes_per_decade) or >= 5", "ny", at("ny"));
  if (int(c.higgs.q.size()) > c.n)
    throw ParseError("q" + std::to_string(c.higgs.q.size() + 1) + " exceeds q" + std::to_string(c.n + 1) + " for rank n",
                     "q" + std::to_string(c.higgs.q.size() + 1), at("q" + std::to_string(c.higgs.q.size() + 1)));
  c.higgs.q.resize(c.n);
  if (c.higgs.kind == HiggsKind::KnotLocal && int(c.higgs.knot_weights.size()) != c.n)
    throw ParseError("knot-local data needs n knot weights", "knot_weights", at("knot_weights") ? at("knot_weights") : at("kind"));
  if (c.higgs.kind != HiggsKind::KnotLocal && !c.higgs.knot_weights.empty())
    throw ParseError("knot_weights given for non-knot data", "knot_weights", at("knot_weights"));
  if (c.mode == RunMode::KnotSolve && c.higgs.kind != HiggsKind::KnotLocal)
    throw ParseError("knot-solve needs kind = knot-local", "kind", at("kind"));
  if (c.solver.t_step_min > c.solver.t_step || c.solver.t_step > c.solver.t_step_max)
    throw ParseError("need t_step_min <= t_step <= t_step_max", "t_step", at("t_step"));
  for (const auto& w : c.toda_weights)
    if (int(w.size()) != c.n) throw ParseError("each toda_weights group needs n entries", "toda_weights", at("toda_weights"));
  return c;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  o << "[run]\nmode = " << to_string(c.mode) << "\nn = " << c.n << "\n";
  o << "\n[grid]\nnx = " << c.grid.nx << "\nnz = " << c.grid.nz << "\ny_min = " << fmt(c.grid.y_min)
    << "\ny_max = " << fmt(c.grid.y_max) << "\nny = " << c.grid.ny << "\nnodes_per_decade = " << fmt(c.grid.nodes_per_decade)
    << "\n";
  o << "\n[higgs]\nkind = " << (c.higgs.kind == HiggsKind::KnotLocal ? "knot-local" : "hitchin-section") << "\n";
  for (std::size_t j = 0; j < c.higgs.q.size(); ++j) o << "q" << j + 2 << " = " << trig_text(c.higgs.q[j]) << "\n";
  if (!c.higgs.knot_weights.empty()) o << "knot_weights = " << int_list_text(c.higgs.knot_weights) << "\n";
  if (c.higgs.knot_x2) o << "knot_x2 = " << fmt(*c.higgs.knot_x2) << "\n";
  if (c.higgs.knot_x3) o << "knot_x3 = " << fmt(*c.higgs.knot_x3) << "\n";
  const auto& s = c.solver;
  o << "\n[solver]\ntol = " << fmt(s.tol) << "\npath_tol_factor = " << fmt(s.path_tol_factor) << "\nt_step = " << fmt(s.t_step)
    << "\nt_step_max = " << fmt(s.t_step_max) << "\nt_step_min = " << fmt(s.t_step_min) << "\nmax_newton = " << s.max_newton
    << "\narmijo = " << fmt(s.armijo) << "\nmax_backtracks = " << s.max_backtracks << "\ngmres_tol = " << fmt(s.gmres_tol)
    << "\ngmres_restart = " << s.gmres_restart << "\ngmres_max_iter = " << s.gmres_max_iter
    << "\nprecond = " << (s.precond == Preconditioner::Diagonal ? "diagonal" : "fourier-line")
    << "\nprecond_shift = " << fmt(s.precond_shift) << "\nshift_clamp = " << fmt(s.shift_clamp)
    << "\nlinearization_check_every = " << s.linearization_check_every
    << "\nmax_principle = " << (s.max_principle ? "true" : "false") << "\nfit_y_lo_factor = " << fmt(s.fit_y_lo_factor)
    << "\nfit_y_hi = " << fmt(s.fit_y_hi) << "\n";
  o << "\n[background]\ny_c = " << fmt(c.y_c) << "\nbackground_order = " << c.background_order << "\n";
  if (!c.toda_weights.empty()) {
    o << "\n[toda]\ntoda_weights = ";
    for (std::size_t i = 0; i < c.toda_weights.size(); ++i) o << (i ? ";" : "") << int_list_text(c.toda_weights[i]);
    o << "\n";
  }
  o << "\n[variational]\nperturbation = " << fmt(c.perturbation) << "\ndirections = " << c.directions
    << "\nseed = " << c.seed << "\nquad_nodes = " << c.quad_nodes << "\n";
  o << "\n[output]\nreport = " << c.report << "\ncsv = " << c.csv << "\n";
  return o.str();
}

bool operator==(const RunConfig& a, const RunConfig& b) { return serialize_config(a) == serialize_config(b); }

Grid3 make_grid(const GridSpec& g) {
  if (g.ny > 0) return Grid3::geometric(g.nx, g.nz, g.y_min, g.y_max, g.ny);
  return Grid3::per_decade(g.nx, g.nz, g.y_min, g.y_max, g.nodes_per_decade);
}

HiggsData make_higgs(const LieContext& ctx, const RunConfig& c) {
  if (c.higgs.kind == HiggsKind::KnotLocal) {
    KnotPoint kp;
    kp.weights = c.higgs.knot_weights;
    kp.x2 = c.higgs.knot_x2.value_or(0.5 / c.grid.nx);
    kp.x3 = c.higgs.knot_x3.value_or(0.5 / c.grid.nz);
    std::vector<TrigPoly> q = c.higgs.q;
    return knot_local_higgs(ctx, kp, q);
  }
  return hitchin_section_higgs(ctx, c.higgs.q);
}

}  // namespace nahmlab
