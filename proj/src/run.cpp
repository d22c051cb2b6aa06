#include <chrono>
#include <fstream>
#include <random>

#include "nahmlab/report.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nahmlab {

using nlohmann::json;

namespace {

// Standard Toda suite per rank when the config gives none.
std::vector<std::vector<int>> toda_suite(const RunConfig& c) {
  if (!c.toda_weights.empty()) return c.toda_weights;
  if (c.n == 1) return {{0}, {1}, {2}, {3}};
  if (c.n == 2) return {{0, 0}, {1, 1}, {1, 2}};
  return {std::vector<int>(c.n, 0)};
}

bool run_verify_lie(const RunConfig& c, json& rep) {
  bool ok = true;
  json ranks = json::array();
  for (int n = 1; n <= c.n; ++n) {
    const LieCheck chk = verify_lie_context(build_lie_context(n));
    ranks.push_back(to_json(chk));
    ok = ok && chk.ok();
  }
  rep["lie"] = ranks;
  return ok;
}

bool run_verify_toda(const RunConfig& c, json& rep, const std::filesystem::path& dir) {
  const LieContext ctx = build_lie_context(c.n);
  std::vector<TodaProfile> tables;
  bool ok = true;
  double worst = 0.0;
  json cases = json::array();
  for (const auto& w : toda_suite(c)) {
    const TodaProfile numeric = toda_bvp_solve(ctx, w, toda_default_grid());
    json item{{"weights", w}, {"bvp_residual", toda_residual(numeric, 0.1, 10.0)}};
    if (c.n <= 2) {
      const TodaProfile closed = c.n == 1 ? sl2_knot_profile(ctx, w[0]) : sl3_knot_profile(ctx, w[0] + 1, w[1] + 1);
      const double fd = toda_residual(closed, 0.1, 10.0);
      const double bd = toda_boundary_defect(closed, 1e-3);
      const double dist = toda_profile_distance(numeric, closed, 1e-3, 12.0);
      item["closed_form_fd_residual"] = fd;
      item["boundary_defect"] = bd;
      item["bvp_vs_closed_form"] = dist;
      worst = std::max(worst, dist);
      ok = ok && fd < 1e-8 && bd < 5e-2 && dist < 1e-4;
    }
    cases.push_back(item);
    tables.push_back(numeric);
  }
  write_toda_csv(dir / c.csv, tables);
  rep["toda"] = {{"cases", cases}, {"max_bvp_vs_closed_form", worst}};
  return ok;
}

TodaProfile model_profile(const LieContext& ctx) {
  if (ctx.n == 1) return sl2_knot_profile(ctx, 1);
  if (ctx.n == 2) return sl3_knot_profile(ctx, 2, 2);
  return toda_bvp_solve(ctx, std::vector<int>(ctx.n, 1), toda_default_grid());
}

bool run_verify_models(const RunConfig& c, json& rep) {
  const LieContext ctx = build_lie_context(c.n);
  const OrderStudy st = nahm_residual_order(ctx, {32, 64, 128, 256});
  const TodaProfile prof = model_profile(ctx);
  std::vector<KnotChart> ball;
  for (double R : {0.05, 0.2, 0.5, 0.9})
    for (double psi : {0.1, 0.5, 1.0, 1.5}) ball.push_back(KnotChart::from_polar(R, psi));
  const LambdaRatioReport lr = lambda_ratio_bound(ctx, prof, ball);
  double det_defect = 0.0;
  bool positive = true;
  for (const auto& ch : ball) {
    const Mat h = knot_model_metric(ctx, prof, ch);
    det_defect = std::max(det_defect, std::abs(h.determinant() - 1.0));
    for (int a = 0; a < h.rows(); ++a) positive = positive && h(a, a).real() > 0.0;
  }
  rep["models"] = {{"nahm_order", {{"intervals", st.intervals}, {"error", st.error}, {"order", st.order}}},
                   {"lambda_ratio",
                    {{"sup", lr.sup},
                     {"at_small_R", lr.at_small_R},
                     {"at_small_psi", lr.at_small_psi},
                     {"along_R", lr.along_R},
                     {"along_psi", lr.along_psi},
                     {"limits_ok", lr.limits_ok}}},
                   {"knot_model_det_defect", det_defect},
                   {"knot_model_positive", positive}};
  return std::abs(st.order - 2.0) <= 0.3 && lr.limits_ok && lr.at_small_R < 1e-3 && lr.at_small_psi < 1e-3 &&
         det_defect < 1e-10 && positive;
}

bool has_differentials(const HiggsData& h) {
  for (const auto& q : h.q)
    for (const auto& t : q)
      if (t.coef != cplx(0.0)) return true;
  return false;
}

struct Solved {
  Grid3 grid;
  MatField phi;
  BackgroundMetric background;
  SolverState state;
};

BackgroundMetric background_for(const LieContext& ctx, const HiggsData& hd, const RunConfig& c, const Grid3& g,
                                json& rep) {
  std::optional<Hitchin2DResult> far;
  if (hd.kind == HiggsKind::HitchinSection && has_differentials(hd)) {
    far = hitchin2d_solve(ctx, hd, Grid3::slice2d(g.nx(), g.nz()), c.solver);
    rep["far_field"] = to_json(*far);
  }
  return build_background(ctx, hd, far ? &far->H : nullptr, g, {c.y_c, c.background_order});
}

Solved solve_configured(const RunConfig& c, json& rep) {
  const LieContext ctx = build_lie_context(c.n);
  const HiggsData hd = make_higgs(ctx, c);
  Solved out{make_grid(c.grid), {}, {}, {}};
  out.phi = phi_field(hd, out.grid);
  if (c.mode == RunMode::KnotSolve) {
    out.background = build_background(ctx, hd, nullptr, out.grid, {c.y_c, 0});
    out.state = knot_solve(ctx, hd, out.grid, c.solver);
  } else {
    out.background = background_for(ctx, hd, c, out.grid, rep);
    out.state = continuity_solve(out.phi, out.background, out.grid, c.solver);
  }
  rep["grid"] = {{"nx", out.grid.nx()}, {"nz", out.grid.nz()}, {"ny", out.grid.ny()},
                 {"y_min", out.grid.y_min()}, {"y_max", out.grid.y_max()}, {"nodes_per_decade", out.grid.nodes_per_decade()}};
  rep["solve"] = to_json(out.state);
  return out;
}

bool run_hitchin2d(const RunConfig& c, json& rep, const std::filesystem::path& dir) {
  const LieContext ctx = build_lie_context(c.n);
  const HiggsData hd = make_higgs(ctx, c);
  const Grid3 g = Grid3::slice2d(c.grid.nx, c.grid.nz);
  const Hitchin2DResult r = hitchin2d_solve(ctx, hd, g, c.solver, c.solver.tol);
  rep["hitchin2d"] = to_json(r);
  const MatField pf = phi_field(hd, g);
  write_slice_csv(dir / c.csv, g, r.H, {}, omega_residual(r.H, pf, g).omega);
  return r.residual <= c.solver.tol;
}

bool run_solve(const RunConfig& c, json& rep, const std::filesystem::path& dir) {
  const Solved s = solve_configured(c, rep);
  const ResidualField res = omega_residual(s.state.H, s.phi, s.grid);
  write_slice_csv(dir / c.csv, s.grid, s.state.H, s.state.s, res.omega);
  return s.state.residual_norm <= c.solver.tol;
}

bool run_donaldson(const RunConfig& c, json& rep, const std::filesystem::path& dir) {
  const Solved s = solve_configured(c, rep);
  const FunctionalReport fr = donaldson_value(s.state.H, s.background.H, s.phi, s.grid, {0.0, 0.25, 0.5, 0.75, 1.0},
                                              c.quad_nodes);
  json j = to_json(fr);
  std::mt19937_64 rng(c.seed);
  double min_margin = 1e300;  // min over directions of m'' + eps_quad
  double min_direct = 1e300;
  for (int d = 0; d < c.directions; ++d) {
    const MatField dir_s = random_direction(s.background.frame, s.grid, rng, c.perturbation);
    const SecondVariation sv = second_variation(s.background.H, dir_s, s.phi, s.grid, 0.5);
    min_margin = std::min(min_margin, sv.direct + sv.eps_quad);
    min_direct = std::min(min_direct, sv.direct);
  }
  j["random_directions"] = {{"count", c.directions}, {"min_second_variation", min_direct},
                            {"min_margin", min_margin}};
  rep["donaldson"] = j;
  write_slice_csv(dir / c.csv, s.grid, s.state.H, s.state.s, omega_residual(s.state.H, s.phi, s.grid).omega);
  bool ok = min_margin >= 0.0;
  for (const auto& v : fr.second_variation) ok = ok && v.direct >= -v.eps_quad;
  return ok && s.state.residual_norm <= c.solver.tol;
}

bool run_uniqueness(const RunConfig& c, json& rep, const std::filesystem::path& dir) {
  const LieContext ctx = build_lie_context(c.n);
  const HiggsData hd = make_higgs(ctx, c);
  const Grid3 g = make_grid(c.grid);
  const MatField pf = phi_field(hd, g);
  const BackgroundMetric b1 = background_for(ctx, hd, c, g, rep);
  const BackgroundMetric b2 = perturb_background(b1, compact_perturbation(b1.frame, g, c.perturbation));
  const UniquenessReport u = uniqueness_test(pf, b1, b2, g, c.solver);
  rep["uniqueness"] = {{"distance", u.distance}, {"first", to_json(u.first)}, {"second", to_json(u.second)}};
  write_slice_csv(dir / c.csv, g, u.first.H, u.first.s, omega_residual(u.first.H, pf, g).omega);
  return u.distance <= 1e-5;
}

}  // namespace

RunOutcome run(const RunConfig& c, const std::filesystem::path& out_dir, int workers) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, workers));
#endif
  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome out;
  json& rep = out.report;
  rep["schema"] = kReportSchema;
  rep["mode"] = to_string(c.mode);
  rep["workers"] = workers;
  rep["config"] = serialize_config(c);
  try {
    std::filesystem::create_directories(out_dir);
    bool ok = false;
    switch (c.mode) {
      case RunMode::VerifyLie: ok = run_verify_lie(c, rep); break;
      case RunMode::VerifyToda: ok = run_verify_toda(c, rep, out_dir); break;
      case RunMode::VerifyModels: ok = run_verify_models(c, rep); break;
      case RunMode::Hitchin2D: ok = run_hitchin2d(c, rep, out_dir); break;
      case RunMode::Solve:
      case RunMode::KnotSolve: ok = run_solve(c, rep, out_dir); break;
      case RunMode::Donaldson: ok = run_donaldson(c, rep, out_dir); break;
      case RunMode::Uniqueness: ok = run_uniqueness(c, rep, out_dir); break;
    }
    rep["status"] = ok ? "ok" : "contract-failed";
    out.exit_code = ok ? 0 : 1;
  } catch (const SolverError& e) {
    rep["failure"] = failure_record("solver", e.what(), e.history());
    rep["status"] = "failed";
    out.exit_code = 3;
  } catch (const DomainError& e) {
    rep["failure"] = failure_record("domain", e.what());
    rep["status"] = "failed";
    out.exit_code = 2;
  } catch (const ConsistencyError& e) {
    rep["failure"] = failure_record("consistency", e.what());
    rep["status"] = "failed";
    out.exit_code = 3;
  } catch (const InconclusiveError& e) {
    rep["failure"] = failure_record("inconclusive", e.what());
    rep["status"] = "failed";
    out.exit_code = 3;
  }
  rep["timing"] = {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  try {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir / c.report);
    f << rep.dump(2) << '\n';
  } catch (const std::exception&) {
    // The report is still returned to the caller.
  }
  return out;
}

}  // namespace nahmlab
