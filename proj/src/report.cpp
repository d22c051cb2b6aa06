#include "nahmlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace nahmlab {

using nlohmann::json;

json to_json(const LieCheck& c) {
  return {{"n", c.n},
          {"cartan_inverse_exact", c.cartan_inverse_exact},
          {"weights_match", c.weights_match},
          {"chevalley_exact", c.chevalley_exact},
          {"sl2_error", c.sl2_error},
          {"casimir_error", c.casimir_error},
          {"casimir_multiplicities", c.casimir_multiplicities},
          {"indicial_roots_match", c.indicial_roots_match},
          {"ok", c.ok()}};
}

json to_json(const NewtonRecord& r) {
  return {{"t", r.t},
          {"residual_sup", r.residual_sup},
          {"merit", r.merit},
          {"gmres_iterations", r.gmres_iterations},
          {"step_length", r.step_length},
          {"linearization_check", r.linearization_check},
          {"converged", r.converged}};
}

json to_json(const DecayFit& f) {
  json j{{"sup_weighted", f.sup_weighted}};
  j["alpha"] = f.alpha ? json(*f.alpha) : json(nullptr);
  return j;
}

json to_json(const SolverState& s) {
  json hist = json::array();
  for (const auto& r : s.history) hist.push_back(to_json(r));
  return {{"t", s.t},
          {"residual_norm", s.residual_norm},
          {"start_residual", s.start_residual},
          {"clamped_nodes", s.clamped_nodes},
          {"t_schedule", s.t_schedule},
          {"t_failed", s.t_failed},
          {"total_gmres", s.total_gmres},
          {"max_principle",
           {{"bound", s.max_principle.bound},
            {"converged_sup", s.max_principle.converged_sup},
            {"iterate_sup_max", s.max_principle.iterate_sup.empty()
                                    ? 0.0
                                    : *std::max_element(s.max_principle.iterate_sup.begin(),
                                                        s.max_principle.iterate_sup.end())},
            {"ok", s.max_principle.ok}}},
          {"decay", to_json(s.decay)},
          {"history", hist}};
}

json to_json(const Hitchin2DResult& r) {
  return {{"residual", r.residual},
          {"det_defect", r.det_defect},
          {"dbar_residual", r.dbar_residual},
          {"history", to_json(r.history)}};
}

json to_json(const FunctionalReport& r) {
  json sv = json::array();
  for (const auto& v : r.second_variation)
    sv.push_back({{"direct", v.direct},
                  {"sum_of_squares", v.sum_of_squares},
                  {"boundary", v.boundary},
                  {"eps_quad", v.eps_quad}});
  return {{"value", r.value},
          {"u_nodes", r.u_nodes},
          {"u_weights", r.u_weights},
          {"t_samples", r.t_samples},
          {"first_variation", r.first_variation},
          {"second_variation", sv},
          {"eps_quad", r.eps_quad}};
}

void write_slice_csv(const std::filesystem::path& path, const Grid3& g, const MatField& H, const MatField& s,
                     const MatField& omega) {
  if (H.nodes() != g.nodes()) throw DomainError("write_slice_csv: grid/field mismatch");
  std::ofstream out(path);
  if (!out) throw DomainError("cannot open " + path.string() + " for writing");
  const int N = H.dim();
  out << "ix,iy,x2,x3,y";
  for (int a = 1; a <= N; ++a)
    for (int b = 1; b <= N; ++b) out << ",h" << a << b << "_re,h" << a << b << "_im";
  out << ",s_norm,omega_y2\n";
  out << std::setprecision(12);
  for (int iy = 0; iy < g.ny(); ++iy)
    for (int ix = 0; ix < g.nx(); ++ix) {
      const std::size_t i = g.index(ix, 0, iy);
      const Mat h = H.at(i);
      out << ix << ',' << iy << ',' << g.x2(i) << ',' << g.x3(i) << ',' << g.y_at(i);
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) out << ',' << h(a, b).real() << ',' << h(a, b).imag();
      const double sn = s.nodes() == g.nodes() ? s.at(i).norm() : 0.0;
      const double y = g.is2d() ? 1.0 : g.y_at(i);
      const double om = omega.nodes() == g.nodes() ? y * y * omega.at(i).norm() : 0.0;
      out << ',' << sn << ',' << om << '\n';
    }
}

void write_toda_csv(const std::filesystem::path& path, const std::vector<TodaProfile>& profiles) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot open " + path.string() + " for writing");
  const int n = profiles.empty() ? 0 : profiles.front().n();
  out << "case,weights,sigma";
  for (int i = 1; i <= n; ++i) out << ",q" << i;
  out << ",residual\n";
  out << std::setprecision(15);
  for (std::size_t c = 0; c < profiles.size(); ++c) {
    const TodaProfile& p = profiles[c];
    std::string w;
    for (int r : p.weights()) w += (w.empty() ? "" : " ") + std::to_string(r);
    for (std::size_t k = 0; k < p.sigma_nodes.size(); ++k) {
      out << c << ',' << w << ',' << p.sigma_nodes[k];
      double res = 0.0;
      for (int i = 0; i < n; ++i) {
        out << ',' << p.q_nodes[k][i];
        res = std::max(res, std::abs(p.residual_nodes[k][i]));
      }
      out << ',' << res << '\n';
    }
  }
}

json failure_record(const std::string& kind, const std::string& message, const std::vector<double>& history) {
  return {{"status", "failed"}, {"error_kind", kind}, {"message", message}, {"residual_history", history}};
}

}  // namespace nahmlab
