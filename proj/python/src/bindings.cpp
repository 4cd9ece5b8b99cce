#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pfgm/error.hpp"
#include "pfgm/likelihood.hpp"
#include "pfgm/prior.hpp"
#include "pfgm/verify.hpp"

#ifndef PFGM_VERSION
#define PFGM_VERSION "0.0.0"
#endif

namespace py = pybind11;
using namespace pfgm;

namespace {

// Rows of `queries` are augmented points (x, z).
Mat map_queries(const Mat& queries, int n, const std::function<Vec(const AugmentedPoint&)>& f) {
  if (queries.cols() != n + 1) throw DimensionError("queries need N + 1 columns");
  Mat out(queries.rows(), n + 1);
  for (Eigen::Index i = 0; i < queries.rows(); ++i)
    out.row(i) = f(AugmentedPoint::split(queries.row(i).transpose())).transpose();
  return out;
}

OdeConfig ode_config(double z_max, const std::string& solver, int steps, double tol, double gamma) {
  OdeConfig c;
  c.z_max = z_max;
  c.solver = parse_solver(solver);
  c.euler_steps = steps;
  c.rk45_atol = c.rk45_rtol = tol;
  c.gamma = gamma;
  c.record = false;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Poisson flow generative models: fields, prior, ODE sampling and likelihood";
  m.attr("__version__") = PFGM_VERSION;

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("surface_area_unit_sphere", &surface_area_unit_sphere, py::arg("n"));
  m.def("greens_potential", &greens_potential, py::arg("x"), py::arg("y"), py::arg("n"));
  m.def("greens_gradient", &greens_gradient, py::arg("x"), py::arg("y"), py::arg("n"));

  m.def(
      "generate_toy",
      [](const std::string& name, std::size_t count, std::uint64_t seed) {
        Rng rng(seed);
        return generate_toy(parse_toy_name(name), count, rng).points();
      },
      py::arg("name"), py::arg("count"), py::arg("seed") = 0, "Toy 2-D dataset as a (count, 2) array.");

  m.def(
      "empirical_field",
      [](const Mat& data, const Mat& queries) {
        const Dataset d(data);
        return map_queries(queries, d.dim(), [&](const AugmentedPoint& q) { return empirical_field(q, d); });
      },
      py::arg("data"), py::arg("queries"));

  m.def(
      "normalized_field",
      [](const Mat& data, const Mat& queries, double gamma) {
        const Dataset d(data);
        return map_queries(queries, d.dim(),
                           [&](const AugmentedPoint& q) { return normalized_field(q, d, gamma).v; });
      },
      py::arg("data"), py::arg("queries"), py::arg("gamma") = 5.0);

  m.def(
      "tree_field",
      [](const Mat& data, const Mat& queries, double theta, std::size_t leaf, int order) {
        const Dataset d(data);
        const TreeCode tree = build_tree(d, leaf, theta, order);
        return map_queries(queries, d.dim(), [&](const AugmentedPoint& q) { return tree_empirical_field(q, tree); });
      },
      py::arg("data"), py::arg("queries"), py::arg("theta") = 0.5, py::arg("leaf_capacity") = 16,
      py::arg("order") = 4, "Tree-code approximation of empirical_field.");

  m.def("rule_of_thumb_M", &rule_of_thumb_M, py::arg("mean_sq_norm"), py::arg("n"), py::arg("sigma") = 0.01,
        py::arg("tau") = 0.03);
  m.def(
      "rule_of_thumb_schedule",
      [](double msq, int n, double sigma, double tau, int M) {
        const auto s = rule_of_thumb_schedule(msq, n, sigma, tau, M);
        return py::dict(py::arg("z_max") = s.z_max, py::arg("z_min") = s.z_min, py::arg("norm_clip") = s.norm_clip);
      },
      py::arg("mean_sq_norm"), py::arg("n"), py::arg("sigma"), py::arg("tau"), py::arg("M"));

  m.def(
      "sample_prior",
      [](int n, double z_max, std::size_t count, std::uint64_t seed, std::optional<double> norm_clip) {
        Rng rng(seed);
        const PriorSpec p{z_max, n, norm_clip};
        Mat out(static_cast<Eigen::Index>(count), n);
        for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = sample_prior(p, rng).transpose();
        return out;
      },
      py::arg("n"), py::arg("z_max"), py::arg("count"), py::arg("seed") = 0, py::arg("norm_clip") = std::nullopt);

  m.def(
      "kappa", [](double q, double msq, int n) { return kappa(q, msq, n); }, py::arg("q_norm"),
      py::arg("mean_sq_norm"), py::arg("n"));

  m.def(
      "sample",
      [](const Mat& data, std::size_t count, std::uint64_t seed, double z_max, const std::string& solver, int steps,
         double tol, double gamma, std::optional<double> norm_clip) {
        const ExactFieldModel model(Dataset(data), gamma);
        Rng rng(seed);
        const auto gen = generate_samples(model, ode_config(z_max, solver, steps, tol, gamma), count, rng, norm_clip);
        return py::make_tuple(gen.samples, gen.mean_nfe, gen.failures);
      },
      py::arg("data"), py::arg("count"), py::arg("seed") = 0, py::arg("z_max") = 40.0, py::arg("solver") = "rk45",
      py::arg("steps") = 100, py::arg("tol") = 1e-4, py::arg("gamma") = 5.0, py::arg("norm_clip") = std::nullopt,
      "Backward ODE samples through the exact field of `data`. Returns (samples, mean_nfe, failures).");

  m.def(
      "log_likelihood",
      [](const Mat& data, const Mat& points, double z_max, double tol, double gamma) {
        const ExactFieldModel model(Dataset(data), gamma);
        const OdeConfig cfg = ode_config(z_max, "rk45", 100, tol, gamma);
        Vec out(points.rows());
        for (Eigen::Index i = 0; i < points.rows(); ++i)
          out[i] = log_likelihood(points.row(i).transpose(), model, cfg).log_density;
        return out;
      },
      py::arg("data"), py::arg("points"), py::arg("z_max") = 40.0, py::arg("tol") = 1e-5, py::arg("gamma") = 5.0,
      "Natural-log density of each row of `points` under the exact-field flow.");

  m.def(
      "hit_probabilities",
      [](const Mat& positions, const Vec& charges, std::size_t count, double r_start, double eps_hit,
         std::uint64_t seed) {
        Rng rng(seed);
        const auto res = hit_particles(Dataset(positions, charges), count, r_start, eps_hit, rng);
        return py::make_tuple(res.frequencies(), res.lost);
      },
      py::arg("positions"), py::arg("charges"), py::arg("count"), py::arg("r_start") = 1000.0,
      py::arg("eps_hit") = 1e-3, py::arg("seed") = 0);
}
