#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rcbsde/bsde.hpp"
#include "rcbsde/model.hpp"
#include "rcbsde/reference.hpp"

namespace py = pybind11;
using namespace rcbsde;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Penalized-BSDE solver for HJB equations with controlled jump intensity";

    py::class_<ControlledModel>(m, "Model")
        .def_property_readonly("name", [](const ControlledModel& mm) { return mm.name; })
        .def_property_readonly("horizon", [](const ControlledModel& mm) { return mm.horizon; })
        .def_property_readonly("dim_x", [](const ControlledModel& mm) { return mm.dim_x; })
        .def_property_readonly("dim_a", [](const ControlledModel& mm) { return mm.dim_a; })
        .def("__repr__",
             [](const ControlledModel& mm) { return "<rcbsde.Model '" + mm.name + "'>"; });

    m.def("make_benchmark", &make_benchmark, py::arg("name"),
          "Built-in benchmark models: uvm, nondominated-jump, trivial-drift");

    m.def("radial_profile", &radial_profile, py::arg("rho"));
    m.def(
        "surjection",
        [](double a, double center, double radius) {
            return surjection_h1(a, ControlSet{{center}, radius});
        },
        py::arg("a"), py::arg("center"), py::arg("radius"),
        "Map a real control coordinate onto the closed ball [center-radius, center+radius]");

    m.def(
        "value_at",
        [](const ControlledModel& model, double t, const std::vector<double>& x, int steps,
           long n_paths, double penalty, int probes, uint64_t seed, int workers, double smoothing,
           bool debias) {
            TimeGrid grid{t, model.horizon, steps};
            BasisSpec basis{BasisKind::cellpoly};
            SolverOptions opts;
            opts.workers = workers;
            opts.smoothing = smoothing;
            opts.debias = debias;
            const ValueEstimate est = rcbsde::value_at(model, t, x, grid, int(n_paths), basis,
                                                       penalty, probes, seed, opts);
            py::dict d;
            d["value"] = est.value;
            d["std_error"] = est.stderr_value;
            d["a_spread"] = est.a_spread;
            return d;
        },
        py::arg("model"), py::arg("t"), py::arg("x"), py::arg("steps"), py::arg("n_paths"),
        py::arg("penalty"), py::arg("probes") = 5, py::arg("seed") = 1, py::arg("workers") = 1,
        py::arg("smoothing") = 2.0, py::arg("debias") = true,
        "Penalized-BSDE estimate of the value function at (t, x)");

    m.def(
        "penalty_sweep",
        [](const ControlledModel& model, double t, const std::vector<double>& x, int steps,
           long n_paths, const std::vector<double>& penalties, int probes, uint64_t seed,
           int workers) {
            TimeGrid grid{t, model.horizon, steps};
            BasisSpec basis{BasisKind::cellpoly};
            SolverOptions opts;
            opts.workers = workers;
            const PenaltySweepReport rep = rcbsde::penalty_sweep(
                model, t, x, grid, int(n_paths), basis, penalties, probes, seed, opts);
            py::dict d;
            d["penalties"] = rep.penalties;
            d["values"] = rep.values;
            d["stderr"] = rep.stderrs;
            d["constraint_norms"] = rep.constraint_norms;
            d["a_spreads"] = rep.a_spreads;
            d["monotone_flags"] = rep.monotone_flags;
            return d;
        },
        py::arg("model"), py::arg("t"), py::arg("x"), py::arg("steps"), py::arg("n_paths"),
        py::arg("penalties"), py::arg("probes") = 5, py::arg("seed") = 1, py::arg("workers") = 1,
        "Solve across an increasing penalty schedule on a shared ensemble");

    m.def(
        "solve_fd",
        [](const ControlledModel& model, double x_min, double x_max, int nodes, int time_steps,
           int control_nodes) {
            FdGrid g;
            g.x_min = x_min;
            g.x_max = x_max;
            g.nodes = nodes;
            g.time_steps = time_steps;
            g.control_nodes = control_nodes;
            const FdSolution sol = solve_hjb_fd(model, g);
            py::dict d;
            d["x"] = sol.x;
            d["values"] = sol.values;
            d["terminal"] = sol.terminal;
            d["time_steps"] = sol.time_steps;
            return d;
        },
        py::arg("model"), py::arg("x_min"), py::arg("x_max"), py::arg("nodes") = 401,
        py::arg("time_steps") = 0, py::arg("control_nodes") = 11,
        "Monotone finite-difference reference solution on [x_min, x_max]");

    m.def("bs_closed_form", &bs_closed_form, py::arg("spot"), py::arg("strike"),
          py::arg("maturity"), py::arg("vol"));

    m.def(
        "poisson_series_value",
        [](double x, double jump_size, double rate, double horizon, const py::function& g,
           int terms) {
            return poisson_series_value(
                x, jump_size, rate, horizon,
                [&](double y) { return g(y).cast<double>(); }, terms);
        },
        py::arg("x"), py::arg("jump_size"), py::arg("rate"), py::arg("horizon"), py::arg("g"),
        py::arg("terms") = 64,
        "Expectation of g(x + jump_size * (N - rate*horizon)) under a Poisson count N");
}
