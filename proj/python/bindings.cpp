/*
 * Copyright 2026 The StackGen Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stackgen/session.hpp"

namespace py = pybind11;
using namespace stackgen;

namespace {

// JSON crosses the boundary as text; the Python package wraps it in dicts.
Json parse(const std::string& s) { return s.empty() ? Json::object() : Json::parse(s); }

std::string metrics_json(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                         const Matrix& proba, int num_classes, const std::string& config) {
  const MetricConfig cfg = metric_config_from_json(parse(config));
  const MetricVector v = compute_metrics(y_true, y_pred, proba, num_classes, cfg);
  Json raw = Json::object(), norm = Json::object();
  for (Metric m : kAllMetrics) {
    raw[std::string(metric_id(m))] = v.raw_of(m);
    norm[std::string(metric_id(m))] = v.normalized_of(m);
  }
  return Json{{"raw", raw}, {"normalized", norm}, {"score", weighted_score(v, cfg)}}.dump();
}

std::string workflow_json(const std::string& workflow, const std::string& base_dir,
                          std::optional<std::uint64_t> seed, std::optional<int> folds,
                          std::optional<std::string> grid_config, int threads) {
  WorkflowOverrides o;
  o.seed = seed;
  o.folds = folds;
  o.grid_config = grid_config;
  o.threads = threads;
  WorkflowResult r;
  {
    py::gil_scoped_release release;
    r = run_workflow(parse(workflow), base_dir, o);
  }
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"step_index", row.step_index},
                        {"label", row.label},
                        {"stack_id", row.stored_id},
                        {"parent", row.parent_id},
                        {"model_count", row.model_count},
                        {"performance", performance_to_json(row.performance)}});
  }
  Json stacks = Json::array();
  for (const auto& rec : r.session->stacks().records()) stacks.push_back(rec.to_json());
  return Json{{"rows", rows}, {"stacks", stacks}, {"table", format_workflow_table(r.rows)}}.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stacking-ensemble workbench core";

  static py::exception<Error> error_type(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      exc.attr("code") = std::string(error_code_name(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("compute_metrics", &metrics_json, py::arg("y_true"), py::arg("y_pred"), py::arg("proba"),
        py::arg("num_classes"), py::arg("config") = "");
  m.def("run_workflow", &workflow_json, py::arg("workflow"), py::arg("base_dir") = "",
        py::arg("seed") = py::none(), py::arg("folds") = py::none(),
        py::arg("grid_config") = py::none(), py::arg("threads") = 0);

  py::class_<Session>(m, "Session")
      .def(py::init([](const std::string& csv, const std::string& label_column, std::uint64_t seed,
                       int folds, const std::string& grid_config, int threads) {
             SessionOptions o;
             o.seed = seed;
             o.folds = folds;
             o.grid_config = grid_config;
             o.threads = threads;
             return Session::from_csv(csv, label_column, o);
           }),
           py::arg("csv"), py::arg("label_column") = "", py::arg("seed") = 42, py::arg("folds") = 5,
           py::arg("grid_config") = "", py::arg("threads") = 0)
      .def("dispatch",
           [](Session& s, const std::string& action, const std::string& args) {
             Json out;
             {
               py::gil_scoped_release release;
               out = s.dispatch(action, parse(args));
             }
             return out.dump();
           },
           py::arg("action"), py::arg("args") = "")
      .def("workflow", [](const Session& s) { return s.workflow().dump(); })
      .def_static("actions", &Session::actions)
      .def_static("is_mutating", &Session::is_mutating);

  py::class_<StackPredictor>(m, "StackPredictor")
      .def_static("from_json",
                  [](const std::string& doc) {
                    std::vector<std::string> warnings;
                    auto p = StackPredictor::from_json(Json::parse(doc), &warnings);
                    return py::make_tuple(std::move(p), warnings);
                  })
      .def("to_json", [](const StackPredictor& p) { return p.to_json().dump(); })
      .def("predict_proba", &StackPredictor::predict_proba)
      .def("predict", &StackPredictor::predict)
      .def_property_readonly("feature_names", &StackPredictor::feature_names)
      .def_property_readonly("class_names", &StackPredictor::class_names)
      .def_property_readonly("num_models", &StackPredictor::num_models);
}
