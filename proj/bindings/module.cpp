#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "relfeat/pipeline.hpp"
#include "relfeat/r2n/theory.hpp"

namespace py = pybind11;
using namespace relfeat;

namespace {

struct Session {
    Schema schema;
    Database db;
    RelationalGraph graph;
};

std::shared_ptr<Session> open_database(const std::string& config_path) {
    auto session = std::make_shared<Session>();
    session->schema = parse_schema_file(config_path);
    session->db = load_database(session->schema);
    session->graph = build_graph(session->db);
    return session;
}

std::vector<JoiningPath> paths_for(Session& session,
                                   const std::string& strategy_name,
                                   int max_depth) {
    auto strategy = strategy_from_string(strategy_name);
    if (!strategy) throw std::invalid_argument("unknown strategy " + strategy_name);
    return enumerate_paths(session.db, session.graph, *strategy, max_depth);
}

py::dict matrix_to_dict(const FeatureMatrix& matrix) {
    py::dict out;
    py::list columns;
    for (const auto& col : matrix.columns) {
        py::dict c;
        c["name"] = col.name;
        c["path"] = col.path;
        c["transform"] = col.transform;
        py::list values;
        for (double v : col.values) {
            if (is_feature_null(v)) values.append(py::none());
            else values.append(v);
        }
        c["values"] = values;
        columns.append(c);
    }
    out["columns"] = columns;
    out["example_ids"] = matrix.example_ids;
    out["target"] = matrix.target.labels;
    out["task"] = matrix.target.task == Task::Regression ? "regression"
                                                         : "classification";
    return out;
}

py::dict features_dict(Session& session, const std::string& strategy,
                       int max_depth, const std::string& rules, int threads) {
    auto paths = paths_for(session, strategy, max_depth);
    FeatureGenOptions options;
    options.rules = rules;
    options.threads = threads;
    FeatureMatrix matrix = generate_features(session.db, session.graph, paths, options);
    return matrix_to_dict(matrix);
}

RunOptions build_options(const std::string& config_path, const std::string& out_dir,
                         py::object seed, int threads, bool desk_scale) {
    RunOptions options;
    options.config_path = config_path;
    options.out_dir = out_dir;
    if (!seed.is_none()) options.seed = seed.cast<uint64_t>();
    options.threads = threads;
    options.desk_scale = desk_scale;
    return options;
}

py::dict manifest_dict(const RunManifest& manifest) {
    py::dict out;
    out["seed"] = manifest.seed;
    out["path_count"] = manifest.path_count;
    out["features_before_selection"] = manifest.features_before;
    out["features_after_selection"] = manifest.features_after;
    out["outputs"] = manifest.outputs;
    return out;
}

DimensionKind kind_from(const std::string& name) {
    if (name == "real") return DimensionKind::Real;
    if (name == "integer") return DimensionKind::Integer;
    if (name == "log_real") return DimensionKind::LogReal;
    throw std::invalid_argument("unknown dimension kind " + name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "automated feature engineering from relational databases";
    m.attr("__version__") = "0.1.0";

    py::class_<Session, std::shared_ptr<Session>>(m, "Database")
        .def_property_readonly("tables",
                               [](const Session& s) {
                                   std::vector<std::string> names;
                                   for (const auto& t : s.db.tables)
                                       names.push_back(t.name);
                                   return names;
                               })
        .def_property_readonly("example_count",
                               [](const Session& s) { return s.db.example_count(); })
        .def("__repr__", [](const Session& s) {
            return "<relfeat.Database tables=" + std::to_string(s.db.tables.size()) +
                   " examples=" + std::to_string(s.db.example_count()) + ">";
        });

    m.def("load_database", &open_database, py::arg("config_path"),
          "Parse a schema config and load its CSV tables.");

    m.def(
        "enumerate_paths",
        [](Session& session, const std::string& strategy, int max_depth) {
            std::vector<std::string> out;
            for (const auto& p : paths_for(session, strategy, max_depth))
                out.push_back(p.canon);
            return out;
        },
        py::arg("db"), py::arg("strategy") = "forward_only", py::arg("max_depth") = 3,
        "Canonical joining-path strings under a traversal strategy.");

    m.def("generate_features", &features_dict, py::arg("db"),
          py::arg("strategy") = "forward_only", py::arg("max_depth") = 3,
          py::arg("rules") = "onebm", py::arg("threads") = 1,
          "Rule-table feature matrix as a dict of named columns.");

    m.def(
        "run_features",
        [](const std::string& config_path, const std::string& out_dir,
           py::object seed, int threads) {
            FeaturesResult result =
                run_features(build_options(config_path, out_dir, seed, threads, false));
            py::dict out = manifest_dict(result.manifest);
            out["kept_columns"] = result.report.kept();
            return out;
        },
        py::arg("config_path"), py::arg("out_dir"), py::arg("seed") = py::none(),
        py::arg("threads") = 1,
        "Full ingest-to-selection pipeline; writes features.csv and friends.");

    m.def(
        "train_onebm",
        [](const std::string& config_path, const std::string& out_dir,
           bool tune_learner, int iterations, py::object seed) {
            RunOptions options =
                build_options(config_path, out_dir, seed, 1, false);
            options.tune_iterations = iterations;
            TrainOnebmResult result = run_train_onebm(options, tune_learner);
            py::dict out;
            out["holdout_loss"] = result.holdout_loss;
            out["holdout_auc"] = result.holdout_auc;
            out["features_after_selection"] =
                result.features.manifest.features_after;
            return out;
        },
        py::arg("config_path"), py::arg("out_dir"), py::arg("tune") = false,
        py::arg("iterations") = 50, py::arg("seed") = py::none(),
        "Feature pipeline plus the built-in linear learner.");

    m.def(
        "train_r2n",
        [](const std::string& config_path, const std::string& out_dir,
           bool desk_scale, py::object seed) {
            TrainR2nResult result =
                run_train_r2n(build_options(config_path, out_dir, seed, 1, desk_scale));
            py::dict out;
            out["checkpoint"] = result.checkpoint_path;
            out["steps"] = result.report.steps;
            out["epochs"] = result.report.epochs;
            out["best_val_loss"] = result.report.best_val_loss;
            return out;
        },
        py::arg("config_path"), py::arg("out_dir"), py::arg("desk_scale") = true,
        py::arg("seed") = py::none(),
        "Train the relational recurrent network and write its checkpoint.");

    m.def(
        "tune",
        [](const std::function<double(std::vector<double>)>& objective,
           const std::vector<std::tuple<std::string, std::string, double, double>>&
               dimensions,
           int iterations, uint64_t seed) {
            SearchSpace space;
            for (const auto& [name, kind, lo, hi] : dimensions)
                space.dimensions.push_back({name, kind_from(kind), lo, hi});
            TuneOptions options;
            options.iterations = iterations;
            options.seed = seed;
            TuneResult result = tune(
                [&](const std::vector<double>& c) { return objective(c); }, space,
                options);
            py::dict out;
            out["best_config"] = result.best_config;
            out["best_loss"] = result.best_loss;
            py::list history;
            for (const auto& step : result.history) {
                py::dict h;
                h["iteration"] = step.iteration;
                h["config"] = step.config;
                h["loss"] = step.loss;
                h["best_so_far"] = step.best_so_far;
                history.append(h);
            }
            out["history"] = history;
            return out;
        },
        py::arg("objective"), py::arg("dimensions"), py::arg("iterations") = 50,
        py::arg("seed") = 42,
        "Bayesian optimization of a black-box objective over a search space.");

    m.def(
        "verify_theory",
        [](uint64_t seed) {
            TheoryReport report = run_verify_theory(seed);
            py::list rows;
            for (const auto& row : report.rows)
                rows.append(py::make_tuple(row.name, row.pass));
            return rows;
        },
        py::arg("seed") = 42,
        "Expressiveness-theorem checks plus the reduction property suite.");

    m.def(
        "check_set_invariance",
        [](double w, double h, double u, double b, double c, double h0, int trials,
           uint64_t seed) {
            auto spec = r2n::LinearRnnSpec::scalar(w, h, u, b, c, h0);
            auto report = r2n::check_set_invariance(spec, trials, seed);
            py::dict out;
            out["certified_invariant"] = report.certified_invariant;
            if (report.counterexample) {
                py::dict ce;
                ce["x0"] = report.counterexample->x0;
                ce["x1"] = report.counterexample->x1;
                ce["delta"] = report.counterexample->delta;
                ce["identity_value"] = report.counterexample->identity_value;
                out["counterexample"] = ce;
            }
            return out;
        },
        py::arg("w"), py::arg("h"), py::arg("u"), py::arg("b") = 0.0,
        py::arg("c") = 0.0, py::arg("h0") = 0.0, py::arg("trials") = 10000,
        py::arg("seed") = 42,
        "Permutation-invariance check of a scalar linear RNN.");

    m.def(
        "linear_rnn_closed_form",
        [](double w, double u, double b, double c, double h0,
           const std::vector<double>& values) {
            auto spec = r2n::LinearRnnSpec::scalar(w, 1.0, u, b, c, h0);
            std::vector<std::vector<double>> set;
            for (double v : values) set.push_back({v});
            return r2n::linear_rnn_closed_form(spec, set)[0];
        },
        py::arg("w"), py::arg("u"), py::arg("b"), py::arg("c"), py::arg("h0"),
        py::arg("values"),
        "Closed-form set evaluation of an H = 1 linear RNN.");
}
