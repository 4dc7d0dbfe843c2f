// Python bindings: the file-level pipeline operations plus the small pure
// functions that are useful as oracles from notebooks (AUC, the learning-rate
// schedule, the generator's hazard). Configuration arrives as a plain dict
// whose entries override the same keys the CLI accepts; precedence matches
// the CLI with the dict playing the role of command-line flags
// (defaults < preset < DAS_* environment < dict).

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "das/error.hpp"
#include "das/eval.hpp"
#include "das/optim.hpp"
#include "das/pipeline.hpp"
#include "das/runconfig.hpp"
#include "das/synthgen.hpp"

namespace py = pybind11;
using namespace das;

namespace {

// Turns {"d_model": 64, "preset": "desk"} into the key=value pairs the
// config resolver consumes, validating keys and values centrally.
cli::KeyValues dict_to_kv(const py::dict& config) {
  cli::KeyValues kv;
  for (auto item : config) {
    const std::string key = py::str(item.first).cast<std::string>();
    std::string value;
    if (py::isinstance<py::bool_>(item.second)) {
      value = item.second.cast<bool>() ? "1" : "0";
    } else {
      value = py::str(item.second).cast<std::string>();
    }
    kv.emplace_back(key, value);
  }
  return kv;
}

cli::RunConfig resolve(const py::dict& config) {
  return cli::resolve_config({}, cli::env_overrides(), dict_to_kv(config));
}

py::list epochs_to_list(const std::vector<train::EpochLog>& epochs) {
  py::list out;
  for (const auto& e : epochs) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["train_loss"] = e.train_loss;
    d["val_auc"] = e.val_auc;
    d["lr"] = e.lr;
    out.append(d);
  }
  return out;
}

py::dict report_to_dict(const eval::EvalReport& r) {
  py::dict d;
  d["auc"] = r.auc;
  if (r.macro_auc) {
    d["macro_auc"] = *r.macro_auc;
  } else {
    d["macro_auc"] = py::none();
  }
  d["interactions"] = r.interactions;
  d["positives"] = r.positives;
  d["negatives"] = r.negatives;
  d["users"] = r.users;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Session-dropout prediction toolkit: sessionizes activity logs and "
      "trains a masked encoder-decoder to score, per interaction, the "
      "probability that the student ends the study session.";

  static py::exception<Error> exc(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(category_name(e.category())) + ": " + e.what();
      PyErr_SetString(exc.ptr(), msg.c_str());
    }
  });

  m.def(
      "effective_config",
      [](const py::dict& config) {
        py::dict out;
        std::istringstream rendered(cli::render_config(resolve(config)));
        for (const auto& [key, value] : cli::parse_config_text(rendered)) {
          out[py::str(key)] = value;
        }
        return out;
      },
      py::arg("config") = py::dict(),
      "Resolved configuration (all keys, as strings) after presets, "
      "environment overrides, and the given entries are applied.");

  m.def(
      "noam_lr",
      [](int64_t step, int64_t d_model, int64_t warmup_steps) {
        return train::noam_lr(step, d_model, warmup_steps);
      },
      py::arg("step"), py::arg("d_model"), py::arg("warmup_steps"),
      "Learning rate at `step`: d_model^-0.5 * min(step^-0.5, step * warmup_steps^-1.5).");

  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return eval::auc(scores, labels);
      },
      py::arg("scores"), py::arg("labels"),
      "Exact tie-aware area under the ROC curve (average-rank Mann-Whitney).");

  m.def(
      "hazard_probability",
      [](double prev_elapsed_secs, int32_t session_position, int prev_correct, double base,
         double w_elapsed, double w_position, double w_correct) {
        data::HazardSpec spec{base, w_elapsed, w_position, w_correct};
        return data::hazard_probability(spec, prev_elapsed_secs, session_position, prev_correct);
      },
      py::arg("prev_elapsed_secs"), py::arg("session_position"), py::arg("prev_correct"),
      py::arg("base") = data::HazardSpec{}.base_log_odds,
      py::arg("w_elapsed") = data::HazardSpec{}.w_elapsed,
      py::arg("w_position") = data::HazardSpec{}.w_position,
      py::arg("w_correct") = data::HazardSpec{}.w_correct,
      "Probability that the synthetic generator ends the session after this "
      "interaction (logistic in capped elapsed time, session position, and "
      "previous correctness, clamped to [0.01, 0.99]).");

  m.def(
      "run_synth",
      [](const py::dict& config) {
        auto s = pipeline::run_synth(resolve(config));
        py::dict d;
        d["users"] = s.users;
        d["interactions"] = s.interactions;
        d["sessions"] = s.sessions;
        d["log_path"] = s.log_path;
        d["truth_path"] = s.truth_path;
        return d;
      },
      py::arg("config") = py::dict(),
      "Generates a synthetic activity log plus its ground-truth sidecar "
      "under config['out_dir'].");

  m.def(
      "run_sessionize",
      [](const std::string& input, const py::dict& config) {
        auto s = pipeline::run_sessionize(resolve(config), input);
        py::dict d;
        d["user_count"] = s.stats.user_count;
        d["interaction_count"] = s.stats.interaction_count;
        d["session_count"] = s.stats.session_count;
        d["sessions_per_user"] = s.stats.sessions_per_user;
        d["questions_per_session"] = s.stats.questions_per_session;
        d["dropout_fraction"] = s.stats.dropout_fraction;
        d["mean_session_minutes"] = s.stats.mean_session_minutes;
        d["rejected_rows"] = s.rejected_rows;
        d["sessions_path"] = s.sessions_path;
        d["stats_path"] = s.stats_path;
        d["histogram_path"] = s.histogram_path;
        return d;
      },
      py::arg("input"), py::arg("config") = py::dict(),
      "Splits an activity log into study sessions at the inactivity "
      "threshold and writes annotated rows, summary statistics, and the "
      "gap histogram.");

  m.def(
      "run_train",
      [](const std::string& input, const py::dict& config) {
        auto s = pipeline::run_train(resolve(config), input);
        py::dict d;
        d["epochs"] = epochs_to_list(s.epochs);
        d["best_epoch"] = s.best_epoch;
        d["best_val_auc"] = s.best_val_auc;
        d["diverged"] = s.diverged;
        d["train_users"] = s.train_users;
        d["val_users"] = s.val_users;
        d["test_users"] = s.test_users;
        d["train_windows"] = s.train_windows;
        d["val_windows"] = s.val_windows;
        d["checkpoint_path"] = s.checkpoint_path;
        d["metrics_path"] = s.metrics_path;
        d["partition_path"] = s.partition_path;
        d["vocab_path"] = s.vocab_path;
        d["limits_path"] = s.limits_path;
        return d;
      },
      py::arg("input"), py::arg("config") = py::dict(),
      "Full training run: sessionize, 7:1:2 user split, train with "
      "best-validation retention, and write the checkpoint with its "
      "vocabulary/limits companions.");

  m.def(
      "run_evaluate",
      [](const std::string& input, const std::string& checkpoint, const py::dict& config,
         const std::string& partition, const std::string& split) {
        auto s = pipeline::run_evaluate(resolve(config), checkpoint, input, partition, split);
        py::dict d = report_to_dict(s.report);
        d["report_path"] = s.report_path;
        return d;
      },
      py::arg("input"), py::arg("checkpoint"), py::arg("config") = py::dict(),
      py::arg("partition") = std::string(), py::arg("split") = std::string(),
      "Scores a log with a trained checkpoint and reports pooled (and "
      "per-user macro) AUC; restrict to one split by passing a partition "
      "file and split name.");

  m.def(
      "run_predict",
      [](const std::string& input, const std::string& checkpoint, const py::dict& config) {
        auto s = pipeline::run_predict(resolve(config), checkpoint, input);
        py::list rows;
        for (const auto& p : s.predictions) {
          py::dict r;
          r["user_id"] = p.user_id;
          r["index"] = p.index;
          r["probability"] = p.probability;
          rows.append(r);
        }
        py::dict d;
        d["predictions"] = rows;
        d["predictions_path"] = s.predictions_path;
        return d;
      },
      py::arg("input"), py::arg("checkpoint"), py::arg("config") = py::dict(),
      "End-of-session probability for every interaction of every user in "
      "the log.");

  m.def(
      "run_ablate",
      [](const std::string& input, const std::string& grid, const py::dict& config) {
        auto s = pipeline::run_ablate(resolve(config), input, grid);
        py::list rows;
        for (const auto& r : s.results) {
          py::dict row;
          row["name"] = r.name;
          row["seq_size"] = r.seq_size;
          row["test_auc"] = r.test_auc;
          row["best_val_auc"] = r.best_val_auc;
          row["epochs"] = epochs_to_list(r.epochs);
          rows.append(row);
        }
        py::dict d;
        d["results"] = rows;
        d["table_path"] = s.table_path;
        d["curves_path"] = s.curves_path;
        return d;
      },
      py::arg("input"), py::arg("grid") = std::string("features"),
      py::arg("config") = py::dict(),
      "Trains one model per cell of the feature ladder ('features') or "
      "window-length sweep ('seq') on shared splits and reports test AUC "
      "per cell.");
}
