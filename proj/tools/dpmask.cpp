// Command-line interface for privacy-masked dataset release: train a
// regularized logistic classifier, perturb it with spherical-Laplace noise,
// and synthesize masked samples whose gradient residual at the noisy
// classifier vanishes. Also ships the input-perturbation baseline and an
// accuracy-vs-epsilon experiment harness.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpmask/dataset.hpp"
#include "dpmask/harness.hpp"
#include "dpmask/maskgen.hpp"
#include "dpmask/model.hpp"
#include "dpmask/noise.hpp"
#include "dpmask/perturb.hpp"

namespace {

using namespace dpmask;

GaussianMixtureSpec load_mixture_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mixture spec: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto j = nlohmann::json::parse(ss.str());
  GaussianMixtureSpec spec;
  for (const auto& cls : j) {
    GaussianClassSpec c;
    c.mean = cls.at("mean").get<Vec>();
    c.variance = cls.at("variance").get<double>();
    c.count = cls.at("count").get<int>();
    spec.push_back(std::move(c));
  }
  validate_mixture_spec(spec);
  return spec;
}

// Loads a CSV and bounds its norms; reports the applied global scale
// (1.0 under per-sample clipping) so companion inputs can share it.
LabeledDataset load_normalized(const std::string& path, bool clip,
                               const std::string& label_column,
                               double* scale_out = nullptr) {
  const LabeledDataset raw = load_csv(path, label_column);
  if (scale_out) *scale_out = 1.0;
  if (clip) return clip_unit_norm(raw);
  auto [ds, scale] = normalize_max_norm(raw);
  if (scale != 1.0) {
    std::cerr << "note: features scaled by 1/" << scale
              << " to bound the maximum norm at 1\n";
  }
  if (scale_out) *scale_out = scale;
  return ds;
}

int run(int argc, char** argv) {
  CLI::App app{"dpmask: privacy-masked dataset release for logistic regression"};
  app.require_subcommand(1);

  // synth -----------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "emit a Gaussian-mixture CSV");
  std::string synth_out, synth_spec;
  int synth_n = 100;
  uint64_t synth_seed = 0;
  bool synth_binary = false;
  synth->add_option("--out", synth_out, "output CSV path")->required();
  synth->add_option("--n", synth_n, "total sample count");
  synth->add_option("--seed", synth_seed, "master seed");
  synth->add_option("--spec", synth_spec,
                    "mixture spec JSON: [{mean, variance, count}, ...]");
  synth->add_flag("--binary", synth_binary,
                  "use the 2-class demo mixture instead of the 3-class one");

  // train -----------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "fit the classifier on a CSV");
  std::string train_data, train_out, train_label = "label";
  double train_lambda = 0.5, train_tol = 1e-8;
  int train_iters = 10000;
  bool train_no_normalize = false, train_clip = false;
  train_cmd->add_option("--data", train_data, "training CSV")->required();
  train_cmd->add_option("--out", train_out, "model JSON path")->required();
  train_cmd->add_option("--lambda", train_lambda, "regularization");
  train_cmd->add_option("--tol", train_tol, "residual-norm tolerance");
  train_cmd->add_option("--max-iters", train_iters, "iteration cap");
  train_cmd->add_option("--label-column", train_label, "label column");
  train_cmd->add_flag("--no-normalize", train_no_normalize,
                      "train on raw features (skips the norm bound)");
  train_cmd->add_flag("--clip", train_clip,
                      "per-sample clipping instead of the global scale");

  // mask ------------------------------------------------------------------
  auto* mask = app.add_subcommand("mask", "release a masked copy of a CSV");
  std::string mask_data, mask_out, mask_model_out, mask_seed_set, mask_diag;
  std::string mask_label = "label";
  double mask_eps = 1.0, mask_lambda = 0.5, mask_init_norm = 0.5;
  double mask_project = 0.0;
  uint64_t mask_seed = 0;
  int mask_restarts = 5;
  bool mask_clip = false, mask_verbose = false;
  mask->add_option("--data", mask_data, "training CSV")->required();
  mask->add_option("--out", mask_out, "masked CSV path")->required();
  mask->add_option("--epsilon", mask_eps, "privacy budget")->required();
  mask->add_option("--lambda", mask_lambda, "regularization");
  mask->add_option("--seed", mask_seed, "master seed");
  mask->add_option("--seed-set", mask_seed_set,
                   "CSV of samples placed at the front of the release; "
                   "given in the raw coordinates of --data, scaled alongside");
  mask->add_option("--model-out", mask_model_out,
                   "write the noisy classifier JSON here");
  double mask_gd_tol = 1e-8;
  mask->add_option("--restarts", mask_restarts, "GD restarts per sample");
  mask->add_option("--init-norm", mask_init_norm, "GD init radius");
  mask->add_option("--tol", mask_gd_tol,
                   "per-sample objective gradient tolerance");
  mask->add_option("--project-radius", mask_project,
                   "clip synthesized sample norms to this radius (0 = off)");
  mask->add_option("--label-column", mask_label, "label column");
  mask->add_option("--diag", mask_diag, "per-sample diagnostics JSONL path");
  mask->add_flag("--clip", mask_clip,
                 "per-sample clipping instead of the global scale");
  mask->add_flag("-v,--verbose", mask_verbose,
                 "emit per-sample diagnostics JSON lines on stderr");

  // perturb ---------------------------------------------------------------
  auto* perturb = app.add_subcommand("perturb",
                                     "input-perturbation baseline release");
  std::string pert_data, pert_out, pert_label = "label";
  double pert_eps = 1.0;
  uint64_t pert_seed = 0;
  bool pert_clip = false;
  perturb->add_option("--data", pert_data, "training CSV")->required();
  perturb->add_option("--out", pert_out, "perturbed CSV path")->required();
  perturb->add_option("--epsilon", pert_eps, "privacy budget")->required();
  perturb->add_option("--seed", pert_seed, "master seed");
  perturb->add_option("--label-column", pert_label, "label column");
  perturb->add_flag("--clip", pert_clip,
                    "per-sample clipping instead of the global scale");

  // eval ------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "accuracy of a model on a CSV");
  std::string eval_model, eval_data, eval_out, eval_label = "label";
  eval->add_option("--model", eval_model, "model JSON")->required();
  eval->add_option("--data", eval_data, "validation CSV")->required();
  eval->add_option("--out", eval_out, "write {accuracy, n} JSON here");
  eval->add_option("--label-column", eval_label, "label column");

  // sweep -----------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "accuracy-vs-epsilon grid over release methods");
  std::string sweep_config_path, sweep_data, sweep_out, sweep_methods;
  std::vector<double> sweep_eps;
  std::vector<int> sweep_n;
  double sweep_lambda = 0.5;
  int sweep_reps = 50, sweep_val = 0, sweep_jobs = 1;
  uint64_t sweep_seed = 0;
  sweep_cmd->add_option("--config", sweep_config_path,
                        "JSON config; flags below override it");
  sweep_cmd->add_option("--data", sweep_data,
                        "CSV source (default: 3-class demo mixture)");
  sweep_cmd->add_option("--out", sweep_out, "records CSV path");
  sweep_cmd->add_option("--epsilon", sweep_eps, "epsilon grid")
      ->delimiter(',');
  sweep_cmd->add_option("--n-values", sweep_n, "training sizes")
      ->delimiter(',');
  sweep_cmd->add_option("--methods", sweep_methods,
                        "comma list of mdg,input_perturb,output_perturb");
  sweep_cmd->add_option("--lambda", sweep_lambda, "regularization");
  sweep_cmd->add_option("--reps", sweep_reps, "repetitions per cell");
  sweep_cmd->add_option("--val-size", sweep_val, "validation samples");
  sweep_cmd->add_option("--seed", sweep_seed, "master seed");
  sweep_cmd->add_option("--jobs", sweep_jobs, "worker threads");

  // bound-check -----------------------------------------------------------
  auto* bound = app.add_subcommand(
      "bound-check", "utility bound vs measured objective gaps");
  std::string bound_method, bound_out, bound_data;
  double bound_delta = 0.05, bound_eps = 1.0, bound_lambda = 0.5;
  int bound_n = 100, bound_reps = 200;
  uint64_t bound_seed = 0;
  bound->add_option("--method", bound_method,
                    "output_perturb or input_perturb")->required();
  bound->add_option("--delta", bound_delta, "confidence parameter");
  bound->add_option("--epsilon", bound_eps, "privacy budget");
  bound->add_option("--lambda", bound_lambda, "regularization");
  bound->add_option("--n", bound_n, "training size");
  bound->add_option("--reps", bound_reps, "repetitions");
  bound->add_option("--seed", bound_seed, "master seed");
  bound->add_option("--data", bound_data,
                    "binary CSV source (default: 2-class demo mixture)");
  bound->add_option("--out", bound_out, "report JSON path");

  CLI11_PARSE(app, argc, argv);

  if (*synth) {
    GaussianMixtureSpec spec;
    if (!synth_spec.empty()) {
      spec = load_mixture_spec(synth_spec);
    } else {
      spec = synth_binary ? demo_binary_mixture_spec(synth_n)
                          : demo_mixture_spec(synth_n);
    }
    const LabeledDataset ds = gen_gaussian_mixture(spec, synth_seed);
    save_csv(ds, synth_out);
    std::cout << "wrote " << ds.n() << " samples (d=" << ds.d
              << ", C=" << ds.C << ") to " << synth_out << '\n';
    return 0;
  }

  if (*train_cmd) {
    LabeledDataset ds = train_no_normalize
                            ? load_csv(train_data, train_label)
                            : load_normalized(train_data, train_clip,
                                              train_label);
    TrainOptions opts;
    opts.lambda = train_lambda;
    opts.tol = train_tol;
    opts.max_iters = train_iters;
    const ModelParams params = train(ds, opts);
    save_model(params, train_out);
    const Vec residual = gradient_residual(params, ds, train_lambda);
    double rn = 0.0;
    for (double v : residual) rn += v * v;
    std::cout << "trained " << (params.mode == ModelMode::kBinary
                                    ? "binary"
                                    : "multiclass")
              << " model (d=" << params.d << ", C=" << params.C
              << "), residual norm " << std::sqrt(rn) << ", saved to "
              << train_out << '\n';
    return 0;
  }

  if (*mask) {
    double scale = 1.0;
    const LabeledDataset ds =
        load_normalized(mask_data, mask_clip, mask_label, &scale);
    std::vector<LabeledSample> seed_set;
    if (!mask_seed_set.empty()) {
      const LabeledDataset s0 = load_csv(mask_seed_set, mask_label);
      seed_set = s0.samples;
      // Keep the seed samples in the same coordinates as the scaled data.
      for (auto& s : seed_set) {
        for (double& v : s.x) v /= scale;
      }
      std::cerr << "warning: a nonempty seed set is published as-is; the "
                   "epsilon guarantee covers only the synthesized samples' "
                   "dependence on the data\n";
    }
    PrivacyBudget budget{mask_eps, mask_lambda, ds.n()};
    MaskGenOptions opts;
    opts.restarts = mask_restarts;
    opts.init_norm = mask_init_norm;
    opts.gd_tol = mask_gd_tol;
    if (mask_project > 0.0) opts.projection_radius = mask_project;

    std::ofstream diag_file;
    MaskDiagSink sink = nullptr;
    std::ostream* diag_out = nullptr;
    if (!mask_diag.empty()) {
      diag_file.open(mask_diag);
      if (!diag_file) {
        throw std::runtime_error("cannot write diagnostics: " + mask_diag);
      }
      diag_out = &diag_file;
    } else if (mask_verbose) {
      diag_out = &std::cerr;
    }
    if (diag_out) {
      sink = [diag_out](const MaskIterationDiag& d) {
        nlohmann::json j;
        j["index"] = d.index;
        j["label"] = d.label;
        j["objective"] = d.objective;
        j["residual_norm"] = d.residual_norm;
        j["converged"] = d.converged;
        *diag_out << j.dump() << '\n';
      };
    }

    RngStream rng(mask_seed);
    auto [masked, w_prime] = mask_dataset(ds, budget, seed_set, opts, rng, sink);
    if (w_prime.mode == ModelMode::kMulticlass) {
      std::cerr << "note: multiclass release perturbs the flattened d*C "
                   "classifier at the binary rate; the epsilon label is "
                   "heuristic, unproven\n";
    }
    save_csv(masked, mask_out);
    if (!mask_model_out.empty()) save_model(w_prime, mask_model_out);

    MaskState final_state = make_mask_state(masked.n(), w_prime, mask_lambda,
                                            masked.samples);
    std::cout << "released " << masked.n() << " masked samples to " << mask_out
              << "; mean residual "
              << std::sqrt(residual_norm(final_state)) / masked.n() << '\n';
    return 0;
  }

  if (*perturb) {
    const LabeledDataset ds = load_normalized(pert_data, pert_clip, pert_label);
    RngStream rng(pert_seed);
    const LabeledDataset released = input_perturbation(ds, pert_eps, rng);
    save_csv(released, pert_out);
    std::cout << "released " << released.n() << " perturbed samples to "
              << pert_out << '\n';
    return 0;
  }

  if (*eval) {
    const ModelParams params = load_model(eval_model);
    const LabeledDataset ds = load_csv(eval_data, eval_label);
    const double acc = accuracy(params, ds);
    std::cout << "accuracy " << acc << " on " << ds.n() << " samples\n";
    if (!eval_out.empty()) {
      nlohmann::json j;
      j["accuracy"] = acc;
      j["n"] = ds.n();
      std::ofstream out(eval_out);
      if (!out) throw std::runtime_error("cannot write: " + eval_out);
      out << j.dump(2) << '\n';
    }
    return 0;
  }

  if (*sweep_cmd) {
    SweepConfig config;
    if (!sweep_config_path.empty()) {
      std::ifstream in(sweep_config_path);
      if (!in) {
        throw std::runtime_error("cannot open config: " + sweep_config_path);
      }
      std::stringstream ss;
      ss << in.rdbuf();
      config = sweep_config_from_json(ss.str());
    }
    if (!sweep_data.empty()) config.csv_path = sweep_data;
    if (!sweep_out.empty()) config.out_path = sweep_out;
    if (!sweep_eps.empty()) config.epsilons = sweep_eps;
    if (!sweep_n.empty()) config.n_values = sweep_n;
    if (!sweep_methods.empty()) {
      config.methods.clear();
      std::stringstream ss(sweep_methods);
      std::string m;
      while (std::getline(ss, m, ',')) config.methods.push_back(m);
    }
    if (sweep_cmd->count("--lambda")) config.lambda = sweep_lambda;
    if (sweep_cmd->count("--reps")) config.repetitions = sweep_reps;
    if (sweep_cmd->count("--val-size")) config.validation_size = sweep_val;
    if (sweep_cmd->count("--seed")) config.master_seed = sweep_seed;
    if (sweep_cmd->count("--jobs")) config.jobs = sweep_jobs;
    if (config.out_path.empty()) {
      throw std::runtime_error("sweep needs --out (or \"out\" in the config)");
    }
    const auto records = sweep(config);
    std::cout << "wrote " << records.size() << " records to "
              << config.out_path << '\n';
    return 0;
  }

  if (*bound) {
    SweepConfig config;
    config.mixture = demo_binary_mixture_spec();
    if (!bound_data.empty()) config.csv_path = bound_data;
    config.n_values = {bound_n};
    config.epsilons = {bound_eps};
    config.lambda = bound_lambda;
    config.repetitions = bound_reps;
    config.master_seed = bound_seed;
    const BoundReport report = bound_check(bound_method, config, bound_delta);
    const std::string text = bound_report_to_json(report);
    if (!bound_out.empty()) {
      std::ofstream out(bound_out);
      if (!out) throw std::runtime_error("cannot write: " + bound_out);
      out << text << '\n';
    }
    std::cout << "analytic bound " << report.analytic_bound
              << ", violation rate " << report.violation_rate << " over "
              << report.repetitions << " repetitions\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
