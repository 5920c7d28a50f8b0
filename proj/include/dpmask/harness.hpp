#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpmask/dataset.hpp"
#include "dpmask/maskgen.hpp"
#include "dpmask/model.hpp"
#include "dpmask/rng.hpp"

namespace dpmask {

inline const std::vector<std::string> kAllMethods = {"mdg", "input_perturb",
                                                     "output_perturb"};

inline const std::vector<double> kDefaultEpsilonGrid = {
    0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};

struct SweepConfig {
  // Dataset source: rows of csv_path when nonempty, otherwise the mixture.
  // Mixture repetitions draw fresh samples round-robin over classes, so the
  // per-class counts of the spec are ignored here; CSV repetitions take a
  // uniform subsample of size N.
  std::string csv_path;
  GaussianMixtureSpec mixture = demo_mixture_spec();

  std::vector<int> n_values = {100, 200};
  std::vector<double> epsilons = kDefaultEpsilonGrid;
  double lambda = 0.5;
  int repetitions = 50;
  std::vector<std::string> methods = kAllMethods;
  // 0 picks the default: 1000 fresh draws for mixtures, 30% of the leftover
  // rows for CSV sources.
  int validation_size = 0;
  uint64_t master_seed = 0;
  std::string out_path;  // records CSV; empty skips the write
  int jobs = 1;
};

struct SweepRecord {
  std::string method;
  double epsilon = 0.0;
  int n = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  int repetitions = 0;
};

struct BoundReport {
  std::string method;
  double delta = 0.0;
  double epsilon = 0.0;
  double lambda = 0.0;
  int n = 0;
  int d = 0;
  int repetitions = 0;
  double analytic_bound = 0.0;
  std::vector<double> gaps;  // J(w') - J(w) per repetition, on the original data
  double violation_rate = 0.0;
};

struct RunMethodOptions {
  TrainOptions train_opts;    // training on clean data
  TrainOptions retrain_opts;  // training on released data, which can be
                              // badly conditioned (unbounded norms)
  MaskGenOptions maskgen_opts;

  RunMethodOptions() {
    // Released data can carry norms in the hundreds, so plain GD needs a
    // modest tolerance and a large iteration budget. A 1e-4 residual puts
    // the retrained weights within 2e-4/lambda of the optimum, far below
    // anything an argmax accuracy can see.
    retrain_opts.tol = 1e-4;
    retrain_opts.max_iters = 1000000;
  }
};

// One evaluation of a release method:
//   mdg            mask the dataset, retrain on the masked data, score that
//   input_perturb  perturb inputs, retrain, score
//   output_perturb score the noise-perturbed classifier directly
// train_ds must be norm-bounded.
double run_method(const std::string& method, const LabeledDataset& train_ds,
                  const LabeledDataset& val_ds, double epsilon, double lambda,
                  RngStream& rng, const RunMethodOptions& opts = {});

// Full (method, epsilon, N) grid with `repetitions` fresh datasets each.
// Every cell derives its random streams from stable identifiers
// (method name hash, repetition index), never from grid position, so
// results are byte-identical under any method order, grid subset, or
// degree of parallelism.
std::vector<SweepRecord> sweep(const SweepConfig& config);

std::string sweep_records_to_csv(const std::vector<SweepRecord>& records);
void write_sweep_csv(const std::vector<SweepRecord>& records,
                     const std::string& path);

// Closed-form utility bound at confidence 1 - delta:
//   output_perturb: 0.5 * (2 d log(d/delta) / (lambda N epsilon))^2 * (lambda+1)
//   input_perturb:  0.5 * (2 d log(d/delta) / (lambda epsilon))^2 * (lambda+1)
double utility_bound(const std::string& method, int d, double delta,
                     double lambda, int n, double epsilon);

// Measures the objective gap J(w') - J(w) on the original data over
// config.repetitions fresh binary datasets and reports the empirical
// violation rate of the analytic bound. Uses config.n_values.front() and
// config.epsilons.front().
BoundReport bound_check(const std::string& method, const SweepConfig& config,
                        double delta);

std::string bound_report_to_json(const BoundReport& report);

SweepConfig sweep_config_from_json(const std::string& text);

}  // namespace dpmask
