#include "dpmask/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dpmask/noise.hpp"
#include "dpmask/perturb.hpp"

namespace dpmask {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Training/validation pair for one repetition, already normalized with the
// training scale.
struct RepetitionData {
  LabeledDataset train;
  LabeledDataset validation;
};

class DataSource {
 public:
  explicit DataSource(const SweepConfig& config) : config_(config) {
    if (!config.csv_path.empty()) {
      csv_ = load_csv(config.csv_path);
    } else {
      validate_mixture_spec(config.mixture);
    }
  }

  int max_n() const {
    return *std::max_element(config_.n_values.begin(), config_.n_values.end());
  }

  int validation_size() const {
    if (config_.validation_size > 0) return config_.validation_size;
    if (!config_.csv_path.empty()) {
      return std::max(1, (csv_.n() - max_n()) * 3 / 10);
    }
    return 1000;
  }

  void validate() const {
    if (!config_.csv_path.empty() &&
        max_n() + validation_size() > csv_.n()) {
      throw std::invalid_argument(
          "CSV source has too few rows for N plus validation size");
    }
  }

  // Deterministic per (rep); datasets for smaller N are prefixes of those
  // for larger N of the same repetition, and the validation set is shared.
  RepetitionData make(int n, int rep, uint64_t master_seed) const {
    RngStream data_stream =
        RngStream(master_seed).substream(fnv1a("data")).substream(rep);
    RepetitionData out;
    if (config_.csv_path.empty()) {
      const int classes = static_cast<int>(config_.mixture.size());
      RngStream train_stream = data_stream.substream(0);
      out.train.d = static_cast<int>(config_.mixture.front().mean.size());
      out.train.C = classes;
      for (int i = 0; i < n; ++i) {
        out.train.samples.push_back(
            draw_mixture_sample(config_.mixture, i % classes, train_stream));
      }
      RngStream val_stream = data_stream.substream(1);
      out.validation.d = out.train.d;
      out.validation.C = classes;
      const int vs = validation_size();
      for (int i = 0; i < vs; ++i) {
        out.validation.samples.push_back(
            draw_mixture_sample(config_.mixture, i % classes, val_stream));
      }
    } else {
      std::vector<int> order(csv_.n());
      std::iota(order.begin(), order.end(), 0);
      RngStream perm_stream = data_stream.substream(0);
      for (int i = csv_.n() - 1; i > 0; --i) {
        const int j = static_cast<int>(perm_stream.next_u64() % (i + 1));
        std::swap(order[i], order[j]);
      }
      out.train.d = out.validation.d = csv_.d;
      out.train.C = out.validation.C = csv_.C;
      for (int i = 0; i < n; ++i) {
        out.train.samples.push_back(csv_.samples[order[i]]);
      }
      const int vs = validation_size();
      for (int i = csv_.n() - vs; i < csv_.n(); ++i) {
        out.validation.samples.push_back(csv_.samples[order[i]]);
      }
    }
    // Norm-bound the training set; the validation set shares the training
    // scale (argmax predictions are invariant to the positive rescale).
    auto [train_n, scale] = normalize_max_norm(out.train);
    out.train = std::move(train_n);
    for (auto& s : out.validation.samples) {
      for (double& v : s.x) v /= scale;
    }
    return out;
  }

  int dimension() const {
    return config_.csv_path.empty()
               ? static_cast<int>(config_.mixture.front().mean.size())
               : csv_.d;
  }

  int classes() const {
    return config_.csv_path.empty() ? static_cast<int>(config_.mixture.size())
                                    : csv_.C;
  }

 private:
  const SweepConfig& config_;
  LabeledDataset csv_;
};

RngStream method_stream(uint64_t master_seed, const std::string& method,
                        int rep) {
  return RngStream(master_seed)
      .substream(fnv1a("method:" + method))
      .substream(rep);
}

void validate_config(const SweepConfig& config) {
  if (config.n_values.empty()) throw std::invalid_argument("empty N grid");
  if (config.epsilons.empty()) throw std::invalid_argument("empty epsilon grid");
  if (config.methods.empty()) throw std::invalid_argument("no methods selected");
  if (config.repetitions < 1) {
    throw std::invalid_argument("repetitions must be >= 1");
  }
  if (!(config.lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (config.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  for (int n : config.n_values) {
    if (n < 1) throw std::invalid_argument("N values must be >= 1");
  }
  for (double eps : config.epsilons) {
    if (!(eps > 0.0)) throw std::invalid_argument("epsilons must be > 0");
  }
  for (const auto& m : config.methods) {
    if (std::find(kAllMethods.begin(), kAllMethods.end(), m) ==
        kAllMethods.end()) {
      throw std::invalid_argument("unknown method: " + m);
    }
  }
}

}  // namespace

double run_method(const std::string& method, const LabeledDataset& train_ds,
                  const LabeledDataset& val_ds, double epsilon, double lambda,
                  RngStream& rng, const RunMethodOptions& opts) {
  if (!train_ds.norm_bounded) {
    throw std::invalid_argument("run_method requires norm-bounded training data");
  }
  PrivacyBudget budget{epsilon, lambda, train_ds.n()};
  TrainOptions train_opts = opts.train_opts;
  train_opts.lambda = lambda;
  TrainOptions retrain_opts = opts.retrain_opts;
  retrain_opts.lambda = lambda;

  if (method == "mdg") {
    auto [masked, w_prime] =
        mask_dataset(train_ds, budget, {}, opts.maskgen_opts, rng);
    const ModelParams retrained = train(masked, retrain_opts);
    return accuracy(retrained, val_ds);
  }
  if (method == "input_perturb") {
    const LabeledDataset released = input_perturbation(train_ds, epsilon, rng);
    const ModelParams retrained = train(released, retrain_opts);
    return accuracy(retrained, val_ds);
  }
  if (method == "output_perturb") {
    const ModelParams w = train(train_ds, train_opts);
    const ModelParams w_prime = output_perturb(w, budget, rng);
    return accuracy(w_prime, val_ds);
  }
  throw std::invalid_argument("unknown method: " + method);
}

std::vector<SweepRecord> sweep(const SweepConfig& config) {
  validate_config(config);
  DataSource source(config);
  source.validate();

  struct Cell {
    std::string method;
    double epsilon;
    int n;
  };
  std::vector<Cell> cells;
  for (int n : config.n_values) {
    for (double eps : config.epsilons) {
      for (const auto& m : config.methods) {
        cells.push_back({m, eps, n});
      }
    }
  }

  const int reps = config.repetitions;
  std::vector<std::vector<double>> acc(cells.size(),
                                       std::vector<double>(reps, 0.0));

  const int total_jobs = static_cast<int>(cells.size()) * reps;
  std::atomic<int> next_job{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    RunMethodOptions run_opts;
    for (;;) {
      const int job = next_job.fetch_add(1);
      if (job >= total_jobs || failed.load()) break;
      const int cell_idx = job / reps;
      const int rep = job % reps;
      const Cell& cell = cells[cell_idx];
      try {
        const RepetitionData data =
            source.make(cell.n, rep, config.master_seed);
        RngStream rng = method_stream(config.master_seed, cell.method, rep);
        acc[cell_idx][rep] =
            run_method(cell.method, data.train, data.validation, cell.epsilon,
                       config.lambda, rng, run_opts);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failure = e.what();
        failed.store(true);
        break;
      }
    }
  };

  const int jobs = std::min<int>(config.jobs, total_jobs);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) {
    throw std::runtime_error("sweep repetition failed: " + failure);
  }

  std::vector<SweepRecord> records;
  records.reserve(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) {
    SweepRecord rec;
    rec.method = cells[i].method;
    rec.epsilon = cells[i].epsilon;
    rec.n = cells[i].n;
    rec.repetitions = reps;
    double mean = 0.0;
    for (double a : acc[i]) mean += a;
    mean /= reps;
    double var = 0.0;
    for (double a : acc[i]) var += (a - mean) * (a - mean);
    var /= reps;  // population deviation, so one repetition reports 0
    rec.mean_accuracy = mean;
    rec.std_accuracy = std::sqrt(var);
    records.push_back(std::move(rec));
  }

  if (!config.out_path.empty()) {
    write_sweep_csv(records, config.out_path);
  }
  return records;
}

std::string sweep_records_to_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream out;
  out << "method,epsilon,n,mean_accuracy,std_accuracy,reps\n";
  for (const auto& r : records) {
    out << r.method << ',' << format_double(r.epsilon) << ',' << r.n << ','
        << format_double(r.mean_accuracy) << ','
        << format_double(r.std_accuracy) << ',' << r.repetitions << '\n';
  }
  return out.str();
}

void write_sweep_csv(const std::vector<SweepRecord>& records,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sweep CSV: " + path);
  out << sweep_records_to_csv(records);
  if (!out) throw std::runtime_error("error writing sweep CSV: " + path);
}

double utility_bound(const std::string& method, int d, double delta,
                     double lambda, int n, double epsilon) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
  if (d < 1 || n < 1 || !(lambda > 0.0) || !(epsilon > 0.0)) {
    throw std::invalid_argument("invalid bound parameters");
  }
  const double numerator = 2.0 * d * std::log(d / delta);
  double displacement = 0.0;
  if (method == "output_perturb") {
    displacement = numerator / (lambda * n * epsilon);
  } else if (method == "input_perturb") {
    displacement = numerator / (lambda * epsilon);
  } else {
    throw std::invalid_argument("bound defined for output_perturb and "
                                "input_perturb only, got: " + method);
  }
  return 0.5 * displacement * displacement * (lambda + 1.0);
}

BoundReport bound_check(const std::string& method, const SweepConfig& config,
                        double delta) {
  validate_config(config);
  DataSource source(config);
  source.validate();
  if (source.classes() != 2) {
    throw std::invalid_argument(
        "bound_check requires a binary (C=2) data source");
  }
  const int n = config.n_values.front();
  const double epsilon = config.epsilons.front();
  const int d = source.dimension();

  BoundReport report;
  report.method = method;
  report.delta = delta;
  report.epsilon = epsilon;
  report.lambda = config.lambda;
  report.n = n;
  report.d = d;
  report.repetitions = config.repetitions;
  report.analytic_bound =
      utility_bound(method, d, delta, config.lambda, n, epsilon);

  RunMethodOptions opts;
  TrainOptions clean = opts.train_opts;
  clean.lambda = config.lambda;
  TrainOptions retrain = opts.retrain_opts;
  retrain.lambda = config.lambda;
  PrivacyBudget budget{epsilon, config.lambda, n};

  int violations = 0;
  for (int rep = 0; rep < config.repetitions; ++rep) {
    const RepetitionData data = source.make(n, rep, config.master_seed);
    RngStream rng = method_stream(config.master_seed, method, rep);
    const ModelParams w = train(data.train, clean);
    ModelParams released;
    if (method == "output_perturb") {
      released = output_perturb(w, budget, rng);
    } else if (method == "input_perturb") {
      const LabeledDataset noisy =
          input_perturbation(data.train, epsilon, rng);
      released = train(noisy, retrain);
    } else {
      throw std::invalid_argument("bound_check handles output_perturb and "
                                  "input_perturb only, got: " + method);
    }
    const double gap = objective(released, data.train, config.lambda) -
                       objective(w, data.train, config.lambda);
    report.gaps.push_back(gap);
    if (gap > report.analytic_bound) ++violations;
  }
  report.violation_rate =
      static_cast<double>(violations) / config.repetitions;
  return report;
}

std::string bound_report_to_json(const BoundReport& report) {
  nlohmann::json j;
  j["method"] = report.method;
  j["delta"] = report.delta;
  j["epsilon"] = report.epsilon;
  j["lambda"] = report.lambda;
  j["n"] = report.n;
  j["d"] = report.d;
  j["repetitions"] = report.repetitions;
  j["analytic_bound"] = report.analytic_bound;
  j["gaps"] = report.gaps;
  j["violation_rate"] = report.violation_rate;
  return j.dump(2);
}

SweepConfig sweep_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SweepConfig config;
  if (j.contains("csv")) config.csv_path = j.at("csv").get<std::string>();
  if (j.contains("mixture")) {
    GaussianMixtureSpec spec;
    for (const auto& cls : j.at("mixture")) {
      GaussianClassSpec c;
      c.mean = cls.at("mean").get<Vec>();
      c.variance = cls.at("variance").get<double>();
      c.count = cls.value("count", 1);
      spec.push_back(std::move(c));
    }
    config.mixture = std::move(spec);
  }
  if (j.contains("n_values"))
    config.n_values = j.at("n_values").get<std::vector<int>>();
  if (j.contains("epsilons"))
    config.epsilons = j.at("epsilons").get<std::vector<double>>();
  if (j.contains("lambda")) config.lambda = j.at("lambda").get<double>();
  if (j.contains("repetitions"))
    config.repetitions = j.at("repetitions").get<int>();
  if (j.contains("methods"))
    config.methods = j.at("methods").get<std::vector<std::string>>();
  if (j.contains("validation_size"))
    config.validation_size = j.at("validation_size").get<int>();
  if (j.contains("seed")) config.master_seed = j.at("seed").get<uint64_t>();
  if (j.contains("out")) config.out_path = j.at("out").get<std::string>();
  if (j.contains("jobs")) config.jobs = j.at("jobs").get<int>();
  return config;
}

}  // namespace dpmask
