#include "dpmask/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dpmask {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' ||
                         end[-1] == '\r'))
    --end;
  if (begin < end && *begin == '+') ++begin;  // from_chars rejects "+1"
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && begin != end;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double norm2(const Vec& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

LabeledDataset load_csv(const std::string& path,
                        const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty CSV file: " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);
  if (header.size() < 2) {
    throw std::runtime_error(path + ": header must list features and a label");
  }

  int label_idx = -1;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_idx = static_cast<int>(i);
      break;
    }
  }
  if (label_idx < 0) {
    // Accept a 0-based column index in place of a name.
    int idx = 0;
    auto [ptr, ec] = std::from_chars(
        label_column.data(), label_column.data() + label_column.size(), idx);
    if (ec == std::errc() && ptr == label_column.data() + label_column.size() &&
        idx >= 0 && idx < static_cast<int>(header.size())) {
      label_idx = idx;
    } else {
      throw std::runtime_error(path + ": label column '" + label_column +
                               "' not found");
    }
  }

  LabeledDataset ds;
  ds.d = static_cast<int>(header.size()) - 1;
  bool saw_negative_one = false;
  int max_label = 0;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    }
    LabeledSample sample;
    sample.x.reserve(ds.d);
    for (size_t i = 0; i < cells.size(); ++i) {
      double v = 0.0;
      if (!parse_double(cells[i], v) || !std::isfinite(v)) {
        throw std::runtime_error(path + ": row " + std::to_string(row) +
                                 ", column " + std::to_string(i) +
                                 ": not a number: '" + cells[i] + "'");
      }
      if (static_cast<int>(i) == label_idx) {
        if (v != std::floor(v)) {
          throw std::runtime_error(path + ": row " + std::to_string(row) +
                                   ": label must be an integer, got '" +
                                   cells[i] + "'");
        }
        sample.y = static_cast<int>(v);
      } else {
        sample.x.push_back(v);
      }
    }
    if (sample.y == -1) saw_negative_one = true;
    if (sample.y < -1) {
      throw std::runtime_error(path + ": row " + std::to_string(row) +
                               ": label " + std::to_string(sample.y) +
                               " out of range");
    }
    max_label = std::max(max_label, sample.y);
    ds.samples.push_back(std::move(sample));
  }
  if (ds.samples.empty()) {
    throw std::runtime_error(path + ": no data rows");
  }
  if (saw_negative_one) {
    if (max_label > 1) {
      throw std::runtime_error(path + ": labels mix -1/+1 with class indices");
    }
    for (auto& s : ds.samples) s.y = (s.y == 1) ? 1 : 0;
    ds.C = 2;
  } else {
    ds.C = std::max(2, max_label + 1);
  }
  ds.norm_bounded = false;
  return ds;
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  for (int j = 0; j < ds.d; ++j) out << 'f' << j << ',';
  out << "label\n";
  for (const auto& s : ds.samples) {
    for (double v : s.x) out << format_double(v) << ',';
    out << s.y << '\n';
  }
  if (!out) throw std::runtime_error("error writing CSV file: " + path);
}

std::pair<LabeledDataset, double> normalize_max_norm(const LabeledDataset& ds) {
  if (ds.samples.empty()) {
    throw std::invalid_argument("normalize_max_norm: empty dataset");
  }
  double scale = 0.0;
  for (const auto& s : ds.samples) scale = std::max(scale, norm2(s.x));
  if (scale == 0.0) {
    throw std::invalid_argument(
        "normalize_max_norm: all-zero dataset, scale would be 0");
  }
  LabeledDataset out = ds;
  for (auto& s : out.samples)
    for (double& v : s.x) v /= scale;
  out.norm_bounded = true;
  return {std::move(out), scale};
}

LabeledDataset clip_unit_norm(const LabeledDataset& ds) {
  LabeledDataset out = ds;
  for (auto& s : out.samples) {
    const double nrm = norm2(s.x);
    if (nrm > 1.0) {
      for (double& v : s.x) v /= nrm;
    }
  }
  out.norm_bounded = true;
  return out;
}

void validate_mixture_spec(const GaussianMixtureSpec& spec) {
  if (spec.empty()) throw std::invalid_argument("mixture spec has no classes");
  const size_t d = spec.front().mean.size();
  if (d == 0) throw std::invalid_argument("mixture spec has zero dimension");
  for (const auto& cls : spec) {
    if (cls.mean.size() != d) {
      throw std::invalid_argument("mixture spec classes disagree on dimension");
    }
    if (!(cls.variance > 0.0)) {
      throw std::invalid_argument("mixture spec variance must be positive");
    }
    if (cls.count < 1) {
      throw std::invalid_argument("mixture spec counts must be >= 1");
    }
  }
}

LabeledSample draw_mixture_sample(const GaussianMixtureSpec& spec, int cls,
                                  RngStream& rng) {
  const auto& c = spec.at(cls);
  const double sd = std::sqrt(c.variance);
  LabeledSample s;
  s.y = cls;
  s.x.resize(c.mean.size());
  for (size_t j = 0; j < c.mean.size(); ++j) {
    s.x[j] = c.mean[j] + sd * rng.normal();
  }
  return s;
}

LabeledDataset gen_gaussian_mixture(const GaussianMixtureSpec& spec,
                                    RngStream& rng) {
  validate_mixture_spec(spec);
  LabeledDataset ds;
  ds.d = static_cast<int>(spec.front().mean.size());
  ds.C = static_cast<int>(spec.size());
  // Interleave classes round-robin so any prefix stays class-balanced.
  std::vector<int> remaining(ds.C);
  for (int c = 0; c < ds.C; ++c) remaining[c] = spec[c].count;
  int left = std::accumulate(remaining.begin(), remaining.end(), 0);
  for (int c = 0; left > 0; c = (c + 1) % ds.C) {
    if (remaining[c] == 0) continue;
    ds.samples.push_back(draw_mixture_sample(spec, c, rng));
    --remaining[c];
    --left;
  }
  ds.norm_bounded = false;
  return ds;
}

LabeledDataset gen_gaussian_mixture(const GaussianMixtureSpec& spec,
                                    uint64_t seed) {
  RngStream rng(seed);
  return gen_gaussian_mixture(spec, rng);
}

namespace {

std::vector<int> round_robin_counts(int total, int classes) {
  std::vector<int> counts(classes, total / classes);
  for (int c = 0; c < total % classes; ++c) counts[c] += 1;
  return counts;
}

}  // namespace

GaussianMixtureSpec demo_mixture_spec(int total) {
  const auto counts = round_robin_counts(total, 3);
  return {
      {{0.0, 1.5}, 0.25, counts[0]},
      {{1.0, 1.0}, 0.25, counts[1]},
      {{1.0, -1.0}, 0.25, counts[2]},
  };
}

GaussianMixtureSpec demo_binary_mixture_spec(int total) {
  const auto counts = round_robin_counts(total, 2);
  return {
      {{0.0, 1.5}, 0.25, counts[0]},
      {{1.0, -1.0}, 0.25, counts[1]},
  };
}

LabeledDataset neighbor(const LabeledDataset& ds, int index,
                        const LabeledSample& replacement) {
  if (index < 0 || index >= ds.n()) {
    throw std::out_of_range("neighbor: index " + std::to_string(index) +
                            " out of range for dataset of size " +
                            std::to_string(ds.n()));
  }
  if (static_cast<int>(replacement.x.size()) != ds.d) {
    throw std::invalid_argument("neighbor: replacement dimension mismatch");
  }
  LabeledDataset out = ds;
  out.samples[index] = replacement;
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                double train_fraction,
                                                uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: fraction must lie in (0, 1)");
  }
  const int n = ds.n();
  if (n < 2) {
    throw std::invalid_argument("split: need at least 2 samples");
  }
  int n_train = static_cast<int>(std::floor(n * train_fraction));
  n_train = std::clamp(n_train, 1, n - 1);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % (i + 1));
    std::swap(order[i], order[j]);
  }

  LabeledDataset train, val;
  train.d = val.d = ds.d;
  train.C = val.C = ds.C;
  train.norm_bounded = val.norm_bounded = ds.norm_bounded;
  for (int i = 0; i < n; ++i) {
    (i < n_train ? train : val).samples.push_back(ds.samples[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

}  // namespace dpmask
