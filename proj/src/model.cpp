#include "dslota/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "dslota/error.hpp"

namespace dslota {

Dataset::Dataset(std::size_t dim, std::size_t num_classes)
    : dim_(dim), num_classes_(num_classes) {
  require(num_classes >= 1, "dataset needs at least one class");
}

Dataset::Dataset(std::size_t dim, std::size_t num_classes, std::vector<Sample> samples)
    : Dataset(dim, num_classes) {
  samples_.reserve(samples.size());
  for (auto& s : samples) add(std::move(s));
}

void Dataset::add(Sample sample) {
  require(sample.features.size() == dim_,
          "sample has " + std::to_string(sample.features.size()) +
              " features, dataset expects " + std::to_string(dim_));
  require(sample.label < num_classes_,
          "label " + std::to_string(sample.label) + " out of range");
  samples_.push_back(std::move(sample));
}

std::vector<double> Dataset::label_histogram() const {
  std::vector<double> hist(num_classes_, 0.0);
  if (samples_.empty()) return hist;
  for (const auto& s : samples_) hist[s.label] += 1.0;
  for (double& h : hist) h /= static_cast<double>(samples_.size());
  return hist;
}

ModelSpec ModelSpec::linear(std::size_t d, std::size_t classes) {
  return ModelSpec{Architecture::kLinear, d, classes, 0, Activation::kTanh};
}

ModelSpec ModelSpec::mlp(std::size_t d, std::size_t hidden, std::size_t classes,
                         Activation act) {
  return ModelSpec{Architecture::kMlp, d, classes, hidden, act};
}

std::size_t ModelSpec::num_params() const {
  if (architecture == Architecture::kLinear) return num_classes * input_dim + num_classes;
  return hidden * input_dim + hidden + num_classes * hidden + num_classes;
}

Model::Model(ModelSpec spec) : spec_(spec) {
  require(spec_.input_dim >= 1, "model input dimension must be positive");
  require(spec_.num_classes >= 1, "model needs at least one class");
  require(spec_.architecture == Architecture::kLinear || spec_.hidden >= 1,
          "mlp needs at least one hidden unit");
}

void Model::check(std::span<const double> params, std::size_t input_len) const {
  require(params.size() == num_params(),
          "parameter length " + std::to_string(params.size()) + " does not match model (" +
              std::to_string(num_params()) + ")");
  require(input_len == spec_.input_dim,
          "input length " + std::to_string(input_len) + " does not match model (" +
              std::to_string(spec_.input_dim) + ")");
}

namespace {

double activate(Activation act, double a) {
  return act == Activation::kTanh ? std::tanh(a) : std::max(0.0, a);
}

// Derivative expressed through the activation output h = act(a).
double activate_grad(Activation act, double a, double h) {
  if (act == Activation::kTanh) return 1.0 - h * h;
  return a > 0.0 ? 1.0 : 0.0;
}

// out[r] = bias[r] + sum_c weights[r*cols + c] * x[c]
void affine(const double* weights, const double* bias, std::span<const double> x,
            std::size_t rows, std::vector<double>& out) {
  out.assign(rows, 0.0);
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bias[r];
    const double* row = weights + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

std::vector<double> Model::logits(std::span<const double> params,
                                  std::span<const double> x,
                                  std::vector<double>* hidden_out) const {
  const std::size_t d = spec_.input_dim;
  const std::size_t L = spec_.num_classes;
  std::vector<double> z;
  if (spec_.architecture == Architecture::kLinear) {
    affine(params.data(), params.data() + L * d, x, L, z);
    return z;
  }
  const std::size_t H = spec_.hidden;
  std::vector<double> pre;
  affine(params.data(), params.data() + H * d, x, H, pre);
  std::vector<double> h(H);
  for (std::size_t j = 0; j < H; ++j) h[j] = activate(spec_.activation, pre[j]);
  const double* w2 = params.data() + H * d + H;
  affine(w2, w2 + L * H, h, L, z);
  if (hidden_out != nullptr) {
    // Store pre-activations followed by activations.
    hidden_out->assign(pre.begin(), pre.end());
    hidden_out->insert(hidden_out->end(), h.begin(), h.end());
  }
  return z;
}

std::vector<double> Model::forward(std::span<const double> params,
                                   std::span<const double> x) const {
  check(params, x.size());
  return softmax(logits(params, x, nullptr));
}

Model::LossGrad Model::loss_gradient(std::span<const double> params,
                                     std::span<const Sample> batch) const {
  require(!batch.empty(), "loss_gradient needs a nonempty batch");
  check(params, batch.front().features.size());

  const std::size_t d = spec_.input_dim;
  const std::size_t L = spec_.num_classes;
  const std::size_t H = spec_.hidden;
  LossGrad out;
  out.grad.assign(num_params(), 0.0);
  std::vector<double> cache;

  for (const auto& s : batch) {
    check(params, s.features.size());
    const auto z = logits(params, s.features, &cache);
    out.loss += log_sum_exp(z) - z[s.label];
    auto dz = softmax(z);
    dz[s.label] -= 1.0;

    if (spec_.architecture == Architecture::kLinear) {
      for (std::size_t r = 0; r < L; ++r) {
        double* row = out.grad.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) row[c] += dz[r] * s.features[c];
        out.grad[L * d + r] += dz[r];
      }
      continue;
    }

    const double* pre = cache.data();
    const double* h = cache.data() + H;
    const double* w2 = params.data() + H * d + H;
    double* g_w2 = out.grad.data() + H * d + H;
    double* g_b2 = g_w2 + L * H;
    std::vector<double> dh(H, 0.0);
    for (std::size_t r = 0; r < L; ++r) {
      for (std::size_t j = 0; j < H; ++j) {
        g_w2[r * H + j] += dz[r] * h[j];
        dh[j] += w2[r * H + j] * dz[r];
      }
      g_b2[r] += dz[r];
    }
    double* g_w1 = out.grad.data();
    double* g_b1 = out.grad.data() + H * d;
    for (std::size_t j = 0; j < H; ++j) {
      const double da = dh[j] * activate_grad(spec_.activation, pre[j], h[j]);
      for (std::size_t c = 0; c < d; ++c) g_w1[j * d + c] += da * s.features[c];
      g_b1[j] += da;
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

ParamVector Model::init_params(Rng& rng, double scale) const {
  ParamVector w(num_params(), 0.0);
  const std::size_t d = spec_.input_dim;
  const std::size_t L = spec_.num_classes;
  if (spec_.architecture == Architecture::kLinear) {
    for (std::size_t i = 0; i < L * d; ++i) w[i] = rng.normal(0.0, scale);
    return w;
  }
  const std::size_t H = spec_.hidden;
  for (std::size_t i = 0; i < H * d; ++i) w[i] = rng.normal(0.0, scale);
  const std::size_t w2 = H * d + H;
  for (std::size_t i = 0; i < L * H; ++i) w[w2 + i] = rng.normal(0.0, scale);
  return w;
}

double rmse_eval(const Model& model, std::span<const double> params, const Dataset& data) {
  require(!data.empty(), "rmse_eval needs a nonempty dataset");
  double total = 0.0;
  for (const auto& s : data.samples()) {
    const auto p = model.forward(params, s.features);
    total += std::sqrt((p[s.label] - 1.0) * (p[s.label] - 1.0));
  }
  return total / static_cast<double>(data.size());
}

double accuracy(const Model& model, std::span<const double> params, const Dataset& data) {
  require(!data.empty(), "accuracy needs a nonempty dataset");
  std::size_t correct = 0;
  for (const auto& s : data.samples()) {
    const auto p = model.forward(params, s.features);
    const auto best = static_cast<std::size_t>(
        std::distance(p.begin(), std::max_element(p.begin(), p.end())));
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::vector<Dataset> partition_dirichlet(const Dataset& data, std::size_t workers,
                                         double alpha, Rng& rng) {
  require(workers >= 1, "partition needs at least one worker");
  require(alpha > 0.0, "Dirichlet concentration must be positive");
  require(data.size() >= workers, "dataset has " + std::to_string(data.size()) +
                                      " samples, fewer than " + std::to_string(workers) +
                                      " workers");

  std::vector<std::vector<std::size_t>> by_class(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);

  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::vector<std::size_t>> assigned(workers);
    for (auto members : by_class) {
      if (members.empty()) continue;
      std::shuffle(members.begin(), members.end(), rng.engine());
      std::vector<double> props(workers);
      double sum = 0.0;
      for (auto& p : props) sum += (p = rng.gamma(alpha));
      if (!(sum > 0.0)) {
        // Every draw underflowed; put the class on one worker.
        std::fill(props.begin(), props.end(), 0.0);
        props[rng.index(workers)] = 1.0;
        sum = 1.0;
      }
      const double n = static_cast<double>(members.size());
      double cumulative = 0.0;
      std::size_t start = 0;
      for (std::size_t k = 0; k < workers; ++k) {
        cumulative += props[k];
        const std::size_t end =
            k + 1 == workers ? members.size()
                             : std::min(members.size(), static_cast<std::size_t>(
                                                            std::llround(cumulative / sum * n)));
        for (std::size_t j = start; j < std::max(start, end); ++j)
          assigned[k].push_back(members[j]);
        start = std::max(start, end);
      }
    }
    if (std::any_of(assigned.begin(), assigned.end(), [](const auto& a) { return a.empty(); }))
      continue;

    std::vector<Dataset> out;
    out.reserve(workers);
    for (auto& idx : assigned) {
      std::sort(idx.begin(), idx.end());
      Dataset part(data.dim(), data.num_classes());
      for (std::size_t i : idx) part.add(data[i]);
      out.push_back(std::move(part));
    }
    return out;
  }
  throw Error("partition_dirichlet could not give every worker a sample after " +
              std::to_string(kMaxAttempts) + " draws");
}

std::vector<std::vector<double>> blob_means(std::size_t classes, std::size_t dim,
                                            double separation) {
  std::vector<std::vector<double>> means(classes, std::vector<double>(dim, 0.0));
  if (dim >= classes) {
    // Scaled basis vectors: every pair is exactly `separation` apart.
    for (std::size_t c = 0; c < classes; ++c) means[c][c] = separation / std::numbers::sqrt2;
  } else if (dim >= 2) {
    // Regular polygon in the first two coordinates; neighbours `separation` apart.
    const double radius =
        classes > 1 ? separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(classes)))
                    : 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
      means[c][0] = radius * std::cos(angle);
      means[c][1] = radius * std::sin(angle);
    }
  } else {
    for (std::size_t c = 0; c < classes; ++c) means[c][0] = separation * static_cast<double>(c);
  }
  return means;
}

Dataset make_synthetic(std::size_t classes, std::size_t dim, std::size_t n, double separation,
                       Rng& rng) {
  require(classes >= 1 && dim >= 1, "synthetic data needs classes >= 1 and dim >= 1");
  require(n >= classes, "synthetic data needs at least one sample per class");
  const auto means = blob_means(classes, dim, separation);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % classes;
  std::shuffle(labels.begin(), labels.end(), rng.engine());

  Dataset out(dim, classes);
  for (std::size_t label : labels) {
    Sample s{std::vector<double>(dim), label};
    for (std::size_t j = 0; j < dim; ++j) s.features[j] = means[label][j] + rng.normal();
    out.add(std::move(s));
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  char buf[32];
  for (const auto& s : data.samples()) {
    for (double v : s.features) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf << ',';
    }
    os << s.label << '\n';
  }
  if (!os) throw Error("failed writing " + path.string());
}

Dataset read_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  std::vector<Sample> rows;
  std::string line;
  std::size_t dim = 0;
  std::size_t max_label = 0;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    require(cells.size() >= 2, where + ": need at least one feature and a label");
    Sample s;
    try {
      for (std::size_t i = 0; i + 1 < cells.size(); ++i) s.features.push_back(std::stod(cells[i]));
      const long label = std::stol(cells.back());
      require(label >= 0, where + ": negative label");
      s.label = static_cast<std::size_t>(label);
    } catch (const std::logic_error&) {
      throw Error(where + ": malformed number");
    }
    if (rows.empty()) dim = s.features.size();
    require(s.features.size() == dim, where + ": inconsistent feature count");
    max_label = std::max(max_label, s.label);
    rows.push_back(std::move(s));
  }
  require(!rows.empty(), path.string() + ": no samples");
  const std::size_t classes = num_classes == 0 ? max_label + 1 : num_classes;
  return Dataset(dim, classes, std::move(rows));
}

}  // namespace dslota
