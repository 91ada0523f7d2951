#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dslota/rng.hpp"

namespace dslota {

// Flat model parameters or a parameter delta.
using ParamVector = std::vector<double>;

struct Sample {
  std::vector<double> features;
  std::size_t label = 0;
};

// A labelled sample set with a fixed feature dimension and class count.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::size_t num_classes);
  Dataset(std::size_t dim, std::size_t num_classes, std::vector<Sample> samples);

  void add(Sample sample);

  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::span<const Sample> samples() const { return samples_; }

  // Empirical class proportions; all zeros for an empty set.
  std::vector<double> label_histogram() const;

 private:
  std::size_t dim_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<Sample> samples_;
};

enum class Architecture { kLinear, kMlp };
enum class Activation { kTanh, kRelu };

struct ModelSpec {
  Architecture architecture = Architecture::kLinear;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::size_t hidden = 0;  // ignored for kLinear
  Activation activation = Activation::kTanh;

  static ModelSpec linear(std::size_t d, std::size_t classes);
  static ModelSpec mlp(std::size_t d, std::size_t hidden, std::size_t classes,
                       Activation act = Activation::kTanh);

  std::size_t num_params() const;
};

// Parameter layout: linear = [W (L x d) row-major, b (L)];
// mlp = [W1 (H x d), b1 (H), W2 (L x H), b2 (L)].
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  std::size_t num_params() const { return spec_.num_params(); }
  std::size_t num_classes() const { return spec_.num_classes; }

  std::vector<double> forward(std::span<const double> params,
                              std::span<const double> x) const;

  struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
  };
  // Mean cross-entropy over the batch and its gradient.
  LossGrad loss_gradient(std::span<const double> params,
                         std::span<const Sample> batch) const;

  // Small Gaussian initialization (zero biases).
  ParamVector init_params(Rng& rng, double scale = 0.1) const;

 private:
  void check(std::span<const double> params, std::size_t input_len) const;
  std::vector<double> logits(std::span<const double> params,
                             std::span<const double> x,
                             std::vector<double>* hidden_out) const;

  ModelSpec spec_;
};

std::vector<double> softmax(std::span<const double> logits);

// Mean over samples of |p_true - 1|, where p_true is the predicted
// probability of the labelled class. Lies in [0, 1].
double rmse_eval(const Model& model, std::span<const double> params,
                 const Dataset& data);

// Fraction of samples whose argmax (lowest index on ties) equals the label.
double accuracy(const Model& model, std::span<const double> params,
                const Dataset& data);

bool all_finite(std::span<const double> values);

// Per class, draws Dir(alpha * 1_C) proportions and splits that class's
// samples accordingly. Redraws until every worker holds at least one sample.
std::vector<Dataset> partition_dirichlet(const Dataset& data, std::size_t workers,
                                         double alpha, Rng& rng);

// Unit-variance Gaussian blobs, balanced labels, class means pairwise
// `separation` apart.
Dataset make_synthetic(std::size_t classes, std::size_t dim, std::size_t n,
                       double separation, Rng& rng);

// Class means used by make_synthetic.
std::vector<std::vector<double>> blob_means(std::size_t classes, std::size_t dim,
                                            double separation);

// CSV: d feature columns followed by the integer label, no header.
void write_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_csv(const std::filesystem::path& path, std::size_t num_classes = 0);

}  // namespace dslota
