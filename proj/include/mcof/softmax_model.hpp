#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "mcof/raster.hpp"

namespace mcof {

// Row-major feature matrix with one class label (and optional weight) per row.
struct SampleBatch {
  int dim = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<double> weights;  // empty means all ones

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
  void add(std::span<const double> x, int label, double weight = 1.0);
};

// Softmax classifier, either linear (hidden == 0) or with one tanh hidden
// layer. Parameters live in one flat vector laid out as
// [W1 (hidden x in), b1, W2 (classes x hidden), b2], or [W (classes x in), b]
// when linear.
class SoftmaxModel {
 public:
  SoftmaxModel() = default;
  SoftmaxModel(int input_dim, int hidden, int classes);

  int input_dim() const noexcept { return input_dim_; }
  int hidden() const noexcept { return hidden_; }
  int classes() const noexcept { return classes_; }
  std::size_t parameter_count() const noexcept { return theta_.size(); }
  std::vector<double>& parameters() noexcept { return theta_; }
  const std::vector<double>& parameters() const noexcept { return theta_; }

  // Small Gaussian weights (Xavier-scaled for the hidden layer), zero biases.
  void initialize(std::uint64_t seed);

  void logits(std::span<const double> x, std::span<double> out) const;
  // Numerically stable softmax of logits(x).
  void predict_proba(std::span<const double> x, std::span<double> out) const;
  int predict(std::span<const double> x) const;

  // Weighted negative log-likelihood summed over the batch,
  // sum_i w_i * -log p(y_i | x_i). When grad is non-empty it receives the
  // gradient of that sum (same layout as parameters()).
  double nll(const SampleBatch& batch, std::span<double> grad) const;

  // Index ranges of weight matrices (as opposed to biases), for L2 decay.
  bool is_weight(std::size_t index) const;

  bool is_finite() const;

 private:
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return static_cast<std::size_t>(hidden_) * input_dim_; }
  std::size_t w2_offset() const { return b1_offset() + hidden_; }
  std::size_t b2_offset() const {
    return w2_offset() + static_cast<std::size_t>(classes_) * (hidden_ ? hidden_ : input_dim_);
  }

  int input_dim_ = 0;
  int hidden_ = 0;
  int classes_ = 0;
  std::vector<double> theta_;
};

double softmax_nll(std::span<const double> probs, int label);

// Sum: the summed cross-entropy over labelled samples. Mean: the same sum
// divided by the total sample weight (labelled-pixel count for unit weights).
enum class LossForm { Sum, Mean };

// Central finite-difference check of the analytic gradient. Returns the
// largest relative error max|a - n| / max(|a|, |n|, 1e-5) over all parameters.
double gradient_check(const SoftmaxModel& model, const SampleBatch& batch, double step = 1e-5,
                      LossForm form = LossForm::Sum);

struct OptimizerConfig {
  int epochs = 500;
  double learning_rate = 0.1;
  double momentum = 0.0;
  double weight_decay = 1e-4;
  int batch_size = 0;  // 0 = full batch
};

struct TrainResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  // Objective at the start of every epoch (mean of mini-batch objectives when
  // training is not full-batch).
  std::vector<double> loss_history;
};

// Objective used by the optimizers: weighted-mean NLL plus
// 0.5 * weight_decay * |W|^2 over weight matrices.
double objective(const SoftmaxModel& model, const SampleBatch& batch, double weight_decay,
                 std::span<double> grad);

// Gradient descent (optionally mini-batch with momentum). `epoch_batch(e)`
// supplies the samples for epoch e; mini-batches are formed in a shuffled
// order drawn from `seed`. Throws NonFiniteLoss if the objective diverges.
TrainResult fit(SoftmaxModel& model, const std::function<const SampleBatch&(int)>& epoch_batch,
                const OptimizerConfig& config, std::uint64_t seed);

// Parameters stored as an F32R blob: header values (input_dim, hidden,
// classes) then each double split into a float pair (hi, lo) so that the
// round trip is accurate to ~1e-14 relative.
ScalarRaster model_to_raster(const SoftmaxModel& model);
SoftmaxModel model_from_raster(const ScalarRaster& raster);
void save_model(const std::filesystem::path& path, const SoftmaxModel& model);
SoftmaxModel load_model(const std::filesystem::path& path);

}  // namespace mcof
