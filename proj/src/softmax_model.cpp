#include "mcof/softmax_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcof/raster_io.hpp"
#include "mcof/rng.hpp"

namespace mcof {

void SampleBatch::add(std::span<const double> x, int label, double weight) {
  if (dim == 0) dim = static_cast<int>(x.size());
  if (static_cast<int>(x.size()) != dim) {
    throw Error(ErrorKind::DimensionMismatch, "sample dimension mismatch");
  }
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
  if (!weights.empty() || weight != 1.0) {
    weights.resize(labels.size() - 1, 1.0);
    weights.push_back(weight);
  }
}

SoftmaxModel::SoftmaxModel(int input_dim, int hidden, int classes)
    : input_dim_(input_dim), hidden_(hidden), classes_(classes) {
  if (input_dim < 1 || hidden < 0 || classes < 2) {
    throw Error(ErrorKind::Config, "invalid classifier shape");
  }
  const std::size_t count =
      hidden ? static_cast<std::size_t>(hidden) * input_dim + hidden +
                   static_cast<std::size_t>(classes) * hidden + classes
             : static_cast<std::size_t>(classes) * input_dim + classes;
  theta_.assign(count, 0.0);
}

void SoftmaxModel::initialize(std::uint64_t seed) {
  Rng rng(seed);
  std::fill(theta_.begin(), theta_.end(), 0.0);
  if (hidden_) {
    const double s1 = std::sqrt(1.0 / input_dim_);
    for (std::size_t i = 0; i < b1_offset(); ++i) theta_[i] = s1 * rng.normal();
    const double s2 = std::sqrt(1.0 / hidden_);
    for (std::size_t i = w2_offset(); i < b2_offset(); ++i) theta_[i] = s2 * rng.normal();
  } else {
    for (std::size_t i = w2_offset(); i < b2_offset(); ++i) theta_[i] = 0.01 * rng.normal();
  }
}

bool SoftmaxModel::is_weight(std::size_t index) const {
  return index < b1_offset() || (index >= w2_offset() && index < b2_offset());
}

bool SoftmaxModel::is_finite() const {
  return std::all_of(theta_.begin(), theta_.end(), [](double v) { return std::isfinite(v); });
}

void SoftmaxModel::logits(std::span<const double> x, std::span<double> out) const {
  const double* th = theta_.data();
  if (hidden_) {
    double hbuf[256];
    std::vector<double> hvec;
    double* hid = hbuf;
    if (hidden_ > 256) {
      hvec.resize(hidden_);
      hid = hvec.data();
    }
    for (int j = 0; j < hidden_; ++j) {
      const double* w = th + static_cast<std::size_t>(j) * input_dim_;
      double a = th[b1_offset() + j];
      for (int i = 0; i < input_dim_; ++i) a += w[i] * x[i];
      hid[j] = std::tanh(a);
    }
    for (int c = 0; c < classes_; ++c) {
      const double* w = th + w2_offset() + static_cast<std::size_t>(c) * hidden_;
      double a = th[b2_offset() + c];
      for (int j = 0; j < hidden_; ++j) a += w[j] * hid[j];
      out[c] = a;
    }
  } else {
    for (int c = 0; c < classes_; ++c) {
      const double* w = th + static_cast<std::size_t>(c) * input_dim_;
      double a = th[b2_offset() + c];
      for (int i = 0; i < input_dim_; ++i) a += w[i] * x[i];
      out[c] = a;
    }
  }
}

namespace {

void softmax_inplace(std::span<double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& e : v) {
    e = std::exp(e - m);
    sum += e;
  }
  for (double& e : v) e /= sum;
}

}  // namespace

void SoftmaxModel::predict_proba(std::span<const double> x, std::span<double> out) const {
  logits(x, out);
  softmax_inplace(out);
}

int SoftmaxModel::predict(std::span<const double> x) const {
  std::vector<double> p(classes_);
  logits(x, p);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double softmax_nll(std::span<const double> probs, int label) {
  return -std::log(std::max(probs[label], std::numeric_limits<double>::min()));
}

double SoftmaxModel::nll(const SampleBatch& batch, std::span<double> grad) const {
  if (batch.dim != input_dim_ && batch.size() > 0) {
    throw Error(ErrorKind::DimensionMismatch, "batch dimension does not match classifier");
  }
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  const double* th = theta_.data();
  std::vector<double> hid(hidden_), z(classes_), dh(hidden_);
  double loss = 0.0;

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto x = batch.row(s);
    const int y = batch.labels[s];
    const double w = batch.weight(s);
    const int fan_in = hidden_ ? hidden_ : input_dim_;
    const double* act = x.data();
    if (hidden_) {
      for (int j = 0; j < hidden_; ++j) {
        const double* wr = th + static_cast<std::size_t>(j) * input_dim_;
        double a = th[b1_offset() + j];
        for (int i = 0; i < input_dim_; ++i) a += wr[i] * x[i];
        hid[j] = std::tanh(a);
      }
      act = hid.data();
    }
    for (int c = 0; c < classes_; ++c) {
      const double* wr = th + w2_offset() + static_cast<std::size_t>(c) * fan_in;
      double a = th[b2_offset() + c];
      for (int j = 0; j < fan_in; ++j) a += wr[j] * act[j];
      z[c] = a;
    }
    // log-softmax
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double log_norm = m + std::log(sum);
    loss += w * (log_norm - z[y]);
    if (!want_grad) continue;

    // dL/dz = w * (p - onehot)
    for (int c = 0; c < classes_; ++c) z[c] = w * (std::exp(z[c] - log_norm) - (c == y ? 1.0 : 0.0));
    std::fill(dh.begin(), dh.end(), 0.0);
    for (int c = 0; c < classes_; ++c) {
      double* g = grad.data() + w2_offset() + static_cast<std::size_t>(c) * fan_in;
      const double* wr = th + w2_offset() + static_cast<std::size_t>(c) * fan_in;
      for (int j = 0; j < fan_in; ++j) {
        g[j] += z[c] * act[j];
        if (hidden_) dh[j] += z[c] * wr[j];
      }
      grad[b2_offset() + c] += z[c];
    }
    if (hidden_) {
      for (int j = 0; j < hidden_; ++j) {
        const double da = dh[j] * (1.0 - hid[j] * hid[j]);
        double* g = grad.data() + static_cast<std::size_t>(j) * input_dim_;
        for (int i = 0; i < input_dim_; ++i) g[i] += da * x[i];
        grad[b1_offset() + j] += da;
      }
    }
  }
  return loss;
}

double gradient_check(const SoftmaxModel& model, const SampleBatch& batch, double step,
                      LossForm form) {
  double scale = 1.0;
  if (form == LossForm::Mean) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) total += batch.weight(i);
    if (!(total > 0.0)) throw Error(ErrorKind::DegenerateData, "empty batch");
    scale = 1.0 / total;
  }
  std::vector<double> analytic(model.parameter_count());
  model.nll(batch, analytic);
  for (double& g : analytic) g *= scale;
  SoftmaxModel probe = model;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.parameter_count(); ++i) {
    const double saved = probe.parameters()[i];
    probe.parameters()[i] = saved + step;
    const double up = probe.nll(batch, {}) * scale;
    probe.parameters()[i] = saved - step;
    const double down = probe.nll(batch, {}) * scale;
    probe.parameters()[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-5});
    worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
  }
  return worst;
}

ScalarRaster model_to_raster(const SoftmaxModel& model) {
  std::vector<float> values;
  const auto& th = model.parameters();
  values.reserve(2 * (th.size() + 3));
  for (int v : {model.input_dim(), model.hidden(), model.classes()}) {
    values.push_back(static_cast<float>(v));
    values.push_back(0.0f);
  }
  for (double v : th) {
    const float hi = static_cast<float>(v);
    values.push_back(hi);
    values.push_back(static_cast<float>(v - static_cast<double>(hi)));
  }
  const int width = static_cast<int>(values.size() / 2);
  return ScalarRaster(width, 1, std::move(values), 2);
}

SoftmaxModel model_from_raster(const ScalarRaster& raster) {
  if (raster.channels() != 2 || raster.height() != 1 || raster.width() < 3) {
    throw Error(ErrorKind::Format, "not a classifier parameter blob");
  }
  const auto& v = raster.values();
  SoftmaxModel model(static_cast<int>(v[0]), static_cast<int>(v[2]), static_cast<int>(v[4]));
  if (model.parameter_count() + 3 != static_cast<std::size_t>(raster.width())) {
    throw Error(ErrorKind::Format, "classifier blob size does not match its header");
  }
  for (std::size_t i = 0; i < model.parameter_count(); ++i) {
    model.parameters()[i] =
        static_cast<double>(v[2 * (i + 3)]) + static_cast<double>(v[2 * (i + 3) + 1]);
  }
  return model;
}

void save_model(const std::filesystem::path& path, const SoftmaxModel& model) {
  save_f32r(path, model_to_raster(model));
}

SoftmaxModel load_model(const std::filesystem::path& path) {
  return model_from_raster(load_scalar_raster(path, false));
}

}  // namespace mcof

namespace mcof {

double objective(const SoftmaxModel& model, const SampleBatch& batch, double weight_decay,
                 std::span<double> grad) {
  double total_weight = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) total_weight += batch.weight(i);
  if (!(total_weight > 0.0)) throw Error(ErrorKind::DegenerateData, "empty training batch");
  double loss = model.nll(batch, grad) / total_weight;
  const auto& th = model.parameters();
  double decay = 0.0;
  for (std::size_t i = 0; i < th.size(); ++i) {
    if (!model.is_weight(i)) continue;
    decay += th[i] * th[i];
    if (!grad.empty()) grad[i] = grad[i] / total_weight + weight_decay * th[i];
  }
  if (!grad.empty()) {
    for (std::size_t i = 0; i < th.size(); ++i) {
      if (!model.is_weight(i)) grad[i] /= total_weight;
    }
  }
  return loss + 0.5 * weight_decay * decay;
}

TrainResult fit(SoftmaxModel& model, const std::function<const SampleBatch&(int)>& epoch_batch,
                const OptimizerConfig& config, std::uint64_t seed) {
  if (config.epochs < 0 || !(config.learning_rate > 0.0)) {
    throw Error(ErrorKind::Config, "optimizer needs epochs >= 0 and a positive learning rate");
  }
  Rng rng(seed);
  TrainResult result;
  std::vector<double> grad(model.parameter_count()), velocity(model.parameter_count(), 0.0);
  auto check = [](double loss) {
    if (!std::isfinite(loss)) throw Error(ErrorKind::NonFiniteLoss, "training objective diverged");
    return loss;
  };
  auto step = [&]() {
    auto& th = model.parameters();
    for (std::size_t i = 0; i < th.size(); ++i) {
      velocity[i] = config.momentum * velocity[i] - config.learning_rate * grad[i];
      th[i] += velocity[i];
    }
  };

  const SampleBatch* batch = nullptr;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    batch = &epoch_batch(epoch);
    const std::size_t n = batch->size();
    if (config.batch_size <= 0 || static_cast<std::size_t>(config.batch_size) >= n) {
      const double loss = check(objective(model, *batch, config.weight_decay, grad));
      if (epoch == 0) result.initial_loss = loss;
      result.loss_history.push_back(loss);
      step();
      continue;
    }
    if (epoch == 0) result.initial_loss = check(objective(model, *batch, config.weight_decay, {}));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    SampleBatch mini;
    mini.dim = batch->dim;
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      mini.features.clear();
      mini.labels.clear();
      mini.weights.clear();
      for (std::size_t k = start; k < end; ++k) mini.add(batch->row(order[k]), batch->labels[order[k]],
                                                          batch->weight(order[k]));
      epoch_loss += check(objective(model, mini, config.weight_decay, grad));
      ++batches;
      step();
    }
    result.loss_history.push_back(epoch_loss / std::max(1, batches));
  }
  if (batch) {
    result.final_loss = check(objective(model, *batch, config.weight_decay, {}));
  }
  if (config.epochs == 0) result.final_loss = result.initial_loss;
  if (!model.is_finite()) throw Error(ErrorKind::NonFiniteLoss, "parameters became non-finite");
  return result;
}

}  // namespace mcof
