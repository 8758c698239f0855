#include "slicescope/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "slicescope/error.hpp"
#include "slicescope/rng.hpp"

namespace slicescope {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Standardized {
  std::vector<double> data;  // n x d row-major
  std::vector<double> mean;
  std::vector<double> scale;
};

Standardized standardize(const EmbeddingSet& embeddings) {
  const std::size_t n = embeddings.n, d = embeddings.d;
  Standardized out;
  out.mean.assign(d, 0.0);
  out.scale.assign(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = embeddings.row(i);
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += row[j];
  }
  for (double& m : out.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = embeddings.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - out.mean[j];
      var[j] += diff * diff;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double s = std::sqrt(var[j] / static_cast<double>(n));
    out.scale[j] = s > 1e-12 ? s : 1.0;
  }
  out.data.resize(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.data[i * d + j] = (embeddings.at(i, j) - out.mean[j]) / out.scale[j];
  return out;
}

struct Params {
  std::vector<double> w1, b1, w2;
  double b2 = 0.0;
};

Params glorot_init(const TrainConfig& config, std::size_t d) {
  Params p;
  Rng rng = Rng::stream(config.seed, /*tag=*/3);
  if (config.architecture == SlicerArchitecture::kLogistic) {
    const double a = std::sqrt(6.0 / static_cast<double>(d + 1));
    p.w1.resize(d);
    for (double& v : p.w1) v = rng.uniform(-a, a);
  } else {
    const std::size_t h = config.hidden_dim;
    const double a1 = std::sqrt(6.0 / static_cast<double>(d + h));
    p.w1.resize(h * d);
    for (double& v : p.w1) v = rng.uniform(-a1, a1);
    p.b1.assign(h, 0.0);
    const double a2 = std::sqrt(6.0 / static_cast<double>(h + 1));
    p.w2.resize(h);
    for (double& v : p.w2) v = rng.uniform(-a2, a2);
  }
  return p;
}

// Forward pass over standardized inputs.
double forward(const Params& p, SlicerArchitecture arch, std::size_t d, std::size_t h,
               const double* x, std::vector<double>* hidden) {
  if (arch == SlicerArchitecture::kLogistic) {
    double z = p.b2;
    for (std::size_t j = 0; j < d; ++j) z += p.w1[j] * x[j];
    return z;
  }
  double z = p.b2;
  for (std::size_t u = 0; u < h; ++u) {
    double a = p.b1[u];
    const double* row = p.w1.data() + u * d;
    for (std::size_t j = 0; j < d; ++j) a += row[j] * x[j];
    const double t = std::tanh(a);
    if (hidden) (*hidden)[u] = t;
    z += p.w2[u] * t;
  }
  return z;
}

struct LossGrad {
  double loss = 0.0;
  Params grad;
};

LossGrad loss_and_grad(const Params& p, const TrainConfig& config, std::size_t n, std::size_t d,
                       const std::vector<double>& x, const std::vector<std::uint8_t>& y,
                       double pos_weight) {
  const SlicerArchitecture arch = config.architecture;
  const std::size_t h = arch == SlicerArchitecture::kMlp1Hidden ? config.hidden_dim : 0;
  LossGrad out;
  out.grad.w1.assign(p.w1.size(), 0.0);
  out.grad.b1.assign(p.b1.size(), 0.0);
  out.grad.w2.assign(p.w2.size(), 0.0);

  double weight_total = 0.0;
  std::vector<double> hidden(h);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data() + i * d;
    const double z = forward(p, arch, d, h, xi, h ? &hidden : nullptr);
    const double prob = sigmoid(z);
    const double target = y[i] ? 1.0 : 0.0;
    const double weight = y[i] ? pos_weight : 1.0;
    weight_total += weight;
    const double pc = std::clamp(prob, 1e-12, 1.0 - 1e-12);
    out.loss += -weight * (target * std::log(pc) + (1.0 - target) * std::log(1.0 - pc));
    const double delta = weight * (prob - target);
    if (arch == SlicerArchitecture::kLogistic) {
      for (std::size_t j = 0; j < d; ++j) out.grad.w1[j] += delta * xi[j];
      out.grad.b2 += delta;
    } else {
      for (std::size_t u = 0; u < h; ++u) {
        out.grad.w2[u] += delta * hidden[u];
        const double back = delta * p.w2[u] * (1.0 - hidden[u] * hidden[u]);
        out.grad.b1[u] += back;
        double* grow = out.grad.w1.data() + u * d;
        for (std::size_t j = 0; j < d; ++j) grow[j] += back * xi[j];
      }
      out.grad.b2 += delta;
    }
  }
  out.loss /= weight_total;
  for (double& g : out.grad.w1) g /= weight_total;
  for (double& g : out.grad.b1) g /= weight_total;
  for (double& g : out.grad.w2) g /= weight_total;
  out.grad.b2 /= weight_total;

  // L2 on weights, not biases.
  for (std::size_t j = 0; j < p.w1.size(); ++j) {
    out.loss += 0.5 * config.l2 * p.w1[j] * p.w1[j];
    out.grad.w1[j] += config.l2 * p.w1[j];
  }
  for (std::size_t j = 0; j < p.w2.size(); ++j) {
    out.loss += 0.5 * config.l2 * p.w2[j] * p.w2[j];
    out.grad.w2[j] += config.l2 * p.w2[j];
  }
  return out;
}

double batch_loss(const Params& p, const TrainConfig& config, std::size_t n, std::size_t d,
                  const std::vector<double>& x, const std::vector<std::uint8_t>& y,
                  double pos_weight) {
  const SlicerArchitecture arch = config.architecture;
  const std::size_t h = arch == SlicerArchitecture::kMlp1Hidden ? config.hidden_dim : 0;
  double loss = 0.0, weight_total = 0.0;
  std::vector<double> hidden(h);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = forward(p, arch, d, h, x.data() + i * d, h ? &hidden : nullptr);
    const double prob = std::clamp(sigmoid(z), 1e-12, 1.0 - 1e-12);
    const double target = y[i] ? 1.0 : 0.0;
    const double weight = y[i] ? pos_weight : 1.0;
    weight_total += weight;
    loss += -weight * (target * std::log(prob) + (1.0 - target) * std::log(1.0 - prob));
  }
  loss /= weight_total;
  for (double v : p.w1) loss += 0.5 * config.l2 * v * v;
  for (double v : p.w2) loss += 0.5 * config.l2 * v * v;
  return loss;
}

Params apply_step(const Params& p, const Params& grad, double step) {
  Params next = p;
  for (std::size_t j = 0; j < next.w1.size(); ++j) next.w1[j] -= step * grad.w1[j];
  for (std::size_t j = 0; j < next.b1.size(); ++j) next.b1[j] -= step * grad.b1[j];
  for (std::size_t j = 0; j < next.w2.size(); ++j) next.w2[j] -= step * grad.w2[j];
  next.b2 -= step * grad.b2;
  return next;
}

}  // namespace

SlicerModel train_slicer(const EmbeddingSet& embeddings, const SliceMask& mask,
                         const TrainConfig& config) {
  const std::size_t n = embeddings.n, d = embeddings.d;
  if (mask.n() != n) throw InputError("slicer: mask length does not match embeddings");
  const std::size_t n_pos = mask.size();
  if (n_pos == 0 || n_pos == n)
    throw ConfigError("slicer: single-class mask (need at least one positive and one negative)");
  if (config.epochs < 1) throw ConfigError("slicer: epochs must be >= 1");

  const Standardized std_input = standardize(embeddings);
  const double pos_weight = static_cast<double>(n - n_pos) / static_cast<double>(n_pos);

  Params params = glorot_init(config, d);
  double loss = batch_loss(params, config, n, d, std_input.data, mask.member, pos_weight);
  int epochs_run = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ++epochs_run;
    const LossGrad lg = loss_and_grad(params, config, n, d, std_input.data, mask.member,
                                      pos_weight);
    if (!std::isfinite(lg.loss))
      throw std::runtime_error("slicer: training diverged (non-finite loss at epoch " +
                               std::to_string(epoch) + ")");
    double step = config.learning_rate;
    bool moved = false;
    for (int halvings = 0; halvings < 40; ++halvings) {
      const Params trial = apply_step(params, lg.grad, step);
      const double trial_loss =
          batch_loss(trial, config, n, d, std_input.data, mask.member, pos_weight);
      if (!std::isfinite(trial_loss))
        throw std::runtime_error("slicer: training diverged (non-finite loss at epoch " +
                                 std::to_string(epoch) + ")");
      if (trial_loss <= loss) {
        params = trial;
        loss = trial_loss;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // no step improves; converged
  }

  SlicerModel model;
  model.architecture = config.architecture;
  model.input_dim = d;
  model.hidden_dim = config.architecture == SlicerArchitecture::kMlp1Hidden ? config.hidden_dim : 0;
  model.feature_mean = std_input.mean;
  model.feature_scale = std_input.scale;
  model.w1 = std::move(params.w1);
  model.b1 = std::move(params.b1);
  model.w2 = std::move(params.w2);
  model.b2 = params.b2;
  model.training_meta = {epochs_run, config.learning_rate, loss};
  return model;
}

std::vector<double> predict_proba(const SlicerModel& model, const EmbeddingSet& embeddings) {
  if (embeddings.d != model.input_dim)
    throw InputError("slicer: embedding dimension " + std::to_string(embeddings.d) +
                     " does not match model input_dim " + std::to_string(model.input_dim));
  const std::size_t n = embeddings.n, d = embeddings.d, h = model.hidden_dim;
  Params p{model.w1, model.b1, model.w2, model.b2};
  std::vector<double> x(d), probs(n);
  std::vector<double> hidden(h);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      x[j] = (embeddings.at(i, j) - model.feature_mean[j]) / model.feature_scale[j];
    const double z = forward(p, model.architecture, d, h, x.data(), h ? &hidden : nullptr);
    probs[i] = sigmoid(z);
  }
  return probs;
}

SliceMask select_test_slice(const std::vector<double>& probabilities, double alpha) {
  const std::size_t n = probabilities.size();
  if (n < 1) throw InputError("select: empty probability vector");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("select: alpha must be in (0, 1]");
  const std::size_t take = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
  if (take == 0)
    throw ConfigError("select: floor(alpha * n) = 0 samples at alpha=" + std::to_string(alpha));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probabilities[a] > probabilities[b];
  });
  order.resize(take);
  return SliceMask::from_indices(n, order);
}

void save_model(const SlicerModel& model, const std::string& path) {
  nlohmann::json doc;
  doc["architecture"] =
      model.architecture == SlicerArchitecture::kLogistic ? "logistic" : "mlp_1hidden";
  doc["input_dim"] = model.input_dim;
  if (model.architecture == SlicerArchitecture::kMlp1Hidden) doc["hidden_dim"] = model.hidden_dim;
  doc["standardizer"] = {{"mean", model.feature_mean}, {"scale", model.feature_scale}};
  doc["params"] = {{"w1", model.w1}, {"b1", model.b1}, {"w2", model.w2}, {"b2", model.b2}};
  doc["training_meta"] = {{"epochs", model.training_meta.epochs},
                          {"learning_rate", model.training_meta.learning_rate},
                          {"final_loss", model.training_meta.final_loss}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("slicer: cannot open '" + path + "' for writing");
  out << doc.dump(2) << "\n";
}

SlicerModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("slicer: cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("slicer: malformed model file '" + path + "': " + e.what());
  }
  SlicerModel model;
  const std::string arch = doc.at("architecture").get<std::string>();
  if (arch == "logistic")
    model.architecture = SlicerArchitecture::kLogistic;
  else if (arch == "mlp_1hidden")
    model.architecture = SlicerArchitecture::kMlp1Hidden;
  else
    throw InputError("slicer: unknown architecture '" + arch + "'");
  model.input_dim = doc.at("input_dim").get<std::size_t>();
  model.hidden_dim = doc.value("hidden_dim", std::size_t{0});
  model.feature_mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
  model.feature_scale = doc.at("standardizer").at("scale").get<std::vector<double>>();
  model.w1 = doc.at("params").at("w1").get<std::vector<double>>();
  model.b1 = doc.at("params").at("b1").get<std::vector<double>>();
  model.w2 = doc.at("params").at("w2").get<std::vector<double>>();
  model.b2 = doc.at("params").at("b2").get<double>();
  model.training_meta.epochs = doc.at("training_meta").at("epochs").get<int>();
  model.training_meta.learning_rate = doc.at("training_meta").at("learning_rate").get<double>();
  model.training_meta.final_loss = doc.at("training_meta").at("final_loss").get<double>();
  for (double v : model.feature_scale)
    if (!(v > 0.0)) throw InputError("slicer: non-positive feature scale in model file");
  return model;
}

}  // namespace slicescope
