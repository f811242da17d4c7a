#include "fedsim/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/kernels.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace kp = kernels::parallel;

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("train config: epochs must be >= 1");
  if (batch_size < 1) throw InvalidInput("train config: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInput("train config: learning_rate must be a finite non-negative number");
  }
}

ModelParams init_params(const std::vector<std::size_t>& architecture, std::uint64_t seed) {
  ModelParams params = ModelParams::zeros(architecture);
  Rng rng(seed);
  for (std::size_t k = 0; k < params.dense_count(); ++k) {
    const double fan = static_cast<double>(architecture[k] + architecture[k + 1]);
    const double s = std::sqrt(6.0 / fan);
    for (double& w : params.weight(k).values()) w = rng.uniform(-s, s);
  }
  return params;
}

namespace {

// Per-layer buffers for one batch. post[k] is relu(pre[k]) for hidden layers
// and the logits for the last one.
struct Workspace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  std::vector<double> delta;
  std::vector<double> delta_prev;

  void resize(const ModelParams& params, std::size_t n) {
    const auto L = params.dense_count();
    pre.resize(L);
    post.resize(L);
    for (std::size_t k = 0; k < L; ++k) {
      pre[k].resize(n * params.architecture()[k + 1]);
      post[k].resize(n * params.architecture()[k + 1]);
    }
  }
};

void check_input(const ModelParams& params, std::size_t cols) {
  if (params.dense_count() == 0) throw InvalidInput("model has no layers");
  if (cols != params.input_dim()) {
    throw InvalidInput("input width " + std::to_string(cols) + " does not match model input " +
                       std::to_string(params.input_dim()));
  }
}

void forward_into(const ModelParams& params, std::span<const double> input, std::size_t n, Workspace& ws) {
  const auto& arch = params.architecture();
  const auto L = params.dense_count();
  for (std::size_t k = 0; k < L; ++k) {
    std::span<const double> in = k == 0 ? input : std::span<const double>(ws.post[k - 1]);
    const std::size_t in_dim = arch[k];
    const std::size_t out_dim = arch[k + 1];
    auto& z = ws.pre[k];
    kp::gemm_bias(in.first(n * in_dim), params.weight(k).values(), params.bias(k).values(),
                  std::span<double>(z).first(n * out_dim), n, in_dim, out_dim);
    auto& a = ws.post[k];
    if (k + 1 < L) {
      for (std::size_t i = 0; i < n * out_dim; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
    } else {
      std::copy(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n * out_dim), a.begin());
    }
  }
}

// Softmax cross-entropy summed over rows. When `dlogits` is non-empty it
// receives (softmax - onehot) * scale.
double softmax_xent(std::span<const double> logits, std::span<const int> labels, std::size_t classes,
                    std::span<double> dlogits, double scale) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* z = logits.data() + i * classes;
    const double zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - zmax);
    const double log_sum = std::log(sum) + zmax;
    const auto y = static_cast<std::size_t>(labels[i]);
    total += log_sum - z[y];
    if (!dlogits.empty()) {
      double* d = dlogits.data() + i * classes;
      for (std::size_t c = 0; c < classes; ++c) {
        d[c] = (std::exp(z[c] - log_sum) - (c == y ? 1.0 : 0.0)) * scale;
      }
    }
  }
  return total;
}

// Fills `grad` (same layout as params) from the output-layer error `dlogits`.
void backward(const ModelParams& params, std::span<const double> input, std::size_t n, Workspace& ws,
              std::span<const double> dlogits, ModelParams& grad) {
  const auto& arch = params.architecture();
  const auto L = params.dense_count();
  ws.delta.assign(dlogits.begin(), dlogits.end());
  for (std::size_t kk = L; kk-- > 0;) {
    const std::size_t in_dim = arch[kk];
    const std::size_t out_dim = arch[kk + 1];
    std::span<const double> in = kk == 0 ? input : std::span<const double>(ws.post[kk - 1]);
    kp::gemm_at_b(in.first(n * in_dim), ws.delta, grad.weight(kk).values(), n, in_dim, out_dim);
    auto db = grad.bias(kk).values();
    std::fill(db.begin(), db.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < out_dim; ++j) db[j] += ws.delta[i * out_dim + j];
    }
    if (kk == 0) break;
    ws.delta_prev.resize(n * in_dim);
    kp::gemm_a_bt(ws.delta, params.weight(kk).values(), ws.delta_prev, n, in_dim, out_dim);
    const auto& z = ws.pre[kk - 1];
    for (std::size_t i = 0; i < n * in_dim; ++i) {
      if (z[i] <= 0.0) ws.delta_prev[i] = 0.0;
    }
    std::swap(ws.delta, ws.delta_prev);
  }
}

void check_dataset(const ModelParams& params, const Dataset& data, const char* op) {
  if (data.empty()) throw InvalidInput(std::string(op) + ": dataset is empty");
  check_input(params, data.dim());
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= params.output_dim()) {
      throw InvalidInput(std::string(op) + ": label " + std::to_string(y) + " exceeds model classes");
    }
  }
}

}  // namespace

Tensor2D forward(const ModelParams& params, const Tensor2D& batch) {
  check_input(params, batch.cols());
  Workspace ws;
  ws.resize(params, batch.rows());
  forward_into(params, batch.values(), batch.rows(), ws);
  return Tensor2D(batch.rows(), params.output_dim(), std::move(ws.post.back()));
}

LossAndGradient loss_and_gradient(const ModelParams& params, const Dataset& data) {
  check_dataset(params, data, "loss_and_gradient");
  const std::size_t n = data.size();
  const std::size_t classes = params.output_dim();
  Workspace ws;
  ws.resize(params, n);
  forward_into(params, data.features.values(), n, ws);
  std::vector<double> dlogits(n * classes);
  const double scale = 1.0 / static_cast<double>(n);
  const double loss = softmax_xent(ws.post.back(), data.labels, classes, dlogits, scale) * scale;
  LossAndGradient out{loss, ModelParams::zeros(params.architecture())};
  backward(params, data.features.values(), n, ws, dlogits, out.gradient);
  return out;
}

ModelParams train_local(const ModelParams& params, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  check_dataset(params, data, "train_local");
  ModelParams model = params;
  ModelParams grad = ModelParams::zeros(params.architecture());
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const std::size_t classes = params.output_dim();
  const std::size_t bs = std::min(cfg.batch_size, n);

  std::vector<std::size_t> order(n);
  std::vector<double> batch(bs * d);
  std::vector<int> batch_labels(bs);
  std::vector<double> dlogits(bs * classes);
  Workspace ws;
  ws.resize(params, bs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed + epoch);
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t m = std::min(bs, n - start);
      for (std::size_t r = 0; r < m; ++r) {
        const auto src = data.features.row(order[start + r]);
        std::copy(src.begin(), src.end(), batch.begin() + static_cast<std::ptrdiff_t>(r * d));
        batch_labels[r] = data.labels[order[start + r]];
      }
      forward_into(model, batch, m, ws);
      softmax_xent(std::span<const double>(ws.post.back()).first(m * classes),
                   std::span<const int>(batch_labels).first(m), classes,
                   std::span<double>(dlogits).first(m * classes), 1.0 / static_cast<double>(m));
      backward(model, batch, m, ws, std::span<const double>(dlogits).first(m * classes), grad);
      for (std::size_t l = 0; l < model.layer_count(); ++l) {
        auto w = model.tensor(l).values();
        const auto g = grad.tensor(l).values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * g[i];
      }
    }
  }
  return model;
}

std::vector<int> predict(const ModelParams& params, const Tensor2D& features) {
  check_input(params, features.cols());
  constexpr std::size_t kChunk = 512;
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  const std::size_t classes = params.output_dim();
  std::vector<int> out(n);
  Workspace ws;
  ws.resize(params, std::min(kChunk, n));
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t m = std::min(kChunk, n - start);
    forward_into(params, features.values().subspan(start * d, m * d), m, ws);
    for (std::size_t i = 0; i < m; ++i) {
      const double* z = ws.post.back().data() + i * classes;
      out[start + i] = static_cast<int>(std::max_element(z, z + classes) - z);
    }
  }
  return out;
}

Evaluation evaluate(const ModelParams& params, const Dataset& data) {
  check_dataset(params, data, "evaluate");
  constexpr std::size_t kChunk = 512;
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const std::size_t classes = params.output_dim();
  Workspace ws;
  ws.resize(params, std::min(kChunk, n));
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t m = std::min(kChunk, n - start);
    forward_into(params, data.features.values().subspan(start * d, m * d), m, ws);
    const std::span<const double> logits(ws.post.back().data(), m * classes);
    const std::span<const int> labels(data.labels.data() + start, m);
    loss += softmax_xent(logits, labels, classes, {}, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* z = logits.data() + i * classes;
      // max_element returns the first maximum, i.e. the lowest tied class.
      if (std::max_element(z, z + classes) - z == labels[i]) ++correct;
    }
  }
  return {static_cast<double>(correct) / static_cast<double>(n), loss / static_cast<double>(n)};
}

double gradient_check(const ModelParams& params, const Dataset& data, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("gradient_check: epsilon must be positive");
  const auto analytic = loss_and_gradient(params, data);
  const std::size_t n = data.size();
  const std::size_t classes = params.output_dim();
  Workspace ws;
  ws.resize(params, n);
  auto mean_loss = [&](const ModelParams& p) {
    forward_into(p, data.features.values(), n, ws);
    return softmax_xent(ws.post.back(), data.labels, classes, {}, 1.0) / static_cast<double>(n);
  };

  ModelParams probe = params;
  double worst = 0.0;
  for (std::size_t l = 0; l < probe.layer_count(); ++l) {
    auto values = probe.tensor(l).values();
    const auto grad = analytic.gradient.tensor(l).values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double up = mean_loss(probe);
      values[i] = saved - epsilon;
      const double down = mean_loss(probe);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double scale = std::max(std::abs(numeric), std::abs(grad[i]));
      if (scale < 1e-9) continue;
      worst = std::max(worst, std::abs(numeric - grad[i]) / scale);
    }
  }
  return worst;
}

}  // namespace fedsim
