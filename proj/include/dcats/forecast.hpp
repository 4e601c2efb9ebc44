#pragma once

// Channel-independent forecasting models (linear, MLP, SparseTSF), training
// with manual backpropagation, fine-tuning, evaluation and checkpoints.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dcats/error.hpp"
#include "dcats/io.hpp"
#include "dcats/tsdata.hpp"

namespace dcats {

enum class ModelKind : std::uint32_t { linear = 0, mlp = 1, sparsetsf = 2 };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::linear: return "linear";
    case ModelKind::mlp: return "mlp";
    case ModelKind::sparsetsf: return "sparsetsf";
  }
  return "?";
}

inline std::string display_name(ModelKind k) {
  switch (k) {
    case ModelKind::linear: return "Linear";
    case ModelKind::mlp: return "MLP";
    case ModelKind::sparsetsf: return "SparseTSF";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "linear") return ModelKind::linear;
  if (s == "mlp") return ModelKind::mlp;
  if (s == "sparsetsf") return ModelKind::sparsetsf;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected linear, mlp or sparsetsf)");
}

struct ModelConfig {
  ModelKind kind = ModelKind::linear;
  std::size_t input_len = 96;
  std::size_t horizon = 12;
  std::size_t hidden = 32;  // mlp only
  std::size_t period = 12;  // sparsetsf only
  std::uint64_t seed = 0;

  void validate() const {
    if (input_len == 0 || horizon == 0) throw ConfigError("input_len and horizon must be >= 1");
    if (kind == ModelKind::mlp && hidden == 0) throw ConfigError("mlp hidden width must be >= 1");
    if (kind == ModelKind::sparsetsf) {
      if (period == 0 || input_len % period != 0 || horizon % period != 0) {
        throw ConfigError("sparsetsf period " + std::to_string(period) + " must divide input_len " +
                          std::to_string(input_len) + " and horizon " + std::to_string(horizon));
      }
    }
  }

  [[nodiscard]] std::size_t parameter_count() const {
    switch (kind) {
      case ModelKind::linear: return (input_len + 1) * horizon;
      case ModelKind::mlp: return (input_len + 1) * hidden + (hidden + 1) * horizon;
      case ModelKind::sparsetsf: return (input_len / period + 1) * (horizon / period);
    }
    return 0;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parameter layout (all matrices row-major):
///   linear:    W[H x L], b[H]
///   mlp:       W1[hidden x L], b1[hidden], W2[H x hidden], b2[H]
///   sparsetsf: W[H/w x L/w], b[H/w], shared by the w phase strands
struct Model {
  ModelConfig config;
  Eigen::VectorXd parameters;

  friend bool operator==(const Model& a, const Model& b) {
    return a.config == b.config && a.parameters.size() == b.parameters.size() &&
           (a.parameters.array() == b.parameters.array()).all();
  }
};

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

/// (B x L) rows -> (B*w x L/w) strand rows; strand p of row b holds x[p], x[p+w], ...
inline RowMatrix to_strands(const RowMatrix& x, std::size_t w) {
  const auto b = x.rows();
  const auto len = x.cols() / static_cast<Eigen::Index>(w);
  RowMatrix s(b * static_cast<Eigen::Index>(w), len);
  for (Eigen::Index r = 0; r < b; ++r) {
    for (std::size_t p = 0; p < w; ++p) {
      for (Eigen::Index k = 0; k < len; ++k) {
        s(r * static_cast<Eigen::Index>(w) + static_cast<Eigen::Index>(p), k) =
            x(r, static_cast<Eigen::Index>(p) + k * static_cast<Eigen::Index>(w));
      }
    }
  }
  return s;
}

/// Inverse interleave of to_strands for outputs of length H.
inline RowMatrix from_strands(const RowMatrix& s, std::size_t w, Eigen::Index batch) {
  const auto len = s.cols();
  RowMatrix y(batch, len * static_cast<Eigen::Index>(w));
  for (Eigen::Index r = 0; r < batch; ++r) {
    for (std::size_t p = 0; p < w; ++p) {
      for (Eigen::Index k = 0; k < len; ++k) {
        y(r, static_cast<Eigen::Index>(p) + k * static_cast<Eigen::Index>(w)) =
            s(r * static_cast<Eigen::Index>(w) + static_cast<Eigen::Index>(p), k);
      }
    }
  }
  return y;
}

}  // namespace detail

inline Model init_model(const ModelConfig& config) {
  config.validate();
  Model model{config, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config.parameter_count()))};
  std::mt19937_64 rng(config.seed);
  auto fill = [&](Eigen::Index offset, Eigen::Index count, std::size_t fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-s, s);
    for (Eigen::Index i = 0; i < count; ++i) model.parameters[offset + i] = dist(rng);
  };
  const auto L = static_cast<Eigen::Index>(config.input_len);
  const auto H = static_cast<Eigen::Index>(config.horizon);
  switch (config.kind) {
    case ModelKind::linear:
      fill(0, (L + 1) * H, config.input_len);
      break;
    case ModelKind::mlp: {
      const auto hid = static_cast<Eigen::Index>(config.hidden);
      fill(0, (L + 1) * hid, config.input_len);
      fill((L + 1) * hid, (hid + 1) * H, config.hidden);
      break;
    }
    case ModelKind::sparsetsf: {
      const auto a = L / static_cast<Eigen::Index>(config.period);
      const auto c = H / static_cast<Eigen::Index>(config.period);
      fill(0, (a + 1) * c, static_cast<std::size_t>(a));
      break;
    }
  }
  return model;
}

enum class LossKind { mse, mae };

/// Forward pass for a batch of inputs (B x L); returns (B x H).
inline detail::RowMatrix forward_batch(const Model& model, const detail::RowMatrix& x) {
  using namespace detail;
  const auto& cfg = model.config;
  const auto L = static_cast<Eigen::Index>(cfg.input_len);
  const auto H = static_cast<Eigen::Index>(cfg.horizon);
  if (x.cols() != L) throw DataError("forward: input length " + std::to_string(x.cols()) + " != input_len " + std::to_string(L));
  const double* p = model.parameters.data();
  switch (cfg.kind) {
    case ModelKind::linear: {
      ConstMatMap w(p, H, L);
      ConstVecMap b(p + H * L, H);
      RowMatrix y = x * w.transpose();
      y.rowwise() += b.transpose();
      return y;
    }
    case ModelKind::mlp: {
      const auto hid = static_cast<Eigen::Index>(cfg.hidden);
      ConstMatMap w1(p, hid, L);
      ConstVecMap b1(p + hid * L, hid);
      ConstMatMap w2(p + hid * (L + 1), H, hid);
      ConstVecMap b2(p + hid * (L + 1) + H * hid, H);
      RowMatrix z = x * w1.transpose();
      z.rowwise() += b1.transpose();
      RowMatrix a = z.cwiseMax(0.0);
      RowMatrix y = a * w2.transpose();
      y.rowwise() += b2.transpose();
      return y;
    }
    case ModelKind::sparsetsf: {
      const auto w = cfg.period;
      const auto a = L / static_cast<Eigen::Index>(w);
      const auto c = H / static_cast<Eigen::Index>(w);
      ConstMatMap wt(p, c, a);
      ConstVecMap b(p + c * a, c);
      RowMatrix ys = to_strands(x, w) * wt.transpose();
      ys.rowwise() += b.transpose();
      return from_strands(ys, w, x.rows());
    }
  }
  return {};
}

/// Single-window forecast in normalized units.
inline std::vector<double> forward(const Model& model, std::span<const double> input) {
  if (input.size() != model.config.input_len) {
    throw DataError("forward: input length " + std::to_string(input.size()) + " != input_len " +
                    std::to_string(model.config.input_len));
  }
  detail::RowMatrix x(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = input[i];
  const auto y = forward_batch(model, x);
  return std::vector<double>(y.data(), y.data() + y.size());
}

/// Mean loss over all B*H outputs; writes d(loss)/d(parameters) when grad is non-null.
inline double loss_and_gradient(const Model& model, const detail::RowMatrix& x, const detail::RowMatrix& target,
                                LossKind loss, Eigen::VectorXd* grad) {
  using namespace detail;
  const auto& cfg = model.config;
  const auto L = static_cast<Eigen::Index>(cfg.input_len);
  const auto H = static_cast<Eigen::Index>(cfg.horizon);
  const double count = static_cast<double>(x.rows() * H);
  const double* p = model.parameters.data();

  auto loss_of = [&](const RowMatrix& y, RowMatrix* dy) {
    const RowMatrix diff = y - target;
    double value = 0.0;
    if (loss == LossKind::mse) {
      value = diff.squaredNorm() / count;
      if (dy) *dy = diff * (2.0 / count);
    } else {
      value = diff.cwiseAbs().sum() / count;
      if (dy) *dy = diff.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }) / count;
    }
    return value;
  };

  if (grad) grad->setZero(model.parameters.size());
  switch (cfg.kind) {
    case ModelKind::linear: {
      ConstMatMap w(p, H, L);
      ConstVecMap b(p + H * L, H);
      RowMatrix y = x * w.transpose();
      y.rowwise() += b.transpose();
      if (!grad) return loss_of(y, nullptr);
      RowMatrix dy;
      const double value = loss_of(y, &dy);
      MatMap(grad->data(), H, L).noalias() = dy.transpose() * x;
      VecMap(grad->data() + H * L, H) = dy.colwise().sum().transpose();
      return value;
    }
    case ModelKind::mlp: {
      const auto hid = static_cast<Eigen::Index>(cfg.hidden);
      ConstMatMap w1(p, hid, L);
      ConstVecMap b1(p + hid * L, hid);
      ConstMatMap w2(p + hid * (L + 1), H, hid);
      ConstVecMap b2(p + hid * (L + 1) + H * hid, H);
      RowMatrix z = x * w1.transpose();
      z.rowwise() += b1.transpose();
      const RowMatrix a = z.cwiseMax(0.0);
      RowMatrix y = a * w2.transpose();
      y.rowwise() += b2.transpose();
      if (!grad) return loss_of(y, nullptr);
      RowMatrix dy;
      const double value = loss_of(y, &dy);
      double* g = grad->data();
      MatMap(g + hid * (L + 1), H, hid).noalias() = dy.transpose() * a;
      VecMap(g + hid * (L + 1) + H * hid, H) = dy.colwise().sum().transpose();
      RowMatrix dz = dy * w2;
      dz = dz.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
      MatMap(g, hid, L).noalias() = dz.transpose() * x;
      VecMap(g + hid * L, hid) = dz.colwise().sum().transpose();
      return value;
    }
    case ModelKind::sparsetsf: {
      const auto w = cfg.period;
      const auto sa = L / static_cast<Eigen::Index>(w);
      const auto sc = H / static_cast<Eigen::Index>(w);
      ConstMatMap wt(p, sc, sa);
      ConstVecMap b(p + sc * sa, sc);
      const RowMatrix s = to_strands(x, w);
      RowMatrix ys = s * wt.transpose();
      ys.rowwise() += b.transpose();
      const RowMatrix y = from_strands(ys, w, x.rows());
      if (!grad) return loss_of(y, nullptr);
      RowMatrix dy;
      const double value = loss_of(y, &dy);
      const RowMatrix dys = to_strands(dy, w);
      MatMap(grad->data(), sc, sa).noalias() = dys.transpose() * s;
      VecMap(grad->data() + sc * sa, sc) = dys.colwise().sum().transpose();
      return value;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Training

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  LossKind loss = LossKind::mse;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Model model;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

/// Copies the normalized input and target rows of the selected windows.
inline void gather_batch(const NormalizedStore& data, const WindowSet& windows, std::span<const std::size_t> idx,
                         detail::RowMatrix& x, detail::RowMatrix& t) {
  const auto L = static_cast<Eigen::Index>(windows.input_len);
  const auto H = static_cast<Eigen::Index>(windows.horizon);
  x.resize(static_cast<Eigen::Index>(idx.size()), L);
  t.resize(static_cast<Eigen::Index>(idx.size()), H);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& w = windows.entries[idx[r]];
    const auto row = data.series(w.location_id);
    if (w.start + windows.input_len + windows.horizon > row.size()) throw DataError("window exceeds series");
    const double* src = row.data() + w.start;
    std::copy(src, src + L, x.row(static_cast<Eigen::Index>(r)).data());
    std::copy(src + L, src + L + H, t.row(static_cast<Eigen::Index>(r)).data());
  }
}

/// Mean loss over a window set in normalized units, evaluated in fixed-size chunks.
inline double dataset_loss(const Model& model, const NormalizedStore& data, const WindowSet& windows, LossKind loss) {
  if (windows.empty()) return 0.0;
  constexpr std::size_t chunk = 4096;
  double total = 0.0;
  std::vector<std::size_t> idx;
  detail::RowMatrix x, t;
  for (std::size_t begin = 0; begin < windows.size(); begin += chunk) {
    const std::size_t end = std::min(windows.size(), begin + chunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    gather_batch(data, windows, idx, x, t);
    total += loss_and_gradient(model, x, t, loss, nullptr) * static_cast<double>(end - begin);
  }
  return total / static_cast<double>(windows.size());
}

/// Mini-batch training on normalized windows. With a validation set, keeps the
/// parameters of the best validation epoch and stops after `patience` epochs
/// without improvement.
inline TrainResult train(Model model, const WindowSet& windows, const NormalizedStore& data, const TrainConfig& tc,
                         const WindowSet* validation = nullptr) {
  if (windows.empty()) throw DataError("train: empty window set");
  if (windows.input_len != model.config.input_len || windows.horizon != model.config.horizon) {
    throw ConfigError("train: window shape does not match the model");
  }
  if (tc.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  TrainResult result{model, {}, {}, 0, false};
  if (tc.epochs == 0) return result;

  const auto n_params = model.parameters.size();
  Eigen::VectorXd grad(n_params);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(n_params);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n_params);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t step = 0;

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(tc.seed);
  detail::RowMatrix x, t;

  const bool use_val = validation && !validation->empty();
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params = model.parameters;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += tc.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tc.batch_size);
      gather_batch(data, windows, std::span<const std::size_t>(order).subspan(begin, end - begin), x, t);
      const double batch_loss = loss_and_gradient(model, x, t, tc.loss, &grad);
      if (!std::isfinite(batch_loss) || !grad.allFinite()) {
        throw TrainingError("training diverged in epoch " + std::to_string(epoch + 1) +
                            " (non-finite loss); lower the learning rate (currently " +
                            io::format_double(tc.learning_rate) + ")");
      }
      epoch_loss += batch_loss * static_cast<double>(end - begin);
      ++step;
      if (tc.optimizer == OptimizerKind::adam) {
        m1 = beta1 * m1 + (1.0 - beta1) * grad;
        m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        model.parameters.array() -=
            tc.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + adam_eps);
      } else {
        model.parameters -= tc.learning_rate * grad;
      }
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    if (use_val) {
      const double v = dataset_loss(model, data, *validation, tc.loss);
      if (!std::isfinite(v)) throw TrainingError("validation loss is not finite; lower the learning rate");
      result.val_loss.push_back(v);
      if (v < best_val) {
        best_val = v;
        best_params = model.parameters;
        result.best_epoch = epoch + 1;
        since_best = 0;
      } else if (++since_best >= tc.patience) {
        result.early_stopped = true;
        break;
      }
    } else {
      result.best_epoch = epoch + 1;
    }
  }
  result.model = model;
  if (use_val) result.model.parameters = best_params;
  return result;
}

/// Continues training a copy of `foundation` on a sub-dataset.
inline TrainResult fine_tune(const Model& foundation, const WindowSet& sub_windows, const NormalizedStore& data,
                             const TrainConfig& tc, const WindowSet* validation = nullptr) {
  if (sub_windows.empty()) throw DataError("fine_tune: sub-dataset has no training windows after pruning");
  return train(foundation, sub_windows, data, tc, validation);
}

// ---------------------------------------------------------------------------
// Evaluation

inline constexpr double kMapeFloor = 1.0;

struct EvalMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent
  std::vector<double> per_step_mae;
  std::size_t n_points = 0;
  std::size_t mape_excluded = 0;
};

/// Metrics over row-major (n_windows x horizon) forecasts and actuals, in raw units.
/// MAPE skips actuals with |y| <= mape_floor.
inline EvalMetrics compute_metrics(std::span<const double> predicted, std::span<const double> actual,
                                   std::size_t horizon, double mape_floor = kMapeFloor) {
  if (predicted.size() != actual.size() || horizon == 0 || actual.size() % horizon != 0 || actual.empty()) {
    throw DataError("compute_metrics: shapes do not match");
  }
  EvalMetrics m;
  m.n_points = actual.size();
  m.per_step_mae.assign(horizon, 0.0);
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  std::size_t pct_n = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = predicted[i] - actual[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    m.per_step_mae[i % horizon] += std::abs(e);
    if (std::abs(actual[i]) > mape_floor) {
      pct_sum += std::abs(e) / std::abs(actual[i]);
      ++pct_n;
    } else {
      ++m.mape_excluded;
    }
  }
  const double n = static_cast<double>(actual.size());
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.mape = pct_n ? 100.0 * pct_sum / static_cast<double>(pct_n) : 0.0;
  const double per_step_n = n / static_cast<double>(horizon);
  for (auto& v : m.per_step_mae) v /= per_step_n;
  return m;
}

/// Forecasts every window of the target inside `range` (stride 1), denormalizes,
/// and scores against the raw series.
inline EvalMetrics evaluate(const Model& model, const NormalizedStore& data, LocationId target, IndexRange range) {
  const auto& store = data.store();
  const LocationId ids[] = {target};
  const WindowSet windows = make_windows(store, range, ids, model.config.input_len, model.config.horizon, 1);
  if (windows.empty()) throw DataError("evaluate: range too short for a single window");
  const std::size_t row = store.row_of(target);
  const auto raw = store.row(row);
  const std::size_t H = model.config.horizon;
  std::vector<double> predicted(windows.size() * H);
  std::vector<double> actual(windows.size() * H);
  constexpr std::size_t chunk = 4096;
  std::vector<std::size_t> idx;
  detail::RowMatrix x, t;
  for (std::size_t begin = 0; begin < windows.size(); begin += chunk) {
    const std::size_t end = std::min(windows.size(), begin + chunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    gather_batch(data, windows, idx, x, t);
    const auto y = forward_batch(model, x);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const std::size_t start = windows.entries[idx[r]].start + model.config.input_len;
      for (std::size_t h = 0; h < H; ++h) {
        predicted[idx[r] * H + h] = data.scaler().invert(row, y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(h)));
        actual[idx[r] * H + h] = raw[start + h];
      }
    }
  }
  return compute_metrics(predicted, actual, H);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace detail {
constexpr std::string_view kCheckpointMagic = "DCATSCK1";
}

/// Header (magic, kind, input_len, horizon, hidden, period, seed, n_params)
/// followed by little-endian f64 parameters.
inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  io::write_magic(out, detail::kCheckpointMagic);
  const auto& c = model.config;
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.kind));
  io::write_le<std::uint64_t>(out, c.input_len);
  io::write_le<std::uint64_t>(out, c.horizon);
  io::write_le<std::uint64_t>(out, c.hidden);
  io::write_le<std::uint64_t>(out, c.period);
  io::write_le<std::uint64_t>(out, c.seed);
  io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.parameters.size()));
  for (Eigen::Index i = 0; i < model.parameters.size(); ++i) io::write_le<double>(out, model.parameters[i]);
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  io::expect_magic(in, detail::kCheckpointMagic, path.string());
  ModelConfig c;
  const auto kind = io::read_le<std::uint32_t>(in);
  if (kind > 2) throw DataError(path.string() + ": unknown model kind");
  c.kind = static_cast<ModelKind>(kind);
  c.input_len = io::read_le<std::uint64_t>(in);
  c.horizon = io::read_le<std::uint64_t>(in);
  c.hidden = io::read_le<std::uint64_t>(in);
  c.period = io::read_le<std::uint64_t>(in);
  c.seed = io::read_le<std::uint64_t>(in);
  c.validate();
  const auto n = io::read_le<std::uint64_t>(in);
  if (n != c.parameter_count()) throw DataError(path.string() + ": parameter count does not match header");
  Model m{c, Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < m.parameters.size(); ++i) m.parameters[i] = io::read_le<double>(in);
  return m;
}

}  // namespace dcats
