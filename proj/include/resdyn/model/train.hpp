#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "resdyn/core/check.hpp"
#include "resdyn/core/rng.hpp"
#include "resdyn/core/tape.hpp"
#include "resdyn/model/fdt.hpp"
#include "resdyn/model/fdt_config.hpp"
#include "resdyn/sim/dataset.hpp"

namespace resdyn::model {

struct Anchor {
  std::size_t run;
  std::size_t t;  // forecast origin: window rows [t - t_long + 1, t], targets [t, t + k]
};

/// Recorded runs reorganized as channel-major series plus the anchor lists
/// of an 80/10/10 contiguous split per run (no random sample mixing, so
/// overlapping windows never straddle the split in both directions).
class TrainingData {
 public:
  TrainingData(const std::vector<sim::RunRecording>& runs, const FdtConfig& cfg,
               std::size_t anchor_stride = 1)
      : cfg_(cfg), stride_(anchor_stride == 0 ? 1 : anchor_stride) {
    RESDYN_REQUIRE(!runs.empty(), "training data: no runs");
    const std::size_t dv = cfg.d_v();
    const std::size_t need = cfg.t_long + cfg.horizon + 1;
    for (const sim::RunRecording& run : runs) {
      RESDYN_REQUIRE(run.n == cfg.n, "training data: run DOF does not match model");
      RESDYN_REQUIRE(run.samples.size() >= need,
                     "training data: run shorter than t_long + k + 1 samples");
      Series s;
      const auto len = static_cast<Eigen::Index>(run.samples.size());
      s.inputs.resize(static_cast<Eigen::Index>(dv), len);
      s.targets.resize(static_cast<Eigen::Index>(cfg.n), len);
      for (Eigen::Index t = 0; t < len; ++t) {
        const sim::ResidualSample& smp = run.samples[static_cast<std::size_t>(t)];
        for (std::size_t i = 0; i < cfg.n; ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          s.inputs(ii, t) = smp.chi(ii);
          s.inputs(static_cast<Eigen::Index>(cfg.n + i), t) = smp.chi_dot(ii);
          s.inputs(static_cast<Eigen::Index>(2 * cfg.n + i), t) = smp.tau(ii);
          s.targets(ii, t) = smp.r(ii);
        }
      }
      series_.push_back(std::move(s));
    }
    build_anchors();
    fit_stats();
  }

  const std::vector<Anchor>& train_anchors() const { return train_; }
  const std::vector<Anchor>& val_anchors() const { return val_; }
  const std::vector<Anchor>& test_anchors() const { return test_; }

  const Eigen::VectorXd& input_mean() const { return in_mean_; }
  const Eigen::VectorXd& input_std() const { return in_std_; }
  const Eigen::VectorXd& target_mean() const { return out_mean_; }
  const Eigen::VectorXd& target_std() const { return out_std_; }

  void apply_normalization(FdtModel& model) const {
    model.set_normalization(in_mean_, in_std_, out_mean_, out_std_);
  }

  /// Assemble one pre-normalized batch from anchors[first, first+count).
  /// Normalization statistics come from the model so training and
  /// deployment use identical transforms.
  void fill_batch(const std::vector<Anchor>& anchors, std::size_t first, std::size_t count,
                  const FdtModel& model, core::Tensor& short_stack, core::Tensor& long_stack,
                  core::Tensor& target_stack) const {
    const FdtConfig& cfg = model.config();
    const std::size_t dv = cfg.d_v();
    short_stack = core::Tensor(count * dv, cfg.t_short);
    long_stack = core::Tensor(count * dv, cfg.t_long);
    target_stack = core::Tensor(count, cfg.outputs());
    const Eigen::VectorXd& im = model.input_mean();
    const Eigen::VectorXd& is = model.input_std();
    const Eigen::VectorXd& om = model.target_mean();
    const Eigen::VectorXd& os = model.target_std();
    for (std::size_t b = 0; b < count; ++b) {
      const Anchor a = anchors[first + b];
      const Series& s = series_[a.run];
      for (std::size_t i = 0; i < dv; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double mu = im(ii);
        const double inv_sd = 1.0 / is(ii);
        const std::size_t row = b * dv + i;
        for (std::size_t c = 0; c < cfg.t_long; ++c) {
          const auto tc = static_cast<Eigen::Index>(a.t - cfg.t_long + 1 + c);
          long_stack.at(row, c) = (s.inputs(ii, tc) - mu) * inv_sd;
        }
        for (std::size_t c = 0; c < cfg.t_short; ++c) {
          const auto tc = static_cast<Eigen::Index>(a.t - cfg.t_short + 1 + c);
          short_stack.at(row, c) = (s.inputs(ii, tc) - mu) * inv_sd;
        }
      }
      for (std::size_t j = 0; j <= cfg.horizon; ++j)
        for (std::size_t dof = 0; dof < cfg.n; ++dof) {
          const auto di = static_cast<Eigen::Index>(dof);
          const auto tj = static_cast<Eigen::Index>(a.t + j);
          target_stack.at(b, j * cfg.n + dof) =
              (s.targets(di, tj) - om(di)) / os(di);
        }
    }
  }

  std::size_t run_count() const { return series_.size(); }

 private:
  struct Series {
    Eigen::MatrixXd inputs;   // d_v x len, raw units
    Eigen::MatrixXd targets;  // n x len, raw units
  };

  void build_anchors() {
    for (std::size_t r = 0; r < series_.size(); ++r) {
      const auto len = static_cast<std::size_t>(series_[r].inputs.cols());
      const std::size_t lo = cfg_.t_long - 1;
      const std::size_t hi = len - 1 - cfg_.horizon;  // inclusive
      const std::size_t span = hi - lo + 1;
      const std::size_t n_train = static_cast<std::size_t>(0.8 * static_cast<double>(span));
      const std::size_t n_val = static_cast<std::size_t>(0.1 * static_cast<double>(span));
      for (std::size_t k = 0; k < span; ++k) {
        const Anchor a{r, lo + k};
        // Neighboring anchors are near-duplicate windows; the stride thins
        // train/val without shrinking the covered time span.
        if (k < n_train) {
          if (k % stride_ == 0) train_.push_back(a);
        } else if (k < n_train + n_val) {
          if (k % stride_ == 0) val_.push_back(a);
        } else {
          test_.push_back(a);
        }
      }
    }
    RESDYN_REQUIRE(!train_.empty() && !val_.empty(),
                   "training data: split produced an empty train or val set");
  }

  /// Per-channel z-score statistics over the train-region samples only.
  void fit_stats() {
    const auto dv = static_cast<Eigen::Index>(cfg_.d_v());
    const auto n = static_cast<Eigen::Index>(cfg_.n);
    in_mean_ = Eigen::VectorXd::Zero(dv);
    in_std_ = Eigen::VectorXd::Zero(dv);
    out_mean_ = Eigen::VectorXd::Zero(n);
    out_std_ = Eigen::VectorXd::Zero(n);
    double count = 0.0;
    for (const Anchor& a : train_) {
      const Series& s = series_[a.run];
      const auto t = static_cast<Eigen::Index>(a.t);
      in_mean_ += s.inputs.col(t);
      out_mean_ += s.targets.col(t);
      count += 1.0;
    }
    in_mean_ /= count;
    out_mean_ /= count;
    for (const Anchor& a : train_) {
      const Series& s = series_[a.run];
      const auto t = static_cast<Eigen::Index>(a.t);
      in_std_ += (s.inputs.col(t) - in_mean_).cwiseAbs2();
      out_std_ += (s.targets.col(t) - out_mean_).cwiseAbs2();
    }
    in_std_ = (in_std_ / count).cwiseSqrt().cwiseMax(1e-8);
    out_std_ = (out_std_ / count).cwiseSqrt().cwiseMax(1e-8);
  }

  FdtConfig cfg_;
  std::size_t stride_ = 1;
  std::vector<Series> series_;
  std::vector<Anchor> train_, val_, test_;
  Eigen::VectorXd in_mean_, in_std_, out_mean_, out_std_;
};

struct TrainHyper {
  double lr = 1e-3;
  std::size_t batch = 256;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  std::size_t anchor_stride = 1;  // thin near-duplicate windows in train/val
};

struct EpochRecord {
  std::size_t epoch;
  double train_loss;  // mean squared error per (sample, step) in normalized units
  double val_loss;
  double seconds;     // wall time, written to the timing sidecar only
};

struct TrainResult {
  std::vector<EpochRecord> log;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

namespace detail {

inline double batch_mean_loss(FdtModel& model, const TrainingData& data,
                              const std::vector<Anchor>& anchors, std::size_t first,
                              std::size_t count, bool with_grad, double* grad_scale_out) {
  core::Tensor short_stack, long_stack, target_stack;
  data.fill_batch(anchors, first, count, model, short_stack, long_stack, target_stack);
  core::Tape tape(with_grad);
  core::TapeBinding bind(tape, model.params());
  FdtModel::BatchForward fwd =
      model.forward_batch(tape, bind, short_stack, long_stack, count);
  core::NodeId targets = tape.leaf(target_stack);
  core::NodeId sum_node = tape.sum_sq_diff(fwd.base_norm, targets);
  const double denom =
      static_cast<double>(count) * static_cast<double>(model.config().horizon + 1);
  const double mean = tape.value(sum_node).at(0, 0) / denom;
  if (with_grad) {
    core::NodeId scaled = tape.scale(sum_node, 1.0 / denom);
    tape.backward(scaled);
    bind.accumulate_grads();
  }
  if (grad_scale_out) *grad_scale_out = denom;
  return mean;
}

}  // namespace detail

/// Adam training with validation-based early stopping; the returned model
/// carries the best-validation parameters. Deterministic for a fixed seed.
inline TrainResult train_fdt(FdtModel& model, const TrainingData& data, const TrainHyper& hp,
                             std::uint64_t seed) {
  RESDYN_REQUIRE(hp.epochs >= 1 && hp.batch >= 1, "train: bad hyperparameters");
  core::Rng rng(core::Rng::splitmix(seed ^ 0x747261696e666474ULL));
  std::vector<Anchor> order = data.train_anchors();
  const std::vector<Anchor>& val = data.val_anchors();

  TrainResult result;
  std::vector<double> best_values = model.params().gather_values();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Fisher-Yates with the session generator: deterministic epoch order.
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double train_sum = 0.0;
    std::size_t train_batches = 0;
    for (std::size_t first = 0; first < order.size(); first += hp.batch) {
      const std::size_t count = std::min(hp.batch, order.size() - first);
      const double loss =
          detail::batch_mean_loss(model, data, order, first, count, /*with_grad=*/true, nullptr);
      RESDYN_REQUIRE(std::isfinite(loss),
                     "train: non-finite loss at epoch " << epoch << ", batch " << train_batches
                                                        << " — diverged (reduce lr?)");
      model.params().adam_step(hp.lr);
      train_sum += loss;
      ++train_batches;
      ++result.steps;
    }

    double val_sum = 0.0;
    std::size_t val_batches = 0;
    for (std::size_t first = 0; first < val.size(); first += hp.batch) {
      const std::size_t count = std::min(hp.batch, val.size() - first);
      val_sum +=
          detail::batch_mean_loss(model, data, val, first, count, /*with_grad=*/false, nullptr) *
          static_cast<double>(count);
      val_batches += count;
    }
    const double val_loss = val_sum / static_cast<double>(val_batches);
    RESDYN_REQUIRE(std::isfinite(val_loss), "train: non-finite validation loss");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(
        {epoch, train_sum / static_cast<double>(train_batches), val_loss, secs});

    if (val_loss < result.best_val) {
      result.best_val = val_loss;
      result.best_epoch = epoch;
      best_values = model.params().gather_values();
      since_best = 0;
    } else if (++since_best > hp.patience) {
      break;
    }
  }

  model.params().scatter_values(best_values);
  return result;
}

}  // namespace resdyn::model
