#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpf/checkpoint.hpp"
#include "mpf/data.hpp"
#include "mpf/metrics.hpp"
#include "mpf/model.hpp"

namespace mpf {

// Optimization stack: BCE loss, Adam with bias correction, a step learning
// rate schedule and a shuffled mini-batch epoch loop that snapshots the
// parameters with the best dev AUC. The loop is sequential and fully
// deterministic: (config, dataset) fixes every shuffle, dropout mask and
// update, so reruns are bit-identical.

struct TrainConfig {
  std::uint64_t seed = 42;
  std::size_t epochs = 30;
  std::size_t batch_size = 256;
  double lr0 = 1e-3;
  std::size_t lr_step_every = 10;  // epochs per decay step
  double lr_decay = 0.5;           // multiplicative, in (0, 1]
  double dropout_rate = 0.3;
  std::size_t h = 16;
  std::size_t head_width = 8;
  Variant variant = Variant::Mpf;
  ModalityMask mask;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double pos_weight = 1.0;  // BCE weight on positive frames
  double hinge_l2 = 1e-4;   // L2 strength for the linear-hinge baseline

  ModelDims model_dims(const FeatureDims& feat) const {
    ModelDims d;
    d.feat = feat;
    d.h = h;
    d.head_width = head_width;
    return d;
  }
};

/// Numerically stable binary cross-entropy of a raw logit against a 0/1
/// label: softplus(-(2 label - 1) * logit).
inline double bce_loss(double logit, int label) {
  double t = -(2.0 * static_cast<double>(label) - 1.0) * logit;
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

/// First/second moment accumulators per learnable view.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  static AdamState init(const std::vector<ParamView>& views) {
    AdamState s;
    for (const ParamView& p : views) {
      s.m.emplace_back(p.size, 0.0);
      s.v.emplace_back(p.size, 0.0);
    }
    return s;
  }
};

/// One Adam update with bias correction. grads is parallel to views.
inline void adam_step(const std::vector<ParamView>& views,
                      const std::vector<std::vector<double>>& grads, AdamState& state,
                      double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  if (views.size() != grads.size() || views.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient shape mismatch");
  }
  ++state.step;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].size != grads[i].size()) {
      throw std::invalid_argument("adam_step: gradient size mismatch for '" +
                                  std::string(views[i].name) + "'");
    }
    double* p = views[i].data;
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t k = 0; k < g.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      double m_hat = m[k] / c1;
      double v_hat = v[k] / c2;
      double denom = std::sqrt(v_hat) + eps;
      if (denom > 0.0) p[k] -= lr * m_hat / denom;
    }
  }
}

/// lr0 * decay^floor(epoch / step_every), epochs counted from 0.
inline double step_lr(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_step_every));
}

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  MetricReport dev;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t selected_epoch = 0;

  friend bool operator==(const TrainLog& a, const TrainLog& b) {
    if (a.selected_epoch != b.selected_epoch || a.epochs.size() != b.epochs.size()) return false;
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
      const EpochLog& x = a.epochs[i];
      const EpochLog& y = b.epochs[i];
      if (x.epoch != y.epoch || x.lr != y.lr || x.train_loss != y.train_loss ||
          x.dev.accuracy != y.dev.accuracy || x.dev.auc != y.dev.auc ||
          x.dev.eer != y.dev.eer || x.dev.f1 != y.dev.f1) {
        return false;
      }
    }
    return true;
  }
};

inline std::string trainlog_to_csv(const TrainLog& log) {
  std::string out = "epoch,lr,train_loss,dev_acc,dev_auc,dev_eer,dev_f1\n";
  for (const EpochLog& e : log.epochs) {
    out += std::to_string(e.epoch);
    out += ',';
    append_double(out, e.lr);
    out += ',';
    append_double(out, e.train_loss);
    out += ',';
    append_double(out, e.dev.accuracy);
    out += ',';
    append_double(out, e.dev.auc);
    out += ',';
    append_double(out, e.dev.eer);
    out += ',';
    append_double(out, e.dev.f1);
    out += '\n';
  }
  return out;
}

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

inline std::vector<ScoredFrame> score_frames(const ModelParams& params,
                                             const std::vector<const FeatureFrame*>& frames) {
  std::vector<ScoredFrame> out;
  out.reserve(frames.size());
  for (const FeatureFrame* f : frames) {
    out.push_back({predict_proba(*f, params), f->label});
  }
  return out;
}

/// Shuffled mini-batch training with per-epoch dev evaluation; returns the
/// snapshot with the best dev AUC (ties resolved to the earliest epoch).
/// Majority records the training-set positive rate and returns immediately;
/// the linear-hinge baseline rides the same loop on its subgradient.
inline TrainResult train(const TrainConfig& cfg, const Dataset& ds) {
  auto train_frames = ds.frames_in(Split::Train);
  auto dev_frames = ds.frames_in(Split::Dev);
  if (train_frames.empty() || dev_frames.empty()) {
    throw std::invalid_argument("train: dataset needs nonempty train and dev splits");
  }

  TrainResult out;
  out.params = init_params(cfg.variant, cfg.mask, cfg.model_dims(ds.dims),
                           cfg.dropout_rate, cfg.seed);

  if (cfg.variant == Variant::Majority) {
    std::size_t pos = 0;
    for (const FeatureFrame* f : train_frames) pos += f->label;
    out.params.majority_rate =
        static_cast<double>(pos) / static_cast<double>(train_frames.size());
    return out;
  }

  auto views = learnable_views(out.params);
  AdamState adam = AdamState::init(views);
  std::vector<std::vector<double>> grads(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) grads[i].assign(views[i].size, 0.0);

  Rng shuffle_rng(derive_seed(cfg.seed, 0x5u));
  Rng dropout_rng(derive_seed(cfg.seed, 0xDu));
  bool use_dropout = cfg.dropout_rate > 0.0 && cfg.variant != Variant::LinearHinge;

  std::vector<std::size_t> order(train_frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ModelParams best_params = out.params;
  double best_auc = -1.0;
  std::size_t best_epoch = 0;

  Tape tape;
  FrameLossScratch scratch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = step_lr(epoch, cfg);
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      double inv_batch = 1.0 / static_cast<double>(stop - start);
      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const FeatureFrame& frame = *train_frames[order[k]];
        tape.reset();
        Vector mask = use_dropout
                          ? dropout_mask(cfg.head_width, cfg.dropout_rate, dropout_rng)
                          : Vector();
        FrameLoss fl = build_frame_loss(tape, out.params, frame, scratch, mask,
                                        cfg.pos_weight, cfg.hinge_l2);
        loss_sum += tape.scalar_value(fl.loss);
        tape.backward(fl.loss);
        accumulate_adjoints(tape, fl, grads, inv_batch);
      }
      adam_step(views, grads, adam, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    auto dev_scores = score_frames(out.params, dev_frames);
    entry.dev = report(dev_scores, 0.5);
    out.log.epochs.push_back(entry);
    if (entry.dev.auc > best_auc) {
      best_auc = entry.dev.auc;
      best_epoch = epoch;
      best_params = out.params;
    }
  }

  if (!out.log.epochs.empty()) {
    out.params = best_params;
    out.log.selected_epoch = best_epoch;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation table: the twelve model rows, trained and evaluated on identical
// splits with row-isolated seeds derived from (seed, row index).

struct AblationRow {
  std::string model;
  std::string modalities;
  Variant variant = Variant::Mpf;
  ModalityMask mask;
  MetricReport test;
  double dev_auc = 0.0;
};

struct AblationSpec {
  const char* model;
  const char* modalities;
  Variant variant;
  const char* mask;
};

/// Row order of the results table: majority, the three single-modality and
/// three two-modality polynomial-fusion rows, then the all-modality
/// baselines and the full model. The cited SVM is realized as a hinge-loss
/// linear classifier, which the row name documents.
inline const std::vector<AblationSpec>& ablation_rows() {
  static const std::vector<AblationSpec> rows{
      {"majority", "-", Variant::Majority, "FSC"},
      {"mpf-1", "F", Variant::Mpf, "F"},
      {"mpf-1", "S", Variant::Mpf, "S"},
      {"mpf-1", "C", Variant::Mpf, "C"},
      {"mpf-2", "F+S", Variant::Mpf, "FS"},
      {"mpf-2", "F+C", Variant::Mpf, "FC"},
      {"mpf-2", "S+C", Variant::Mpf, "SC"},
      {"svm(linear-hinge)", "F+S+C", Variant::LinearHinge, "FSC"},
      {"nn-early", "F+S+C", Variant::NnEarly, "FSC"},
      {"nn-cube", "F+S+C", Variant::NnCube, "FSC"},
      {"nn-tc", "F+S+C", Variant::NnTanhCube, "FSC"},
      {"mpf", "F+S+C", Variant::Mpf, "FSC"},
  };
  return rows;
}

inline std::vector<AblationRow> ablate(const TrainConfig& cfg, const Dataset& ds) {
  auto test_frames = ds.frames_in(Split::Test);
  if (test_frames.empty()) {
    throw std::invalid_argument("ablate: dataset needs a nonempty test split");
  }
  std::vector<AblationRow> out;
  const auto& rows = ablation_rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    TrainConfig row_cfg = cfg;
    row_cfg.variant = rows[i].variant;
    row_cfg.mask = parse_mask(rows[i].mask);
    row_cfg.seed = derive_seed(cfg.seed, 0xAB1A00 + i);
    TrainResult result = train(row_cfg, ds);

    AblationRow row;
    row.model = rows[i].model;
    row.modalities = rows[i].modalities;
    row.variant = rows[i].variant;
    row.mask = row_cfg.mask;
    auto scores = score_frames(result.params, test_frames);
    row.test = report(scores, 0.5);
    if (!result.log.epochs.empty()) {
      row.dev_auc = result.log.epochs[result.log.selected_epoch].dev.auc;
    }
    out.push_back(std::move(row));
  }
  return out;
}

/// Table export in the report row format (model, modalities, acc, auc, eer, f1).
inline std::string ablation_to_csv(const std::vector<AblationRow>& rows) {
  std::string out = "model,modalities,acc,auc,eer,f1\n";
  for (const AblationRow& r : rows) {
    out += metric_report_row(r.model, r.modalities, r.test);
    out += '\n';
  }
  return out;
}

}  // namespace mpf
