#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpf/core.hpp"
#include "mpf/frame.hpp"
#include "mpf/rng.hpp"
#include "mpf/text_io.hpp"

namespace mpf {

// Binary-classification evaluation. Everything here is a pure function over
// immutable inputs and safe to call from any number of threads.
//
// Conventions, fixed so the oracle equivalences are exact:
//   - a score ties with the threshold -> predicted positive
//   - AUC ties between a positive and a negative score count 1/2
//   - degenerate F1 (no positive predictions or no positives) is 0, flagged

struct ScoredFrame {
  double score = 0.0;
  std::uint8_t label = 0;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

inline Confusion confusion(std::span<const ScoredFrame> scored, double threshold) {
  if (scored.empty()) throw std::invalid_argument("confusion: empty score list");
  Confusion c;
  for (const ScoredFrame& s : scored) {
    bool pred = s.score >= threshold;
    if (s.label) {
      pred ? ++c.tp : ++c.fn;
    } else {
      pred ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

inline double accuracy(const Confusion& c) {
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

/// f1 = 2PR/(P+R); returns 0 when tp+fp, tp+fn or P+R is zero. The flag (if
/// given) records that the convention fired.
inline double f1_score(const Confusion& c, bool* degenerate = nullptr) {
  if (degenerate) *degenerate = false;
  if (c.tp + c.fp == 0 || c.tp + c.fn == 0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (precision + recall == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return 2.0 * precision * recall / (precision + recall);
}

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Sweep points from threshold +inf down to the lowest score; fpr and tpr are
/// nondecreasing along the curve and the endpoints are (0,0) and (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
};

struct RocResult {
  RocCurve curve;
  double auc = 0.0;
};

/// ROC by descending unique-threshold sweep; AUC by trapezoidal integration
/// over the polyline (equal to the Mann-Whitney pair statistic with ties
/// counting 1/2).
inline RocResult roc_auc(std::span<const ScoredFrame> scored) {
  std::size_t pos = 0, neg = 0;
  for (const ScoredFrame& s : scored) {
    if (!std::isfinite(s.score)) throw std::invalid_argument("roc_auc: non-finite score");
    s.label ? ++pos : ++neg;
  }
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("roc_auc: need both classes, got " + std::to_string(pos) +
                                " positive / " + std::to_string(neg) + " negative");
  }

  std::vector<ScoredFrame> sorted(scored.begin(), scored.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredFrame& a, const ScoredFrame& b) {
    return a.score > b.score;
  });

  RocResult out;
  out.curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double inv_pos = 1.0 / static_cast<double>(pos);
  double inv_neg = 1.0 / static_cast<double>(neg);
  std::size_t tp = 0, fp = 0;
  double auc = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    double score = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == score) {
      sorted[i].label ? ++tp : ++fp;
      ++i;
    }
    double fpr = static_cast<double>(fp) * inv_neg;
    double tpr = static_cast<double>(tp) * inv_pos;
    out.curve.points.push_back({score, fpr, tpr});
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  out.auc = auc;
  return out;
}

struct EerPoint {
  double value = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double threshold = 0.0;  // sweep threshold ending the crossing segment
};

/// Equal error rate: the point on the ROC polyline where fpr equals
/// 1 - tpr, located by linear interpolation along the crossing segment. The
/// (0,0) and (1,1) endpoints guarantee a crossing.
inline EerPoint eer_point(const RocCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 2) throw std::invalid_argument("eer: degenerate curve");
  auto gap = [](const RocPoint& p) { return p.fpr + p.tpr - 1.0; };
  for (std::size_t i = 1; i < pts.size(); ++i) {
    double g0 = gap(pts[i - 1]);
    double g1 = gap(pts[i]);
    if (g1 < 0.0) continue;
    EerPoint out;
    out.threshold = pts[i].threshold;
    if (g1 == 0.0) {
      out.fpr = pts[i].fpr;
      out.fnr = 1.0 - pts[i].tpr;
    } else {
      double lambda = g0 == g1 ? 0.0 : -g0 / (g1 - g0);
      out.fpr = pts[i - 1].fpr + lambda * (pts[i].fpr - pts[i - 1].fpr);
      out.fnr = 1.0 - (pts[i - 1].tpr + lambda * (pts[i].tpr - pts[i - 1].tpr));
    }
    out.value = (out.fpr + out.fnr) * 0.5;
    return out;
  }
  throw std::logic_error("eer: curve never crosses fpr = fnr");
}

inline double eer(const RocCurve& curve) { return eer_point(curve).value; }

enum class ThresholdPolicy : std::uint8_t { Fixed, DevSelected };

inline std::string_view to_string(ThresholdPolicy p) {
  return p == ThresholdPolicy::Fixed ? "fixed" : "dev-selected";
}

/// Threshold maximizing accuracy over the given scores (sweeps the unique
/// scores; ties keep the highest threshold).
inline double select_threshold_max_accuracy(std::span<const ScoredFrame> scored) {
  if (scored.empty()) throw std::invalid_argument("select_threshold: empty score list");
  std::vector<double> thresholds;
  thresholds.reserve(scored.size() + 1);
  for (const ScoredFrame& s : scored) thresholds.push_back(s.score);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  double best_acc = -1.0, best_thr = 0.5;
  for (double thr : thresholds) {
    double acc = accuracy(confusion(scored, thr));
    if (acc > best_acc) {
      best_acc = acc;
      best_thr = thr;
    }
  }
  return best_thr;
}

struct MetricReport {
  double accuracy = 0.0;
  double auc = 0.0;
  double eer = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold_used = 0.5;
  ThresholdPolicy policy = ThresholdPolicy::Fixed;
  bool f1_degenerate = false;
};

inline MetricReport report(std::span<const ScoredFrame> scored, double threshold,
                           ThresholdPolicy policy = ThresholdPolicy::Fixed) {
  MetricReport r;
  Confusion c = confusion(scored, threshold);
  r.tp = c.tp;
  r.fp = c.fp;
  r.tn = c.tn;
  r.fn = c.fn;
  r.accuracy = accuracy(c);
  r.f1 = f1_score(c, &r.f1_degenerate);
  RocResult roc = roc_auc(scored);
  r.auc = roc.auc;
  r.eer = eer(roc.curve);
  r.threshold_used = threshold;
  r.policy = policy;
  return r;
}

/// One table row: model, modalities, acc, auc, eer, f1.
inline std::string metric_report_row(std::string_view model, std::string_view modalities,
                                     const MetricReport& r) {
  std::string row;
  row += model;
  row += ',';
  row += modalities;
  row += ',';
  append_double(row, r.accuracy);
  row += ',';
  append_double(row, r.auc);
  row += ',';
  append_double(row, r.eer);
  row += ',';
  append_double(row, r.f1);
  return row;
}

/// ROC export: threshold,fpr,tpr per sweep point.
inline std::string roc_to_csv(const RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve.points) {
    if (std::isinf(p.threshold)) {
      out += "inf";
    } else {
      append_double(out, p.threshold);
    }
    out += ',';
    append_double(out, p.fpr);
    out += ',';
    append_double(out, p.tpr);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// One-dimensional modality projection for visual inspection: first principal
// component of a subject's standardized modality features via power
// iteration, scaled so the maximum-magnitude score is exactly +1.

enum class Modality : std::uint8_t { Face, Speech, Car };

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Face: return "face";
    case Modality::Speech: return "speech";
    case Modality::Car: return "car";
  }
  return "?";
}

inline std::vector<double> project_modality_1d(std::span<const FeatureFrame> frames,
                                               Modality modality,
                                               double tolerance = 1e-9,
                                               std::size_t max_iterations = 1000) {
  if (frames.size() < 2) {
    throw std::invalid_argument("project_modality_1d: need at least 2 frames");
  }
  auto pick = [modality](const FeatureFrame& f) -> const Vector& {
    switch (modality) {
      case Modality::Face: return f.face;
      case Modality::Speech: return f.speech;
      default: return f.car;
    }
  };
  std::size_t n = frames.size();
  std::size_t d = pick(frames[0]).size();

  // Standardize the modality block in local copies.
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const FeatureFrame& f : frames) {
    const Vector& x = pick(f);
    if (x.size() != d) throw std::invalid_argument("project_modality_1d: ragged frames");
    for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
  }
  double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) mean[j] *= inv_n;
  for (const FeatureFrame& f : frames) {
    const Vector& x = pick(f);
    for (std::size_t j = 0; j < d; ++j) {
      double c = x[j] - mean[j];
      sd[j] += c * c;
    }
  }
  bool any_variance = false;
  for (std::size_t j = 0; j < d; ++j) {
    sd[j] = std::sqrt(sd[j] * inv_n);
    if (sd[j] > 1e-9 * std::max(1.0, std::abs(mean[j]))) any_variance = true;
  }
  if (!any_variance) {
    throw std::invalid_argument("project_modality_1d: zero-variance modality");
  }
  std::vector<std::vector<double>> X(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& x = pick(frames[i]);
    for (std::size_t j = 0; j < d; ++j) {
      X[i][j] = sd[j] <= 1e-9 * std::max(1.0, std::abs(mean[j]))
                    ? 0.0
                    : (x[j] - mean[j]) / sd[j];
    }
  }

  // Power iteration on the covariance X^T X / n without forming it.
  Rng rng(derive_seed(0x1DCAULL, d));
  std::vector<double> v(d);
  double norm = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    v[j] = rng.uniform(-1.0, 1.0);
    norm += v[j] * v[j];
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;

  std::vector<double> xv(n), next(d);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += X[i][j] * v[j];
      xv[i] = acc;
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) next[j] += X[i][j] * xv[i];
    }
    double nn = 0.0;
    for (double x : next) nn += x * x;
    nn = std::sqrt(nn);
    if (nn == 0.0) throw std::invalid_argument("project_modality_1d: zero covariance");
    double diff = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      next[j] /= nn;
      double delta = next[j] - v[j];
      diff += delta * delta;
    }
    v = next;
    if (std::sqrt(diff) < tolerance) break;
  }

  std::vector<double> scores(n);
  std::size_t arg_max = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += X[i][j] * v[j];
    scores[i] = acc;
    if (std::abs(scores[i]) > std::abs(scores[arg_max])) arg_max = i;
  }
  double pivot = scores[arg_max];
  if (pivot == 0.0) throw std::invalid_argument("project_modality_1d: all projections zero");
  for (double& s : scores) s /= pivot;
  return scores;
}

}  // namespace mpf
