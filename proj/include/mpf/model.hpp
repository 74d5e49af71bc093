#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mpf/core.hpp"
#include "mpf/frame.hpp"
#include "mpf/param_view.hpp"
#include "mpf/rng.hpp"
#include "mpf/tape.hpp"

namespace mpf {

// The fusion layer and every baseline it is compared against. All variants
// project each modality to a shared |h|-dimensional space and differ only in
// how the projected vectors are combined before the classifier head:
//
//   Mpf         tanh of a learnable weighted sum of all unimodal, bimodal
//               and trimodal elementwise products
//   NnCube      elementwise (h_F + h_S + h_C + bias)^3
//   NnTanhCube  tanh of the cube
//   NnEarly     raw feature concatenation, no projection
//   LinearHinge linear margin on the concatenation (SVM stand-in)
//   Majority    constant class-prior scorer
//
// Frozen ModelParams are safe to share across threads for inference;
// training mutates one exclusively owned copy.

enum class Variant : std::uint8_t { Mpf, NnCube, NnTanhCube, NnEarly, LinearHinge, Majority };

struct ModalityMask {
  bool face = true;
  bool speech = true;
  bool car = true;

  int count() const { return int(face) + int(speech) + int(car); }
  friend bool operator==(const ModalityMask&, const ModalityMask&) = default;
};

inline std::string to_string(const ModalityMask& m) {
  std::string s;
  if (m.face) s += 'F';
  if (m.speech) s += 'S';
  if (m.car) s += 'C';
  return s;
}

inline ModalityMask parse_mask(std::string_view s) {
  ModalityMask m{false, false, false};
  for (char c : s) {
    switch (c) {
      case 'F': case 'f': m.face = true; break;
      case 'S': case 's': m.speech = true; break;
      case 'C': case 'c': m.car = true; break;
      default:
        throw std::invalid_argument("modality mask: unknown letter '" + std::string(1, c) +
                                    "' (expected subset of FSC)");
    }
  }
  if (m.count() == 0) throw std::invalid_argument("modality mask must be nonempty");
  return m;
}

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Mpf: return "mpf";
    case Variant::NnCube: return "nn-cube";
    case Variant::NnTanhCube: return "nn-tc";
    case Variant::NnEarly: return "nn-early";
    case Variant::LinearHinge: return "linear-hinge";
    case Variant::Majority: return "majority";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "mpf") return Variant::Mpf;
  if (s == "nn-cube") return Variant::NnCube;
  if (s == "nn-tc") return Variant::NnTanhCube;
  if (s == "nn-early") return Variant::NnEarly;
  if (s == "linear-hinge" || s == "svm") return Variant::LinearHinge;
  if (s == "majority") return Variant::Majority;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

struct ModelDims {
  FeatureDims feat;
  std::size_t h = 16;          // fused representation size
  std::size_t head_width = 8;  // hidden layer size

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Per-modality projections to the shared space; all three have |h| rows.
struct ProjectionParams {
  Matrix face;    // |h| x d_F
  Matrix speech;  // |h| x d_S
  Matrix car;     // |h| x d_C
  friend bool operator==(const ProjectionParams&, const ProjectionParams&) = default;
};

/// Term weights and bias of the polynomial fusion. alpha indexes the terms
/// FSC, FS, FC, SC, F, S, C in that order; bias is shared with the cube and
/// tanh-cube variants, which use no alphas.
struct FusionParams {
  std::array<double, 7> alpha{};
  Vector bias;  // length |h|
  friend bool operator==(const FusionParams&, const FusionParams&) = default;
};

/// Two-layer feed-forward head: relu + dropout between the layers, raw logit out.
struct HeadParams {
  Matrix w1;  // head_width x in
  Vector b1;  // head_width
  Matrix w2;  // 1 x head_width
  double b2 = 0.0;
  double dropout_rate = 0.0;  // in [0, 1)
  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct ModelParams {
  Variant variant = Variant::Mpf;
  ModalityMask mask;
  ModelDims dims;
  ProjectionParams proj;    // projected variants
  FusionParams fusion;      // Mpf (alpha+bias); NnCube / NnTanhCube (bias only)
  HeadParams head;          // all neural variants; input width varies
  Vector linear_w;          // LinearHinge
  double linear_b = 0.0;    // LinearHinge
  double majority_rate = 0.5;  // Majority: training-set positive rate

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline bool uses_projection(Variant v) {
  return v == Variant::Mpf || v == Variant::NnCube || v == Variant::NnTanhCube;
}

inline std::size_t masked_concat_width(const ModalityMask& m, const FeatureDims& d) {
  return (m.face ? d.face : 0) + (m.speech ? d.speech : 0) + (m.car ? d.car : 0);
}

inline std::size_t fused_width(Variant v, const ModalityMask& m, const ModelDims& d) {
  return uses_projection(v) ? d.h : masked_concat_width(m, d.feat);
}

namespace detail {
inline Matrix fan_in_uniform(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix w(rows, cols);
  double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  return w;
}
}  // namespace detail

/// Fresh parameters for a variant. Projections and head weights draw from a
/// symmetric uniform range scaled by 1/sqrt(fan-in); every alpha starts at 1
/// so all interaction terms are active from the first step; biases start at 0.
inline ModelParams init_params(Variant variant, const ModalityMask& mask,
                               const ModelDims& dims, double dropout_rate,
                               std::uint64_t seed) {
  if (mask.count() == 0) throw std::invalid_argument("init_params: empty modality mask");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("init_params: dropout rate must be in [0, 1)");
  }
  Rng rng(derive_seed(seed, 0x1217));
  ModelParams p;
  p.variant = variant;
  p.mask = mask;
  p.dims = dims;
  if (uses_projection(variant)) {
    p.proj.face = detail::fan_in_uniform(rng, dims.h, dims.feat.face);
    p.proj.speech = detail::fan_in_uniform(rng, dims.h, dims.feat.speech);
    p.proj.car = detail::fan_in_uniform(rng, dims.h, dims.feat.car);
    p.fusion.alpha.fill(1.0);
    p.fusion.bias = Vector(dims.h, 0.0);
  }
  if (variant == Variant::LinearHinge) {
    p.linear_w = Vector(masked_concat_width(mask, dims.feat), 0.0);
    p.linear_b = 0.0;
  } else if (variant != Variant::Majority) {
    std::size_t in = fused_width(variant, mask, dims);
    p.head.w1 = detail::fan_in_uniform(rng, dims.head_width, in);
    p.head.b1 = Vector(dims.head_width, 0.0);
    p.head.w2 = detail::fan_in_uniform(rng, 1, dims.head_width);
    p.head.b2 = 0.0;
    p.head.dropout_rate = dropout_rate;
  }
  return p;
}

/// Learnable arrays in canonical order. The checkpoint format, the Adam
/// state, the tape bindings and the finite-difference oracle all follow this
/// order. Majority has no gradient-trained parameters.
inline std::vector<ParamView> learnable_views(ModelParams& p) {
  std::vector<ParamView> v;
  if (uses_projection(p.variant)) {
    v.push_back({"w_face", p.proj.face.data(), p.proj.face.size()});
    v.push_back({"w_speech", p.proj.speech.data(), p.proj.speech.size()});
    v.push_back({"w_car", p.proj.car.data(), p.proj.car.size()});
    if (p.variant == Variant::Mpf) {
      v.push_back({"alpha", p.fusion.alpha.data(), p.fusion.alpha.size()});
    }
    v.push_back({"fusion_bias", p.fusion.bias.data(), p.fusion.bias.size()});
  }
  if (p.variant == Variant::LinearHinge) {
    v.push_back({"linear_w", p.linear_w.data(), p.linear_w.size()});
    v.push_back({"linear_b", &p.linear_b, 1});
  } else if (p.variant != Variant::Majority) {
    v.push_back({"head_w1", p.head.w1.data(), p.head.w1.size()});
    v.push_back({"head_b1", p.head.b1.data(), p.head.b1.size()});
    v.push_back({"head_w2", p.head.w2.data(), p.head.w2.size()});
    v.push_back({"head_b2", &p.head.b2, 1});
  }
  return v;
}

struct ProjectedFeatures {
  Vector face;
  Vector speech;
  Vector car;
};

/// h_m = W_m x_m for every modality in the mask; masked-out modalities yield
/// the zero vector of length |h|.
inline ProjectedFeatures project_modalities(const FeatureFrame& f,
                                            const ProjectionParams& p,
                                            const ModalityMask& mask) {
  std::size_t h = p.face.rows();
  ProjectedFeatures out{Vector(h, 0.0), Vector(h, 0.0), Vector(h, 0.0)};
  if (mask.face) out.face = linear_map(p.face, f.face);
  if (mask.speech) out.speech = linear_map(p.speech, f.speech);
  if (mask.car) out.car = linear_map(p.car, f.car);
  return out;
}

/// Polynomial fusion: the weighted sum of the trimodal product, the three
/// bimodal products and the three unimodal terms, plus bias.
///
/// The summation tree is fixed:
///   (((t_FSC + t_FS) + (t_FC + t_SC)) + ((t_F + t_S) + t_C)) + bias
/// so that swapping the F and S inputs together with their term weights, or
/// zeroing a modality, reproduces the reduced polynomial bit for bit.
inline Vector mpf_fuse(const Vector& h_f, const Vector& h_s, const Vector& h_c,
                       const FusionParams& fp) {
  check_same_length(h_f, h_s, "mpf_fuse");
  check_same_length(h_f, h_c, "mpf_fuse");
  check_same_length(h_f, fp.bias, "mpf_fuse(bias)");
  Vector fs = hadamard(h_f, h_s);
  Vector fsc = hadamard(fs, h_c);
  Vector t0 = scale(fp.alpha[0], fsc);
  Vector t1 = scale(fp.alpha[1], fs);
  Vector t2 = scale(fp.alpha[2], hadamard(h_f, h_c));
  Vector t3 = scale(fp.alpha[3], hadamard(h_s, h_c));
  Vector t4 = scale(fp.alpha[4], h_f);
  Vector t5 = scale(fp.alpha[5], h_s);
  Vector t6 = scale(fp.alpha[6], h_c);
  return add(add(add(add(t0, t1), add(t2, t3)), add(add(t4, t5), t6)), fp.bias);
}

/// Elementwise (h_F + h_S + h_C + bias)^3.
inline Vector cube_fuse(const Vector& h_f, const Vector& h_s, const Vector& h_c,
                        const Vector& bias) {
  check_same_length(h_f, h_s, "cube_fuse");
  check_same_length(h_f, h_c, "cube_fuse");
  check_same_length(h_f, bias, "cube_fuse(bias)");
  return activate(add(add(h_f, h_s), add(h_c, bias)), Activation::Cube);
}

inline Vector tanh_cube_fuse(const Vector& h_f, const Vector& h_s, const Vector& h_c,
                             const Vector& bias) {
  return activate(cube_fuse(h_f, h_s, h_c, bias), Activation::Tanh);
}

/// Concatenation of the raw per-modality features in fixed F,S,C order,
/// restricted to the mask.
inline Vector early_fuse(const Vector& x_f, const Vector& x_s, const Vector& x_c,
                         const ModalityMask& mask) {
  Vector out;
  if (mask.face) out = concat(out, x_f);
  if (mask.speech) out = concat(out, x_s);
  if (mask.car) out = concat(out, x_c);
  return out;
}

/// Variant dispatch to the fused representation h_fusion.
inline Vector fuse(const FeatureFrame& frame, const ModelParams& p) {
  check_frame_dims(frame, p.dims.feat);
  switch (p.variant) {
    case Variant::Mpf: {
      ProjectedFeatures h = project_modalities(frame, p.proj, p.mask);
      return activate(mpf_fuse(h.face, h.speech, h.car, p.fusion), Activation::Tanh);
    }
    case Variant::NnCube: {
      ProjectedFeatures h = project_modalities(frame, p.proj, p.mask);
      return cube_fuse(h.face, h.speech, h.car, p.fusion.bias);
    }
    case Variant::NnTanhCube: {
      ProjectedFeatures h = project_modalities(frame, p.proj, p.mask);
      return tanh_cube_fuse(h.face, h.speech, h.car, p.fusion.bias);
    }
    case Variant::NnEarly:
    case Variant::LinearHinge:
      return early_fuse(frame.face, frame.speech, frame.car, p.mask);
    case Variant::Majority:
      break;
  }
  throw std::invalid_argument("fuse: variant has no fused representation");
}

/// Inverted-scaling dropout mask: entries are 1/(1-rate) with probability
/// 1-rate and 0 otherwise, so the expected activation is unchanged.
inline Vector dropout_mask(std::size_t n, double rate, Rng& rng) {
  Vector m(n, 1.0);
  if (rate <= 0.0) return m;
  double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = rng.uniform() >= rate ? keep_scale : 0.0;
  }
  return m;
}

/// Head forward pass with an explicit dropout mask (empty = no dropout).
inline double classify_masked(const Vector& h_fusion, const HeadParams& head,
                              const Vector& mask) {
  if (head.w1.cols() != h_fusion.size()) {
    throw std::invalid_argument("classify: fused width " + std::to_string(h_fusion.size()) +
                                " does not match head input " + std::to_string(head.w1.cols()));
  }
  Vector a = activate(add(linear_map(head.w1, h_fusion), head.b1), Activation::Relu);
  if (!mask.empty()) a = hadamard(a, mask);
  return linear_map(head.w2, a)[0] + head.b2;
}

/// Deterministic inference path.
inline double classify(const Vector& h_fusion, const HeadParams& head) {
  return classify_masked(h_fusion, head, Vector());
}

/// Training path; samples one dropout mask from rng.
inline double classify(const Vector& h_fusion, const HeadParams& head, bool training,
                       Rng& rng) {
  if (!training || head.dropout_rate <= 0.0) return classify_masked(h_fusion, head, Vector());
  return classify_masked(h_fusion, head, dropout_mask(head.b1.size(), head.dropout_rate, rng));
}

inline double hinge_margin(const FeatureFrame& frame, const ModelParams& p) {
  Vector x = early_fuse(frame.face, frame.speech, frame.car, p.mask);
  return dot(p.linear_w, x) + p.linear_b;
}

/// Score in (0,1): sigmoid of the logit (or of the hinge margin); Majority
/// returns its recorded training-set positive rate.
inline double predict_proba(const FeatureFrame& frame, const ModelParams& p) {
  switch (p.variant) {
    case Variant::Majority:
      return p.majority_rate;
    case Variant::LinearHinge:
      return sigmoid(hinge_margin(frame, p));
    default:
      return sigmoid(classify(fuse(frame, p), p.head));
  }
}

// ---------------------------------------------------------------------------
// Tape construction for training. The graph mirrors the plain forward pass
// operation for operation (same summation tree, same activation order), so a
// taped forward value equals the plain value bit for bit.

/// Caller-owned constants referenced by leaf nodes; must outlive the tape.
struct FrameLossScratch {
  double one = 1.0;
  double neg_label_sign = 0.0;  // -(2 y - 1) for the hinge
  double l2 = 0.0;
  double pos_weight = 1.0;
  Vector zero_h;
  Vector input_copy;  // early-fused input for NnEarly / LinearHinge
  Vector dropout;
};

/// Ties one tape leaf back to a slot of the learnable_views list.
struct ParamBinding {
  NodeId node = 0;
  std::size_t view = 0;    // index into learnable_views(p)
  std::size_t offset = 0;  // element offset inside that view (alphas)
};

struct FrameLoss {
  NodeId loss = 0;
  NodeId logit = 0;
  std::vector<ParamBinding> bindings;
};

/// grads is parallel to learnable_views (one flat buffer per view); adds
/// weight * adjoint for every bound parameter leaf.
inline void accumulate_adjoints(const Tape& tape, const FrameLoss& fl,
                                std::vector<std::vector<double>>& grads, double weight) {
  for (const ParamBinding& b : fl.bindings) {
    auto adj = tape.adjoint(b.node);
    double* dst = grads[b.view].data() + b.offset;
    for (std::size_t k = 0; k < adj.size(); ++k) dst[k] += weight * adj[k];
  }
}

/// Builds the per-frame loss graph for any gradient-trained variant.
/// `dropout` empty means inference path (no mask node). `l2` adds
/// l2 * |w|^2 to the hinge loss only.
inline FrameLoss build_frame_loss(Tape& tape, ModelParams& p, const FeatureFrame& frame,
                                  FrameLossScratch& scratch, const Vector& dropout,
                                  double pos_weight = 1.0, double l2 = 0.0) {
  check_frame_dims(frame, p.dims.feat);
  double label = static_cast<double>(frame.label);
  FrameLoss out;
  scratch.dropout = dropout;

  if (p.variant == Variant::LinearHinge) {
    scratch.input_copy = early_fuse(frame.face, frame.speech, frame.car, p.mask);
    scratch.neg_label_sign = -(2.0 * label - 1.0);
    scratch.l2 = l2;
    NodeId wn = tape.leaf(p.linear_w, true);
    NodeId bn = tape.leaf_scalar(&p.linear_b, true);
    NodeId xn = tape.leaf(scratch.input_copy, false);
    NodeId margin = tape.add(tape.dot(wn, xn), bn);
    NodeId neg = tape.scale(tape.leaf_scalar(&scratch.neg_label_sign, false), margin);
    NodeId hinge = tape.relu(tape.add(tape.leaf_scalar(&scratch.one, false), neg));
    NodeId loss = hinge;
    if (l2 > 0.0) {
      loss = tape.add(hinge, tape.scale(tape.leaf_scalar(&scratch.l2, false),
                                        tape.dot(wn, wn)));
    }
    out.loss = loss;
    out.logit = margin;
    out.bindings = {{wn, 0, 0}, {bn, 1, 0}};
    return out;
  }
  if (p.variant == Variant::Majority) {
    throw std::invalid_argument("build_frame_loss: majority has no loss graph");
  }

  NodeId fused;
  std::size_t view = 0;
  if (uses_projection(p.variant)) {
    if (scratch.zero_h.size() != p.dims.h) scratch.zero_h = Vector(p.dims.h, 0.0);
    NodeId wf = tape.leaf(p.proj.face, true);
    NodeId ws = tape.leaf(p.proj.speech, true);
    NodeId wc = tape.leaf(p.proj.car, true);
    NodeId xf = tape.leaf(frame.face, false);
    NodeId xs = tape.leaf(frame.speech, false);
    NodeId xc = tape.leaf(frame.car, false);
    NodeId zero = tape.leaf(scratch.zero_h, false);
    NodeId hf = p.mask.face ? tape.linear_map(wf, xf) : zero;
    NodeId hs = p.mask.speech ? tape.linear_map(ws, xs) : zero;
    NodeId hc = p.mask.car ? tape.linear_map(wc, xc) : zero;
    NodeId bias = tape.leaf(p.fusion.bias, true);
    out.bindings.push_back({wf, view++, 0});
    out.bindings.push_back({ws, view++, 0});
    out.bindings.push_back({wc, view++, 0});
    if (p.variant == Variant::Mpf) {
      std::array<NodeId, 7> an;
      for (std::size_t i = 0; i < 7; ++i) {
        an[i] = tape.leaf_scalar(&p.fusion.alpha[i], true);
        out.bindings.push_back({an[i], view, i});
      }
      ++view;
      NodeId fs = tape.hadamard(hf, hs);
      NodeId t0 = tape.scale(an[0], tape.hadamard(fs, hc));
      NodeId t1 = tape.scale(an[1], fs);
      NodeId t2 = tape.scale(an[2], tape.hadamard(hf, hc));
      NodeId t3 = tape.scale(an[3], tape.hadamard(hs, hc));
      NodeId t4 = tape.scale(an[4], hf);
      NodeId t5 = tape.scale(an[5], hs);
      NodeId t6 = tape.scale(an[6], hc);
      NodeId sum = tape.add(
          tape.add(tape.add(tape.add(t0, t1), tape.add(t2, t3)),
                   tape.add(tape.add(t4, t5), t6)),
          bias);
      fused = tape.tanh(sum);
    } else {
      NodeId sum = tape.add(tape.add(hf, hs), tape.add(hc, bias));
      NodeId cubed = tape.cube(sum);
      fused = p.variant == Variant::NnTanhCube ? tape.tanh(cubed) : cubed;
    }
    out.bindings.push_back({bias, view++, 0});
  } else {
    scratch.input_copy = early_fuse(frame.face, frame.speech, frame.car, p.mask);
    fused = tape.leaf(scratch.input_copy, false);
  }

  NodeId w1 = tape.leaf(p.head.w1, true);
  NodeId b1 = tape.leaf(p.head.b1, true);
  NodeId w2 = tape.leaf(p.head.w2, true);
  NodeId b2 = tape.leaf_scalar(&p.head.b2, true);
  NodeId a = tape.relu(tape.add(tape.linear_map(w1, fused), b1));
  if (!scratch.dropout.empty()) {
    a = tape.hadamard(a, tape.leaf(scratch.dropout, false));
  }
  NodeId logit = tape.add(tape.linear_map(w2, a), b2);
  NodeId loss = tape.bce_logit(logit, label);
  if (pos_weight != 1.0 && label > 0.5) {
    scratch.pos_weight = pos_weight;
    loss = tape.scale(tape.leaf_scalar(&scratch.pos_weight, false), loss);
  }
  out.bindings.push_back({w1, view++, 0});
  out.bindings.push_back({b1, view++, 0});
  out.bindings.push_back({w2, view++, 0});
  out.bindings.push_back({b2, view++, 0});
  out.loss = loss;
  out.logit = logit;
  return out;
}

}  // namespace mpf
