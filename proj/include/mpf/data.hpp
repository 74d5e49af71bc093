#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpf/frame.hpp"
#include "mpf/rng.hpp"
#include "mpf/text_io.hpp"

namespace mpf {

// Synthetic multimodal corpus. Each subject is a 10Hz recording of smooth
// baseline driving signals; distraction shows up as correlated per-modality
// bumps (head turn, utterance, steering correction) with configurable lags.
// Labels are 1 exactly inside the annotated event windows.
//
// Two label modes:
//   EventBumps         events are sampled directly; every modality sees a
//                      bump whose strength jitters per event, so no single
//                      modality catches everything
//   ProductInteraction the label fires where the product of two latent
//                      signals (one visible to face, one to speech) exceeds
//                      the subject's 75th percentile; no single modality can
//                      decide it linearly, a product term can
//
// Subjects generate independently (seed, subject_id) and may be produced in
// parallel; dataset assembly is a single-writer merge.

enum class LabelMode : std::uint8_t { EventBumps, ProductInteraction };

inline std::string_view to_string(LabelMode m) {
  return m == LabelMode::EventBumps ? "event-bumps" : "product-interaction";
}

inline LabelMode parse_label_mode(std::string_view s) {
  if (s == "event-bumps") return LabelMode::EventBumps;
  if (s == "product-interaction") return LabelMode::ProductInteraction;
  throw std::invalid_argument("unknown label mode '" + std::string(s) + "'");
}

struct SubjectProfile {
  std::uint64_t seed = 42;
  double duration_s = 900.0;  // ~15 minutes of driving
  LabelMode mode = LabelMode::EventBumps;

  // Event placement. Windows may overlap and union, so coverage is
  // 1 - exp(-rate * mean_dur / 60); 2.3/min at 5-10s targets ~25% positives.
  double event_rate_per_min = 2.3;
  double event_dur_min_s = 5.0;
  double event_dur_max_s = 10.0;

  // Median bump strength per modality and the lognormal jitter applied to
  // it, plus reaction lags relative to the event start. Amplitude draws are
  // independent across modalities, so no single modality catches every event.
  double face_amp = 3.0;
  double speech_amp = 2.2;
  double car_amp = 0.9;
  double amp_jitter = 1.3;
  double face_lag_s = 0.0;
  double speech_lag_s = 0.4;
  double car_lag_s = 0.8;

  // Per-frame observation noise scales, tuned so the single-modality models
  // rank face > speech > car.
  double face_noise = 2.2;
  double speech_noise = 2.4;
  double car_noise = 3.0;

  std::size_t d_speech = 12;

  std::size_t n_frames() const {
    return static_cast<std::size_t>(std::llround(duration_s * 10.0));
  }
  FeatureDims dims() const { return FeatureDims{534, d_speech, 4}; }
};

/// Serialization used for the manifest profile hash and the config echo.
inline std::string to_string(const SubjectProfile& p) {
  std::string s;
  s += "duration_s = " + format_double(p.duration_s);
  s += "\nmode = " + std::string(to_string(p.mode));
  s += "\nevent_rate_per_min = " + format_double(p.event_rate_per_min);
  s += "\nevent_dur_min_s = " + format_double(p.event_dur_min_s);
  s += "\nevent_dur_max_s = " + format_double(p.event_dur_max_s);
  s += "\nface_amp = " + format_double(p.face_amp);
  s += "\nspeech_amp = " + format_double(p.speech_amp);
  s += "\ncar_amp = " + format_double(p.car_amp);
  s += "\namp_jitter = " + format_double(p.amp_jitter);
  s += "\nface_lag_s = " + format_double(p.face_lag_s);
  s += "\nspeech_lag_s = " + format_double(p.speech_lag_s);
  s += "\ncar_lag_s = " + format_double(p.car_lag_s);
  s += "\nface_noise = " + format_double(p.face_noise);
  s += "\nspeech_noise = " + format_double(p.speech_noise);
  s += "\ncar_noise = " + format_double(p.car_noise);
  s += "\nd_speech = " + std::to_string(p.d_speech);
  s += "\n";
  return s;
}

inline std::uint64_t profile_hash(const SubjectProfile& p) {
  std::string s = to_string(p);
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// One annotated distraction stretch; frames in [start_t, end_t] are
/// positive (closed interval).
struct DistractionEvent {
  std::int64_t start_t = 0;
  std::int64_t end_t = 0;
  double amp_face = 0.0;
  double amp_speech = 0.0;
  double amp_car = 0.0;
  double lag_face_s = 0.0;
  double lag_speech_s = 0.0;
  double lag_car_s = 0.0;

  friend bool operator==(const DistractionEvent&, const DistractionEvent&) = default;
};

/// Frame labels as the union of closed event intervals. Depends only on the
/// intervals, never on feature values.
inline std::vector<std::uint8_t> label_frames(const std::vector<DistractionEvent>& events,
                                              std::size_t n_frames) {
  std::vector<std::uint8_t> labels(n_frames, 0);
  for (const DistractionEvent& e : events) {
    if (e.start_t > e.end_t || e.start_t < 0 ||
        e.end_t >= static_cast<std::int64_t>(n_frames)) {
      throw std::invalid_argument("label_frames: event [" + std::to_string(e.start_t) +
                                  "," + std::to_string(e.end_t) + "] out of range for " +
                                  std::to_string(n_frames) + " frames");
    }
    for (std::int64_t t = e.start_t; t <= e.end_t; ++t) labels[static_cast<std::size_t>(t)] = 1;
  }
  return labels;
}

/// Mean of each consecutive block of three 30Hz samples; a trailing partial
/// block is averaged over its actual members.
inline std::vector<Vector> resample_30hz_to_10hz(const std::vector<Vector>& stream) {
  if (stream.empty()) throw std::invalid_argument("resample_30hz_to_10hz: empty stream");
  std::size_t dim = stream.front().size();
  std::vector<Vector> out;
  out.reserve((stream.size() + 2) / 3);
  for (std::size_t block = 0; block < stream.size(); block += 3) {
    std::size_t end = std::min(block + 3, stream.size());
    Vector mean(dim, 0.0);
    for (std::size_t i = block; i < end; ++i) {
      if (stream[i].size() != dim) {
        throw std::invalid_argument("resample_30hz_to_10hz: ragged stream");
      }
      for (std::size_t j = 0; j < dim; ++j) mean[j] += stream[i][j];
    }
    double n = static_cast<double>(end - block);
    for (std::size_t j = 0; j < dim; ++j) mean[j] /= n;
    out.push_back(std::move(mean));
  }
  return out;
}

enum class Split : std::uint8_t { Train, Dev, Test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

/// Deterministic shuffled partition in the 20:5:5 ratio, generalized
/// proportionally: dev and test each get max(1, floor(n/6)) subjects and
/// train keeps the remainder.
inline std::map<std::int32_t, Split> split_subjects(std::vector<std::int32_t> subject_ids,
                                                    std::uint64_t seed) {
  if (subject_ids.size() < 3) {
    throw std::invalid_argument("split_subjects: need at least 3 subjects, got " +
                                std::to_string(subject_ids.size()));
  }
  std::sort(subject_ids.begin(), subject_ids.end());
  Rng rng(derive_seed(seed, 0x5B117));
  rng.shuffle(subject_ids);
  std::size_t n = subject_ids.size();
  std::size_t n_dev = std::max<std::size_t>(1, n / 6);
  std::size_t n_test = n_dev;
  std::size_t n_train = n - n_dev - n_test;
  std::map<std::int32_t, Split> out;
  for (std::size_t i = 0; i < n; ++i) {
    Split s = i < n_train ? Split::Train : (i < n_train + n_dev ? Split::Dev : Split::Test);
    out[subject_ids[i]] = s;
  }
  return out;
}

struct SubjectData {
  std::int32_t subject_id = 0;
  std::vector<FeatureFrame> frames;
  std::vector<DistractionEvent> events;

  friend bool operator==(const SubjectData&, const SubjectData&) = default;
};

/// Per-subject, per-coordinate standardization statistics over the flat
/// face|speech|car layout.
struct SubjectStats {
  std::int32_t subject_id = 0;
  Vector mean;
  Vector sd;  // population standard deviation
  std::vector<std::uint8_t> degenerate;
};

struct Dataset {
  FeatureDims dims;
  std::uint64_t seed = 0;
  std::uint64_t profile_hash = 0;
  std::vector<SubjectData> subjects;  // ordered by subject_id
  std::map<std::int32_t, Split> split;
  std::vector<SubjectStats> stats;  // filled by standardize_per_subject
  bool standardized = false;

  const SubjectData* find_subject(std::int32_t id) const {
    for (const auto& s : subjects) {
      if (s.subject_id == id) return &s;
    }
    return nullptr;
  }

  std::vector<const SubjectData*> subjects_in(Split sp) const {
    std::vector<const SubjectData*> out;
    for (const auto& s : subjects) {
      auto it = split.find(s.subject_id);
      if (it != split.end() && it->second == sp) out.push_back(&s);
    }
    return out;
  }

  std::vector<const FeatureFrame*> frames_in(Split sp) const {
    std::vector<const FeatureFrame*> out;
    for (const SubjectData* s : subjects_in(sp)) {
      for (const FeatureFrame& f : s->frames) out.push_back(&f);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Generation internals.

namespace gen {

/// Smooth zero-mean drive: a small bank of low-frequency sinusoids.
struct SmoothSignal {
  std::array<double, 4> amp{};
  std::array<double, 4> freq_hz{};
  std::array<double, 4> phase{};

  static SmoothSignal draw(Rng& rng, double f_lo, double f_hi) {
    SmoothSignal s;
    for (std::size_t k = 0; k < 4; ++k) {
      s.amp[k] = rng.uniform(0.4, 1.0);
      s.freq_hz[k] = rng.uniform(f_lo, f_hi);
      s.phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    return s;
  }

  double at(double t_s) const {
    double v = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      v += amp[k] * std::sin(2.0 * std::numbers::pi * freq_hz[k] * t_s + phase[k]);
    }
    return v * 0.5;
  }
};

/// Raised-cosine bump supported on [0,1], peak 1 at the middle.
inline double bump(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  double s = std::sin(std::numbers::pi * u);
  return s * s;
}

/// Everything label-relevant about one subject, cheap to build (no
/// feature-space work): the events plus the per-frame latent drive of each
/// modality. Separate RNG streams keep events identical whether or not
/// features are synthesized.
struct SubjectPlan {
  std::size_t n_frames = 0;
  std::vector<DistractionEvent> events;
  std::vector<double> drive_face;
  std::vector<double> drive_speech;
  std::vector<double> drive_car;
  std::vector<std::uint8_t> labels;
};

inline std::uint64_t subject_seed(const SubjectProfile& p, std::int32_t subject_id) {
  return derive_seed(p.seed, 0xD5ULL * 1024 + static_cast<std::uint64_t>(subject_id));
}

inline SubjectPlan build_plan(const SubjectProfile& p, std::int32_t subject_id) {
  SubjectPlan plan;
  plan.n_frames = p.n_frames();
  std::size_t n = plan.n_frames;
  if (n == 0) throw std::invalid_argument("subject profile: duration too short");
  std::uint64_t sseed = subject_seed(p, subject_id);
  Rng ev_rng(derive_seed(sseed, 1));

  plan.drive_face.assign(n, 0.0);
  plan.drive_speech.assign(n, 0.0);
  plan.drive_car.assign(n, 0.0);

  if (p.mode == LabelMode::EventBumps) {
    double expected = p.event_rate_per_min * p.duration_s / 60.0;
    std::size_t count = static_cast<std::size_t>(expected);
    if (ev_rng.uniform() < expected - static_cast<double>(count)) ++count;
    for (std::size_t e = 0; e < count; ++e) {
      double dur_s = ev_rng.uniform(p.event_dur_min_s, p.event_dur_max_s);
      std::int64_t dur = std::max<std::int64_t>(1, std::llround(dur_s * 10.0));
      if (dur >= static_cast<std::int64_t>(n)) dur = static_cast<std::int64_t>(n) - 1;
      std::int64_t start = static_cast<std::int64_t>(
          ev_rng.below(static_cast<std::uint64_t>(static_cast<std::int64_t>(n) - dur)));
      DistractionEvent event;
      event.start_t = start;
      event.end_t = start + dur - 1;
      event.amp_face = p.face_amp * std::exp(p.amp_jitter * ev_rng.normal());
      event.amp_speech = p.speech_amp * std::exp(p.amp_jitter * ev_rng.normal());
      event.amp_car = p.car_amp * std::exp(p.amp_jitter * ev_rng.normal());
      // Steering corrections go either way.
      if (ev_rng.uniform() < 0.5) event.amp_car = -event.amp_car;
      event.lag_face_s = p.face_lag_s;
      event.lag_speech_s = p.speech_lag_s;
      event.lag_car_s = p.car_lag_s;
      plan.events.push_back(event);
    }
    std::sort(plan.events.begin(), plan.events.end(),
              [](const DistractionEvent& a, const DistractionEvent& b) {
                return a.start_t != b.start_t ? a.start_t < b.start_t : a.end_t < b.end_t;
              });
    for (const DistractionEvent& e : plan.events) {
      double dur_frames = static_cast<double>(e.end_t - e.start_t + 1);
      for (std::int64_t t = std::max<std::int64_t>(0, e.start_t - 20);
           t < static_cast<std::int64_t>(n); ++t) {
        double uf = (static_cast<double>(t - e.start_t) - e.lag_face_s * 10.0) / dur_frames;
        double us = (static_cast<double>(t - e.start_t) - e.lag_speech_s * 10.0) / dur_frames;
        double uc = (static_cast<double>(t - e.start_t) - e.lag_car_s * 10.0) / dur_frames;
        if (uf >= 1.0 && us >= 1.0 && uc >= 1.0) break;
        plan.drive_face[static_cast<std::size_t>(t)] += e.amp_face * bump(uf);
        plan.drive_speech[static_cast<std::size_t>(t)] += e.amp_speech * bump(us);
        plan.drive_car[static_cast<std::size_t>(t)] += e.amp_car * bump(uc);
      }
    }
  } else {
    // Labels fire where the product of two smooth latents clears the
    // subject's own 75th percentile: face observes one latent, speech the
    // other, car only a nuisance latent.
    SmoothSignal u1 = SmoothSignal::draw(ev_rng, 0.02, 0.15);
    SmoothSignal u2 = SmoothSignal::draw(ev_rng, 0.02, 0.15);
    SmoothSignal u3 = SmoothSignal::draw(ev_rng, 0.02, 0.15);
    std::vector<double> product(n);
    for (std::size_t t = 0; t < n; ++t) {
      double ts = static_cast<double>(t) / 10.0;
      double a = u1.at(ts) * 3.5;
      double b = u2.at(ts) * 3.5;
      plan.drive_face[t] = p.face_amp * a;
      plan.drive_speech[t] = p.speech_amp * b;
      plan.drive_car[t] = p.car_amp * u3.at(ts);
      product[t] = a * b;
    }
    std::vector<double> sorted = product;
    std::size_t q = (3 * n) / 4;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q),
                     sorted.end());
    double tau = sorted[q];
    for (std::size_t t = 0; t < n; ++t) {
      bool on = product[t] > tau;
      if (on && (plan.events.empty() ||
                 plan.events.back().end_t != static_cast<std::int64_t>(t) - 1)) {
        DistractionEvent e;
        e.start_t = static_cast<std::int64_t>(t);
        e.end_t = static_cast<std::int64_t>(t);
        plan.events.push_back(e);
      } else if (on) {
        plan.events.back().end_t = static_cast<std::int64_t>(t);
      }
    }
  }

  plan.labels = label_frames(plan.events, n);
  return plan;
}

}  // namespace gen

/// Events (and labels) only, without feature synthesis. Identical to the
/// events of generate_subject for the same (profile, subject_id).
inline std::vector<DistractionEvent> generate_subject_events(const SubjectProfile& p,
                                                             std::int32_t subject_id) {
  return gen::build_plan(p, subject_id).events;
}

/// Values are quantized to a 1e-4 grid like real extractor output; this also
/// keeps the decimal record files compact.
inline double quantize(double v) { return std::round(v * 1e4) / 1e4; }

/// Deterministic synthesis of one subject's full 10Hz recording.
inline SubjectData generate_subject(const SubjectProfile& p, std::int32_t subject_id) {
  gen::SubjectPlan plan = gen::build_plan(p, subject_id);
  std::size_t n = plan.n_frames;
  FeatureDims dims = p.dims();
  std::uint64_t sseed = gen::subject_seed(p, subject_id);
  // Mixing is corpus-global: which coordinates respond to the latent drive
  // is a property of the feature extractor, not of the person, and models
  // must generalize across the subject-wise split. Baselines, noise and
  // event amplitudes stay per-subject.
  Rng mix_rng(derive_seed(p.seed, 0x317));
  Rng noise_rng(derive_seed(sseed, 3));

  // Per-coordinate mixing: offset, baseline load, event-drive load, noise
  // scale. Only a seeded subset of coordinates responds to the drive.
  struct Mixing {
    std::vector<double> offset, base_load, drive_load, noise_scale;
  };
  auto draw_mixing = [&](std::size_t d, double drive_density) {
    Mixing m;
    m.offset.resize(d);
    m.base_load.resize(d);
    m.drive_load.resize(d);
    m.noise_scale.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      m.offset[j] = mix_rng.normal(0.0, 2.0);
      m.base_load[j] = mix_rng.normal(0.0, 0.8);
      m.drive_load[j] = mix_rng.uniform() < drive_density ? mix_rng.normal(0.0, 1.0) : 0.0;
      m.noise_scale[j] = mix_rng.uniform(0.6, 1.4);
    }
    return m;
  };
  Mixing face_mix = draw_mixing(dims.face, 0.12);
  Mixing speech_mix = draw_mixing(dims.speech, 0.5);

  Rng base_rng(derive_seed(sseed, 4));
  gen::SmoothSignal face_base = gen::SmoothSignal::draw(base_rng, 0.01, 0.08);
  gen::SmoothSignal speech_base = gen::SmoothSignal::draw(base_rng, 0.02, 0.2);
  gen::SmoothSignal speed_base = gen::SmoothSignal::draw(base_rng, 0.005, 0.03);
  gen::SmoothSignal steer_base = gen::SmoothSignal::draw(base_rng, 0.02, 0.1);

  SubjectData out;
  out.subject_id = subject_id;
  out.events = plan.events;
  out.frames.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    double ts = static_cast<double>(t) / 10.0;
    FeatureFrame& f = out.frames[t];
    f.subject_id = subject_id;
    f.t = static_cast<std::int64_t>(t);
    f.label = plan.labels[t];

    f.face = Vector(dims.face);
    double fb = face_base.at(ts);
    double fd = plan.drive_face[t];
    for (std::size_t j = 0; j < dims.face; ++j) {
      double v = face_mix.offset[j] + face_mix.base_load[j] * fb +
                 face_mix.drive_load[j] * fd +
                 p.face_noise * face_mix.noise_scale[j] * noise_rng.normal();
      f.face[j] = quantize(v);
    }

    f.speech = Vector(dims.speech);
    double sb = speech_base.at(ts);
    double sd = plan.drive_speech[t];
    for (std::size_t j = 0; j < dims.speech; ++j) {
      double v = speech_mix.offset[j] + speech_mix.base_load[j] * sb +
                 speech_mix.drive_load[j] * sd +
                 p.speech_noise * speech_mix.noise_scale[j] * noise_rng.normal();
      f.speech[j] = quantize(v);
    }

    // Car channels: speed (km/h, >= 0), steering [-1,1], gas [0,1], brake [0,1].
    double cd = plan.drive_car[t];
    double cd_abs = std::abs(cd);
    double speed = 55.0 + 8.0 * speed_base.at(ts) - 3.0 * cd_abs +
                   p.car_noise * 0.4 * noise_rng.normal();
    double steering = 0.12 * steer_base.at(ts) + 0.2 * cd +
                      p.car_noise * 0.02 * noise_rng.normal();
    double gas = 0.55 + 0.18 * speed_base.at(ts) - 0.18 * cd_abs +
                 p.car_noise * 0.02 * noise_rng.normal();
    double brake = 0.3 * cd_abs - 0.12 + p.car_noise * 0.02 * noise_rng.normal();
    f.car = Vector(4);
    f.car[0] = quantize(std::max(0.0, speed));
    f.car[1] = quantize(std::clamp(steering, -1.0, 1.0));
    f.car[2] = quantize(std::clamp(gas, 0.0, 1.0));
    f.car[3] = quantize(std::clamp(brake, 0.0, 1.0));
  }
  return out;
}

/// Generates the full corpus: subjects 0..n-1 plus the 20:5:5 split.
inline Dataset generate_dataset(const SubjectProfile& profile, std::size_t n_subjects) {
  Dataset ds;
  ds.dims = profile.dims();
  ds.seed = profile.seed;
  ds.profile_hash = profile_hash(profile);
  std::vector<std::int32_t> ids;
  for (std::size_t i = 0; i < n_subjects; ++i) {
    ds.subjects.push_back(generate_subject(profile, static_cast<std::int32_t>(i)));
    ids.push_back(static_cast<std::int32_t>(i));
  }
  ds.split = split_subjects(ids, profile.seed);
  return ds;
}

/// Per subject and per feature coordinate: subtract the subject's own mean,
/// divide by the subject's population standard deviation. Coordinates whose
/// deviation is indistinguishable from zero map to 0 and are flagged.
inline std::vector<SubjectStats> standardize_per_subject(Dataset& ds) {
  std::vector<SubjectStats> all;
  std::size_t d = ds.dims.total();
  for (SubjectData& subj : ds.subjects) {
    if (subj.frames.size() < 2) {
      throw std::invalid_argument("standardize: subject " + std::to_string(subj.subject_id) +
                                  " has fewer than 2 frames");
    }
    SubjectStats st;
    st.subject_id = subj.subject_id;
    st.mean = Vector(d, 0.0);
    st.sd = Vector(d, 0.0);
    st.degenerate.assign(d, 0);

    auto coord = [&](FeatureFrame& f, std::size_t j) -> double& {
      if (j < ds.dims.face) return f.face[j];
      if (j < ds.dims.face + ds.dims.speech) return f.speech[j - ds.dims.face];
      return f.car[j - ds.dims.face - ds.dims.speech];
    };

    double inv_n = 1.0 / static_cast<double>(subj.frames.size());
    for (FeatureFrame& f : subj.frames) {
      for (std::size_t j = 0; j < d; ++j) st.mean[j] += coord(f, j);
    }
    for (std::size_t j = 0; j < d; ++j) st.mean[j] *= inv_n;
    for (FeatureFrame& f : subj.frames) {
      for (std::size_t j = 0; j < d; ++j) {
        double c = coord(f, j) - st.mean[j];
        st.sd[j] += c * c;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      st.sd[j] = std::sqrt(st.sd[j] * inv_n);
      if (st.sd[j] <= 1e-9 * std::max(1.0, std::abs(st.mean[j]))) {
        st.degenerate[j] = 1;
      }
    }
    for (FeatureFrame& f : subj.frames) {
      for (std::size_t j = 0; j < d; ++j) {
        double& v = coord(f, j);
        v = st.degenerate[j] ? 0.0 : (v - st.mean[j]) / st.sd[j];
      }
    }
    all.push_back(std::move(st));
  }
  ds.stats = all;
  ds.standardized = true;
  return all;
}

}  // namespace mpf
