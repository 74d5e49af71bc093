#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "mpf/core.hpp"

namespace mpf {

/// Feature widths of one synchronized 10Hz frame. The face width is the sum
/// of 204 landmark values, 8 gaze vector/angle values, 280 eye-region
/// landmark values, 36 action-unit outputs and 6 head-pose values. Car
/// channels are speed, steering, gas, brake. The speech width is a config
/// knob; nothing downstream hard-codes it.
struct FeatureDims {
  std::size_t face = 534;
  std::size_t speech = 12;
  std::size_t car = 4;

  std::size_t total() const { return face + speech + car; }
  friend bool operator==(const FeatureDims&, const FeatureDims&) = default;
};

/// One 10Hz timestep of synchronized multimodal features plus its binary
/// distraction label.
struct FeatureFrame {
  std::int32_t subject_id = 0;
  std::int64_t t = 0;  // frame index in 10Hz ticks
  Vector face;
  Vector speech;
  Vector car;
  std::uint8_t label = 0;

  friend bool operator==(const FeatureFrame&, const FeatureFrame&) = default;
};

inline void check_frame_dims(const FeatureFrame& f, const FeatureDims& dims) {
  if (f.face.size() != dims.face || f.speech.size() != dims.speech ||
      f.car.size() != dims.car) {
    throw std::invalid_argument(
        "frame dims mismatch: got (" + std::to_string(f.face.size()) + "," +
        std::to_string(f.speech.size()) + "," + std::to_string(f.car.size()) +
        "), expected (" + std::to_string(dims.face) + "," +
        std::to_string(dims.speech) + "," + std::to_string(dims.car) + ")");
  }
}

}  // namespace mpf
