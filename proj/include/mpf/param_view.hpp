#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace mpf {

/// Non-owning view of one learnable array. Model code publishes its
/// learnables as an ordered list of these; the optimizer, the checkpoint
/// format, the tape bindings and the finite-difference oracle all walk the
/// same list, so parameter order is canonical by construction.
struct ParamView {
  std::string_view name;
  double* data = nullptr;
  std::size_t size = 0;
};

inline std::size_t total_size(const std::vector<ParamView>& views) {
  std::size_t n = 0;
  for (const auto& v : views) n += v.size;
  return n;
}

}  // namespace mpf
