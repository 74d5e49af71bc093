#pragma once

#include <string>
#include <string_view>

#include "mpf/model.hpp"
#include "mpf/text_io.hpp"

namespace mpf {

// Textual checkpoint, format "mpf-checkpoint v1". Header records variant,
// mask, dims, dropout and the majority rate; parameter arrays follow in the
// canonical learnable_views order, one `param <name> <count>` header plus a
// single comma-separated line each. Floats are shortest-round-trip decimal,
// so save -> load is bit-exact.

inline std::string serialize_checkpoint(ModelParams& p) {
  std::string out;
  out += "mpf-checkpoint v1\n";
  out += "variant = ";
  out += to_string(p.variant);
  out += "\nmask = " + to_string(p.mask);
  out += "\nd_face = " + std::to_string(p.dims.feat.face);
  out += "\nd_speech = " + std::to_string(p.dims.feat.speech);
  out += "\nd_car = " + std::to_string(p.dims.feat.car);
  out += "\nh = " + std::to_string(p.dims.h);
  out += "\nhead_width = " + std::to_string(p.dims.head_width);
  out += "\ndropout = " + format_double(p.head.dropout_rate);
  out += "\nmajority_rate = " + format_double(p.majority_rate);
  out += "\n";
  for (const ParamView& v : learnable_views(p)) {
    out += "param ";
    out += v.name;
    out += ' ';
    out += std::to_string(v.size);
    out += '\n';
    for (std::size_t i = 0; i < v.size; ++i) {
      if (i) out += ',';
      append_double(out, v.data[i]);
    }
    out += '\n';
  }
  return out;
}

inline void save_checkpoint(const std::string& path, ModelParams& p) {
  write_file(path, serialize_checkpoint(p));
}

inline ModelParams parse_checkpoint(std::string_view text, const std::string& locus) {
  std::size_t pos = 0;
  int line_no = 0;
  auto next_line = [&](bool required) -> std::string_view {
    if (pos >= text.size()) {
      if (required) throw std::runtime_error(locus + ": truncated checkpoint");
      return {};
    }
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = chomp(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    return line;
  };
  auto fail = [&](const std::string& msg) -> std::runtime_error {
    return std::runtime_error(locus + ":" + std::to_string(line_no) + ": " + msg);
  };

  if (next_line(true) != "mpf-checkpoint v1") throw fail("not a v1 checkpoint");

  Variant variant = Variant::Mpf;
  ModalityMask mask;
  ModelDims dims;
  double dropout = 0.0, majority_rate = 0.5;
  for (int i = 0; i < 9; ++i) {
    std::string_view line = next_line(true);
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected 'key = value'");
    std::string_view key = KeyValueReader::trim(line.substr(0, eq));
    std::string_view val = KeyValueReader::trim(line.substr(eq + 1));
    std::string vloc = locus + ":" + std::to_string(line_no);
    if (key == "variant") variant = parse_variant(val);
    else if (key == "mask") mask = parse_mask(val);
    else if (key == "d_face") dims.feat.face = static_cast<std::size_t>(parse_int(val, vloc));
    else if (key == "d_speech") dims.feat.speech = static_cast<std::size_t>(parse_int(val, vloc));
    else if (key == "d_car") dims.feat.car = static_cast<std::size_t>(parse_int(val, vloc));
    else if (key == "h") dims.h = static_cast<std::size_t>(parse_int(val, vloc));
    else if (key == "head_width") dims.head_width = static_cast<std::size_t>(parse_int(val, vloc));
    else if (key == "dropout") dropout = parse_double(val, vloc);
    else if (key == "majority_rate") majority_rate = parse_double(val, vloc);
    else throw fail("unknown header key '" + std::string(key) + "'");
  }

  ModelParams p = init_params(variant, mask, dims, dropout, 0);
  p.majority_rate = majority_rate;
  auto views = learnable_views(p);
  for (const ParamView& v : views) {
    std::string_view header = next_line(true);
    auto fields = split(header, ' ');
    if (fields.size() != 3 || fields[0] != "param") throw fail("expected 'param <name> <count>'");
    if (fields[1] != v.name) {
      throw fail("parameter order: expected '" + std::string(v.name) + "', got '" +
                 std::string(fields[1]) + "'");
    }
    std::string vloc = locus + ":" + std::to_string(line_no);
    if (static_cast<std::size_t>(parse_int(fields[2], vloc)) != v.size) {
      throw fail("parameter '" + std::string(v.name) + "' has wrong size");
    }
    std::string_view data = next_line(true);
    auto values = split(data, ',');
    if (values.size() != v.size) {
      throw fail("parameter '" + std::string(v.name) + "': expected " +
                 std::to_string(v.size) + " values, got " + std::to_string(values.size()));
    }
    std::string dloc = locus + ":" + std::to_string(line_no);
    for (std::size_t i = 0; i < v.size; ++i) v.data[i] = parse_double(values[i], dloc);
  }
  return p;
}

inline ModelParams load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path), path);
}

}  // namespace mpf
