#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "mpf/data.hpp"
#include "mpf/text_io.hpp"

namespace mpf {

// On-disk dataset layout, format "mpf-dataset v1":
//
//   <dir>/manifest              format version, dims, seed, profile hash,
//                               subject list with split assignment
//   <dir>/subject_<id>.csv      header lines, then one frame per line:
//                               t,label,face...,speech...,car...
//   <dir>/subject_<id>.events   start_t,end_t per annotated stretch
//
// All floats are shortest-round-trip decimals; write -> read is bit-exact.

inline std::string subject_record_name(std::int32_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "subject_%03d.csv", id);
  return buf;
}

inline std::string subject_events_name(std::int32_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "subject_%03d.events", id);
  return buf;
}

inline void write_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::string manifest;
  manifest += "mpf-dataset v1\n";
  manifest += "d_face = " + std::to_string(ds.dims.face) + "\n";
  manifest += "d_speech = " + std::to_string(ds.dims.speech) + "\n";
  manifest += "d_car = " + std::to_string(ds.dims.car) + "\n";
  manifest += "seed = " + std::to_string(ds.seed) + "\n";
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(ds.profile_hash));
  manifest += std::string("profile_hash = ") + hash + "\n";
  manifest += "n_subjects = " + std::to_string(ds.subjects.size()) + "\n";
  for (const SubjectData& s : ds.subjects) {
    auto it = ds.split.find(s.subject_id);
    if (it == ds.split.end()) {
      throw std::invalid_argument("write_dataset: subject " + std::to_string(s.subject_id) +
                                  " has no split assignment");
    }
    manifest += "subject = " + std::to_string(s.subject_id) + "," +
                std::string(to_string(it->second)) + "\n";
  }
  write_file((fs::path(dir) / "manifest").string(), manifest);

  for (const SubjectData& s : ds.subjects) {
    std::string rec;
    rec.reserve(64 + s.frames.size() * (ds.dims.total() * 8 + 16));
    rec += "subject = " + std::to_string(s.subject_id) + "\n";
    rec += "n_frames = " + std::to_string(s.frames.size()) + "\n";
    rec += "dims = " + std::to_string(ds.dims.face) + "," + std::to_string(ds.dims.speech) +
           "," + std::to_string(ds.dims.car) + "\n";
    for (const FeatureFrame& f : s.frames) {
      rec += std::to_string(f.t);
      rec += ',';
      rec += f.label ? '1' : '0';
      for (double v : f.face) {
        rec += ',';
        append_double(rec, v);
      }
      for (double v : f.speech) {
        rec += ',';
        append_double(rec, v);
      }
      for (double v : f.car) {
        rec += ',';
        append_double(rec, v);
      }
      rec += '\n';
    }
    write_file((fs::path(dir) / subject_record_name(s.subject_id)).string(), rec);

    std::string ev;
    for (const DistractionEvent& e : s.events) {
      ev += std::to_string(e.start_t) + "," + std::to_string(e.end_t) + "\n";
    }
    write_file((fs::path(dir) / subject_events_name(s.subject_id)).string(), ev);
  }
}

inline Dataset read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  std::string manifest_path = (fs::path(dir) / "manifest").string();
  std::string manifest = read_file(manifest_path);

  std::size_t header_end = manifest.find('\n');
  if (header_end == std::string::npos ||
      std::string_view(manifest).substr(0, header_end) != "mpf-dataset v1") {
    throw std::runtime_error(manifest_path + ":1: not a v1 dataset manifest");
  }

  std::vector<std::pair<std::int32_t, Split>> listed;
  std::size_t declared_subjects = 0;
  bool have_declared = false;
  KeyValueReader reader{std::string_view(manifest).substr(header_end + 1), 0, 1};
  std::string_view key, value;
  while (reader.next(key, value)) {
    std::string locus = manifest_path + ":" + std::to_string(reader.line_no);
    if (key == "d_face") ds.dims.face = static_cast<std::size_t>(parse_int(value, locus));
    else if (key == "d_speech") ds.dims.speech = static_cast<std::size_t>(parse_int(value, locus));
    else if (key == "d_car") ds.dims.car = static_cast<std::size_t>(parse_int(value, locus));
    else if (key == "seed") ds.seed = static_cast<std::uint64_t>(parse_int(value, locus));
    else if (key == "profile_hash") {
      ds.profile_hash = std::stoull(std::string(value), nullptr, 16);
    } else if (key == "n_subjects") {
      declared_subjects = static_cast<std::size_t>(parse_int(value, locus));
      have_declared = true;
    } else if (key == "subject") {
      auto fields = split(value, ',');
      if (fields.size() != 2) throw std::runtime_error(locus + ": expected 'subject = id,split'");
      listed.emplace_back(static_cast<std::int32_t>(parse_int(fields[0], locus)),
                          parse_split(fields[1]));
    } else {
      throw std::runtime_error(locus + ": unknown manifest key '" + std::string(key) + "'");
    }
  }
  if (!have_declared || declared_subjects != listed.size()) {
    throw std::runtime_error(manifest_path + ": integrity error: n_subjects=" +
                             std::to_string(declared_subjects) + " but " +
                             std::to_string(listed.size()) + " subjects listed");
  }

  for (auto [id, sp] : listed) {
    ds.split[id] = sp;
    std::string rec_path = (fs::path(dir) / subject_record_name(id)).string();
    std::string rec = read_file(rec_path);
    SubjectData subj;
    subj.subject_id = id;

    std::size_t pos = 0;
    int line_no = 0;
    std::size_t n_frames = 0;
    auto next_line = [&](std::string_view& line) -> bool {
      if (pos >= rec.size()) return false;
      std::size_t eol = rec.find('\n', pos);
      if (eol == std::string::npos) eol = rec.size();
      line = chomp(std::string_view(rec).substr(pos, eol - pos));
      pos = eol + 1;
      ++line_no;
      return true;
    };
    std::string_view line;
    for (int h = 0; h < 3; ++h) {
      if (!next_line(line)) throw std::runtime_error(rec_path + ": truncated header");
      std::string locus = rec_path + ":" + std::to_string(line_no);
      std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) throw std::runtime_error(locus + ": expected header line");
      std::string_view k = KeyValueReader::trim(line.substr(0, eq));
      std::string_view v = KeyValueReader::trim(line.substr(eq + 1));
      if (k == "subject") {
        if (parse_int(v, locus) != id) {
          throw std::runtime_error(locus + ": subject id mismatch with manifest");
        }
      } else if (k == "n_frames") {
        n_frames = static_cast<std::size_t>(parse_int(v, locus));
      } else if (k == "dims") {
        auto dd = split(v, ',');
        if (dd.size() != 3 ||
            static_cast<std::size_t>(parse_int(dd[0], locus)) != ds.dims.face ||
            static_cast<std::size_t>(parse_int(dd[1], locus)) != ds.dims.speech ||
            static_cast<std::size_t>(parse_int(dd[2], locus)) != ds.dims.car) {
          throw std::runtime_error(locus + ": dims disagree with manifest");
        }
      } else {
        throw std::runtime_error(locus + ": unknown record header '" + std::string(k) + "'");
      }
    }

    std::size_t expected_fields = 2 + ds.dims.total();
    subj.frames.reserve(n_frames);
    while (next_line(line)) {
      if (line.empty()) continue;
      std::string locus = rec_path + ":" + std::to_string(line_no);
      FeatureFrame f;
      f.subject_id = id;
      f.face = Vector(ds.dims.face);
      f.speech = Vector(ds.dims.speech);
      f.car = Vector(ds.dims.car);
      const char* cur = line.data();
      const char* end = line.data() + line.size();
      std::size_t field = 0;
      auto next_field = [&](std::string_view& out_field) -> bool {
        if (cur > end) return false;
        const char* comma = static_cast<const char*>(memchr(cur, ',', static_cast<std::size_t>(end - cur)));
        const char* stop = comma ? comma : end;
        out_field = std::string_view(cur, static_cast<std::size_t>(stop - cur));
        cur = comma ? comma + 1 : end + 1;
        return true;
      };
      std::string_view fv;
      while (next_field(fv)) {
        if (field >= expected_fields) {
          throw std::runtime_error(locus + ": too many fields (expected " +
                                   std::to_string(expected_fields) + ")");
        }
        if (field == 0) {
          f.t = parse_int(fv, locus);
        } else if (field == 1) {
          long long lab = parse_int(fv, locus);
          if (lab != 0 && lab != 1) throw std::runtime_error(locus + ": label must be 0 or 1");
          f.label = static_cast<std::uint8_t>(lab);
        } else {
          std::size_t j = field - 2;
          double v = parse_double(fv, locus);
          if (j < ds.dims.face) f.face[j] = v;
          else if (j < ds.dims.face + ds.dims.speech) f.speech[j - ds.dims.face] = v;
          else f.car[j - ds.dims.face - ds.dims.speech] = v;
        }
        ++field;
      }
      if (field != expected_fields) {
        throw std::runtime_error(locus + ": frame record has " + std::to_string(field) +
                                 " fields, expected " + std::to_string(expected_fields));
      }
      subj.frames.push_back(std::move(f));
    }
    if (subj.frames.size() != n_frames) {
      throw std::runtime_error(rec_path + ": truncated record: header says " +
                               std::to_string(n_frames) + " frames, file has " +
                               std::to_string(subj.frames.size()));
    }

    std::string ev_path = (fs::path(dir) / subject_events_name(id)).string();
    std::string ev = read_file(ev_path);
    std::size_t epos = 0;
    int eline = 0;
    while (epos < ev.size()) {
      std::size_t eol = ev.find('\n', epos);
      if (eol == std::string::npos) eol = ev.size();
      std::string_view eline_sv = chomp(std::string_view(ev).substr(epos, eol - epos));
      epos = eol + 1;
      ++eline;
      if (eline_sv.empty()) continue;
      std::string locus = ev_path + ":" + std::to_string(eline);
      auto fields = split(eline_sv, ',');
      if (fields.size() != 2) throw std::runtime_error(locus + ": expected 'start_t,end_t'");
      DistractionEvent e;
      e.start_t = parse_int(fields[0], locus);
      e.end_t = parse_int(fields[1], locus);
      subj.events.push_back(e);
    }

    ds.subjects.push_back(std::move(subj));
  }
  return ds;
}

}  // namespace mpf
