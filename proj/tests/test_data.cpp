#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <set>

#include "mpf/data.hpp"
#include "mpf/dataset_io.hpp"
#include "test_util.hpp"

using namespace mpf;
using testutil::close;

namespace {

SubjectProfile tiny_profile(std::uint64_t seed = 7, double duration_s = 30.0) {
  SubjectProfile p;
  p.seed = seed;
  p.duration_s = duration_s;
  return p;
}

std::filesystem::path temp_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() / (std::string("mpf_test_") + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp_dir(const std::filesystem::path& dir) {
  std::string all;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    all += f.filename().string();
    all += '\0';
    all += read_file(f.string());
    all += '\0';
  }
  return all;
}

}  // namespace

TEST_CASE("label_frames basics and union oracle") {
  CHECK(label_frames({}, 4) == std::vector<std::uint8_t>{0, 0, 0, 0});

  DistractionEvent e;
  e.start_t = 2;
  e.end_t = 4;
  CHECK(label_frames({e}, 6) == std::vector<std::uint8_t>{0, 0, 1, 1, 1, 0});

  DistractionEvent a, b;
  a.start_t = 1;
  a.end_t = 5;
  b.start_t = 4;
  b.end_t = 8;
  auto labels = label_frames({a, b}, 12);
  for (std::int64_t t = 0; t < 12; ++t) {
    bool member = (t >= a.start_t && t <= a.end_t) || (t >= b.start_t && t <= b.end_t);
    CHECK(labels[static_cast<std::size_t>(t)] == (member ? 1 : 0));
  }

  DistractionEvent bad;
  bad.start_t = 3;
  bad.end_t = 9;
  CHECK_THROWS_AS(label_frames({bad}, 8), std::invalid_argument);
  bad.start_t = -1;
  bad.end_t = 2;
  CHECK_THROWS_AS(label_frames({bad}, 8), std::invalid_argument);
}

TEST_CASE("resample block means") {
  std::vector<Vector> constant(9, Vector{2.5, -1.0});
  auto r = resample_30hz_to_10hz(constant);
  REQUIRE(r.size() == 3);
  for (const auto& v : r) CHECK(v == Vector{2.5, -1.0});

  std::vector<Vector> three{Vector{0.0}, Vector{0.0}, Vector{3.0}};
  CHECK(resample_30hz_to_10hz(three)[0] == Vector{1.0});

  // trailing partial block averaged over its members
  std::vector<Vector> four{Vector{0.0}, Vector{0.0}, Vector{3.0}, Vector{5.0}};
  auto r4 = resample_30hz_to_10hz(four);
  REQUIRE(r4.size() == 2);
  CHECK(r4[1] == Vector{5.0});

  CHECK_THROWS_AS(resample_30hz_to_10hz({}), std::invalid_argument);

  Rng rng(55);
  std::vector<Vector> stream(300, Vector(2));
  for (auto& v : stream) {
    v[0] = rng.uniform(-3.0, 3.0);
    v[1] = rng.uniform(-3.0, 3.0);
  }
  auto out = resample_30hz_to_10hz(stream);
  REQUIRE(out.size() == 100);
  for (std::size_t blockIdx = 0; blockIdx < 100; ++blockIdx) {
    for (std::size_t j = 0; j < 2; ++j) {
      double want = (stream[3 * blockIdx][j] + stream[3 * blockIdx + 1][j] +
                     stream[3 * blockIdx + 2][j]) / 3.0;
      CHECK(close(out[blockIdx][j], want, 1e-15));
    }
  }
}

TEST_CASE("split_subjects sizes, determinism, partition") {
  std::vector<std::int32_t> thirty;
  for (int i = 0; i < 30; ++i) thirty.push_back(i);
  auto split = split_subjects(thirty, 5);
  int train = 0, dev = 0, test = 0;
  for (auto [id, s] : split) {
    if (s == Split::Train) ++train;
    if (s == Split::Dev) ++dev;
    if (s == Split::Test) ++test;
  }
  CHECK(train == 20);
  CHECK(dev == 5);
  CHECK(test == 5);
  CHECK(split.size() == 30);

  std::vector<std::int32_t> six{0, 1, 2, 3, 4, 5};
  auto s6 = split_subjects(six, 5);
  int t6 = 0, d6 = 0, e6 = 0;
  for (auto [id, s] : s6) {
    if (s == Split::Train) ++t6;
    if (s == Split::Dev) ++d6;
    if (s == Split::Test) ++e6;
  }
  CHECK(t6 == 4);
  CHECK(d6 == 1);
  CHECK(e6 == 1);

  CHECK(split_subjects(thirty, 5) == split);  // same seed, same assignment
  CHECK(split_subjects(thirty, 6) != split);

  CHECK_THROWS_AS(split_subjects({1, 2}, 5), std::invalid_argument);
}

TEST_CASE("generate_subject determinism and schema") {
  SubjectProfile p = tiny_profile();
  SubjectData a = generate_subject(p, 0);
  SubjectData b = generate_subject(p, 0);
  CHECK(a == b);

  SubjectData c = generate_subject(p, 1);
  CHECK(a.frames != c.frames);

  REQUIRE(a.frames.size() == p.n_frames());
  for (const FeatureFrame& f : a.frames) {
    CHECK(f.face.size() == 534);
    CHECK(f.speech.size() == 12);
    CHECK(f.car.size() == 4);
    CHECK(f.car[0] >= 0.0);                          // speed
    CHECK(f.car[1] >= -1.0); CHECK(f.car[1] <= 1.0); // steering
    CHECK(f.car[2] >= 0.0);  CHECK(f.car[2] <= 1.0); // gas
    CHECK(f.car[3] >= 0.0);  CHECK(f.car[3] <= 1.0); // brake
    for (double v : f.face) CHECK(std::isfinite(v));
  }

  // labels are exactly the union of event windows
  auto labels = label_frames(a.events, a.frames.size());
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    CHECK(a.frames[t].label == labels[t]);
  }
}

TEST_CASE("event_rate 0 gives all-zero labels") {
  SubjectProfile p = tiny_profile();
  p.event_rate_per_min = 0.0;
  SubjectData s = generate_subject(p, 3);
  CHECK(s.events.empty());
  for (const FeatureFrame& f : s.frames) CHECK(f.label == 0);
}

TEST_CASE("default profile emits 9000 frames per 15-minute subject") {
  SubjectProfile p;
  p.seed = 42;
  CHECK(p.n_frames() == 9000);
  CHECK(generate_subject_events(p, 0).size() > 0);
}

TEST_CASE("label prevalence over 30 default subjects is 20-30%") {
  SubjectProfile p;
  p.seed = 42;
  std::size_t positive = 0, total = 0;
  for (std::int32_t id = 0; id < 30; ++id) {
    auto events = generate_subject_events(p, id);
    auto labels = label_frames(events, p.n_frames());
    for (auto l : labels) positive += l;
    total += labels.size();
  }
  double rate = static_cast<double>(positive) / static_cast<double>(total);
  CHECK(rate > 0.20);
  CHECK(rate < 0.30);
}

TEST_CASE("product-interaction mode: ~25% prevalence, labels from latent product") {
  SubjectProfile p = tiny_profile(11, 120.0);
  p.mode = LabelMode::ProductInteraction;
  SubjectData s = generate_subject(p, 2);
  CHECK(s == generate_subject(p, 2));
  std::size_t pos = 0;
  for (const FeatureFrame& f : s.frames) pos += f.label;
  double rate = static_cast<double>(pos) / static_cast<double>(s.frames.size());
  CHECK(rate > 0.15);
  CHECK(rate < 0.30);
  CHECK_FALSE(s.events.empty());
}

TEST_CASE("standardize_per_subject moments, degenerate flag, idempotence") {
  SubjectProfile p = tiny_profile(21, 20.0);
  Dataset ds;
  ds.dims = p.dims();
  for (std::int32_t id = 0; id < 3; ++id) ds.subjects.push_back(generate_subject(p, id));
  ds.split = split_subjects({0, 1, 2}, 1);

  auto stats = standardize_per_subject(ds);
  REQUIRE(stats.size() == 3);
  std::size_t d = ds.dims.total();
  for (const SubjectData& subj : ds.subjects) {
    double inv_n = 1.0 / static_cast<double>(subj.frames.size());
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0, var = 0.0;
      auto coord = [&](const FeatureFrame& f) {
        if (j < ds.dims.face) return f.face[j];
        if (j < ds.dims.face + ds.dims.speech) return f.speech[j - ds.dims.face];
        return f.car[j - ds.dims.face - ds.dims.speech];
      };
      for (const FeatureFrame& f : subj.frames) mean += coord(f);
      mean *= inv_n;
      for (const FeatureFrame& f : subj.frames) {
        double c = coord(f) - mean;
        var += c * c;
      }
      var *= inv_n;
      const SubjectStats& st = stats[static_cast<std::size_t>(subj.subject_id)];
      if (!st.degenerate[j]) {
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(var - 1.0) < 1e-8);
      }
    }
  }

  // idempotence on non-degenerate coordinates
  Dataset twice = ds;
  auto stats2 = standardize_per_subject(twice);
  for (std::size_t si = 0; si < ds.subjects.size(); ++si) {
    for (std::size_t fi = 0; fi < ds.subjects[si].frames.size(); ++fi) {
      const FeatureFrame& once_f = ds.subjects[si].frames[fi];
      const FeatureFrame& twice_f = twice.subjects[si].frames[fi];
      for (std::size_t j = 0; j < ds.dims.face; ++j) {
        if (!stats[si].degenerate[j]) {
          CHECK(close(once_f.face[j], twice_f.face[j], 1e-10));
        }
      }
    }
  }
}

TEST_CASE("standardize hand cases") {
  Dataset ds;
  ds.dims = FeatureDims{1, 1, 4};
  SubjectData subj;
  subj.subject_id = 0;
  for (int i = 0; i < 2; ++i) {
    FeatureFrame f;
    f.subject_id = 0;
    f.t = i;
    f.face = Vector{i == 0 ? 1.0 : 3.0};
    f.speech = Vector{7.0};  // constant -> degenerate
    f.car = Vector{50.0, 0.0, 0.5, 0.0};
    subj.frames.push_back(f);
  }
  ds.subjects.push_back(subj);
  ds.split[0] = Split::Train;

  auto stats = standardize_per_subject(ds);
  CHECK(ds.subjects[0].frames[0].face[0] == -1.0);  // population sd of {1,3} is 1
  CHECK(ds.subjects[0].frames[1].face[0] == 1.0);
  CHECK(stats[0].degenerate[1] == 1);
  CHECK(ds.subjects[0].frames[0].speech[0] == 0.0);
  CHECK(ds.subjects[0].frames[1].speech[0] == 0.0);

  SubjectData one_frame;
  one_frame.subject_id = 1;
  one_frame.frames.push_back(subj.frames[0]);
  Dataset bad;
  bad.dims = ds.dims;
  bad.subjects.push_back(one_frame);
  CHECK_THROWS_AS(standardize_per_subject(bad), std::invalid_argument);
}

TEST_CASE("dataset write/read round-trip is byte-exact") {
  SubjectProfile p = tiny_profile(31, 12.0);
  Dataset ds = generate_dataset(p, 3);

  auto dir1 = temp_dir("roundtrip1");
  auto dir2 = temp_dir("roundtrip2");
  write_dataset(dir1.string(), ds);
  Dataset loaded = read_dataset(dir1.string());

  CHECK(loaded.dims == ds.dims);
  CHECK(loaded.seed == ds.seed);
  CHECK(loaded.profile_hash == ds.profile_hash);
  CHECK(loaded.split == ds.split);
  REQUIRE(loaded.subjects.size() == ds.subjects.size());
  for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
    CHECK(loaded.subjects[i].frames == ds.subjects[i].frames);
    REQUIRE(loaded.subjects[i].events.size() == ds.subjects[i].events.size());
    for (std::size_t e = 0; e < ds.subjects[i].events.size(); ++e) {
      CHECK(loaded.subjects[i].events[e].start_t == ds.subjects[i].events[e].start_t);
      CHECK(loaded.subjects[i].events[e].end_t == ds.subjects[i].events[e].end_t);
    }
  }

  write_dataset(dir2.string(), loaded);
  CHECK(slurp_dir(dir1) == slurp_dir(dir2));

  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("dataset read errors carry a locus") {
  SubjectProfile p = tiny_profile(32, 8.0);
  Dataset ds = generate_dataset(p, 3);
  auto dir = temp_dir("errors");
  write_dataset(dir.string(), ds);

  SUBCASE("truncated record file names the record") {
    auto rec = dir / subject_record_name(0);
    std::string contents = read_file(rec.string());
    contents.resize(contents.size() * 2 / 3);
    contents.resize(contents.rfind('\n') + 1);
    write_file(rec.string(), contents);
    CHECK_THROWS_WITH_AS(read_dataset(dir.string()), doctest::Contains("truncated record"),
                         std::runtime_error);
  }

  SUBCASE("manifest subject count mismatch is an integrity error") {
    auto man = dir / "manifest";
    std::string contents = read_file(man.string());
    auto pos = contents.find("n_subjects = 3");
    REQUIRE(pos != std::string::npos);
    contents.replace(pos, 14, "n_subjects = 4");
    write_file(man.string(), contents);
    CHECK_THROWS_WITH_AS(read_dataset(dir.string()), doctest::Contains("integrity error"),
                         std::runtime_error);
  }

  SUBCASE("bad float names file and line") {
    auto rec = dir / subject_record_name(1);
    std::string contents = read_file(rec.string());
    auto pos = contents.find(',');
    pos = contents.find(',', pos + 1);
    contents.insert(pos + 1, "oops");
    write_file(rec.string(), contents);
    CHECK_THROWS_AS(read_dataset(dir.string()), std::runtime_error);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("generate_dataset split covers every subject exactly once") {
  SubjectProfile p = tiny_profile(33, 6.0);
  Dataset ds = generate_dataset(p, 6);
  CHECK(ds.subjects.size() == 6);
  CHECK(ds.split.size() == 6);
  std::set<std::int32_t> seen;
  for (auto [id, s] : ds.split) seen.insert(id);
  CHECK(seen.size() == 6);
  CHECK(ds.frames_in(Split::Train).size() +
        ds.frames_in(Split::Dev).size() +
        ds.frames_in(Split::Test).size() == 6 * p.n_frames());
}
