#pragma once

#include <filesystem>
#include <iostream>
#include <string>

#include "mpf/checkpoint.hpp"
#include "mpf/data.hpp"
#include "mpf/dataset_io.hpp"
#include "mpf/metrics.hpp"
#include "mpf/train.hpp"

namespace mpf::cli {

// Command implementations behind the mpf binary. Each takes a validated
// RunConfig, writes its artifacts under out_dir and throws on error; the
// binary maps exceptions to a one-line stderr diagnostic and a nonzero exit.
// With a fixed seed every command is idempotent: rerunning writes
// byte-identical artifacts (no timestamps, shortest-round-trip floats, fixed
// iteration orders).

struct RunConfig {
  std::string dataset_dir;
  std::string out_dir;
  std::string checkpoint;
  std::size_t n_subjects = 30;
  SubjectProfile profile;
  TrainConfig train;
  std::int32_t viz_subject = -1;  // -1 = every subject
  ThresholdPolicy policy = ThresholdPolicy::Fixed;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline void write_echo(const std::string& out_dir, const std::string& body) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "config.echo").string(), body);
}

inline std::string echo_train(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  std::string s;
  s += "dataset = " + cfg.dataset_dir + "\n";
  s += "variant = " + std::string(to_string(t.variant)) + "\n";
  s += "mask = " + to_string(t.mask) + "\n";
  s += "seed = " + std::to_string(t.seed) + "\n";
  s += "epochs = " + std::to_string(t.epochs) + "\n";
  s += "batch_size = " + std::to_string(t.batch_size) + "\n";
  s += "lr0 = " + format_double(t.lr0) + "\n";
  s += "lr_step_every = " + std::to_string(t.lr_step_every) + "\n";
  s += "lr_decay = " + format_double(t.lr_decay) + "\n";
  s += "dropout = " + format_double(t.dropout_rate) + "\n";
  s += "h = " + std::to_string(t.h) + "\n";
  s += "head_width = " + std::to_string(t.head_width) + "\n";
  s += "adam_beta1 = " + format_double(t.adam_beta1) + "\n";
  s += "adam_beta2 = " + format_double(t.adam_beta2) + "\n";
  s += "adam_eps = " + format_double(t.adam_eps) + "\n";
  s += "pos_weight = " + format_double(t.pos_weight) + "\n";
  s += "hinge_l2 = " + format_double(t.hinge_l2) + "\n";
  return s;
}

inline Dataset load_standardized(const std::string& dir) {
  Dataset ds = read_dataset(dir);
  standardize_per_subject(ds);
  return ds;
}

inline void check_checkpoint_dims(const ModelParams& params, const Dataset& ds) {
  if (params.dims.feat != ds.dims) {
    throw std::invalid_argument(
        "checkpoint expects dims (" + std::to_string(params.dims.feat.face) + "," +
        std::to_string(params.dims.feat.speech) + "," + std::to_string(params.dims.feat.car) +
        "), dataset has (" + std::to_string(ds.dims.face) + "," +
        std::to_string(ds.dims.speech) + "," + std::to_string(ds.dims.car) + ")");
  }
}

}  // namespace detail

/// generate: synthesize the corpus, write the dataset directory plus a
/// config echo, print the prevalence summary.
inline void cmd_generate(const RunConfig& cfg) {
  detail::require(!cfg.out_dir.empty(), "generate: --out directory required");
  detail::require(cfg.n_subjects >= 3, "generate: need at least 3 subjects");
  detail::require(cfg.profile.duration_s > 0.0, "generate: duration must be positive");

  Dataset ds = generate_dataset(cfg.profile, cfg.n_subjects);
  write_dataset(cfg.out_dir, ds);

  std::string echo;
  echo += "command = generate\n";
  echo += "subjects = " + std::to_string(cfg.n_subjects) + "\n";
  echo += "seed = " + std::to_string(cfg.profile.seed) + "\n";
  echo += to_string(cfg.profile);
  detail::write_echo(cfg.out_dir, echo);

  std::size_t pos = 0, total = 0;
  for (const SubjectData& s : ds.subjects) {
    for (const FeatureFrame& f : s.frames) {
      pos += f.label;
      ++total;
    }
  }
  std::size_t n_train = ds.subjects_in(Split::Train).size();
  std::size_t n_dev = ds.subjects_in(Split::Dev).size();
  std::size_t n_test = ds.subjects_in(Split::Test).size();
  std::cout << "generated " << ds.subjects.size() << " subjects (" << n_train << "/" << n_dev
            << "/" << n_test << " train/dev/test), " << total << " frames, "
            << format_double(100.0 * static_cast<double>(pos) / static_cast<double>(total))
            << "% positive\n";
}

/// train: fit the requested variant, write checkpoint + trainlog.csv.
inline void cmd_train(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  detail::require(!cfg.dataset_dir.empty(), "train: --dataset directory required");
  detail::require(!cfg.out_dir.empty(), "train: --out directory required");

  Dataset ds = detail::load_standardized(cfg.dataset_dir);
  TrainResult result = train(cfg.train, ds);

  detail::write_echo(cfg.out_dir, "command = train\n" + detail::echo_train(cfg));
  save_checkpoint((fs::path(cfg.out_dir) / "checkpoint").string(), result.params);
  write_file((fs::path(cfg.out_dir) / "trainlog.csv").string(), trainlog_to_csv(result.log));

  if (result.log.epochs.empty()) {
    std::cout << "trained " << to_string(cfg.train.variant) << " (no epochs)\n";
  } else {
    const EpochLog& sel = result.log.epochs[result.log.selected_epoch];
    std::cout << "trained " << to_string(cfg.train.variant) << "[" << to_string(cfg.train.mask)
              << "]: selected epoch " << sel.epoch << ", dev auc "
              << format_double(sel.dev.auc) << "\n";
  }
}

/// eval: one metrics row for the checkpoint on the test split.
inline void cmd_eval(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  detail::require(!cfg.dataset_dir.empty(), "eval: --dataset directory required");
  detail::require(!cfg.checkpoint.empty(), "eval: --checkpoint path required");
  detail::require(!cfg.out_dir.empty(), "eval: --out directory required");

  ModelParams params = load_checkpoint(cfg.checkpoint);
  Dataset ds = detail::load_standardized(cfg.dataset_dir);
  detail::check_checkpoint_dims(params, ds);

  double threshold = 0.5;
  if (cfg.policy == ThresholdPolicy::DevSelected) {
    auto dev_scores = score_frames(params, ds.frames_in(Split::Dev));
    threshold = select_threshold_max_accuracy(dev_scores);
  }
  auto scores = score_frames(params, ds.frames_in(Split::Test));
  MetricReport rep = report(scores, threshold, cfg.policy);

  std::string row = metric_report_row(to_string(params.variant), to_string(params.mask), rep);
  std::string echo;
  echo += "command = eval\n";
  echo += "dataset = " + cfg.dataset_dir + "\n";
  echo += "checkpoint = " + cfg.checkpoint + "\n";
  echo += "threshold_policy = " + std::string(to_string(rep.policy)) + "\n";
  echo += "threshold = " + format_double(rep.threshold_used) + "\n";
  detail::write_echo(cfg.out_dir, echo);
  write_file((fs::path(cfg.out_dir) / "metrics.csv").string(),
             "model,modalities,acc,auc,eer,f1\n" + row + "\n");
  std::cout << row << "\n";
}

/// ablate: train and evaluate the full twelve-row table.
inline void cmd_ablate(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  detail::require(!cfg.dataset_dir.empty(), "ablate: --dataset directory required");
  detail::require(!cfg.out_dir.empty(), "ablate: --out directory required");

  Dataset ds = detail::load_standardized(cfg.dataset_dir);
  auto rows = ablate(cfg.train, ds);
  std::string csv = ablation_to_csv(rows);

  detail::write_echo(cfg.out_dir, "command = ablate\n" + detail::echo_train(cfg));
  write_file((fs::path(cfg.out_dir) / "metrics.csv").string(), csv);
  std::cout << csv;
}

/// roc: threshold,fpr,tpr sweep of the checkpoint on the test split.
inline void cmd_roc(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  detail::require(!cfg.dataset_dir.empty(), "roc: --dataset directory required");
  detail::require(!cfg.checkpoint.empty(), "roc: --checkpoint path required");
  detail::require(!cfg.out_dir.empty(), "roc: --out directory required");

  ModelParams params = load_checkpoint(cfg.checkpoint);
  Dataset ds = detail::load_standardized(cfg.dataset_dir);
  detail::check_checkpoint_dims(params, ds);

  auto scores = score_frames(params, ds.frames_in(Split::Test));
  RocResult roc = roc_auc(scores);

  std::string echo;
  echo += "command = roc\n";
  echo += "dataset = " + cfg.dataset_dir + "\n";
  echo += "checkpoint = " + cfg.checkpoint + "\n";
  detail::write_echo(cfg.out_dir, echo);
  std::string path = (fs::path(cfg.out_dir) / "roc.csv").string();
  write_file(path, roc_to_csv(roc.curve));
  std::cout << "auc " << format_double(roc.auc) << ", " << roc.curve.points.size()
            << " sweep points -> " << path << "\n";
}

/// viz1d: per-subject time series (t, face_1d, speech_1d, car_1d, label)
/// for plotting against the annotated windows.
inline void cmd_viz1d(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  detail::require(!cfg.dataset_dir.empty(), "viz1d: --dataset directory required");
  detail::require(!cfg.out_dir.empty(), "viz1d: --out directory required");

  Dataset ds = read_dataset(cfg.dataset_dir);
  std::string echo;
  echo += "command = viz1d\n";
  echo += "dataset = " + cfg.dataset_dir + "\n";
  echo += "subject = " + std::to_string(cfg.viz_subject) + "\n";
  detail::write_echo(cfg.out_dir, echo);

  std::size_t written = 0;
  for (const SubjectData& subj : ds.subjects) {
    if (cfg.viz_subject >= 0 && subj.subject_id != cfg.viz_subject) continue;
    auto face = project_modality_1d(subj.frames, Modality::Face);
    auto speech = project_modality_1d(subj.frames, Modality::Speech);
    auto car = project_modality_1d(subj.frames, Modality::Car);
    std::string csv = "t,face_1d,speech_1d,car_1d,label\n";
    for (std::size_t i = 0; i < subj.frames.size(); ++i) {
      csv += std::to_string(subj.frames[i].t);
      csv += ',';
      append_double(csv, face[i]);
      csv += ',';
      append_double(csv, speech[i]);
      csv += ',';
      append_double(csv, car[i]);
      csv += ',';
      csv += subj.frames[i].label ? '1' : '0';
      csv += '\n';
    }
    std::string name = "viz1d_subject" + std::to_string(subj.subject_id) + ".csv";
    write_file((fs::path(cfg.out_dir) / name).string(), csv);
    ++written;
  }
  detail::require(written > 0, "viz1d: subject " + std::to_string(cfg.viz_subject) +
                                   " not present in dataset");
  std::cout << "wrote " << written << " viz1d series to " << cfg.out_dir << "\n";
}

}  // namespace mpf::cli
