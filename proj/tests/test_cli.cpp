#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <map>

#include "mpf/commands.hpp"
#include "test_util.hpp"

using namespace mpf;
using mpf::cli::RunConfig;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const char* tag) {
  auto dir = fs::temp_directory_path() / (std::string("mpf_cli_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, std::string> slurp_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out[fs::relative(e.path(), dir).string()] = read_file(e.path().string());
    }
  }
  return out;
}

// 30s minimum so every subject deterministically gets at least one event and
// each split carries both classes.
RunConfig small_gen_config(const std::string& out, std::size_t subjects = 6,
                           double duration = 30.0, std::uint64_t seed = 5) {
  RunConfig cfg;
  cfg.out_dir = out;
  cfg.n_subjects = subjects;
  cfg.profile.seed = seed;
  cfg.profile.duration_s = duration;
  return cfg;
}

RunConfig quick_train_config(const std::string& dataset, const std::string& out) {
  RunConfig cfg;
  cfg.dataset_dir = dataset;
  cfg.out_dir = out;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 64;
  cfg.train.h = 6;
  cfg.train.head_width = 3;
  cfg.train.dropout_rate = 0.2;
  return cfg;
}

}  // namespace

TEST_CASE("run config defaults to 30 subjects") {
  CHECK(RunConfig{}.n_subjects == 30);
  CHECK(RunConfig{}.train.epochs == 30);
  CHECK(RunConfig{}.train.h == 16);
  CHECK(RunConfig{}.train.head_width == 8);
}

TEST_CASE("cmd_generate writes the dataset and is byte-identical on rerun") {
  auto dir_a = temp_dir("gen_a");
  auto dir_b = temp_dir("gen_b");
  cli::cmd_generate(small_gen_config((dir_a / "data").string()));
  cli::cmd_generate(small_gen_config((dir_b / "data").string()));
  CHECK(slurp_dir(dir_a) == slurp_dir(dir_b));

  Dataset ds = read_dataset((dir_a / "data").string());
  CHECK(ds.subjects.size() == 6);
  CHECK(ds.subjects_in(Split::Train).size() == 4);
  CHECK(ds.subjects_in(Split::Dev).size() == 1);
  CHECK(ds.subjects_in(Split::Test).size() == 1);

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("cmd_generate splits 30 subjects 20/5/5") {
  auto dir = temp_dir("gen30");
  cli::cmd_generate(small_gen_config((dir / "data").string(), 30, 4.0));
  Dataset ds = read_dataset((dir / "data").string());
  CHECK(ds.subjects.size() == 30);
  CHECK(ds.subjects_in(Split::Train).size() == 20);
  CHECK(ds.subjects_in(Split::Dev).size() == 5);
  CHECK(ds.subjects_in(Split::Test).size() == 5);
  fs::remove_all(dir);
}

TEST_CASE("cmd_generate validates its inputs") {
  RunConfig no_out = small_gen_config("");
  CHECK_THROWS_AS(cli::cmd_generate(no_out), std::invalid_argument);
  auto dir = temp_dir("gen_bad");
  RunConfig few = small_gen_config((dir / "d").string(), 2);
  CHECK_THROWS_AS(cli::cmd_generate(few), std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("cmd_train writes checkpoint and log; epochs 0 equals initialization") {
  auto dir = temp_dir("train");
  std::string data = (dir / "data").string();
  cli::cmd_generate(small_gen_config(data));

  SUBCASE("mpf mask F dispatch") {
    RunConfig cfg = quick_train_config(data, (dir / "run").string());
    cfg.train.variant = Variant::Mpf;
    cfg.train.mask = parse_mask("F");
    cli::cmd_train(cfg);
    ModelParams p = load_checkpoint((dir / "run" / "checkpoint").string());
    CHECK(p.variant == Variant::Mpf);
    CHECK(p.mask == parse_mask("F"));
    CHECK(read_file((dir / "run" / "trainlog.csv").string())
              .starts_with("epoch,lr,train_loss,dev_acc,dev_auc,dev_eer,dev_f1\n"));
  }

  SUBCASE("epochs 0 checkpoint equals initialization") {
    RunConfig cfg = quick_train_config(data, (dir / "run0").string());
    cfg.train.epochs = 0;
    cli::cmd_train(cfg);
    ModelParams p = load_checkpoint((dir / "run0" / "checkpoint").string());
    Dataset ds = read_dataset(data);
    ModelParams fresh = init_params(cfg.train.variant, cfg.train.mask,
                                    cfg.train.model_dims(ds.dims),
                                    cfg.train.dropout_rate, cfg.train.seed);
    CHECK(p == fresh);
  }

  SUBCASE("training reruns are byte-identical") {
    RunConfig cfg1 = quick_train_config(data, (dir / "r1").string());
    RunConfig cfg2 = quick_train_config(data, (dir / "r2").string());
    cli::cmd_train(cfg1);
    cli::cmd_train(cfg2);
    auto a = slurp_dir(dir / "r1");
    auto b = slurp_dir(dir / "r2");
    CHECK(a.size() == 3);
    CHECK(a == b);
  }

  SUBCASE("missing dataset fails") {
    RunConfig cfg = quick_train_config((dir / "nope").string(), (dir / "runx").string());
    CHECK_THROWS_AS(cli::cmd_train(cfg), std::runtime_error);
  }

  fs::remove_all(dir);
}

TEST_CASE("cmd_eval emits a stable table row") {
  auto dir = temp_dir("eval");
  std::string data = (dir / "data").string();
  cli::cmd_generate(small_gen_config(data, 6, 30.0));

  RunConfig tr = quick_train_config(data, (dir / "maj").string());
  tr.train.variant = Variant::Majority;
  cli::cmd_train(tr);

  RunConfig ev;
  ev.dataset_dir = data;
  ev.checkpoint = (dir / "maj" / "checkpoint").string();
  ev.out_dir = (dir / "eval1").string();
  cli::cmd_eval(ev);
  std::string csv1 = read_file((dir / "eval1" / "metrics.csv").string());
  CHECK(csv1.starts_with("model,modalities,acc,auc,eer,f1\nmajority,FSC,"));
  CHECK(csv1.find(",0.5,0.5,0\n") != std::string::npos);  // auc, eer, degenerate f1

  ev.out_dir = (dir / "eval2").string();
  cli::cmd_eval(ev);
  CHECK(read_file((dir / "eval2" / "metrics.csv").string()) == csv1);

  SUBCASE("dim mismatch is an explicit error") {
    auto dir2 = temp_dir("eval_dims");
    RunConfig gen2 = small_gen_config((dir2 / "data").string());
    gen2.profile.d_speech = 9;
    cli::cmd_generate(gen2);
    RunConfig bad = ev;
    bad.dataset_dir = (dir2 / "data").string();
    bad.out_dir = (dir2 / "out").string();
    CHECK_THROWS_WITH_AS(cli::cmd_eval(bad), doctest::Contains("dims"),
                         std::invalid_argument);
    fs::remove_all(dir2);
  }

  SUBCASE("dev-selected threshold policy is recorded") {
    RunConfig devp = ev;
    devp.out_dir = (dir / "eval3").string();
    devp.policy = ThresholdPolicy::DevSelected;
    cli::cmd_eval(devp);
    std::string echo = read_file((dir / "eval3" / "config.echo").string());
    CHECK(echo.find("threshold_policy = dev-selected") != std::string::npos);
  }

  fs::remove_all(dir);
}

TEST_CASE("cmd_ablate writes the twelve-row table deterministically") {
  auto dir = temp_dir("ablate");
  std::string data = (dir / "data").string();
  cli::cmd_generate(small_gen_config(data, 6, 30.0));

  RunConfig cfg = quick_train_config(data, (dir / "t1").string());
  cfg.train.epochs = 1;
  cli::cmd_ablate(cfg);
  cfg.out_dir = (dir / "t2").string();
  cli::cmd_ablate(cfg);

  std::string csv = read_file((dir / "t1" / "metrics.csv").string());
  CHECK(csv == read_file((dir / "t2" / "metrics.csv").string()));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  CHECK(csv.starts_with("model,modalities,acc,auc,eer,f1\nmajority,-,"));
  CHECK(csv.find("\nmpf,F+S+C,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cmd_roc exports endpoints; cmd_viz1d stays in range") {
  auto dir = temp_dir("rocviz");
  std::string data = (dir / "data").string();
  cli::cmd_generate(small_gen_config(data, 6, 30.0));

  RunConfig tr = quick_train_config(data, (dir / "run").string());
  cli::cmd_train(tr);

  RunConfig roc;
  roc.dataset_dir = data;
  roc.checkpoint = (dir / "run" / "checkpoint").string();
  roc.out_dir = (dir / "roc").string();
  cli::cmd_roc(roc);
  std::string csv = read_file((dir / "roc" / "roc.csv").string());
  CHECK(csv.starts_with("threshold,fpr,tpr\ninf,0,0\n"));
  CHECK(csv.find(",1,1\n") != std::string::npos);

  RunConfig viz;
  viz.dataset_dir = data;
  viz.out_dir = (dir / "viz").string();
  viz.viz_subject = 2;
  cli::cmd_viz1d(viz);
  std::string series = read_file((dir / "viz" / "viz1d_subject2.csv").string());
  CHECK(series.starts_with("t,face_1d,speech_1d,car_1d,label\n"));
  std::size_t line_start = series.find('\n') + 1;
  int checked = 0;
  while (line_start < series.size()) {
    std::size_t line_end = series.find('\n', line_start);
    auto fields = split(std::string_view(series).substr(line_start, line_end - line_start), ',');
    REQUIRE(fields.size() == 5);
    for (int j = 1; j <= 3; ++j) {
      double v = parse_double(fields[static_cast<std::size_t>(j)], "viz");
      CHECK(v <= 1.0);
      CHECK(v >= -1.0);
    }
    ++checked;
    line_start = line_end + 1;
  }
  CHECK(checked == 300);

  RunConfig missing = viz;
  missing.out_dir = (dir / "viz2").string();
  missing.viz_subject = 99;
  CHECK_THROWS_AS(cli::cmd_viz1d(missing), std::invalid_argument);

  // roc and viz1d reruns are byte-identical
  RunConfig roc2 = roc;
  roc2.out_dir = (dir / "roc_b").string();
  cli::cmd_roc(roc2);
  CHECK(read_file((dir / "roc_b" / "roc.csv").string()) == csv);
  RunConfig viz2 = viz;
  viz2.out_dir = (dir / "viz_b").string();
  cli::cmd_viz1d(viz2);
  CHECK(read_file((dir / "viz_b" / "viz1d_subject2.csv").string()) == series);

  fs::remove_all(dir);
}

#ifdef MPF_CLI_PATH
TEST_CASE("the real binary wires the commands with proper exit codes") {
  auto dir = temp_dir("binary");
  std::string data = (dir / "data").string();
  std::string base = std::string(MPF_CLI_PATH);

  auto run = [](const std::string& cmd) { return std::system(cmd.c_str()); };

  CHECK(run(base + " generate --out " + data +
            " --subjects 4 --duration 30 --seed 11 > /dev/null") == 0);
  CHECK(run(base + " train --dataset " + data + " --out " + (dir / "run").string() +
            " --epochs 1 --batch 64 --fusion-size 4 --head-width 2 > /dev/null") == 0);
  CHECK(run(base + " eval --dataset " + data + " --checkpoint " +
            (dir / "run" / "checkpoint").string() + " --out " + (dir / "ev").string() +
            " > /dev/null") == 0);

  // config file fills options; explicit flags override it
  std::string conf = (dir / "run.conf").string();
  write_file(conf, "[train]\nepochs = 1\nbatch = 64\nfusion-size = 4\nhead-width = 2\n");
  CHECK(run(base + " --config " + conf + " train --dataset " + data + " --out " +
            (dir / "conf_run").string() + " > /dev/null") == 0);
  CHECK(read_file((dir / "conf_run" / "config.echo").string()).find("epochs = 1") !=
        std::string::npos);
  CHECK(run(base + " --config " + conf + " train --dataset " + data + " --out " +
            (dir / "conf_run2").string() + " --epochs 2 > /dev/null") == 0);
  CHECK(read_file((dir / "conf_run2" / "config.echo").string()).find("epochs = 2") !=
        std::string::npos);

  // error classes exit nonzero with a diagnostic on stderr
  std::string err_file = (dir / "stderr.txt").string();
  CHECK(run(base + " train --dataset " + (dir / "missing").string() + " --out " +
            (dir / "x").string() + " --epochs 1 > /dev/null 2> " + err_file) != 0);
  CHECK(read_file(err_file).starts_with("mpf: "));
  CHECK(run(base + " train --dataset " + data + " --out " + (dir / "y").string() +
            " --variant bogus > /dev/null 2>&1") != 0);
  CHECK(run(base + " --help > /dev/null") == 0);

  fs::remove_all(dir);
}
#endif
