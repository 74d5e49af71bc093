// mpf: synthetic multimodal distraction corpus + polynomial-fusion models.
//
// Subcommands: generate, train, eval, ablate, roc, viz1d. Flags override
// config-file values ("key = value" lines via --config), which override
// defaults. Every command echoes its effective configuration into the output
// directory and is byte-reproducible for a fixed seed.

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mpf/commands.hpp"

namespace {

void add_train_options(CLI::App* cmd, mpf::cli::RunConfig& cfg, std::string& variant,
                       std::string& mask) {
  cmd->add_option("--seed", cfg.train.seed, "training seed");
  cmd->add_option("--variant", variant,
                  "model variant: mpf, nn-cube, nn-tc, nn-early, linear-hinge, majority");
  cmd->add_option("--mask", mask, "modality subset, e.g. FSC, FS, F");
  cmd->add_option("--epochs", cfg.train.epochs, "training epochs");
  cmd->add_option("--batch", cfg.train.batch_size, "mini-batch size");
  cmd->add_option("--lr", cfg.train.lr0, "initial learning rate");
  cmd->add_option("--lr-step-every", cfg.train.lr_step_every, "epochs per LR decay step");
  cmd->add_option("--lr-decay", cfg.train.lr_decay, "LR decay factor in (0,1]");
  cmd->add_option("--dropout", cfg.train.dropout_rate, "head dropout rate in [0,1)");
  cmd->add_option("--fusion-size", cfg.train.h, "fused representation size");
  cmd->add_option("--head-width", cfg.train.head_width, "hidden layer size");
  cmd->add_option("--pos-weight", cfg.train.pos_weight, "BCE weight on positive frames");
  cmd->add_option("--hinge-l2", cfg.train.hinge_l2, "L2 strength for linear-hinge");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal polynomial fusion: synthetic corpus, training, evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file with 'key = value' lines");

  mpf::cli::RunConfig cfg;
  std::string variant = "mpf";
  std::string mask = "FSC";
  std::string policy = "fixed";
  std::string mode = "event-bumps";

  CLI::App* generate = app.add_subcommand("generate", "synthesize a dataset directory");
  generate->add_option("--out", cfg.out_dir, "output dataset directory")->required();
  generate->add_option("--subjects", cfg.n_subjects, "number of subjects (default 30)");
  generate->add_option("--seed", cfg.profile.seed, "corpus seed");
  generate->add_option("--duration", cfg.profile.duration_s, "seconds per subject");
  generate->add_option("--mode", mode, "label mode: event-bumps or product-interaction");
  generate->add_option("--event-rate", cfg.profile.event_rate_per_min, "events per minute");
  generate->add_option("--d-speech", cfg.profile.d_speech, "speech feature width");

  CLI::App* train = app.add_subcommand("train", "train one model variant");
  train->add_option("--dataset", cfg.dataset_dir, "dataset directory")->required();
  train->add_option("--out", cfg.out_dir, "output run directory")->required();
  add_train_options(train, cfg, variant, mask);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval->add_option("--dataset", cfg.dataset_dir, "dataset directory")->required();
  eval->add_option("--checkpoint", cfg.checkpoint, "model checkpoint path")->required();
  eval->add_option("--out", cfg.out_dir, "output run directory")->required();
  eval->add_option("--threshold-policy", policy, "fixed or dev");

  CLI::App* ablate = app.add_subcommand("ablate", "train and evaluate all twelve table rows");
  ablate->add_option("--dataset", cfg.dataset_dir, "dataset directory")->required();
  ablate->add_option("--out", cfg.out_dir, "output run directory")->required();
  add_train_options(ablate, cfg, variant, mask);

  CLI::App* roc = app.add_subcommand("roc", "export the test-split ROC sweep");
  roc->add_option("--dataset", cfg.dataset_dir, "dataset directory")->required();
  roc->add_option("--checkpoint", cfg.checkpoint, "model checkpoint path")->required();
  roc->add_option("--out", cfg.out_dir, "output run directory")->required();

  CLI::App* viz = app.add_subcommand("viz1d", "export 1-d modality projections per subject");
  viz->add_option("--dataset", cfg.dataset_dir, "dataset directory")->required();
  viz->add_option("--out", cfg.out_dir, "output run directory")->required();
  viz->add_option("--subject", cfg.viz_subject, "subject id (default: all)");

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.train.variant = mpf::parse_variant(variant);
    cfg.train.mask = mpf::parse_mask(mask);
    cfg.profile.mode = mpf::parse_label_mode(mode);
    if (policy == "fixed") {
      cfg.policy = mpf::ThresholdPolicy::Fixed;
    } else if (policy == "dev") {
      cfg.policy = mpf::ThresholdPolicy::DevSelected;
    } else {
      throw std::invalid_argument("unknown threshold policy '" + policy + "'");
    }

    if (generate->parsed()) mpf::cli::cmd_generate(cfg);
    else if (train->parsed()) mpf::cli::cmd_train(cfg);
    else if (eval->parsed()) mpf::cli::cmd_eval(cfg);
    else if (ablate->parsed()) mpf::cli::cmd_ablate(cfg);
    else if (roc->parsed()) mpf::cli::cmd_roc(cfg);
    else if (viz->parsed()) mpf::cli::cmd_viz1d(cfg);
  } catch (const std::exception& e) {
    std::cerr << "mpf: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
