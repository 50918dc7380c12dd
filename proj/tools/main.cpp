#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ttmr/backbone/strategy.hpp"

int main(int argc, char** argv) {
  using namespace ttmr::tools;
  CLI::App app{"Reference-guided MRI reconstruction with a texture transformer"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* g = app.add_subcommand("gen-data", "Generate a phantom dataset with accelerated acquisitions");
  g->add_option("--count", gen.count, "Training phantoms")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--val", gen.val, "Validation phantoms")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--ref", gen.reference, "Reference-pool phantoms")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--test", gen.test, "Test phantoms")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--size", gen.size, "Image side length")->capture_default_str();
  g->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  g->add_option("--af", gen.af, "Acceleration factor")->capture_default_str();
  g->add_option("--center-frac", gen.center_frac, "Fully sampled central band fraction")->capture_default_str();
  g->add_option("--noise-sigma", gen.noise_sigma, "k-space noise standard deviation")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train one strategy");
  t->add_option("--strategy", tr.strategy, "One of: " + ttmr::backbone::strategy_names())->required();
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--lr", tr.lr, "Initial learning rate")->capture_default_str();
  t->add_option("--max-steps", tr.max_steps, "Stop after this many optimizer steps");
  t->add_option("--resume", tr.resume, "Checkpoint to continue from");
  t->add_option("--out", tr.out, "Run directory")->required();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score checkpoints on a dataset split");
  e->add_option("--checkpoint", ev.checkpoints, "Checkpoint stem or file; repeat for a strategy table");
  e->add_option("--strategy", ev.strategy, "Reject checkpoints of any other strategy");
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--split", ev.split)->capture_default_str()->check(CLI::IsMember({"train", "val", "test"}));
  e->add_flag("--ground-truth", ev.ground_truth, "Also score the ground truth against itself");
  e->add_option("--out", ev.out, "Report directory")->required();

  SampleOptions rc;
  auto* r = app.add_subcommand("recon", "Reconstruct one sample with previews");
  r->add_option("--checkpoint", rc.checkpoint)->required();
  r->add_option("--strategy", rc.strategy, "Reject checkpoints of any other strategy");
  r->add_option("--sample", rc.sample, "<data>/<split>/<id>.ttmt")->required();
  r->add_option("--out", rc.out)->required();

  SampleOptions da;
  auto* d = app.add_subcommand("dump-attn", "Write the attention maps for one sample");
  d->add_option("--checkpoint", da.checkpoint)->required();
  d->add_option("--strategy", da.strategy, "Reject checkpoints of any other strategy");
  d->add_option("--sample", da.sample, "<data>/<split>/<id>.ttmt")->required();
  d->add_option("--out", da.out)->required();

  SuiteOptions su;
  auto* s = app.add_subcommand("suite", "Train and test a grid of strategies and seeds");
  s->add_option("--data", su.data, "Dataset directory")->required();
  s->add_option("--strategies", su.strategies, "Default: all strategies")->delimiter(',');
  s->add_option("--seeds", su.seeds)->delimiter(',')->capture_default_str();
  s->add_option("--epochs", su.epochs)->capture_default_str();
  s->add_option("--batch", su.batch)->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--lr", su.lr)->capture_default_str();
  s->add_flag("--reuse", su.reuse, "Skip runs already completed with the same configuration");
  s->add_option("--out", su.out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return gen_data(gen);
    if (*t) return train(tr);
    if (*e) return eval(ev);
    if (*r) return recon(rc);
    if (*d) return dump_attn(da);
    if (*s) return suite(su);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
