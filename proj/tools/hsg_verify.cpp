#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hsg/config.hpp"
#include "hsg/experiment.hpp"

namespace {

constexpr int kUsage = 2;
constexpr int kNumeric = 1;

struct Overrides {
  std::string config;
  std::string out;
  long long seed = -1;
  int threads = 0;
};

hsg::ExperimentConfig load(const Overrides& o) {
  auto cfg = hsg::load_config(o.config);
  if (!o.out.empty()) cfg.out = o.out;
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
  if (o.threads > 0) cfg.threads = o.threads;
  hsg::resolve_config(cfg);
  return cfg;
}

int report(const hsg::RunOutcome& out, const std::string& dir) {
  hsg::write_outcome(out, dir);
  for (const auto& f : out.failures)
    std::fprintf(stderr, "FAIL %s/%s row %lld: measured %.6g vs bound %.6g\n", f.campaign.c_str(), f.check.c_str(),
                 f.row, f.measured, f.bound);
  if (!out.error.empty()) std::fprintf(stderr, "error in %s\n", out.error.c_str());
  std::printf("%s: %s\n", dir.c_str(), out.exit_code() == 0 ? "all verdicts pass" : "verdict failures");
  return out.exit_code() == 0 ? 0 : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification campaigns for Dirichlet forms on homogeneous spaces"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides the config)");
    sub->add_option("--seed", o.seed, "random seed (overrides the config)")->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", o.threads, "worker threads (overrides the config)")->check(CLI::Range(1, 256));
  };
  auto* run = app.add_subcommand("run", "run the configured campaigns");
  add_common(run);
  auto* ref = app.add_subcommand("refine", "measure at h and h/2, report Richardson values and orders");
  add_common(ref);
  app.add_subcommand("print-config-schema", "print the config JSON schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (app.got_subcommand("print-config-schema")) {
      std::cout << hsg::config_schema().dump(2) << '\n';
      return 0;
    }
    const auto cfg = load(o);
    if (run->parsed()) {
      hsg::Experiment exp(cfg);
      return report(exp.run(), cfg.out);
    }
    return report(hsg::refine(cfg), cfg.out);
  } catch (const hsg::Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return e.kind() == hsg::ErrorKind::Config ? kUsage : kNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumeric;
  }
}
