// infograd command-line driver.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "infograd/experiments.hpp"
#include "infograd/validation.hpp"

namespace ig = infograd;

namespace {

struct RunOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
};

ig::ExperimentConfig build_config(const std::string& id, const RunOptions& o) {
  ig::ExperimentConfig cfg =
      o.config_file.empty() ? ig::ExperimentConfig::defaults(id) : ig::ExperimentConfig::load(id, o.config_file);
  for (const auto& s : o.overrides) cfg.set_assignment(s);
  if (o.seed) cfg.set_seed(*o.seed);
  return cfg;
}

int run_validate(const RunOptions& o, const std::string& tag, double scale, const std::string& report) {
  ig::ExperimentConfig cfg = build_config("validate", o);
  if (!tag.empty()) cfg.set("tag", tag);
  if (scale != 1.0) cfg.set("tolerance_scale", ig::format_double(scale));
  ig::ValidationOptions vo;
  vo.tag = cfg.get("tag");
  vo.tolerance_scale = cfg.get_double("tolerance_scale");
  vo.seed = cfg.seed();
  const auto results = ig::run_validation_suite(vo);
  int failed = 0;
  for (const auto& r : results) {
    std::printf("%s  %-40s measured=%-12.6g threshold=%-10.3g %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.measured, r.threshold, r.detail.c_str());
    failed += r.passed ? 0 : 1;
  }
  std::printf("%zu checks, %d failed\n", results.size(), failed);
  const std::filesystem::path path = report.empty() ? std::filesystem::path(o.out) / "validation_report.json"
                                                    : std::filesystem::path(report);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  os << ig::validation_report_json(results, vo) << "\n";
  if (!os) throw ig::Error(ig::ErrorCode::Io, "cannot write " + path.string());
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-based information gradients for parametric Gaussian channels"};
  app.require_subcommand(1);

  RunOptions opts;
  std::string tag, report;
  double scale = 1.0;
  std::vector<CLI::App*> subs;
  for (const auto& id : ig::experiment_ids()) {
    CLI::App* sub = app.add_subcommand(id, id == "validate" ? "run the property-check suite" : "run experiment " + id);
    sub->add_option("--config", opts.config_file, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", opts.overrides, "override one key (key=value); repeatable");
    sub->add_option("--seed", opts.seed, "RNG seed (overrides INFOGRAD_SEED and config)");
    sub->add_option("--out", opts.out, "output directory")->capture_default_str();
    if (id == "validate") {
      sub->add_option("--tag", tag, "run only checks with this tag or name");
      sub->add_option("--tolerance-scale", scale, "multiply every threshold");
      sub->add_option("--report", report, "JSON report path (default OUT/validation_report.json)");
    }
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (CLI::App* sub : subs) {
      if (!sub->parsed()) continue;
      const std::string id = sub->get_name();
      if (id == "validate") return run_validate(opts, tag, scale, report);
      const ig::ExperimentConfig cfg = build_config(id, opts);
      const int status = ig::run_experiment(cfg, opts.out, std::cerr);
      if (status != 0) std::cerr << "run truncated by a non-finite loss; partial CSV kept\n";
      return status;
    }
  } catch (const ig::Error& e) {
    std::cerr << "infograd: " << e.what() << "\n";
    return e.code() == ig::ErrorCode::ConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "infograd: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
