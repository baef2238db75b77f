#include "sdid/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sdid::cli {

namespace fs = std::filesystem;

namespace {

// Error classes caused by the inputs rather than by the numerics.
bool is_input_error(ErrorCode code) {
  return code == ErrorCode::Io || code == ErrorCode::InvalidArgument ||
         code == ErrorCode::InvalidDefinition;
}

fs::path input_dir(const RunConfig& cfg) { return cfg.in.value_or(cfg.out); }

Scenario load_scenario(const RunConfig& cfg) {
  return scenario_from_json(read_json(input_dir(cfg) / "scenario.json"));
}

SensitivityWeights weights_for(const RunConfig& cfg, const AssembledSystem& sys) {
  SensitivityWeights w = default_weights(sys);
  if (cfg.beta_lambda) w.beta_lambda = *cfg.beta_lambda;
  if (cfg.beta_phi) w.beta_phi = *cfg.beta_phi;
  return w;
}

Provenance provenance(const RunConfig& cfg, const Scenario& sc, const std::string& stage) {
  Provenance p;
  p.scenario = sc.name;
  p.seed = cfg.seed.value_or(sc.seed);
  p.stage = stage;
  p.config_hash = config_hash(cfg);
  return p;
}

DamageIdOptions damage_options(const RunConfig& cfg, const Scenario& sc,
                               const AssembledSystem& sys) {
  DamageIdOptions o;
  o.weights = weights_for(cfg, sys);
  o.budget.lambda_min = cfg.lambda_min;
  o.budget.lambda_max = cfg.lambda_max;
  validate(o.budget);
  o.outer_tol = cfg.tol;
  o.seed = cfg.seed.value_or(sc.seed);
  return o;
}

template <typename F>
int guarded(std::ostream& err, const char* what, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << what << ": " << e.what() << '\n';
    return is_input_error(e.code()) ? kUsage : kNotConverged;
  } catch (const fs::filesystem_error& e) {
    err << what << ": " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace

std::string config_hash(const RunConfig& cfg) {
  const Json j = {{"scenario", cfg.scenario},
                  {"seed", cfg.seed ? Json(*cfg.seed) : Json()},
                  {"noise", cfg.noise ? Json(*cfg.noise) : Json()},
                  {"n_obs", cfg.n_obs ? Json(*cfg.n_obs) : Json()},
                  {"beta_lambda", cfg.beta_lambda ? Json(*cfg.beta_lambda) : Json()},
                  {"beta_phi", cfg.beta_phi ? Json(*cfg.beta_phi) : Json()},
                  {"a0", cfg.hyper.a0},
                  {"b0", cfg.hyper.b0},
                  {"a1", cfg.hyper.a1},
                  {"b1", cfg.hyper.b1},
                  {"lambda_min", cfg.lambda_min},
                  {"lambda_max", cfg.lambda_max},
                  {"tol", cfg.tol},
                  {"n_samples", cfg.n_samples},
                  {"version", kVersion}};
  return fnv1a_hex(j.dump());
}

int cmd_generate(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, "generate", [&] {
    ScenarioOverrides ov;
    ov.seed = cfg.seed.value_or(0);
    ov.noise_level = cfg.noise;
    ov.n_observations = cfg.n_obs;
    const Scenario sc = make_scenario(cfg.scenario, ov);
    write_json(cfg.out / "scenario.json", to_json(sc));
    for (Stage stage : {Stage::Intact, Stage::Damaged}) {
      MeasurementFile f;
      f.observations = synth_measurements(sc, stage);
      f.provenance = provenance(cfg, sc, to_string(stage));
      write_json(cfg.out / (std::string(to_string(stage)) + ".json"), to_json(f));
    }
    return int{kOk};
  });
}

int cmd_update(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, "update", [&] {
    const Scenario sc = load_scenario(cfg);
    const MeasurementFile intact =
        read_measurements(cfg.intact_file.value_or(input_dir(cfg) / "intact.json"));
    const AssembledSystem sys = assemble(sc.model);

    UpdateOptions uo;
    uo.hyper = cfg.hyper;
    uo.weights = weights_for(cfg, sys);
    uo.outer_tol = cfg.tol;
    uo.n_samples = cfg.n_samples;
    uo.seed = cfg.seed.value_or(sc.seed);
    const PosteriorEstimate est = run_model_update(sys, intact.observations, uo);

    write_json(cfg.out / "posterior.json", posterior_report(est, provenance(cfg, sc, "intact")));
    write_posterior_csv(cfg.out / "posterior.csv", est);
    write_update_trace_csv(cfg.out / "posterior_trace.csv", est);
    if (!est.converged) {
      err << "update: outer loop did not reach tolerance " << cfg.tol << "; report flagged\n";
      return int{kNotConverged};
    }
    return int{kOk};
  });
}

int cmd_identify(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, "identify", [&] {
    const Scenario sc = load_scenario(cfg);
    const fs::path baseline_path = cfg.baseline_file.value_or(input_dir(cfg) / "posterior.json");
    if (!fs::exists(baseline_path)) {
      throw Error(ErrorCode::Io, "baseline report " + baseline_path.string() + " not found");
    }
    const ParameterVector baseline = baseline_from_report(read_json(baseline_path));
    const MeasurementFile damaged =
        read_measurements(cfg.damaged_file.value_or(input_dir(cfg) / "damaged.json"));
    const AssembledSystem sys = assemble(sc.model);
    check_parameters(sys, baseline);

    const DamageResult res =
        run_damage_id(sys, baseline, damaged.observations, damage_options(cfg, sc, sys));
    write_json(cfg.out / "damage.json", damage_report(res, provenance(cfg, sc, "damaged")));
    write_damage_csv(cfg.out / "damage.csv", res);
    write_bo_trace_csv(cfg.out / "bo_trace.csv", res);
    if (!res.converged) {
      err << "identify: outer loop did not reach tolerance " << cfg.tol << "; report flagged\n";
      return int{kNotConverged};
    }
    return int{kOk};
  });
}

int cmd_compare(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, "compare", [&] {
    const Scenario sc = load_scenario(cfg);
    const MeasurementFile damaged =
        read_measurements(cfg.damaged_file.value_or(input_dir(cfg) / "damaged.json"));
    const AssembledSystem sys = assemble(sc.model);
    // Exact intact baseline, as in the regularizer comparison of the method.
    const auto rows = compare_regularizers(sys, sc.theta_intact_true, damaged.observations,
                                           sc.theta_dmg_true, damage_options(cfg, sc, sys));
    write_json(cfg.out / "comparison.json",
               comparison_report(rows, sc.theta_dmg_true, provenance(cfg, sc, "damaged")));
    write_comparison_csv(cfg.out / "comparison.csv", rows);
    write_comparison_elements_csv(cfg.out / "comparison_elements.csv", rows, sc.theta_dmg_true);
    return int{kOk};
  });
}

int cmd_full(const RunConfig& cfg, std::ostream& err) {
  if (cfg.trials < 1) {
    err << "full: --trials must be >= 1\n";
    return kUsage;
  }
  const std::uint64_t seed0 = cfg.seed.value_or(0);
  std::ostringstream summary;
  summary.precision(17);
  summary << "trial,seed,exit_code,stls_error,lasso_error,ridge_error,support\n";
  int worst = kOk;
  for (Index t = 0; t < cfg.trials; ++t) {
    RunConfig c = cfg;
    c.seed = seed0 + static_cast<std::uint64_t>(t);
    c.in.reset();
    if (cfg.trials > 1) {
      char name[32];
      std::snprintf(name, sizeof name, "trial_%03ld", static_cast<long>(t));
      c.out = cfg.out / name;
    }
    int code = kOk;
    for (auto* step : {&cmd_generate, &cmd_update, &cmd_identify, &cmd_compare}) {
      const int rc = step(c, err);
      if (rc == kUsage) return rc;
      code = std::max(code, rc);
    }
    worst = std::max(worst, code);
    if (cfg.trials > 1) {
      const Json cmp = read_json(c.out / "comparison.json");
      const Json dmg = read_json(c.out / "damage.json");
      summary << t << ',' << *c.seed << ',' << code;
      for (const auto& m : cmp["methods"]) summary << ',' << m["relative_error"].get<double>();
      summary << ',';
      for (size_t i = 0; i < dmg["support"].size(); ++i) {
        summary << (i ? " " : "") << dmg["support"][i]["element"].get<long>();
      }
      summary << '\n';
    }
  }
  if (cfg.trials > 1) {
    fs::create_directories(cfg.out);
    std::ofstream(cfg.out / "trials.csv", std::ios::binary) << summary.str();
  }
  return worst;
}

int run(const RunConfig& cfg, std::ostream& err) {
  switch (cfg.command) {
    case Command::Generate: return cmd_generate(cfg, err);
    case Command::Update: return cmd_update(cfg, err);
    case Command::Identify: return cmd_identify(cfg, err);
    case Command::Compare: return cmd_compare(cfg, err);
    case Command::Full: return cmd_full(cfg, err);
  }
  return kUsage;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage structural damage identification from modal data"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string out_dir = cfg.out.string();
  std::string in_dir, intact_file, damaged_file, baseline_file;

  struct Sub {
    const char* name;
    const char* help;
    Command command;
  };
  const Sub subs[] = {
      {"generate", "write scenario metadata and intact/damaged measurement files", Command::Generate},
      {"update", "stage 1: Bayesian update of the intact model", Command::Update},
      {"identify", "stage 2: sparse damage identification", Command::Identify},
      {"compare", "STLS vs LASSO vs ridge with the exact intact baseline", Command::Compare},
      {"full", "generate, update, identify and compare", Command::Full},
  };
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->callback([&cfg, command = s.command] { cfg.command = command; });
    sub->add_option("--out", out_dir, "run directory")->capture_default_str();
    if (s.command == Command::Generate || s.command == Command::Full) {
      sub->add_option("--scenario", cfg.scenario, "shear10 or truss31")->capture_default_str();
      sub->add_option("--noise", cfg.noise, "relative noise level");
      sub->add_option("--n-obs", cfg.n_obs, "number of observations")->check(CLI::PositiveNumber);
    } else {
      sub->add_option("--in", in_dir, "input directory (default: --out)");
    }
    if (s.command == Command::Update) sub->add_option("--intact", intact_file, "intact measurements");
    if (s.command == Command::Identify) {
      sub->add_option("--baseline", baseline_file, "posterior report with theta_hat");
    }
    if (s.command == Command::Identify || s.command == Command::Compare) {
      sub->add_option("--damaged", damaged_file, "damaged measurements");
    }
    sub->add_option("--seed", cfg.seed, "seed (default: the scenario's)");
    sub->add_option("--beta-lambda", cfg.beta_lambda, "eigenvalue residue weight")
        ->check(CLI::PositiveNumber);
    sub->add_option("--beta-phi", cfg.beta_phi, "shape residue weight")->check(CLI::PositiveNumber);
    sub->add_option("--a0", cfg.hyper.a0)->capture_default_str();
    sub->add_option("--b0", cfg.hyper.b0)->capture_default_str();
    sub->add_option("--a1", cfg.hyper.a1)->capture_default_str();
    sub->add_option("--b1", cfg.hyper.b1)->capture_default_str();
    sub->add_option("--lambda-min", cfg.lambda_min)->capture_default_str();
    sub->add_option("--lambda-max", cfg.lambda_max)->capture_default_str();
    sub->add_option("--tol", cfg.tol, "outer-loop relative tolerance")->capture_default_str();
    sub->add_option("--n-samples", cfg.n_samples, "Monte Carlo samples for the marginals")
        ->capture_default_str();
    if (s.command == Command::Full) {
      sub->add_option("--trials", cfg.trials, "repeated trials with consecutive seeds")
          ->capture_default_str();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }
  cfg.out = out_dir;
  if (!in_dir.empty()) cfg.in = in_dir;
  if (!intact_file.empty()) cfg.intact_file = intact_file;
  if (!damaged_file.empty()) cfg.damaged_file = damaged_file;
  if (!baseline_file.empty()) cfg.baseline_file = baseline_file;
  if (cfg.scenario != "shear10" && cfg.scenario != "truss31") {
    err << "unknown scenario '" << cfg.scenario << "' (expected shear10 or truss31)\n"
        << app.help();
    return kUsage;
  }
  return run(cfg, err);
}

}  // namespace sdid::cli
