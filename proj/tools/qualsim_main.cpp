#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qualsim/config.hpp"
#include "qualsim/io_util.hpp"
#include "qualsim/validate.hpp"

namespace {

using nlohmann::json;
using namespace qualsim;

// exit codes: 0 ok, 2 config error, 3 enumeration cap exceeded,
// 4 internal error, 5 validation failure
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kCapError = 3;
constexpr int kInternalError = 4;
constexpr int kValidationError = 5;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<long long> samples;
};

int workers_from_env() {
  const char* raw = std::getenv("QUALSIM_WORKERS");
  if (raw == nullptr || *raw == '\0') return 1;
  const long v = std::strtol(raw, nullptr, 10);
  if (v < 1) throw ConfigError("QUALSIM_WORKERS must be a positive integer");
  return static_cast<int>(v);
}

// --seed and --samples change results, so they land in the echo; --out only
// moves files and must not, or reruns into fresh directories would stop
// being byte-identical.
RunConfig load_with_overrides(const Overrides& o) {
  RunConfig cfg = RunConfig::load_file(o.config_path);
  if (o.seed) cfg.sampler.seed = *o.seed;
  if (o.samples) {
    if (*o.samples < 1) throw ConfigError("--samples must be >= 1");
    cfg.sampler.samples = *o.samples;
    if (cfg.evolve) cfg.evolve_samples = *o.samples;
  }
  return cfg;
}

std::filesystem::path prepare_output(const RunConfig& cfg, const Overrides& o) {
  const std::filesystem::path dir(o.out ? *o.out : cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_text_file((dir / "config_echo.json").string(), cfg.echo_json());
  return dir;
}

std::string count_columns(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += ",count_" + n;
  return out;
}

std::string count_values(const QualiaDistribution& d) {
  std::string out;
  for (const long long c : d.type_counts) out += "," + std::to_string(c);
  return out;
}

json diagnostics_json(const EvalDiagnostics& diag) {
  json j;
  j["division_by_zero"] = diag.division_by_zero;
  j["first_context"] = diag.first_context;
  return j;
}

json estimate_json(const Estimate& e) {
  return {{"value", e.value}, {"std_error", e.std_error}};
}

int cmd_enumerate(const Overrides& o) {
  const RunConfig cfg = load_with_overrides(o);
  const auto dir = prepare_output(cfg, o);
  const QualiaRule rule = cfg.rule();
  const ExactSupport support = enumerate_support(cfg.instance(), rule);
  const TrueDistribution dist = apply_weights(support, cfg.weights, rule.type_names);

  std::string csv = "d_hash,size" + count_columns(rule.type_names) + ",p_q,a,p_true\n";
  for (const auto& row : dist.support) {
    csv += hex_u64(row.d.hash()) + "," + std::to_string(row.d.size()) +
           count_values(row.d) + "," + format_double(row.p_q) + "," +
           format_double(std::exp(row.log_a)) + "," + format_double(row.p_true) + "\n";
  }
  write_text_file((dir / "distribution.csv").string(), csv);

  json summary;
  summary["command"] = "enumerate";
  summary["normalizer_C"] = dist.normalizer;
  summary["support_size"] = dist.support.size();
  summary["total_pq"] = dist.total_pq;
  summary["expected_size"] = expected_qualia_count(dist).value;
  summary["diagnostics"] = diagnostics_json(support.diagnostics);
  write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");
  return kOk;
}

int cmd_sample(const Overrides& o) {
  const RunConfig cfg = load_with_overrides(o);
  const auto dir = prepare_output(cfg, o);
  const QualiaRule rule = cfg.rule();
  SampleOptions opts;
  opts.workers = workers_from_env();
  opts.ess_floor = cfg.sampler.ess_floor;
  const SampleResult res = sample_true(cfg.instance(), rule, cfg.weights,
                                       cfg.sampler.samples, cfg.sampler.seed, opts);

  std::string csv =
      "d_hash,size" + count_columns(rule.type_names) + ",n_samples,freq,a,weight_mass\n";
  for (std::size_t r = 0; r < res.rows.size(); ++r) {
    const auto& row = res.rows[r];
    csv += hex_u64(row.d.hash()) + "," + std::to_string(row.d.size()) +
           count_values(row.d) + "," + std::to_string(res.row_n[r]) + "," +
           format_double(row.p_q) + "," + format_double(std::exp(row.log_a)) + "," +
           format_double(row.p_true) + "\n";
  }
  write_text_file((dir / "samples.csv").string(), csv);

  json summary;
  summary["command"] = "sample";
  summary["n"] = res.n;
  summary["seed"] = res.seed;
  summary["ess"] = res.ess;
  summary["ess_warning"] = res.ess_warning;
  summary["expected_size"] = estimate_json(res.expected_size);
  summary["expected_components"] = estimate_json(res.expected_components);
  json per_type = json::object();
  for (std::size_t j = 0; j < rule.type_names.size(); ++j)
    per_type[rule.type_names[j]] = estimate_json(res.expected_type_counts[j]);
  summary["expected_type_counts"] = per_type;
  summary["distinct_distributions"] = res.rows.size();
  summary["diagnostics"] = diagnostics_json(res.diagnostics);
  write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");
  return kOk;
}

int cmd_evolve(const Overrides& o) {
  const RunConfig cfg = load_with_overrides(o);
  if (!cfg.evolve) throw ConfigError("config has no evolve section");
  const auto dir = prepare_output(cfg, o);
  SampleOptions opts;
  opts.workers = workers_from_env();
  opts.ess_floor = cfg.sampler.ess_floor;
  const auto sweep = beta_sweep(*cfg.evolve, cfg.weights, cfg.evolve_betas,
                                cfg.evolve_samples, cfg.sampler.seed, opts);

  std::string csv = "beta,dominance,std_error,baseline,exact,ess\n";
  std::string plot = "beta,dominance\n";
  for (const auto& r : sweep) {
    csv += format_double(r.beta) + "," + format_double(r.dominance.value) + "," +
           format_double(r.dominance.std_error) + "," + format_double(r.baseline) + "," +
           (r.exact ? "1" : "0") + "," + format_double(r.ess) + "\n";
    plot += format_double(r.beta) + "," + format_double(r.dominance.value) + "\n";
  }
  write_text_file((dir / "sweep.csv").string(), csv);
  write_text_file((dir / "plot_dominance.csv").string(), plot);

  json summary;
  summary["command"] = "evolve";
  summary["mode"] = cfg.evolve_samples == 0 ? "exact" : "sample";
  summary["samples"] = cfg.evolve_samples;
  summary["seed"] = cfg.sampler.seed;
  summary["betas"] = cfg.evolve_betas;
  summary["baseline_dominance"] = sweep.empty() ? 0.0 : sweep.front().baseline;
  write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");
  return kOk;
}

int cmd_validate(const Overrides& o) {
  const RunConfig cfg = load_with_overrides(o);
  const auto dir = prepare_output(cfg, o);
  const auto checks = run_validation(cfg);
  json report = json::array();
  for (const auto& c : checks) {
    const char* tag = c.status == CheckResult::Status::Pass   ? "PASS"
                      : c.status == CheckResult::Status::Fail ? "FAIL"
                                                              : "SKIP";
    std::cout << "[" << tag << "] " << c.name << ": " << c.detail << "\n";
    report.push_back({{"name", c.name}, {"status", tag}, {"detail", c.detail}});
  }
  write_text_file((dir / "validation.json").string(), report.dump(2) + "\n");
  return all_passed(checks) ? kOk : kValidationError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collapse-lattice qualia simulator"};
  app.require_subcommand(1);

  Overrides o;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "run configuration (JSON)")->required();
    cmd->add_option("--seed", o.seed, "override sampler.seed");
    cmd->add_option("--out", o.out, "override output directory");
    cmd->add_option("--samples", o.samples, "override sample count");
  };

  auto* enumerate = app.add_subcommand("enumerate", "exact reweighted distribution");
  auto* sample = app.add_subcommand("sample", "importance-sampled estimates");
  auto* evolve = app.add_subcommand("evolve", "motif competition sweep");
  auto* validate = app.add_subcommand("validate", "cross-module invariant battery");
  for (auto* cmd : {enumerate, sample, evolve, validate}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (enumerate->parsed()) return cmd_enumerate(o);
    if (sample->parsed()) return cmd_sample(o);
    if (evolve->parsed()) return cmd_evolve(o);
    if (validate->parsed()) return cmd_validate(o);
    return kConfigError;
  } catch (const CapExceededError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCapError;
  } catch (const dsl::ParseError& e) {
    std::cerr << "predicate error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}
