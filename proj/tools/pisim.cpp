// pisim: cost queries, simulations, sweeps and protocol verification.
//
// Exit codes: 0 success, 1 verification mismatch or internal error, 2 usage or configuration
// error, 3 infeasible configuration.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pisim/cli/experiment.hpp"
#include "pisim/cli/resolve.hpp"
#include "pisim/pisim.hpp"

namespace {

using namespace pisim;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kInfeasible = 3;

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

std::vector<cost::Protocol> protocols_of(const std::string& s) { return cli::parse_protocols(s); }

// ---------------------------------------------------------------------------------------------
// cost

struct CostArgs {
  std::string model = "resnet32";
  std::string dataset = "cifar100";
  std::string arch;
  std::string protocol = "both";
  std::string knobs;
  std::string optimization;
  std::string bandwidth = "100MB/s";
  std::string mode = "auto";
  std::string pipeline = "concurrent";
  std::string client_capacity = "8GB";
  std::string server_capacity = "10TB";
  bool json = false;
};

int cmd_cost(const CostArgs& a, const fs::path& config) {
  const auto arch = cli::resolve_arch(a.model, a.dataset, a.arch, config);
  const auto calibrated = cli::load_cost_model(config);
  cost::OptimizationKnobs knobs;
  if (!a.optimization.empty()) knobs = cli::resolve_optimization(a.optimization, config);
  if (!a.knobs.empty()) knobs = cost::parse_knobs(a.knobs);
  const double bw = cli::parse_bandwidth(a.bandwidth);
  const double ccap = cli::parse_size(a.client_capacity), scap = cli::parse_size(a.server_capacity);
  const auto pipeline = cost::parse_pipeline(a.pipeline);
  const auto counts = netarch::count_layers(arch);

  nlohmann::json out = nlohmann::json::array();
  for (auto p : protocols_of(a.protocol)) {
    sim::SimConfig cfg;
    cfg.protocol = p;
    cfg.bandwidth = bw;
    cfg.knobs = knobs;
    const bool has_row = cost::find_row(calibrated, p, arch.name, arch.input.name) != nullptr;
    if (a.mode == "auto")
      cfg.cost_mode = has_row ? cost::CostMode::TableDirect : cost::CostMode::ComponentScaled;
    else
      cfg.cost_mode = cost::parse_cost_mode(a.mode);
    const auto c = sim::resolve_costs(cfg, arch, calibrated);
    sim::SimConfig base_cfg = cfg;
    base_cfg.knobs = {};
    base_cfg.cost_mode = cost::CostMode::ComponentScaled;
    const auto baseline = sim::resolve_costs(base_cfg, arch, calibrated);
    const bool storage_ok = c.client_storage_delta <= ccap && c.server_storage_delta <= scap;
    const auto regime = cost::classify_regime(c, baseline, storage_ok);
    const double msr = cost::max_sustainable_rate(c, pipeline);
    const bool scaled = !(knobs.identity() && cfg.cost_mode == cost::CostMode::TableDirect);

    if (a.json) {
      out.push_back({{"protocol", cost::to_string(p)},
                     {"model", arch.name},
                     {"dataset", arch.input.name},
                     {"mode", scaled ? "scaled" : "table"},
                     {"relus", counts.relus},
                     {"flops", counts.flops},
                     {"params", counts.params},
                     {"offline_latency", c.offline_latency},
                     {"online_latency", c.online_latency},
                     {"offline_comm_bytes", c.offline_comm()},
                     {"online_comm_bytes", c.online_comm()},
                     {"client_storage_bytes", c.client_storage_delta},
                     {"server_storage_bytes", c.server_storage_delta},
                     {"gc_bytes", c.gc_bytes},
                     {"he_seconds", c.he_seconds},
                     {"he_share_of_offline_compute", c.he_share_of_offline_compute()},
                     {"max_sustainable_rate", msr},
                     {"pipeline", cost::to_string(pipeline)},
                     {"regime", cost::to_string(regime)}});
      continue;
    }
    std::cout << cost::long_name(p) << "  " << arch.name << "/" << arch.input.name << "  (" << (scaled ? "component model" : "measured table")
              << (knobs.identity() ? "" : ", knobs " + knobs.label) << ", bandwidth " << sim::format_bytes(bw) << "/s)\n";
    std::cout << "  relus " << counts.relus << "  flops " << counts.flops << "  params " << counts.params << "\n";
    std::cout << "  offline latency   " << fmt(c.offline_latency) << " s  (HE " << fmt(c.he_seconds) << " s, "
              << fmt(100 * c.he_share_of_offline_compute(), 3) << "% of offline compute)\n";
    std::cout << "  online latency    " << fmt(c.online_latency) << " s\n";
    std::cout << "  offline comm      " << sim::format_bytes(c.offline_comm()) << "\n";
    std::cout << "  online comm       " << sim::format_bytes(c.online_comm()) << "\n";
    std::cout << "  client storage    " << sim::format_bytes(c.client_storage_delta) << " per precompute\n";
    std::cout << "  server storage    " << sim::format_bytes(c.server_storage_delta) << " per precompute\n";
    std::cout << "  max sustainable   " << fmt(msr) << " req/s (" << cost::to_string(pipeline) << " pipeline)\n";
    std::cout << "  regime            " << cost::to_string(regime) << (storage_ok ? "" : " (one precompute exceeds storage)") << "\n";
  }
  if (a.json) std::cout << out.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------------------------
// simulate / sweep

struct RunArgs {
  std::string spec;
  std::vector<std::string> set;
  std::string model, dataset, arch, protocol, protocols, rate, rates, capacity, capacities, horizon, runs, seed, out, format,
      knobs, optimization, pipeline, mode, bandwidth;
  int jobs = 1;
  bool allow_infeasible = false;
  bool ci = false;
  bool trace = false;
};

cli::ExperimentSpec build_spec(const RunArgs& a, const fs::path& config) {
  cli::ExperimentSpec e;
  if (!a.spec.empty()) {
    const auto path = cli::resolve_file(a.spec, config, "experiments", ".exp");
    e = cli::load_experiment(path.string());
  }
  const auto set = [&](const char* key, const std::string& v) {
    if (!v.empty()) cli::apply_setting(e, key, v);
  };
  if (a.ci) {
    cli::apply_setting(e, "horizon", "4h");
    cli::apply_setting(e, "n_runs", "10");
  }
  set("model", a.model);
  set("dataset", a.dataset);
  set("arch", a.arch);
  set("protocol", a.protocol);
  set("protocols", a.protocols);
  set("arrival_rate", a.rate);
  set("rates", a.rates);
  set("client_capacity", a.capacity);
  set("capacities", a.capacities);
  set("horizon", a.horizon);
  set("n_runs", a.runs);
  set("seed", a.seed);
  set("output_dir", a.out);
  set("formats", a.format);
  set("knobs", a.knobs);
  set("optimization", a.optimization);
  set("pipeline", a.pipeline);
  set("cost_mode", a.mode);
  set("bandwidth", a.bandwidth);
  if (a.trace) set("trace", "true");
  for (const auto& s : a.set) cli::apply_assignment(e, s);
  if (!e.optimization.empty()) e.base.knobs = cli::resolve_optimization(e.optimization, config);
  e.base.check();
  return e;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw InvalidConfig("cannot write '" + p.string() + "'");
  return os;
}

std::string summary_line(const sim::SimConfig& c, const sim::AggregateMetrics& m) {
  std::ostringstream os;
  os << cost::to_string(c.protocol) << " " << c.model << "/" << c.dataset << " rate=" << c.arrival_rate
     << " client=" << sim::format_bytes(c.client_capacity) << ": ";
  if (m.runs_with_completions == 0) {
    os << "no request completed within the horizon";
    return os.str();
  }
  os << "mean latency " << fmt(m.mean_latency) << " s (95% CI +-" << fmt(m.ci95_half_width, 3) << ")"
     << "  queue " << fmt(m.decomposition.queue_wait) << "  precompute-wait " << fmt(m.decomposition.precompute_wait)
     << "  online " << fmt(m.decomposition.online) << "  completed/run " << fmt(m.completed) << "  censored/run "
     << fmt(m.censored);
  return os.str();
}

int cmd_simulate(const RunArgs& a, const fs::path& config) {
  auto e = build_spec(a, config);
  auto& cfg = e.base;
  if (!e.protocols.empty()) cfg.protocol = e.protocols.front();
  if (!e.rates.empty()) cfg.arrival_rate = e.rates.front();
  const auto arch = cli::resolve_arch(cfg, config);
  cfg.model = arch.name;
  const auto calibrated = cli::load_cost_model(config);
  const auto costs = sim::resolve_costs(cfg, arch, calibrated);
  try {
    sim::check_feasible(cfg, costs);
  } catch (const ConfigInfeasible& err) {
    std::cerr << "infeasible: " << err.what() << "\n";
    if (a.allow_infeasible) {
      const fs::path out = fs::path(e.output_dir) / (e.name + "_infeasible.json");
      auto os = open_out(out);
      os << nlohmann::json{{"schema", sim::kMetricsSchema}, {"config", sim::config_json(cfg)}, {"infeasible", true},
                           {"reason", err.what()}}
                .dump(2)
         << "\n";
      return kOk;
    }
    return kInfeasible;
  }
  const auto m = sim::run_many(cfg, costs, a.jobs);
  const fs::path dir = e.output_dir;
  if (e.formats.count("csv")) {
    auto agg = open_out(dir / (e.name + "_aggregate.csv"));
    sim::write_aggregate_csv(agg, cfg, m);
    auto runs = open_out(dir / (e.name + "_runs.csv"));
    sim::write_runs_csv(runs, cfg, m);
  }
  if (e.formats.count("json")) {
    auto js = open_out(dir / (e.name + ".json"));
    js << sim::aggregate_json(cfg, m).dump(2) << "\n";
  }
  if (cfg.trace && !m.runs.empty()) {
    auto tr = open_out(dir / (e.name + "_trace.jsonl"));
    sim::write_trace_jsonl(tr, m.runs.front());
  }
  std::cout << summary_line(cfg, m) << "\n";
  return kOk;
}

int cmd_sweep(const RunArgs& a, const fs::path& config) {
  auto e = build_spec(a, config);
  const auto arch = cli::resolve_arch(e.base, config);
  e.base.model = arch.name;
  const auto calibrated = cli::load_cost_model(config);
  std::map<cost::Protocol, cost::PhaseCosts> costs;
  for (auto p : e.sweep_protocols()) {
    auto cfg = e.base;
    cfg.protocol = p;
    costs[p] = sim::resolve_costs(cfg, arch, calibrated);
  }
  std::vector<sim::SweepRow> rows;
  for (auto p : e.sweep_protocols()) {
    const auto part = sim::sweep(e.base, e.sweep_rates(), e.sweep_capacities(p), {p}, costs, a.jobs);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const fs::path dir = e.output_dir;
  if (e.formats.count("csv")) {
    auto os = open_out(dir / (e.name + "_sweep.csv"));
    sim::write_sweep_csv(os, e.base, rows);
  }
  if (e.formats.count("json")) {
    nlohmann::json js = nlohmann::json::array();
    for (const auto& r : rows) {
      auto cfg = e.base;
      cfg.protocol = r.protocol;
      cfg.client_capacity = r.client_capacity;
      cfg.arrival_rate = r.arrival_rate;
      auto j = r.infeasible ? nlohmann::json{{"schema", sim::kMetricsSchema}, {"config", sim::config_json(cfg)}}
                            : sim::aggregate_json(cfg, r.metrics);
      j["infeasible"] = r.infeasible;
      j["saturated"] = r.saturated;
      j["failure"] = r.failure;
      js.push_back(j);
    }
    auto os = open_out(dir / (e.name + "_sweep.json"));
    os << js.dump(2) << "\n";
  }
  int infeasible = 0;
  for (const auto& r : rows) {
    auto cfg = e.base;
    cfg.protocol = r.protocol;
    cfg.client_capacity = r.client_capacity;
    cfg.arrival_rate = r.arrival_rate;
    if (r.infeasible) {
      ++infeasible;
      std::cout << cost::to_string(r.protocol) << " client=" << sim::format_bytes(r.client_capacity) << " rate=" << r.arrival_rate
                << ": infeasible: " << r.failure << "\n";
    } else {
      std::cout << summary_line(cfg, r.metrics) << (r.saturated ? "  [saturated]" : "") << "\n";
    }
  }
  if (infeasible && !a.allow_infeasible) {
    std::cerr << infeasible << " infeasible configuration(s); rerun with --allow-infeasible to accept\n";
    return kInfeasible;
  }
  return kOk;
}

// ---------------------------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string model = "toy_cnn";
  std::string dataset = "cifar100";
  std::string arch;
  std::string protocol = "both";
  int trials = 100;
  std::uint64_t seed = 1;
  std::int64_t max_relus = 10000;
  bool force = false;
  bool threaded = false;
};

int cmd_verify(const VerifyArgs& a, const fs::path& config) {
  const auto arch = cli::resolve_arch(a.model, a.dataset, a.arch, config);
  const auto counts = netarch::count_layers(arch);
  if (counts.relus > a.max_relus && !a.force) {
    std::cerr << "error: " << arch.name << " has " << counts.relus << " ReLUs, above the verification guard of " << a.max_relus
              << " (use --force or --max-relus)\n";
    return kUsage;
  }
  if (a.trials <= 0) {
    std::cout << "warning: 0 trials requested; nothing verified\nPASS\n";
    return kOk;
  }
  auto cm = cli::load_cost_model(config);
  cm.mode = cost::CostMode::ComponentScaled;
  const auto weights = proto::random_weights(arch, a.seed);
  proto::ProtocolOptions opt;
  opt.threaded = a.threaded;
  opt.bytes = cm;
  const auto w = cost::workload_of(arch, cm.he_slots);
  int failures = 0;
  for (auto p : protocols_of(a.protocol)) {
    const auto rep = proto::verify_against_plaintext(p, arch, weights, a.trials, a.seed, opt);
    failures += rep.failures;
    const auto pred = cost::comm_bytes(p, w, cm);
    const auto& t = rep.per_trial.front();
    const auto delta = [](std::int64_t got, double want) { return static_cast<double>(got) - want; };
    std::cout << cost::long_name(p) << " " << arch.name << ": " << rep.trials << " trials, " << rep.failures << " failures\n";
    std::cout << "  offline bytes " << t.offline << " (model delta " << fmt(delta(t.offline, pred.offline_c2s + pred.offline_s2c)) << ")\n";
    std::cout << "  online bytes  " << t.online << " (model delta " << fmt(delta(t.online, pred.online_c2s + pred.online_s2c)) << ")\n";
    std::cout << "  client stored " << t.client_stored << " (model delta " << fmt(delta(t.client_stored, pred.client_stored)) << ")\n";
    std::cout << "  server stored " << t.server_stored << " (model delta " << fmt(delta(t.server_stored, pred.server_stored)) << ")\n";
  }
  std::cout << (failures == 0 ? "PASS" : "FAIL") << "\n";
  return failures == 0 ? kOk : kFail;
}

// ---------------------------------------------------------------------------------------------
// arch

int cmd_arch_check(const std::string& path, const fs::path& config) {
  const auto arch = netarch::load_arch(cli::resolve_file(path, config, "archs", ".arch").string());
  const auto c = netarch::count_layers(arch);
  const auto t = netarch::tally_layers(arch);
  std::cout << arch.name << " on " << arch.input.name << " (" << arch.input.channels << "x" << arch.input.height << "x"
            << arch.input.width << "): ok\n";
  std::cout << "  layers " << arch.layers.size() << " (conv " << t.conv << ", relu " << t.relu << ", avgpool " << t.avgpool
            << ", fc " << t.fc << "), skips " << arch.skip_connections.size() << "\n";
  std::cout << "  params " << c.params << "  flops " << c.flops << "  relus " << c.relus << "\n";
  try {
    netarch::check_share_topology(arch);
    std::cout << "  two-party executable: yes\n";
  } catch (const UnsupportedTopology& e) {
    std::cout << "  two-party executable: no (" << e.what() << ")\n";
  }
  return kOk;
}

int cmd_arch_dump(const std::string& model, const std::string& dataset) {
  std::cout << netarch::serialize_arch(netarch::build_preset(model, dataset));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pisim: private-inference cost model, protocol executors and serving simulator"};
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  app.require_subcommand(1);
  std::string config_override;
  app.add_option("--config-dir", config_override, "Directory with measured_costs.tsv, optimizations.tsv, archs/, experiments/ "
                                                  "(default: $PISIM_CONFIG_DIR or the build tree's configs/)");

  CostArgs ca;
  auto* cost_cmd = app.add_subcommand("cost", "Per-inference latency, communication, storage and regime for one network");
  cost_cmd->add_option("--model", ca.model, "Preset model (resnet32, vgg16, resnet18) or a shipped .arch name")->capture_default_str();
  cost_cmd->add_option("--dataset", ca.dataset, "Dataset (cifar100|c100, tiny_imagenet|tiny, imagenet)")->capture_default_str();
  cost_cmd->add_option("--arch", ca.arch, ".arch file (overrides --model/--dataset)");
  cost_cmd->add_option("--protocol", ca.protocol, "sg, cg or both")->capture_default_str();
  cost_cmd->add_option("--knobs", ca.knobs, "Optimization factors, e.g. relu=0.2,flop=0.25,gc=0.5,he=1");
  cost_cmd->add_option("--optimization", ca.optimization, "Named optimization from optimizations.tsv (e.g. deepreduce)");
  cost_cmd->add_option("--bandwidth", ca.bandwidth, "Link bandwidth, e.g. 100MB/s")->capture_default_str();
  cost_cmd->add_option("--mode", ca.mode, "auto, table or scaled")->capture_default_str();
  cost_cmd->add_option("--pipeline", ca.pipeline, "concurrent or serial (for max sustainable rate)")->capture_default_str();
  cost_cmd->add_option("--client-capacity", ca.client_capacity, "Client storage for the regime check")->capture_default_str();
  cost_cmd->add_option("--server-capacity", ca.server_capacity, "Server storage for the regime check")->capture_default_str();
  cost_cmd->add_flag("--json", ca.json, "Print JSON instead of text");

  RunArgs ra;
  const auto add_run_options = [&ra](CLI::App* c, bool sweep) {
    c->add_option("spec", ra.spec, "Experiment spec (.exp path, or @name from the config dir)");
    c->add_option("--set", ra.set, "Override any spec key: --set key=value (repeatable, last wins)");
    c->add_option("--model", ra.model, "Model preset or shipped .arch name");
    c->add_option("--dataset", ra.dataset, "Dataset");
    c->add_option("--arch", ra.arch, ".arch file");
    c->add_option("--protocol", ra.protocol, "sg or cg");
    c->add_option("--rate", ra.rate, "Arrival rate (requests/s)");
    c->add_option("--capacity", ra.capacity, "Client storage capacity, e.g. 8GB");
    c->add_option("--horizon", ra.horizon, "Simulated time, e.g. 24h");
    c->add_option("--runs", ra.runs, "Independent runs");
    c->add_option("--seed", ra.seed, "Base seed (run i uses seed+i)");
    c->add_option("--out", ra.out, "Output directory");
    c->add_option("--format", ra.format, "Output formats: csv, json or csv,json");
    c->add_option("--knobs", ra.knobs, "Optimization factors");
    c->add_option("--optimization", ra.optimization, "Named optimization");
    c->add_option("--pipeline", ra.pipeline, "concurrent or serial");
    c->add_option("--mode", ra.mode, "Cost mode: table or scaled");
    c->add_option("--bandwidth", ra.bandwidth, "Link bandwidth");
    c->add_option("--jobs", ra.jobs, "Worker threads")->capture_default_str();
    c->add_flag("--allow-infeasible", ra.allow_infeasible, "Report infeasible configurations instead of failing");
    c->add_flag("--ci", ra.ci, "Reduced profile: 4 h horizon, 10 runs");
    if (sweep) {
      c->add_option("--protocols", ra.protocols, "Protocols to sweep: sg,cg or both");
      c->add_option("--rates", ra.rates, "Comma-separated arrival rates");
      c->add_option("--capacities", ra.capacities, "Comma-separated client capacities (all protocols)");
    } else {
      c->add_flag("--trace", ra.trace, "Write the first run's event trace as JSON lines");
    }
  };
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate one configuration over n_runs seeds");
  add_run_options(sim_cmd, false);
  auto* sweep_cmd = app.add_subcommand("sweep", "Simulate the protocols x capacities x rates grid of a spec");
  add_run_options(sweep_cmd, true);

  VerifyArgs va;
  auto* verify_cmd = app.add_subcommand("verify", "Run both parties and compare logits with plaintext inference");
  verify_cmd->add_option("--model", va.model, "Model preset or shipped .arch name")->capture_default_str();
  verify_cmd->add_option("--dataset", va.dataset, "Dataset for presets")->capture_default_str();
  verify_cmd->add_option("--arch", va.arch, ".arch file");
  verify_cmd->add_option("--protocol", va.protocol, "sg, cg or both")->capture_default_str();
  verify_cmd->add_option("--trials", va.trials, "Random trials per protocol")->capture_default_str();
  verify_cmd->add_option("--seed", va.seed, "Seed")->capture_default_str();
  verify_cmd->add_option("--max-relus", va.max_relus, "Refuse networks with more ReLUs than this")->capture_default_str();
  verify_cmd->add_flag("--force", va.force, "Ignore the ReLU guard");
  verify_cmd->add_flag("--threaded", va.threaded, "Run the parties on two threads");

  auto* arch_cmd = app.add_subcommand("arch", "Architecture files");
  arch_cmd->require_subcommand(1);
  std::string check_path;
  auto* arch_check = arch_cmd->add_subcommand("check", "Parse and validate an .arch file, print its counts");
  arch_check->add_option("path", check_path, ".arch file or shipped name")->required();
  std::string dump_model = "resnet32", dump_dataset = "cifar100";
  auto* arch_dump = arch_cmd->add_subcommand("dump", "Print a preset in .arch format");
  arch_dump->add_option("--model", dump_model, "Preset model")->capture_default_str();
  arch_dump->add_option("--dataset", dump_dataset, "Dataset")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const auto config = cli::config_dir(config_override);
  try {
    if (*cost_cmd) return cmd_cost(ca, config);
    if (*sim_cmd) return cmd_simulate(ra, config);
    if (*sweep_cmd) return cmd_sweep(ra, config);
    if (*verify_cmd) return cmd_verify(va, config);
    if (*arch_check) return cmd_arch_check(check_path, config);
    if (*arch_dump) return cmd_arch_dump(dump_model, dump_dataset);
  } catch (const ConfigInfeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const UnknownModel& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const UnknownDataset& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const UncalibratedTriple& e) {
    std::cerr << "error: " << e.what() << " (use --mode scaled)\n";
    return kUsage;
  } catch (const ShapeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FieldOverflowRisk& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
