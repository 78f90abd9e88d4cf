#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "cpb/bench.hpp"
#include "cpb/config.hpp"
#include "cpb/corpus.hpp"
#include "cpb/harness.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& out_dir, size_t workers) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open config " + config_path);
  auto config = cpb::ExperimentConfig::from_config(cpb::KeyValueConfig::parse(in));
  config.apply_environment();
  if (!out_dir.empty()) config.out_dir = out_dir;
  if (workers) config.workers = workers;
  const auto result = cpb::run(config);
  std::cout << "windows: " << result.windows << ", rows: " << result.rows.size()
            << ", skipped: " << result.skipped.size() << ", output: " << config.out_dir.string() << '\n';
  return result.rows.empty() ? 1 : 0;
}

int bench_command(const std::string& protocol, const std::vector<size_t>& sizes, const std::vector<size_t>& orgs,
                  size_t repeats, const std::string& group, size_t cluster_size, const std::string& out_path) {
  cpb::BenchConfig config;
  config.protocol = cpb::parse_bench_protocol(protocol);
  config.sizes = sizes;
  config.orgs = orgs;
  config.repeats = repeats;
  config.group = cpb::parse_group_id(group);
  config.cluster_size = cluster_size;
  const auto rows = cpb::bench(config);
  if (out_path.empty() || out_path == "-") {
    cpb::write_bench_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    cpb::write_bench_csv(out, rows);
  }
  return 0;
}

int gen_command(const std::string& spec_path, const std::string& out_path) {
  cpb::CorpusSpec spec;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw std::runtime_error("cannot open spec " + spec_path);
    spec = cpb::load_corpus_spec(in);
  }
  const auto events = cpb::generate_synthetic(spec);
  const auto epoch = cpb::parse_iso_date(spec.start_date);
  if (!epoch) throw std::runtime_error("bad start_date " + spec.start_date);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  cpb::write_logs(out, events, *epoch);
  std::cout << "wrote " << events.size() << " events for " << spec.n_orgs << " organizations over " << spec.n_days
            << " days to " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative predictive blacklisting experiments"};
  app.require_subcommand(1);

  std::string config_path, run_out;
  size_t workers = 0;
  auto* run = app.add_subcommand("run", "Run an experiment described by a key=value config");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory (overrides config and CPB_OUT_DIR)");
  run->add_option("--workers", workers, "Worker threads (overrides config and CPB_WORKERS)");

  std::string protocol = "server_aided", group = "ristretto255", bench_out;
  std::vector<size_t> sizes = {1000}, orgs = {10, 50, 100, 200};
  size_t repeats = 3, cluster_size = 10;
  auto* bench = app.add_subcommand("bench", "Measure per-organization and STA protocol costs");
  bench->add_option("--protocol", protocol, "psi_ca, psi_dt, server_aided or sta")->required();
  bench->add_option("--sizes", sizes, "Set sizes")->delimiter(',');
  bench->add_option("--orgs", orgs, "Organization counts")->delimiter(',');
  bench->add_option("--repeats", repeats, "Repeats per point (median reported)");
  bench->add_option("--group", group, "ristretto255 or modp2048");
  bench->add_option("--cluster-size", cluster_size, "Cluster size for server-aided delivery");
  bench->add_option("--out", bench_out, "Output CSV (default stdout)");

  std::string spec_path, gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic attack log corpus");
  gen->add_option("--spec", spec_path, "Corpus spec file (defaults if omitted)");
  gen->add_option("--out", gen_out, "Output log file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, run_out, workers);
    if (*bench) return bench_command(protocol, sizes, orgs, repeats, group, cluster_size, bench_out);
    if (*gen) return gen_command(spec_path, gen_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
