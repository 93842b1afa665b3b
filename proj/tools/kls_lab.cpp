// kls_lab: run, sweep and export the numerical experiments.
//
// Exit status: 0 when every record passes, 1 when some record fails its
// tolerance, 2 on a configuration, capacity or I/O error.

#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "kls/experiments.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out;
  std::string format = "jsonl";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment configuration file")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "override the seed of the configuration");
  app->add_option("--threads", c.threads, "worker threads (default KLS_THREADS, else all cores)");
  app->add_option("--out", c.out, "record file (overrides out= in the configuration)");
  app->add_option("--format", c.format, "record format")->check(CLI::IsMember({"jsonl", "csv"}));
}

kls::ExperimentConfig load(const Common& c) {
  auto cfg = kls::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  auto f = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
  if (!*f) throw kls::IoError("cannot write " + path);
  return f;
}

int do_run(const Common& c) {
  const auto cfg = load(c);
  if (cfg.kind == "sweep") throw kls::ConfigError("use the sweep subcommand for sweep configurations");
  const auto format = kls::parse_format(c.format);
  kls::expand_grid(cfg);  // validate before opening the output
  std::unique_ptr<std::ofstream> file;
  if (!cfg.out.empty()) file = open_out(cfg.out);
  kls::RecordSink sink(file ? static_cast<std::ostream&>(*file) : std::cout, format);
  const auto rep = kls::run_grid(cfg, c.threads, [&](const kls::Json& r) { sink.write(r); });
  std::size_t failed = 0;
  for (const auto& r : rep.records) failed += !r["pass"].get<bool>();
  std::cerr << cfg.kind << ": " << rep.records.size() << " records, " << failed << " failing\n";
  return rep.all_pass ? 0 : 1;
}

int do_sweep(const Common& c) {
  const auto cfg = load(c);
  if (cfg.kind != "sweep") throw kls::ConfigError("sweep needs kind = sweep");
  const auto format = kls::parse_format(c.format);
  kls::expand_grid(cfg);
  std::unique_ptr<std::ofstream> file;
  std::unique_ptr<kls::RecordSink> sink;
  if (!cfg.out.empty()) {
    file = open_out(cfg.out);
    sink = std::make_unique<kls::RecordSink>(*file, format);
  }
  const auto rep = kls::run_grid(cfg, c.threads, [&](const kls::Json& r) {
    if (sink) sink->write(r);
  });
  const auto groups = kls::summarize_sweep(cfg, rep.records);
  bool pass = rep.all_pass;
  for (const auto& g : groups) {
    pass = pass && g.pass;
    if (sink && format == kls::Format::Jsonl) sink->write(kls::sweep_record(cfg, g));
  }
  kls::print_sweep_table(std::cout, cfg, groups);
  return pass ? 0 : 1;
}

int do_export(const std::string& in_path, const std::string& out, const std::string& format) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw kls::IoError("cannot read " + in_path);
  const auto recs = kls::read_jsonl(in, in_path);
  const auto f = kls::parse_format(format);
  if (out.empty()) {
    kls::write_records(std::cout, recs, f);
  } else {
    auto file = open_out(out);
    kls::write_records(*file, recs, f);
    if (!*file) throw kls::IoError("write failed: " + out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiments for the facilitated exclusion process with a Gibbs stationary measure"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "run one experiment over its parameter grid");
  add_common(run, run_opts);
  auto* sweep = app.add_subcommand("sweep", "run a sweep and fit its declared decay exponent");
  add_common(sweep, sweep_opts);

  std::string export_in, export_out, export_format = "csv";
  auto* exp = app.add_subcommand("export", "convert a JSON-lines record file");
  exp->add_option("--in", export_in, "JSON-lines record file")->required();
  exp->add_option("--out", export_out, "output file (default stdout)");
  exp->add_option("--format", export_format, "output format")->check(CLI::IsMember({"jsonl", "csv"}));

  auto* list = app.add_subcommand("list-experiments", "list experiment kinds and sweep targets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return do_run(run_opts);
    if (*sweep) return do_sweep(sweep_opts);
    if (*exp) return do_export(export_in, export_out, export_format);
    if (*list) {
      for (const auto& s : kls::experiment_registry())
        std::cout << s.name << (s.sweep_only ? " (sweep target)" : "") << "\t" << s.summary << "\n";
      std::cout << "sweep\trun a target over one axis and fit its decay exponent\n";
      return 0;
    }
  } catch (const kls::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
