// robostack: REPL, scenario runner, corpus generator, PRISM ingester,
// hallway batch runner and machine validator.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "robostack/app/repl.hpp"
#include "robostack/app/scenario.hpp"
#include "robostack/hallway/hallway.hpp"
#include "robostack/hfsm/hfsm.hpp"
#include "robostack/prism/annotation.hpp"

namespace fs = std::filesystem;
using namespace robostack;
using app::ExitCode;

namespace {

// Opens `path` for writing, or returns stdout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path);
    if (!file_) throw SchemaError("cannot write " + path);
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw SchemaError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(p.string() + " is not valid JSON");
  }
}

struct ReplArgs {
  std::string world = "demo_apartment.json";
  std::string grammar;
  std::string log;
  std::optional<std::uint64_t> seed;
};

int cmd_repl(const ReplArgs& a) {
  const auto world = app::resolve_path(a.world, fs::current_path(), "worlds");
  const auto grammar = a.grammar.empty() ? app::default_grammar() : fs::path(a.grammar);
  auto session = app::make_session(world, grammar, a.seed);
  std::optional<std::ofstream> log;
  if (!a.log.empty()) {
    log.emplace(a.log);
    if (!*log) throw SchemaError("cannot write " + a.log);
    session->set_log_sink([&](const std::string& line) { *log << line << '\n' << std::flush; });
  }
  const bool tty = ::isatty(STDIN_FILENO);
  if (tty) std::cout << "world " << world.filename().string() << "; :help for meta-commands\n";
  app::ReplOptions opts;
  opts.interactive = tty;
  if (!tty) opts.prompt.clear();
  return app::repl(*session, std::cin, std::cout, opts);
}

struct RunArgs {
  std::vector<std::string> files;
  std::string log;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int cmd_run(const RunArgs& a) {
  Output log(a.log);
  int worst = ExitCode::kExitOk;
  for (const auto& f : a.files) {
    auto sc = app::Scenario::load(app::resolve_path(f, fs::current_path(), "scenarios"));
    if (a.seed) sc.seed = a.seed;
    spdlog::debug("running {}", sc.file.string());
    auto r = app::run_scenario(sc, [&](const std::string& line) {
      if (!a.log.empty() || !a.quiet) log.stream() << line << '\n';
    });
    const int code = r.exit_code();
    if (!r.matched())
      std::cerr << sc.file.filename().string() << ": status mismatch\n  - expected: " << *r.expected
                << "\n  + actual:   " << r.status << '\n';
    else
      spdlog::info("{}: {}", sc.file.filename().string(), r.status);
    if (code != ExitCode::kExitOk && worst == ExitCode::kExitOk) worst = code;
  }
  return worst;
}

struct GenArgs {
  std::uint64_t seed = 0;
  std::size_t count = 100;
  std::string grammar;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  const auto g = grammar::Grammar::load(a.grammar.empty() ? app::default_grammar() : fs::path(a.grammar));
  g.validate();
  Output out(a.out);
  std::mt19937_64 seeds(a.seed);
  for (std::size_t i = 0; i < a.count; ++i) {
    const auto s = seeds();
    auto d = g.generate(s);
    out.stream() << nlohmann::json{{"seed", s}, {"utterance", d.utterance}, {"frame", d.frame.to_json()}}.dump()
                 << '\n';
  }
  spdlog::info("wrote {} pairs", a.count);
  return ExitCode::kExitOk;
}

struct IngestArgs {
  std::string detections;
  std::string map;
  std::string out;
};

int cmd_ingest(const IngestArgs& a) {
  auto dets = prism::load_detections(a.detections);
  prism::AnnotationMap map;
  if (!a.map.empty()) {
    if (fs::exists(a.map))
      map = prism::AnnotationMap::from_json(read_json(a.map));
    else
      spdlog::warn("map {} does not exist; starting empty", a.map);
  }
  std::size_t rejected = 0;
  for (const auto& d : dets) {
    try {
      auto r = prism::register_detection(d, map, nullptr);
      spdlog::info("{} -> {} '{}' at ({:.3f}, {:.3f}, {:.3f}) residual {:.3g}", d.id, r.annotation_id, r.label.text,
                   r.pose.x, r.pose.y, r.pose.theta, r.residual);
    } catch (const Error& e) {
      ++rejected;
      spdlog::warn("{} rejected: {}: {}", d.id, e.kind(), e.what());
    }
  }
  Output out(a.out);
  out.stream() << map.to_json().dump(2) << '\n';
  std::cerr << dets.size() - rejected << " registered, " << rejected << " rejected, " << map.annotations().size()
            << " annotations\n";
  return rejected ? ExitCode::kExitFailure : ExitCode::kExitOk;
}

struct HallwayArgs {
  std::string policy = "signal";
  double p_comply = 0.1;
  double latency = 0.5;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_hallway(const HallwayArgs& a) {
  hallway::CorridorSpec spec;
  hallway::HumanModel human;
  human.p_comply = a.p_comply;
  human.latency = a.latency;
  human.validate();
  auto r = hallway::run_batch(spec, hallway::policy_from_string(a.policy), human, a.n, a.seed);
  Output out(a.out);
  out.stream() << r.to_json().dump(2) << '\n';
  std::cerr << hallway::to_string(r.policy) << " p_comply=" << a.p_comply << ": " << r.conflicts << "/" << r.n
            << " conflicts, rate " << r.rate << " [" << r.ci95.lo << ", " << r.ci95.hi << "]\n";
  return ExitCode::kExitOk;
}

int cmd_validate(const std::vector<std::string>& machines) {
  int code = ExitCode::kExitOk;
  for (const auto& ref : machines) {
    auto m = hfsm::MachineDefinition::load(app::machine_path(ref, fs::current_path()));
    auto defects = hfsm::validate(m);
    if (defects.empty()) {
      std::cout << "ok\n";
      continue;
    }
    for (const auto& d : defects) std::cout << m.name << ": " << d << '\n';
    code = ExitCode::kExitFailure;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"robostack: simulated service-robot stack"};
  cli.require_subcommand(1);
  cli.fallthrough();
  std::string level = "warn";
  cli.add_option("--log-level", level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  ReplArgs repl;
  auto* c_repl = cli.add_subcommand("repl", "interactive command session");
  c_repl->add_option("--world", repl.world, "world file or bundled world name");
  c_repl->add_option("--grammar", repl.grammar, "grammar file");
  c_repl->add_option("--log", repl.log, "write the JSON-lines event log here");
  c_repl->add_option("--seed", repl.seed, "override the world seed");

  RunArgs run;
  auto* c_run = cli.add_subcommand("run", "run scenario files");
  c_run->add_option("scenario", run.files, "scenario files")->required();
  c_run->add_option("--log", run.log, "write the JSON-lines log here instead of stdout");
  c_run->add_option("--seed", run.seed, "override the scenario seed");
  c_run->add_flag("-q,--quiet", run.quiet, "do not print the log");

  GenArgs gen;
  auto* c_gen = cli.add_subcommand("gen", "generate a command corpus");
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_option("--count", gen.count)->check(CLI::PositiveNumber);
  c_gen->add_option("--grammar", gen.grammar);
  c_gen->add_option("--out", gen.out, "JSON-lines corpus (default stdout)");

  IngestArgs ingest;
  auto* c_prism = cli.add_subcommand("prism", "semantic map annotation");
  c_prism->require_subcommand(1);
  auto* c_ingest = c_prism->add_subcommand("ingest", "register detections into an annotation map");
  c_ingest->add_option("--detections", ingest.detections)->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--map", ingest.map, "existing annotation file to merge into");
  c_ingest->add_option("--out", ingest.out, "annotation export (default stdout)");

  HallwayArgs hall;
  std::uint64_t hall_seed = 0;
  auto* c_hall = cli.add_subcommand("hallway", "corridor-passing batch");
  c_hall->add_option("--policy", hall.policy, "none|signal|signal+demo");
  c_hall->add_option("--p-comply", hall.p_comply)->check(CLI::Range(0.0, 1.0));
  c_hall->add_option("--latency", hall.latency)->check(CLI::NonNegativeNumber);
  c_hall->add_option("--n", hall.n)->check(CLI::PositiveNumber);
  c_hall->add_option("--seed", hall_seed);
  c_hall->add_option("--out", hall.out, "report file (default stdout)");

  std::vector<std::string> machines;
  auto* c_validate = cli.add_subcommand("validate", "check HFSM definitions");
  c_validate->add_option("--machine", machines, "machine file or bundled name")->required();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << cli.help();
    return ExitCode::kExitUsage;
  }
  hall.seed = hall_seed;

  auto logger = spdlog::stderr_color_mt("robostack");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(spdlog::level::from_str(level));

  try {
    if (*c_repl) return cmd_repl(repl);
    if (*c_run) return cmd_run(run);
    if (*c_gen) return cmd_gen(gen);
    if (*c_ingest) return cmd_ingest(ingest);
    if (*c_hall) return cmd_hallway(hall);
    if (*c_validate) return cmd_validate(machines);
  } catch (const SchemaError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ExitCode::kExitUsage;
  } catch (const InvalidGrammar& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ExitCode::kExitUsage;
  } catch (const InvalidSpec& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ExitCode::kExitUsage;
  } catch (const InvalidMachine& e) {
    std::cerr << "invalid machine: " << e.what() << '\n';
    return ExitCode::kExitFailure;
  } catch (const Error& e) {
    std::cerr << e.kind() << ": " << e.what() << '\n';
    return ExitCode::kExitFailure;
  }
  std::cerr << cli.help();
  return ExitCode::kExitUsage;
}
