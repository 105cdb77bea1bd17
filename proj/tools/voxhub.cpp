// voxhub: operator entry points for the voice gateway.

#include <csignal>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "voxhub/backend_server.hpp"
#include "voxhub/chunker.hpp"
#include "voxhub/error.hpp"
#include "voxhub/gateway.hpp"
#include "voxhub/pipeline.hpp"
#include "voxhub/scenario.hpp"
#include "voxhub/server.hpp"

namespace {

using namespace voxhub;

constexpr int kExitOk = 0;
constexpr int kExitExpectation = 1;
constexpr int kExitUsage = 2;

struct ConfigFlags {
  std::string path;
  std::string time_mode;
  bool builtin_backends = false;
  std::string listen;

  void add_to(CLI::App* cmd, bool with_listen) {
    cmd->add_option("--config", path, "Gateway config file (JSON)");
    cmd->add_option("--time-mode", time_mode, "wallclock or simulated")
        ->check(CLI::IsMember({"wallclock", "simulated"}));
    cmd->add_flag("--builtin-backends", builtin_backends, "Ignore remote endpoints and use the mocks");
    if (with_listen) cmd->add_option("--listen", listen, "host:port");
  }

  GatewayConfig load() const {
    GatewayConfig cfg = path.empty() ? GatewayConfig::defaults() : GatewayConfig::from_file(path);
    cfg.apply_environment();
    if (builtin_backends) {
      cfg.stt_url.clear();
      cfg.tts_url.clear();
    }
    if (!time_mode.empty()) cfg.time_mode = time_mode_from_string(time_mode);
    if (!listen.empty()) cfg.listen = listen;
    cfg.validate();
    return cfg;
  }
};

/// Blocks SIGINT/SIGTERM and runs `on_signal` from a watcher thread.
std::thread watch_signals(std::function<void()> on_signal) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return std::thread([set, on_signal = std::move(on_signal)] {
    int sig = 0;
    sigwait(&set, &sig);
    on_signal();
  });
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::stringstream conv(item);
    T value{};
    if (!(conv >> value) || !conv.eof()) throw CLI::ValidationError("bad list item '" + item + "'");
    out.push_back(value);
  }
  return out;
}

int cmd_run(const ConfigFlags& flags) {
  GatewayConfig cfg = flags.load();
  Gateway gateway(cfg);
  auto [host, port] = parse_listen(cfg.listen);
  GatewayServer server(gateway, host, port);
  std::cout << "voxhub gateway listening on " << host << ":" << server.port() << " ("
            << to_string(cfg.time_mode) << " time)" << std::endl;
  std::thread watcher = watch_signals([&server] { server.stop(); });
  server.run();
  watcher.join();
  std::cout << to_json(gateway.metrics_snapshot()).dump(2) << std::endl;
  return kExitOk;
}

int cmd_serve_backends(const ConfigFlags& flags, bool serve_agents, const std::string& default_agent,
                       bool no_sleep) {
  GatewayConfig cfg = flags.load();
  cfg.time_mode = no_sleep ? TimeMode::simulated : TimeMode::wallclock;
  cfg.stt_url.clear();
  cfg.tts_url.clear();
  BackendSet backends = make_backends(cfg);
  std::string agent = default_agent;
  if (agent.empty() && !backends.catalog.agents.empty()) agent = backends.catalog.agents.front().agent_id;
  BackendServer server(backends.stt, backends.tts, serve_agents ? backends.agents : AgentRouter{}, agent);
  auto [host, port] = parse_listen(flags.listen.empty() ? "127.0.0.1:9090" : flags.listen);
  int bound = server.bind(host, port);
  std::cout << "voxhub backends listening on " << host << ":" << bound
            << (serve_agents ? " (with agents)" : "") << std::endl;
  std::thread watcher = watch_signals([&server] { server.stop(); });
  server.serve();
  watcher.join();
  return kExitOk;
}

int cmd_simulate(const ConfigFlags& flags, const std::string& script_path) {
  ScenarioScript script = ScenarioScript::from_file(script_path);
  GatewayConfig cfg = flags.load();
  SimulationResult result = simulate(script, cfg);
  print_simulation(std::cout, script, result);
  return result.passed() ? kExitOk : kExitExpectation;
}

int cmd_bench(const ConfigFlags& flags, std::size_t sessions, std::size_t turns) {
  GatewayConfig cfg = flags.load();
  cfg.max_sessions = std::max(cfg.max_sessions, sessions);
  Gateway gateway(cfg);
  BenchResult r = bench(gateway, BenchOptions{sessions, turns});
  std::cout << to_json(r).dump(2) << std::endl;
  return (r.leaks == 0 && r.ordering_violations == 0 && r.failed_turns == 0) ? kExitOk : kExitExpectation;
}

int cmd_chunk(const std::string& text, const ChunkingConfig& cfg) {
  for (const Chunk& c : chunk_response(text, cfg)) std::cout << c.text << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& rtf, const std::string& stt, const std::string& agent,
              const std::string& n_chunks, const std::string& chunk_ms, Millis transport) {
  SweepGrid grid;
  grid.rtf = parse_list<double>(rtf);
  grid.stt_ms = parse_list<Millis>(stt);
  grid.agent_ms = parse_list<Millis>(agent);
  grid.n_chunks = parse_list<std::size_t>(n_chunks);
  grid.chunk_ms = parse_list<Millis>(chunk_ms);
  grid.transport_ms = transport;
  for (std::size_t n : grid.n_chunks)
    if (n == 0) throw CLI::ValidationError("--n-chunks values must be positive");
  write_sweep_csv(std::cout, sweep(grid));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxhub: voice conversation gateway"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "Run the gateway (WebSocket /session, /healthz, /metrics)");
  run_flags.add_to(run, true);

  ConfigFlags backend_flags;
  bool serve_agents = false, no_sleep = false;
  std::string default_agent;
  auto* serve = app.add_subcommand("serve-backends", "Serve mock STT/TTS (and agents) over HTTP");
  backend_flags.add_to(serve, true);
  serve->add_flag("--serve-agents", serve_agents, "Also serve builtin agents on /v1/respond");
  serve->add_option("--agent", default_agent, "Agent behind /v1/respond");
  serve->add_flag("--no-sleep", no_sleep, "Report processing times without waiting");

  ConfigFlags sim_flags;
  std::string script_path;
  auto* sim = app.add_subcommand("simulate", "Replay a scripted conversation in simulated time");
  sim_flags.add_to(sim, false);
  sim->add_option("--script", script_path, "Scenario script (JSON)")->required();

  ConfigFlags bench_flags;
  std::size_t sessions = 1, turns = 1;
  auto* bench_cmd = app.add_subcommand("bench", "Concurrent scripted sessions; latency statistics");
  bench_flags.add_to(bench_cmd, false);
  bench_cmd->add_option("--sessions", sessions, "Concurrent sessions")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--turns", turns, "Turns per session")->check(CLI::PositiveNumber);

  std::string text;
  ChunkingConfig chunking;
  bool merge = false;
  auto* chunk = app.add_subcommand("chunk", "Print the chunks of a reply, one per line");
  chunk->add_option("--text", text, "Reply text")->required();
  chunk->add_option("--max-tokens", chunking.max_tokens, "Largest chunk in tokens");
  chunk->add_option("--min-tokens", chunking.min_tokens, "Merge chunks shorter than this");
  chunk->add_flag("--merge", merge, "Merge chunks shorter than --min-tokens");

  std::string rtf = "0.85", stt = "800", agent = "100", n_chunks = "3", chunk_ms = "2000";
  Millis transport = 0;
  auto* pipeline = app.add_subcommand("pipeline", "Pipeline timing model");
  pipeline->require_subcommand(1);
  auto* sweep_cmd = pipeline->add_subcommand("sweep", "CSV sweep over a parameter grid");
  sweep_cmd->add_option("--rtf", rtf, "Comma-separated real-time factors");
  sweep_cmd->add_option("--stt-ms", stt, "Comma-separated STT times");
  sweep_cmd->add_option("--agent-ms", agent, "Comma-separated agent times");
  sweep_cmd->add_option("--n-chunks", n_chunks, "Comma-separated chunk counts");
  sweep_cmd->add_option("--chunk-ms", chunk_ms, "Comma-separated chunk durations");
  sweep_cmd->add_option("--transport-ms", transport, "Per-message transport delay");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*serve) return cmd_serve_backends(backend_flags, serve_agents, default_agent, no_sleep);
    if (*sim) return cmd_simulate(sim_flags, script_path);
    if (*bench_cmd) return cmd_bench(bench_flags, sessions, turns);
    if (*chunk) {
      chunking.merge_short = merge;
      return cmd_chunk(text, chunking);
    }
    if (*sweep_cmd) return cmd_sweep(rtf, stt, agent, n_chunks, chunk_ms, transport);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
