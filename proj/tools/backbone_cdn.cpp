// backbone-cdn: run services, generate workloads, replay traces, report.
//
// Exit codes: 0 success, 1 runtime error, 2 usage or validation error.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "backbone_cdn/accounting.hpp"
#include "backbone_cdn/deployment.hpp"
#include "backbone_cdn/log.hpp"
#include "backbone_cdn/replay.hpp"
#include "backbone_cdn/services.hpp"
#include "backbone_cdn/simnet.hpp"
#include "backbone_cdn/socket_transport.hpp"
#include "backbone_cdn/workload.hpp"

namespace bc = backbone_cdn;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

// `-` reads standard input.
std::string read_input(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  return bc::read_file(path);
}

void write_output(const std::string& path, const std::string& data) {
  if (path == "-") {
    std::cout << data << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << data;
  if (!out.flush()) throw std::runtime_error("write to '" + path + "' failed");
}

struct ServeArgs {
  std::string role;
  std::string config;
  std::string node_id;
  std::string listen;
  std::string peers;
};

int cmd_serve(const ServeArgs& a) {
  std::optional<bc::ServiceSet> services;
  bc::Service* service = nullptr;
  bc::Endpoint listen;
  std::map<bc::NodeId, bc::Endpoint> book;
  bc::NodeId self;
  try {
    const bc::DeploymentConfig config = bc::parse_deployment(read_input(a.config));
    if (!bc::NodeId::is_valid(a.node_id)) throw bc::ValidationError("invalid node id '" + a.node_id + "'");
    self = bc::NodeId(a.node_id);
    const bc::NodeSpec* spec = config.find(self);
    if (spec == nullptr) throw bc::ValidationError("node '" + a.node_id + "' is not in the deployment");
    if (bc::to_string(spec->role) != a.role) {
      throw bc::ValidationError("node '" + a.node_id + "' has role " + std::string(bc::to_string(spec->role)) +
                                ", not " + a.role);
    }
    listen = bc::parse_endpoint(a.listen);
    if (!a.peers.empty()) book = bc::parse_address_book(read_input(a.peers));
    services.emplace(bc::ServiceSet::build(config));
    service = services->find(self);
  } catch (const bc::Error& e) {
    std::cerr << "serve: " << e.what() << "\n";
    return kUsage;
  }

  bc::SocketTransport upstream(book);
  try {
    bc::SocketServer server(self, *service, upstream, listen);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.start();
    // Readiness line for scripts; the bound port matters when --listen used port 0.
    std::cout << "listening " << listen.host << ":" << server.port() << std::endl;
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  } catch (const bc::BindError& e) {
    std::cerr << "serve: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_generate(const std::string& spec_path, const std::string& clients_arg, const std::string& out_path) {
  bc::Trace trace;
  try {
    const bc::WorkloadSpec spec = bc::parse_workload_spec(read_input(spec_path));
    std::vector<bc::NodeId> clients;
    std::stringstream ss(clients_arg);
    for (std::string id; std::getline(ss, id, ',');) {
      if (!bc::NodeId::is_valid(id)) throw bc::ValidationError("clients: invalid node id '" + id + "'");
      clients.emplace_back(id);
    }
    if (clients.empty()) throw bc::ValidationError("clients: must not be empty");
    trace = bc::generate(spec, clients);
  } catch (const bc::Error& e) {
    std::cerr << "generate: " << e.what() << "\n";
    return kUsage;
  }
  write_output(out_path, bc::format_trace(trace));
  return kOk;
}

struct ReplayArgs {
  std::string trace;
  std::string deployment;
  std::string sim;
  std::string log_out;
  std::string report_out;
};

int cmd_replay(const ReplayArgs& a) {
  bc::ReplayResult result;
  try {
    const bc::Trace trace = bc::parse_trace(read_input(a.trace));
    const bc::DeploymentConfig deployment = bc::parse_deployment(read_input(a.deployment));
    const bc::SimConfig sim = a.sim.empty() ? bc::SimConfig{} : bc::parse_sim_config(read_input(a.sim));
    result = bc::replay(trace, deployment, sim);
  } catch (const bc::Error& e) {
    std::cerr << "replay: " << e.what() << "\n";
    return kUsage;
  }
  const std::string report = bc::render_report_json(result.report);
  if (!a.log_out.empty()) write_output(a.log_out, bc::format_access_log(result.log));
  if (!a.report_out.empty()) write_output(a.report_out, report);
  bc::log::info("replayed {} events", result.log.size());
  std::cerr << bc::render_report_table(result.report);
  std::cout << report << std::flush;
  return kOk;
}

int cmd_report(const std::string& log_path, std::optional<std::int64_t> from, std::optional<std::int64_t> to) {
  std::vector<bc::NamespaceReport> reports;
  try {
    const auto records = bc::parse_access_log(read_input(log_path));
    bc::TimeWindow window;
    if (from) window.from_ms = *from;
    if (to) window.to_ms = *to;
    reports = bc::aggregate(records, window);
  } catch (const bc::Error& e) {
    std::cerr << "report: " << e.what() << "\n";
    return kUsage;
  }
  std::cerr << bc::render_report_table(reports);
  std::cout << bc::render_report_json(reports) << std::flush;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (!bc::log::init_from_env()) {
    std::cerr << "warning: ignoring unknown BACKBONE_CDN_LOG_LEVEL\n";
  }

  CLI::App app{"Federated caching CDN: services, workload generation, trace replay and accounting"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* sc_serve = app.add_subcommand("serve", "Run one service over TCP until SIGINT/SIGTERM");
  sc_serve->add_option("role", serve.role, "Service role")
      ->required()
      ->check(CLI::IsMember({"origin", "redirector", "cache"}));
  sc_serve->add_option("--config", serve.config, "Deployment JSON")->required();
  sc_serve->add_option("--node-id", serve.node_id, "Node to run")->required();
  sc_serve->add_option("--listen", serve.listen, "host:port to listen on")->required();
  sc_serve->add_option("--peers", serve.peers, "Address book TSV: node_id<TAB>host:port");

  std::string spec_path, clients, out_path;
  auto* sc_gen = app.add_subcommand("generate", "Generate a trace from a workload spec");
  sc_gen->add_option("--spec", spec_path, "Workload spec JSON")->required();
  sc_gen->add_option("--clients", clients, "Comma-separated client node ids")->required();
  sc_gen->add_option("--out", out_path, "Trace file to write")->required();

  ReplayArgs rep;
  auto* sc_replay = app.add_subcommand("replay", "Replay a trace over the simulated network");
  sc_replay->add_option("--trace", rep.trace, "Trace file")->required();
  sc_replay->add_option("--deployment", rep.deployment, "Deployment JSON")->required();
  sc_replay->add_option("--sim", rep.sim, "Simulator config JSON (default: zero latency, no faults)");
  sc_replay->add_option("--log-out", rep.log_out, "Access log to write");
  sc_replay->add_option("--report-out", rep.report_out, "Report JSON to write");

  std::string log_path;
  std::optional<std::int64_t> from_ms, to_ms;
  auto* sc_report = app.add_subcommand("report", "Aggregate an access log");
  sc_report->add_option("--log", log_path, "Access log")->required();
  sc_report->add_option("--from-ms", from_ms, "Window start (inclusive)");
  sc_report->add_option("--to-ms", to_ms, "Window end (exclusive)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sc_serve) return cmd_serve(serve);
    if (*sc_gen) return cmd_generate(spec_path, clients, out_path);
    if (*sc_replay) return cmd_replay(rep);
    if (*sc_report) return cmd_report(log_path, from_ms, to_ms);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
