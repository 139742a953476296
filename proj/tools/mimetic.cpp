// mimetic: command-line entry point.
//
//   mimetic serve --config slate.toml
//   mimetic order layout.json
//   mimetic simulate poses.json -o layout.json
//   mimetic replay session.log
//   mimetic stats session.log

#include <mimetic/analytics.hpp>
#include <mimetic/config.hpp>
#include <mimetic/http_server.hpp>
#include <mimetic/layout_io.hpp>
#include <mimetic/prompt.hpp>
#include <mimetic/service.hpp>
#include <mimetic/vision_sim.hpp>
#include <mimetic/vocabulary.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#ifndef MIMETIC_DATA_DIR
#define MIMETIC_DATA_DIR "data"
#endif

namespace {

std::string default_vocabulary() { return std::string(MIMETIC_DATA_DIR) + "/vocabulary.tsv"; }

int cmd_serve(const std::string& config_path, int port_override) {
  mimetic::ServiceConfig config = mimetic::load_service_config(config_path);
  if (port_override >= 0) config.port = static_cast<unsigned short>(port_override);
  auto vocabulary = mimetic::load_vocabulary(config.vocabulary_path.empty() ? default_vocabulary() : config.vocabulary_path);
  auto backend = mimetic::make_backend(config);
  if (auto* chat = dynamic_cast<mimetic::ChatCompletionBackend*>(backend.get()); chat && !chat->has_credential())
    std::cerr << "warning: " << config.chat.api_key_env << " is not set; requests will be unauthenticated\n";

  // Block termination signals before any thread starts so sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  mimetic::Service service(config, std::move(vocabulary), backend);
  mimetic::HttpServer server(service, config.host, config.port);
  server.start();
  std::cerr << "listening on http://" << config.host << ':' << server.port() << " (backend: " << backend->name()
            << ")\n";
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  server.stop();
  return 0;
}

int cmd_order(const std::string& layout_path, const std::string& vocabulary_path, bool ids_only) {
  const auto doc = mimetic::load_layout(layout_path);
  const auto layout = mimetic::order_markers(doc.markers, doc.config);
  if (ids_only) {
    for (const auto& line : layout.lines) {
      for (std::size_t i = 0; i < line.size(); ++i) std::cout << (i ? " " : "") << line[i];
      std::cout << '\n';
    }
    return 0;
  }
  const auto vocabulary = mimetic::load_vocabulary(vocabulary_path);
  const auto text = mimetic::layout_to_text(layout, vocabulary);
  std::cout << text << (text.empty() ? "" : "\n");
  return 0;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_path) {
  const auto doc = mimetic::load_pose_document(spec_path);
  const auto snap = mimetic::synthesize(doc.poses, doc.noise, doc.timestamp);
  const auto json = mimetic::layout_to_json({doc.config, snap.detections}).dump(2);
  if (out_path.empty() || out_path == "-") {
    std::cout << json << '\n';
  } else {
    std::ofstream out(out_path);
    if (!out) throw mimetic::FormatError("cannot write '" + out_path + "'");
    out << json << '\n';
  }
  return 0;
}

int cmd_replay(const std::string& log_path) {
  const auto log = mimetic::read_log(log_path);
  for (const auto& d : log.diagnostics) std::cerr << log_path << ':' << d.line << ": " << d.message << '\n';
  mimetic::StubBackend stub;
  std::size_t differing = 0;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& rec = log.records[i];
    const auto result = mimetic::run_chain(rec.mode, rec.poem, stub);
    const bool same = result.stage1_text == rec.stage1 && result.stage2_text == rec.stage2;
    if (!same) {
      ++differing;
      std::cout << "record " << i + 1 << " (" << mimetic::to_string(rec.mode) << "): differs\n";
      if (result.stage1_text != rec.stage1)
        std::cout << "  stage1 logged: " << rec.stage1 << "\n  stage1 replay: " << result.stage1_text << '\n';
      if (result.stage2_text != rec.stage2)
        std::cout << "  stage2 logged: " << rec.stage2 << "\n  stage2 replay: " << result.stage2_text << '\n';
    }
  }
  std::cout << log.records.size() - differing << '/' << log.records.size() << " records reproduced\n";
  return differing == 0 && log.diagnostics.empty() ? 0 : 1;
}

int cmd_stats(const std::string& log_path, const std::string& vocabulary_path, std::size_t top) {
  const auto log = mimetic::read_log(log_path);
  for (const auto& d : log.diagnostics) std::cerr << log_path << ':' << d.line << ": " << d.message << '\n';
  if (log.records.empty()) {
    std::cerr << "error: no records in '" << log_path << "'\n";
    return 1;
  }
  const auto vocabulary = mimetic::load_vocabulary(vocabulary_path);
  std::cout << mimetic::format_report(mimetic::build_report(log.records, vocabulary, top));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tangible poetry slate: reading order, prompt chains and usage statistics"};
  app.require_subcommand(1);

  std::string config_path;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "Run the slate service");
  serve->add_option("--config", config_path, "Flat key = value config file")->required();
  serve->add_option("--port", port, "Override the configured port");

  std::string layout_path;
  std::string vocabulary_path = default_vocabulary();
  bool ids_only = false;
  auto* order = app.add_subcommand("order", "Print a layout file's tiles in reading order");
  order->add_option("layout", layout_path, "Layout file")->required();
  order->add_option("--vocabulary", vocabulary_path, "Vocabulary table");
  order->add_flag("--ids", ids_only, "Print word ids instead of text");

  std::string spec_path;
  std::string out_path;
  auto* simulate = app.add_subcommand("simulate", "Synthesize detections from a pose list");
  simulate->add_option("spec", spec_path, "Pose list or generator file")->required();
  simulate->add_option("-o,--output", out_path, "Output layout file (default stdout)");

  std::string log_path;
  auto* replay = app.add_subcommand("replay", "Re-run a session log against the stub backend and diff");
  replay->add_option("log", log_path, "Session log")->required();

  std::size_t top = 10;
  auto* stats = app.add_subcommand("stats", "Usage report for a session log");
  stats->add_option("log", log_path, "Session log")->required();
  stats->add_option("--vocabulary", vocabulary_path, "Vocabulary table");
  stats->add_option("--top", top, "Length of the top-word lists");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(config_path, port);
    if (*order) return cmd_order(layout_path, vocabulary_path, ids_only);
    if (*simulate) return cmd_simulate(spec_path, out_path);
    if (*replay) return cmd_replay(log_path);
    if (*stats) return cmd_stats(log_path, vocabulary_path, top);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
