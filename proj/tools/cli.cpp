// teleop: simulation service, headless runner, DTMF and progressive-memory tools.
// `dtmf` and `progmem` are shortcuts for the matching teleop subcommands.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "teleop/dtmf.hpp"
#include "teleop/progmem_bench.hpp"
#include "teleop/scenario.hpp"
#include "teleop/script.hpp"
#include "teleop/server.hpp"
#include "teleop/session.hpp"
#include "teleop/wav.hpp"
#include "tool_main.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("teleop");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("TELEOP_LOG")) {
    auto lvl = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept "off" when asked for.
    if (lvl != spdlog::level::off || std::string(env) == "off") spdlog::set_level(lvl);
    else spdlog::warn("TELEOP_LOG='{}' is not a log level", env);
  }
}

struct ServeArgs {
  std::string scenario;
  std::string listen = "127.0.0.1:8765";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> max_ticks;
  std::size_t outbound_limit = 256;
};

int serve(const ServeArgs& a) {
  teleop::scenario::Scenario sc;
  try {
    sc = teleop::scenario::load_scenario_file(a.scenario);
  } catch (const teleop::scenario::ScenarioError& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
  if (a.seed) sc.override_seed(*a.seed);

  const auto colon = a.listen.rfind(':');
  if (colon == std::string::npos) {
    spdlog::error("--listen expects host:port, got '{}'", a.listen);
    return kConfigError;
  }
  teleop::server::ServerOptions opts;
  opts.host = a.listen.substr(0, colon);
  try {
    const int port = std::stoi(a.listen.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    opts.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    spdlog::error("bad port in --listen '{}'", a.listen);
    return kConfigError;
  }
  opts.max_ticks = a.max_ticks;
  opts.outbound_limit = a.outbound_limit;

  teleop::session::Engine engine(std::move(sc));
  try {
    teleop::server::Server server(engine, opts);
    spdlog::info("listening on ws://{}:{}", opts.host, server.port());
    server.run();
  } catch (const boost::system::system_error& e) {
    spdlog::error("cannot listen on {}: {}", a.listen, e.what());
    return kConfigError;
  }
  return kOk;
}

struct RunArgs {
  std::string scenario;
  std::string script;
  std::string transcript;
  std::optional<std::uint64_t> seed;
};

int run(const RunArgs& a) {
  teleop::scenario::Scenario sc;
  teleop::script::Script script;
  try {
    sc = teleop::scenario::load_scenario_file(a.scenario);
    script = teleop::script::parse_file(a.script);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
  if (a.seed) sc.override_seed(*a.seed);

  std::ofstream out;
  if (!a.transcript.empty()) {
    out.open(a.transcript, std::ios::binary);
    if (!out) {
      spdlog::error("cannot write transcript {}", a.transcript);
      return kConfigError;
    }
  }
  teleop::session::Engine engine(std::move(sc));
  const auto result = teleop::script::run(engine, script, a.transcript.empty() ? nullptr : &out);
  for (const auto& f : result.failures) spdlog::error("expect failed, {}", f);
  spdlog::info("{} ticks{}", result.ticks, result.fallen ? ", robot fell" : "");
  return result.exit_code;
}

int dtmf_encode(const std::string& digits, const std::string& path, double tone_ms, double gap_ms,
                double amplitude) {
  teleop::wav::Pcm16 pcm{{}, static_cast<std::uint32_t>(teleop::dtmf::kDefaultSampleRate)};
  const auto gap = static_cast<std::size_t>(std::llround(gap_ms * teleop::dtmf::kDefaultSampleRate / 1000.0));
  try {
    for (char c : digits) {
      const auto tone = teleop::dtmf::encode_digit(c, tone_ms, teleop::dtmf::kDefaultSampleRate, amplitude);
      const auto s = teleop::dtmf::to_pcm16(tone.samples);
      pcm.samples.insert(pcm.samples.end(), s.begin(), s.end());
      pcm.samples.insert(pcm.samples.end(), gap, 0);
    }
    teleop::wav::write_file(path, pcm);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
  return kOk;
}

int dtmf_decode(const std::string& path, bool as_json) {
  teleop::wav::Pcm16 pcm;
  try {
    pcm = teleop::wav::read_file(path);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
  if (pcm.sample_rate != 8000) {
    spdlog::error("{} is {} Hz; the decoder expects 8000 Hz", path, pcm.sample_rate);
    return kConfigError;
  }
  teleop::dtmf::StreamDecoder dec;
  auto events = dec.feed_pcm16(pcm.samples);
  auto tail = dec.flush();
  events.insert(events.end(), tail.begin(), tail.end());
  if (as_json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : events) j.push_back(teleop::session::digit_event_json(e));
    std::cout << j.dump() << '\n';
  } else {
    std::cout << teleop::dtmf::symbols_of(events) << '\n';
  }
  return kOk;
}

struct BenchArgs {
  std::string trace;
  std::string policy = "progressive";
  teleop::progmem::StoreConfig config;
};

int progmem_bench(BenchArgs a) {
  a.config.policy = a.policy == "fifo" ? teleop::progmem::Policy::Fifo : teleop::progmem::Policy::Progressive;
  try {
    a.config.validate();
    const auto trace = teleop::progmem::read_trace(a.trace);
    const auto r = teleop::progmem::replay(trace, a.config);
    std::cout << teleop::progmem::to_json(r, a.config.policy).dump() << '\n';
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
  return kOk;
}

void add_dtmf(CLI::App& app, int& rc) {
  auto* enc = app.add_subcommand("encode", "write digits as an 8 kHz PCM WAV");
  static std::string digits, out;
  static double tone_ms = 100.0, gap_ms = 50.0, amplitude = 0.4;
  enc->add_option("digits", digits, "keypad symbols, e.g. 0123*#ABCD")->required();
  enc->add_option("-o,--output", out, "WAV path")->required();
  enc->add_option("--tone-ms", tone_ms, "tone length per digit")->check(CLI::Range(40.0, 10000.0));
  enc->add_option("--gap-ms", gap_ms, "silence after each digit")->check(CLI::Range(0.0, 10000.0));
  enc->add_option("--amplitude", amplitude, "per-tone peak, (0, 0.5]")->check(CLI::Range(0.0, 0.5));
  enc->callback([&rc] { rc = dtmf_encode(digits, out, tone_ms, gap_ms, amplitude); });

  auto* dec = app.add_subcommand("decode", "print the digits in a WAV file");
  static std::string in;
  static bool as_json = false;
  dec->add_option("wav", in, "WAV path")->required()->check(CLI::ExistingFile);
  dec->add_flag("--json", as_json, "print events as JSON");
  dec->callback([&rc] { rc = dtmf_decode(in, as_json); });
  app.require_subcommand(1);
}

void add_progmem(CLI::App& app, int& rc) {
  static BenchArgs bench;
  auto* b = app.add_subcommand("bench", "replay a trace and print hit rates as JSON");
  b->add_option("--trace", bench.trace, "trace file")->required()->check(CLI::ExistingFile);
  b->add_option("--policy", bench.policy)->check(CLI::IsMember({"progressive", "fifo"}));
  b->add_option("--active-capacity", bench.config.active_capacity);
  b->add_option("--server-capacity", bench.config.server_capacity);
  b->add_option("--growth-step", bench.config.growth_step);
  b->add_option("--server-hard-limit", bench.config.server_hard_limit);
  b->add_option("--pin-duration", bench.config.pin_duration);
  b->add_option("--uplink-latency", bench.config.uplink_latency);
  b->add_option("--uplink-failure-rate", bench.config.uplink_failure_rate);
  b->add_option("--seed", bench.config.seed);
  b->callback([&rc] { rc = progmem_bench(bench); });

  static std::size_t keys = 1000, gets = 50000;
  static double s = 1.0;
  static std::uint64_t seed = 1;
  static std::string out;
  auto* t = app.add_subcommand("trace", "generate a Zipf get trace");
  t->add_option("--keys", keys)->check(CLI::PositiveNumber);
  t->add_option("--gets", gets);
  t->add_option("--s", s, "Zipf exponent");
  t->add_option("--seed", seed);
  t->add_option("-o,--output", out)->required();
  t->callback([&rc] {
    std::ofstream f(out);
    if (!f) {
      spdlog::error("cannot write {}", out);
      rc = kConfigError;
      return;
    }
    f << teleop::progmem::format_trace(teleop::progmem::zipf_trace(keys, gets, s, seed));
  });
  app.require_subcommand(1);
}

}  // namespace

int tool_main(const std::string& root, int argc, char** argv) {
  setup_logging();
  CLI::App app{"teleop robot simulation tools", root};
  int rc = kOk;

  if (root == "dtmf") {
    add_dtmf(app, rc);
  } else if (root == "progmem") {
    add_progmem(app, rc);
  } else {
    ServeArgs serve_args;
    auto* s = app.add_subcommand("serve", "run the simulation behind a WebSocket");
    s->add_option("--scenario", serve_args.scenario)->required()->check(CLI::ExistingFile);
    s->add_option("--listen", serve_args.listen, "host:port")->capture_default_str();
    s->add_option("--seed", serve_args.seed);
    s->add_option("--max-ticks", serve_args.max_ticks, "stop after this many ticks");
    s->add_option("--outbound-limit", serve_args.outbound_limit, "queued messages per client")
        ->check(CLI::PositiveNumber);
    s->callback([&] { rc = serve(serve_args); });

    RunArgs run_args;
    auto* r = app.add_subcommand("run", "run a headless script");
    r->add_option("--scenario", run_args.scenario)->required()->check(CLI::ExistingFile);
    r->add_option("--script", run_args.script)->required()->check(CLI::ExistingFile);
    r->add_option("--transcript", run_args.transcript, "NDJSON telemetry output");
    r->add_option("--seed", run_args.seed);
    r->callback([&] { rc = run(run_args); });

    add_dtmf(*app.add_subcommand("dtmf", "DTMF WAV encode/decode"), rc);
    add_progmem(*app.add_subcommand("progmem", "progressive-memory workloads"), rc);
    app.require_subcommand(1);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  return rc;
}
