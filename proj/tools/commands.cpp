#include "commands.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "copilot/campaign.hpp"
#include "copilot/config.hpp"
#include "copilot/errors.hpp"
#include "copilot/eval.hpp"
#include "copilot/http_server.hpp"
#include "copilot/memory.hpp"
#include "copilot/report.hpp"
#include "copilot/search.hpp"
#include "copilot/service.hpp"
#include "copilot/simulation.hpp"
#include "copilot/storage.hpp"

namespace copilot::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string trimmed(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Timestamp parse_now(const std::string& text) {
  if (text.empty()) return system_clock_now();
  auto t = parse_timestamp(text);
  if (!t) throw ConfigError("cannot parse timestamp '" + text + "'");
  return *t;
}

// Configuration plus one shared backend per role, so scripted backends keep
// their rule state across every agent of a run.
class Context {
 public:
  explicit Context(const std::string& config_path) {
    std::string path = config_path;
    if (path.empty()) {
      if (auto env = process_env("COPILOT_CONFIG")) path = *env;
    }
    if (path.empty()) throw ConfigError("no configuration given (use --config or COPILOT_CONFIG)");
    cfg = load_config(path);
    prompts = &PromptLibrary::builtin();
  }

  bool has_role(const std::string& role) const { return cfg.backends.contains(role); }

  LlmClient client(const std::string& role) {
    auto it = backends_.find(role);
    if (it == backends_.end()) {
      auto b = cfg.backends.find(role);
      if (b == cfg.backends.end()) throw ConfigError("no backend configured for role '" + role + "'");
      it = backends_.emplace(role, make_backend(b->second)).first;
    }
    return LlmClient(it->second, cfg.retry, cfg.backends.at(role).model);
  }

  ServiceConfig cfg;
  const PromptLibrary* prompts = nullptr;

 private:
  std::map<std::string, BackendHandle> backends_;
};

// Engine and consultation bundled so the agent owns what it points at.
class OwnedConsultation final : public ConsultationAgent {
 public:
  OwnedConsultation(LlmClient client, const PromptLibrary& prompts, EngineConfig config, Clock clock)
      : engine_(std::move(client), prompts, std::move(config)),
        consultation_(engine_, initial_state(clock), {}, clock) {}

  TurnOutcome on_patient_message(std::string text) override {
    return consultation_.on_patient_message(std::move(text));
  }
  std::string resolve_review(const DoctorAction& a) override {
    return consultation_.resolve_review(a);
  }

 private:
  static SessionState initial_state(const Clock& clock) {
    SessionState s;
    s.session_id = "simulation";
    s.patient_id = "virtual";
    s.started_at = clock();
    return s;
  }

  DialogueEngine engine_;
  Consultation consultation_;
};

std::string phase_trace(const std::vector<Phase>& trace) {
  std::string out;
  for (auto p : trace) {
    if (!out.empty()) out += " -> ";
    out += to_string(p);
  }
  return out;
}

// --- chat ------------------------------------------------------------------------

struct ChatOptions {
  std::string patient;
  bool doctor = false;
  std::string backend = "copilot";
  std::string now;
};

int cmd_chat(Context& ctx, const ChatOptions& o, std::istream& in, std::ostream& out) {
  check_file_id(o.patient);
  const auto start = parse_now(o.now);
  const Clock clock = o.now.empty() ? Clock(system_clock_now) : fixed_clock(start);
  DialogueEngine engine(ctx.client(o.backend), *ctx.prompts, ctx.cfg.engine);
  HistoryStore histories(ctx.cfg.data_dir / "histories");
  const auto history = histories.load(o.patient);

  SessionState state;
  state.session_id = "chat";
  state.patient_id = o.patient;
  state.started_at = clock();
  ConsultationOptions options;
  options.doctor_attached = o.doctor;
  options.history_memory = render_clinical_record(history);
  auto provider = make_search_provider(ctx.cfg.search);
  options.search = [provider](std::string_view q) { return search_snippets(*provider, q); };
  Consultation session(engine, state, options, clock);

  out << "Consultation started for " << o.patient << ". Type /close to finish.\n";
  std::string line;
  bool close = true;
  while (out << "> " << std::flush, std::getline(in, line)) {
    line = trimmed(line);
    if (line.empty()) continue;
    if (line == "/close") break;
    if (line == "/quit") {
      close = false;
      break;
    }
    auto outcome = session.on_patient_message(line);
    if (outcome.kind == OutcomeKind::review_pending) {
      out << "[review] " << outcome.text << "\n";
      for (;;) {
        out << "doctor (approve | edit <text> | guide <text>)> " << std::flush;
        std::string cmd;
        if (!std::getline(in, cmd)) cmd = "approve";
        cmd = trimmed(cmd);
        const auto sp = cmd.find(' ');
        const auto verb = cmd.substr(0, sp);
        const auto arg = sp == std::string::npos ? std::string() : trimmed(cmd.substr(sp + 1));
        auto kind = doctor_action_from_string(verb);
        if (!kind || (*kind != DoctorAction::Kind::approve && arg.empty())) {
          out << "unrecognised doctor action\n";
          continue;
        }
        outcome = {OutcomeKind::reply, session.resolve_review({*kind, arg})};
        break;
      }
    }
    out << "[" << to_string(outcome.kind) << "] " << outcome.text << "\n";
  }

  if (close && !session.state().turns.empty() && session.state().phase == Phase::awaiting_input) {
    const auto transcript = serialize_turns(session.state().turns);
    const auto now = clock();
    const auto report = generate_report(engine.client(), *ctx.prompts, transcript, now,
                                        ctx.cfg.report_headings, &session.transcript());
    out << "\nReport\n" << format_report(report);
    const auto record = summarize_consultation(engine.client(), *ctx.prompts, transcript, now,
                                               &session.transcript());
    {
      auto lock = histories.lock(o.patient);
      histories.save(update_history(engine.client(), *ctx.prompts, histories.load(o.patient), record,
                                    now, ctx.cfg.retention, &session.transcript()));
    }
    session.close();
    out << "\nMemory record saved for " << o.patient << ".\n";
  }
  out << "phase trace: " << phase_trace(session.phase_trace()) << "\n";
  std::string gates;
  for (const auto& g : session.audit()) gates += (gates.empty() ? "" : ", ") + g;
  out << "gates: " << gates << "\n";
  return kOk;
}

// --- eval ------------------------------------------------------------------------

struct EvalOptions {
  std::string corpus;
  std::optional<int> min_rounds;
  std::optional<std::size_t> sample;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> criteria;
  std::optional<int> max_turns;
  std::optional<std::size_t> parallelism;
  std::string out_dir;
  std::string now;
};

std::vector<SystemSpec> build_systems(Context& ctx, const Clock& clock) {
  auto systems = ctx.cfg.systems;
  if (systems.empty()) {
    const auto model = ctx.cfg.backends.contains("copilot") && !ctx.cfg.backends["copilot"].model.empty()
                           ? ctx.cfg.backends["copilot"].model
                           : std::string("Backbone");
    systems.push_back({model, "bare", "copilot", ctx.cfg.engine});
    systems.push_back({model + " Copilot", "copilot", "copilot", ctx.cfg.engine});
  }
  std::vector<SystemSpec> out;
  for (const auto& s : systems) {
    auto client = ctx.client(s.backend);
    const auto* prompts = ctx.prompts;
    if (s.agent == "bare") {
      out.push_back({s.name, [client] { return std::make_unique<BareBackboneAgent>(client); }});
    } else {
      out.push_back({s.name, [client, prompts, engine = s.engine, clock] {
                       return std::make_unique<OwnedConsultation>(client, *prompts, engine, clock);
                     }});
    }
  }
  return out;
}

int cmd_eval(Context& ctx, const EvalOptions& o, std::ostream& out) {
  auto cfg = ctx.cfg.campaign;
  if (o.min_rounds) cfg.min_rounds = *o.min_rounds;
  if (o.sample) cfg.sample_size = *o.sample;
  if (o.seed) cfg.seed = *o.seed;
  if (o.max_turns) cfg.max_turns = *o.max_turns;
  if (o.parallelism) cfg.parallelism = *o.parallelism;
  if (!o.criteria.empty()) {
    cfg.criteria.clear();
    for (const auto& c : o.criteria) {
      if (c == "all") {
        cfg.criteria.assign(all_criteria().begin(), all_criteria().end());
        break;
      }
      auto id = criterion_from_string(c);
      if (!id) throw ConfigError("unknown criterion '" + c + "'");
      cfg.criteria.push_back(*id);
    }
  }
  const auto start = parse_now(o.now);
  const auto dialogues = load_corpus(o.corpus, cfg.min_rounds, cfg.sample_size, cfg.seed);
  const auto systems = build_systems(ctx, fixed_clock(start));
  const auto result = run_campaign(cfg, dialogues, systems, ctx.client("patient"),
                                   ctx.client("judge"), *ctx.prompts);
  const auto table = format_table(result);
  const auto rows = format_rows_jsonl(result);
  out << table;
  if (o.out_dir.empty()) {
    out << "\n" << rows;
    return kOk;
  }
  const fs::path dir(o.out_dir);
  atomic_write(dir / "results.txt", table);
  atomic_write(dir / "rows.jsonl", rows);
  std::string transcripts;
  for (const auto& per_dialogue : result.transcripts) {
    for (const auto& t : per_dialogue) {
      transcripts += json{{"reference_id", t.reference_id},
                          {"system", t.system},
                          {"turn_cap_reached", t.turn_cap_reached},
                          {"text", t.text()}}
                         .dump();
      transcripts += '\n';
    }
  }
  atomic_write(dir / "transcripts.jsonl", transcripts);
  out << "\nwrote " << (dir / "rows.jsonl").string() << "\n";
  return kOk;
}

// --- compare ---------------------------------------------------------------------

struct CompareOptions {
  std::string protocol = "inquiry_ablation";
  std::string d1, d2, pairs;
};

json verdict_json(const ComparisonVerdict& v) {
  json facets = json::object();
  for (const auto& [k, verdict] : v.facets) facets[k] = to_string(verdict);
  return {{"protocol", to_string(v.protocol)}, {"overall", to_string(v.overall)}, {"facets", facets}};
}

void print_counts(std::ostream& out, const std::string& label, const WinTieLoseCounts& c) {
  out << fmt::format("{:<16} win={} tie={} lose={} (n={})\n", label, c.win, c.tie, c.lose, c.total());
}

int cmd_compare(Context& ctx, const CompareOptions& o, std::ostream& out) {
  const auto protocol = protocol_from_string(o.protocol);
  if (!protocol) throw ConfigError("unknown protocol '" + o.protocol + "'");
  std::vector<std::pair<std::string, std::string>> pairs;
  if (!o.pairs.empty()) {
    std::size_t line = 0;
    for (const auto& j : read_jsonl(o.pairs)) {
      ++line;
      if (!j.contains("d1") || !j.contains("d2")) throw FormatError("pair needs d1 and d2", line);
      pairs.emplace_back(j["d1"].get<std::string>(), j["d2"].get<std::string>());
    }
  } else {
    if (o.d1.empty() || o.d2.empty()) throw ConfigError("give --d1 and --d2, or --pairs");
    pairs.emplace_back(read_file(o.d1), read_file(o.d2));
  }
  auto judge = ctx.client("judge");
  WinTieLoseTally tally(*protocol);
  for (const auto& [a, b] : pairs) {
    const auto v = compare_pair(judge, *ctx.prompts, a, b, *protocol);
    tally.add(v);
    out << verdict_json(v).dump() << "\n";
  }
  print_counts(out, "overall", tally.overall);
  for (auto f : facets(*protocol)) print_counts(out, std::string(f), tally.facets.at(std::string(f)));
  return kOk;
}

// --- validate-doctor ---------------------------------------------------------------

int cmd_validate_doctor(Context& ctx, const std::string& cases_path, std::ostream& out) {
  const auto cases = read_doctor_cases(cases_path);
  DialogueEngine engine(ctx.client("copilot"), *ctx.prompts, ctx.cfg.engine);
  std::optional<LlmClient> reviewer;
  if (ctx.has_role("reviewer")) reviewer = ctx.client("reviewer");
  const auto judge = ctx.client("judge");
  const auto r = run_doctor_campaign(engine, reviewer ? &*reviewer : nullptr, judge, cases);
  for (const auto& c : r.cases) {
    json j{{"id", c.id}, {"guided", c.guidance.has_value()}};
    if (c.judgement) {
      j["incorporated"] = c.judgement->incorporated;
      j["placed_correctly"] = c.judgement->placed_correctly;
    }
    out << j.dump() << "\n";
  }
  out << fmt::format("cases: {}, guided: {}, validator calls: {}\n", r.cases.size(), r.guided,
                     r.validator_calls);
  out << fmt::format("incorporated: {}/{}, placed correctly: {}/{}\n", r.incorporated, r.guided,
                     r.placed_correctly, r.guided);
  return kOk;
}

// --- memory ------------------------------------------------------------------------

int cmd_memory(Context& ctx, bool update, const std::string& patient, const std::string& now_text,
               std::ostream& out) {
  HistoryStore store(ctx.cfg.data_dir / "histories");
  if (!store.exists(patient)) throw Error("unknown patient '" + patient + "'");
  auto history = store.load(patient);
  const auto now = parse_now(now_text);
  if (update) {
    UpdateStats stats;
    auto client = ctx.client("copilot");
    {
      auto lock = store.lock(patient);
      history = update_history(client, *ctx.prompts, history, std::nullopt, now, ctx.cfg.retention,
                               nullptr, &stats);
      store.save(history);
    }
    out << fmt::format("dropped {}, abbreviated {}, kept {}\n", stats.dropped, stats.abbreviated,
                       stats.kept);
  }
  if (history.records.empty()) {
    out << "no records\n";
    return kOk;
  }
  for (const auto& r : history.records) {
    const auto cls = classify_retention(r.recorded_at, now, ctx.cfg.retention);
    out << fmt::format("[{}] {}\n{}\n\n", to_string(cls), format_minute(r.recorded_at), r.summary);
  }
  return kOk;
}

// --- report ------------------------------------------------------------------------

int cmd_report(Context& ctx, const std::string& transcript_path, const std::string& date,
               bool lenient, std::ostream& out) {
  const auto transcript = read_file(transcript_path);
  const auto mode = lenient ? HeadingMode::lenient : ctx.cfg.report_headings;
  const auto report =
      generate_report(ctx.client("copilot"), *ctx.prompts, transcript, parse_now(date), mode);
  out << format_report(report);
  return kOk;
}

// --- serve -------------------------------------------------------------------------

int cmd_serve(Context& ctx, const std::string& host_flag, std::optional<int> port_flag,
              std::ostream& out) {
  const auto host = host_flag.empty() ? ctx.cfg.host : host_flag;
  const int port = port_flag.value_or(ctx.cfg.port);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ServiceDeps deps{ctx.client("copilot"), make_search_provider(ctx.cfg.search), system_clock_now};
  CopilotService service(ctx.cfg, *ctx.prompts, std::move(deps));
  HttpServer server(service, ctx.cfg.doctor.token);
  const int bound = server.bind(host, port);
  out << "listening on " << host << ":" << bound << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  // Unblock the waiter when the server stopped for another reason.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kOk;
}

}  // namespace

// --- classify-bench ------------------------------------------------------------------

std::string ClassifyBenchReport::accuracy_line() const {
  const double pct = total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  return fmt::format("{}/{} = {:.2f}%", correct, total, pct);
}

std::string ClassifyBenchReport::format() const {
  std::string out = "accuracy: " + accuracy_line() + "\n";
  const std::vector<std::string> labels = {"diagnosis", "explanation", "recommendation",
                                           "unclassifiable"};
  out += "\nconfusion (rows expected, columns predicted)\n";
  out += fmt::format("{:<16}", "");
  for (const auto& l : labels) out += fmt::format("{:>16}", l);
  out += '\n';
  for (std::size_t i = 0; i < 3; ++i) {
    out += fmt::format("{:<16}", labels[i]);
    for (const auto& p : labels) {
      auto it = confusion.find({labels[i], p});
      out += fmt::format("{:>16}", it == confusion.end() ? 0 : it->second);
    }
    out += '\n';
  }
  if (!failures.empty()) {
    out += "\nfailures\n";
    for (const auto& f : failures) {
      out += fmt::format("  line {}: expected {}, predicted {}: {}\n", f.line, f.expected,
                         f.predicted, f.text);
    }
  }
  if (!malformed.empty()) {
    out += "\nmalformed rows\n";
    for (const auto& [line, msg] : malformed) out += fmt::format("  line {}: {}\n", line, msg);
  }
  return out;
}

ClassifyBenchReport run_classify_bench(const DialogueEngine& engine, const fs::path& dataset) {
  std::ifstream in(dataset);
  if (!in) throw ConfigError("cannot read dataset " + dataset.string());
  ClassifyBenchReport report;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trimmed(line).empty()) continue;
    std::string text;
    std::optional<TaskKind> expected;
    try {
      const auto j = json::parse(line);
      text = j.at("text").get<std::string>();
      const auto label = j.at("expected_label").get<std::string>();
      expected = parse_task_label(label);
      if (!expected) throw PreconditionError("unknown label '" + label + "'");
      if (trimmed(text).empty()) throw PreconditionError("empty text");
    } catch (const std::exception& e) {
      report.malformed.emplace_back(n, e.what());
      continue;
    }
    std::string predicted;
    try {
      predicted = std::string(to_string(engine.classify(text)));
    } catch (const Unclassifiable&) {
      predicted = "unclassifiable";
    }
    const auto exp = std::string(to_string(*expected));
    ++report.total;
    ++report.confusion[{exp, predicted}];
    if (predicted == exp) {
      ++report.correct;
    } else {
      report.failures.push_back({n, text, exp, predicted});
    }
  }
  if (report.total == 0) throw PreconditionError("dataset " + dataset.string() + " has no valid rows");
  return report;
}

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Consultation copilot: chat, evaluation campaigns, memory tools and the HTTP service"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "Configuration file (default: $COPILOT_CONFIG)");
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  ChatOptions chat;
  auto* chat_cmd = app.add_subcommand("chat", "Interactive consultation on stdin/stdout");
  chat_cmd->add_option("--patient", chat.patient, "Patient id")->required();
  chat_cmd->add_flag("--doctor", chat.doctor, "Hold each answer for doctor review");
  chat_cmd->add_option("--backend", chat.backend, "Backend role for the copilot");
  chat_cmd->add_option("--now", chat.now, "Fixed clock (YYYY-MM-DDTHH:MM:SSZ)");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Run an evaluation campaign over a corpus");
  eval_cmd->add_option("--corpus", eval.corpus, "Corpus JSONL")->required();
  eval_cmd->add_option("--min-rounds", eval.min_rounds, "Keep dialogues with more turns than this");
  eval_cmd->add_option("--sample", eval.sample, "Number of dialogues to sample");
  eval_cmd->add_option("--seed", eval.seed, "Sampling seed");
  eval_cmd->add_option("--criteria", eval.criteria, "Criteria, or 'all'")->delimiter(',');
  eval_cmd->add_option("--max-turns", eval.max_turns, "Copilot outputs per consultation");
  eval_cmd->add_option("--parallelism", eval.parallelism, "Worker threads");
  eval_cmd->add_option("--out", eval.out_dir, "Directory for results.txt, rows.jsonl, transcripts.jsonl");
  eval_cmd->add_option("--now", eval.now, "Fixed clock for simulated sessions");

  CompareOptions cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Pairwise win/tie/lose comparison");
  cmp_cmd->add_option("--protocol", cmp.protocol, "inquiry_ablation or safety_ablation");
  cmp_cmd->add_option("--d1", cmp.d1, "First dialogue file");
  cmp_cmd->add_option("--d2", cmp.d2, "Second dialogue file");
  cmp_cmd->add_option("--pairs", cmp.pairs, "JSONL of {d1, d2} pairs");

  std::string cases_path;
  auto* val_cmd = app.add_subcommand("validate-doctor", "Doctor-guidance validation campaign");
  val_cmd->add_option("--cases", cases_path, "JSONL of {id, response, guidance?}")->required();

  std::string mem_patient, mem_now;
  auto* mem_cmd = app.add_subcommand("memory", "Inspect or decay a patient's history");
  mem_cmd->require_subcommand(1);
  auto* mem_show = mem_cmd->add_subcommand("show", "Print records with their retention class");
  auto* mem_update = mem_cmd->add_subcommand("update", "Apply the retention pass");
  for (auto* sub : {mem_show, mem_update}) {
    sub->add_option("--patient", mem_patient, "Patient id")->required();
    sub->add_option("--now", mem_now, "Evaluation time");
  }

  std::string report_transcript, report_date;
  bool report_lenient = false;
  auto* rep_cmd = app.add_subcommand("report", "Generate a consultation report from a transcript");
  rep_cmd->add_option("--transcript", report_transcript, "Patient:/Doctor: transcript file")->required();
  rep_cmd->add_option("--date", report_date, "Consultation date");
  rep_cmd->add_flag("--lenient", report_lenient, "Accept loosely formatted headings");

  std::string dataset;
  std::optional<double> min_accuracy;
  auto* bench_cmd = app.add_subcommand("classify-bench", "Task-routing accuracy on a labelled dataset");
  bench_cmd->add_option("--dataset", dataset, "JSONL of {text, expected_label}")->required();
  bench_cmd->add_option("--min-accuracy", min_accuracy, "Exit 1 below this percentage");

  std::string serve_host;
  std::optional<int> serve_port;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--host", serve_host, "Listen address");
  serve_cmd->add_option("--port", serve_port, "Listen port (0 picks one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    Context ctx(config_path);
    if (chat_cmd->parsed()) return cmd_chat(ctx, chat, in, out);
    if (eval_cmd->parsed()) return cmd_eval(ctx, eval, out);
    if (cmp_cmd->parsed()) return cmd_compare(ctx, cmp, out);
    if (val_cmd->parsed()) return cmd_validate_doctor(ctx, cases_path, out);
    if (mem_cmd->parsed()) return cmd_memory(ctx, mem_update->parsed(), mem_patient, mem_now, out);
    if (rep_cmd->parsed()) return cmd_report(ctx, report_transcript, report_date, report_lenient, out);
    if (bench_cmd->parsed()) {
      DialogueEngine engine(ctx.client("copilot"), *ctx.prompts, ctx.cfg.engine);
      const auto report = run_classify_bench(engine, dataset);
      out << report.format();
      const double pct = report.total == 0 ? 0.0
                                           : 100.0 * static_cast<double>(report.correct) /
                                                 static_cast<double>(report.total);
      if (min_accuracy && pct < *min_accuracy) return kFailure;
      return kOk;
    }
    if (serve_cmd->parsed()) return cmd_serve(ctx, serve_host, serve_port, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace copilot::cli
