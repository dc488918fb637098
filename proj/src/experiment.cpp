#include "toolseq/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "toolseq/conformance.hpp"
#include "toolseq/metrics.hpp"
#include "toolseq/serialize.hpp"

namespace fs = std::filesystem;

namespace toolseq::experiment {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T field_or(const json& doc, const char* key, T fallback) {
    try {
        return doc.value(key, fallback);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config field '{}': {}", key, e.what()));
    }
}

ModelConfig parse_model(const json& m) {
    ModelConfig model;
    model.id = field_or<std::string>(m, "id", "");
    if (model.id.empty() || model.id.find(',') != std::string::npos)
        throw ConfigError("every model needs a non-empty id without commas");
    const auto kind = field_or<std::string>(m, "kind", "scripted");
    if (kind == "scripted") {
        model.scripted = true;
        auto& s = model.script;
        if (const auto f = m.find("fault"); f != m.end() && !f->is_null()) {
            const auto name = field_or<std::string>(*f, "kind", "none");
            const auto fk = agent::parse_fault_kind(name);
            if (!fk) throw ConfigError("unknown fault kind '" + name + "'");
            s.fault.kind = *fk;
            s.fault.step = field_or<int>(*f, "step", 0);
            s.fault.tool = field_or<std::string>(*f, "tool", field_or<std::string>(*f, "param", ""));
            if (f->contains("step_fraction")) s.step_fraction = field_or<double>(*f, "step_fraction", 0.5);
            if (s.fault.kind == agent::FaultKind::CallOutsideAt && s.fault.tool.empty())
                throw ConfigError("call_outside_at needs a tool");
        }
        s.fault_rate = field_or<double>(m, "fault_rate", 1.0);
        s.stop_probability = field_or<double>(m, "stop_probability", 0.0);
        if (s.fault_rate < 0 || s.fault_rate > 1 || s.stop_probability < 0 || s.stop_probability > 1)
            throw ConfigError("fault_rate and stop_probability must lie in [0, 1]");
    } else if (kind == "remote") {
        model.scripted = false;
        auto& e = model.endpoint;
        e.model_id = model.id;
        e.base_url = field_or<std::string>(m, "base_url", "");
        e.model = field_or<std::string>(m, "model", model.id);
        e.api_key_env = field_or<std::string>(m, "api_key_env", "");
        e.temperature = field_or<double>(m, "temperature", 0.0);
        e.max_tokens = field_or<int>(m, "max_tokens", 1024);
        e.retries = field_or<int>(m, "retries", 2);
        e.backoff_ms = field_or<int>(m, "backoff_ms", 500);
        e.timeout_seconds = field_or<double>(m, "timeout_s", 120.0);
        if (e.base_url.empty()) throw ConfigError("remote model '" + model.id + "' needs base_url");
    } else {
        throw ConfigError("unknown model kind '" + kind + "'");
    }
    return model;
}

std::shared_ptr<const sim::FixtureSet> parse_fixtures(const json& doc) {
    const auto it = doc.find("fixtures");
    if (it == doc.end() || !it->is_array()) throw ConfigError("scenario A config needs a 'fixtures' array");
    std::vector<sim::UeFixture> fixtures;
    for (const auto& f : *it) {
        sim::UeFixture fx;
        fx.ue_id = field_or<std::string>(f, "ue_id", "");
        for (const auto& t : f.value("authorized_session_types", std::vector<std::string>{})) {
            const auto st = sim::parse_session_type(t);
            if (!st) throw ConfigError("fixture '" + fx.ue_id + "': unknown session type '" + t + "'");
            fx.authorized_session_types.insert(*st);
        }
        if (const auto s = f.find("static_ip"); s != f.end() && s->is_string()) fx.static_ip = s->get<std::string>();
        fixtures.push_back(std::move(fx));
    }
    sim::DhcpConfig dhcp;
    if (const auto d = doc.find("dhcp"); d != doc.end()) {
        dhcp.v4_base = field_or<std::string>(*d, "v4_base", dhcp.v4_base);
        dhcp.v6_base = field_or<std::string>(*d, "v6_base", dhcp.v6_base);
        dhcp.capacity = field_or<int>(*d, "capacity", dhcp.capacity);
    }
    try {
        return std::make_shared<const sim::FixtureSet>(std::move(fixtures), dhcp);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

agent::ScenarioPrompts parse_prompts(const json& doc) {
    const auto it = doc.find("prompts");
    if (it == doc.end()) throw ConfigError("config needs a 'prompts' section");
    agent::ScenarioPrompts p;
    p.version = field_or<std::string>(*it, "version", "");
    p.catalog = field_or<std::string>(*it, "catalog", "");
    const auto templates = it->find("templates");
    if (templates == it->end() || !templates->is_object()) throw ConfigError("prompts need a 'templates' object");
    for (const auto& [name, tpl] : templates->items()) {
        const auto approach = parse_approach(name);
        if (!approach) throw ConfigError("prompt template for unknown approach '" + name + "'");
        p.templates[*approach] =
            agent::PromptPair{field_or<std::string>(tpl, "system", ""), field_or<std::string>(tpl, "user", "")};
    }
    return p;
}

}  // namespace

ScenarioConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    ScenarioConfig c;
    c.scenario = field_or<std::string>(doc, "scenario", "A");
    if (c.scenario != "A" && c.scenario != "B") throw ConfigError("scenario must be \"A\" or \"B\"");
    const bool b = c.scenario == "B";

    const auto approaches = field_or<std::vector<std::string>>(
        doc, "approaches", b ? std::vector<std::string>{"A1"} : std::vector<std::string>{"A1", "A2", "A3", "A4"});
    for (const auto& a : approaches) {
        const auto parsed = parse_approach(a);
        if (!parsed) throw ConfigError("unknown approach '" + a + "'");
        if (b && *parsed == Approach::A4) throw ConfigError("scenario B has no encapsulated tools (approach A4)");
        c.approaches.push_back(*parsed);
    }
    if (c.approaches.empty()) throw ConfigError("no approaches configured");

    if (const auto m = doc.find("models"); m != doc.end()) {
        for (const auto& model : *m) c.models.push_back(parse_model(model));
    } else {
        c.models.push_back(parse_model(json{{"id", "scripted"}, {"kind", "scripted"}}));
    }
    std::set<std::string> ids;
    for (const auto& m : c.models)
        if (!ids.insert(m.id).second) throw ConfigError("duplicate model id '" + m.id + "'");

    c.runs_per_cell = field_or<int>(doc, "runs_per_cell", b ? 30 : 50);
    if (c.runs_per_cell < 1) throw ConfigError("runs_per_cell must be at least 1");
    c.seed = field_or<std::uint64_t>(doc, "seed", 42);

    const auto clock = field_or<std::string>(doc, "clock", "steady");
    if (clock == "steady") c.clock = ClockKind::Steady;
    else if (clock == "ticking") c.clock = ClockKind::Ticking;
    else throw ConfigError("clock must be \"steady\" or \"ticking\"");

    c.workers = field_or<int>(doc, "workers", 1);
    if (c.workers < 1) throw ConfigError("workers must be at least 1");
    if (doc.contains("max_turns")) {
        c.max_turns = field_or<int>(doc, "max_turns", 1);
        if (*c.max_turns < 1) throw ConfigError("max_turns must be at least 1");
    }
    c.tool_timeout_seconds = field_or<double>(doc, "tool_timeout_s", 10.0);
    c.fold_other_into_wrong_order = field_or<bool>(doc, "fold_other_into_wrong_order", false);

    if (b) {
        c.k_values = field_or<std::vector<int>>(doc, "k_values", sim::kStressLengths);
        for (int k : c.k_values)
            if (std::find(sim::kStressLengths.begin(), sim::kStressLengths.end(), k) == sim::kStressLengths.end())
                throw ConfigError(fmt::format("k = {} is not one of 5, 10, 20, 30, 40, 50", k));
        if (c.k_values.empty()) throw ConfigError("no k_values configured");
        const auto algorithm = field_or<std::string>(doc, "kpi_algorithm", sim::kKpiAlgorithm);
        if (algorithm != sim::kKpiAlgorithm)
            throw ConfigError("unsupported kpi_algorithm '" + algorithm + "' (expected " + sim::kKpiAlgorithm + ")");
    } else {
        c.fixtures = parse_fixtures(doc);
        if (const auto in = doc.find("intents"); in != doc.end()) {
            for (const auto& i : *in)
                c.intents.emplace_back(field_or<std::string>(i, "ue_id", ""), field_or<std::string>(i, "session_type", ""));
        } else {
            c.intents.emplace_back("ue-001", "IPv4");
        }
        if (c.intents.empty()) throw ConfigError("no intents configured");
    }

    c.prompts = parse_prompts(doc);
    c.prompts.procedure_server = b ? 3 : 2;
    c.prompts.encapsulated_server = 1;
    for (auto a : c.approaches)
        if (c.prompts.templates.count(a) == 0)
            throw ConfigError(fmt::format("no prompt template for approach {}", to_string(a)));
    return c;
}

ScenarioConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

void apply_overrides(ScenarioConfig& config, const GlobalOptions& options) {
    if (options.seed) config.seed = *options.seed;
    if (options.workers) {
        if (*options.workers < 1) throw ConfigError("--workers must be at least 1");
        config.workers = *options.workers;
    }
}

// ---------------------------------------------------------------------------
// Scenario runtime
// ---------------------------------------------------------------------------

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

fs::path pool_path(const fs::path& out) { return out / "kpi_pool.json"; }
fs::path procedure_path(const fs::path& out, int k) { return out / "procedures" / fmt::format("stress_k{}.json", k); }

std::shared_ptr<const sim::KpiToolPool> load_pool(const ScenarioConfig& config, const fs::path& out) {
    if (fs::exists(pool_path(out))) {
        auto pool = sim::KpiToolPool::from_json(read_json_file(pool_path(out)));
        if (pool.seed() != config.seed)
            throw ConfigError(fmt::format("{} was generated with seed {}, config asks for {}", pool_path(out).string(),
                                          pool.seed(), config.seed));
        return std::make_shared<const sim::KpiToolPool>(std::move(pool));
    }
    return std::make_shared<const sim::KpiToolPool>(config.seed);
}

sim::StressCase load_stress_case(const ScenarioConfig& config, const sim::KpiToolPool& pool, const fs::path& out, int k) {
    if (fs::exists(procedure_path(out, k))) {
        const auto doc = read_json_file(procedure_path(out, k));
        return sim::StressCase{doc.at("intent").get<Intent>(), doc.at("procedure").get<Procedure>()};
    }
    return sim::gen_stress_procedure(pool, k, config.seed);
}

}  // namespace

ToolRegistry scenario_registry(const std::string& scenario) {
    if (scenario == "B") {
        // Tool names of the KPI pool do not depend on the seed.
        auto reg = sim::KpiToolPool(0).registry();
        reg.add(sim::procedure_repository_spec());
        return reg;
    }
    return sim::scenario_a_registry();
}

ScenarioRuntime::ScenarioRuntime(const ScenarioConfig& config, const fs::path& out_dir, const std::string& servers)
    : scenario_(config.scenario), prompts_(config.prompts) {
    std::shared_ptr<Clock> server_clock;
    if (config.clock == ClockKind::Ticking) server_clock = std::make_shared<FrozenClock>();
    else server_clock = std::make_shared<SteadyClock>();

    if (config.scenario == "B") {
        pool_ = load_pool(config, out_dir);
        std::vector<sim::StressCase> stress;
        for (int k : config.k_values) {
            auto c = load_stress_case(config, *pool_, out_dir, k);
            cases_.push_back(Case{fmt::format("k{}", k), c.intent, c.procedure});
            stress.push_back(std::move(c));
        }
        prompts_.catalog = sim::render_stress_catalog(stress);
        registry_ = pool_->registry();
        registry_.add(sim::procedure_repository_spec());
        auto repository = std::make_shared<const sim::ProcedureRepository>(prompts_.catalog);
        servers_.push_back(wire::make_kpi_server(pool_, repository, server_clock));
    } else {
        registry_ = sim::scenario_a_registry();
        for (const auto& [ue_id, session_type] : config.intents) {
            const auto intent = sim::make_allocation_intent(ue_id, session_type);
            cases_.push_back(Case{ue_id + "-" + session_type, intent, sim::ground_truth_procedure(intent, *config.fixtures)});
        }
        auto repository = std::make_shared<const sim::ProcedureRepository>(prompts_.catalog);
        servers_.push_back(wire::make_encapsulated_server(config.fixtures, server_clock));
        servers_.push_back(wire::make_allocation_server(config.fixtures, repository, server_clock));
    }

    if (servers.empty()) {
        for (auto& s : servers_)
            clients_[s->id()] = std::make_shared<wire::ToolClient>(std::make_shared<wire::LoopbackTransport>(*s));
    } else {
        const auto endpoints = wire::parse_server_list(servers);
        for (std::size_t i = 0; i < endpoints.size(); ++i) {
            clients_[static_cast<int>(i) + 1] = std::make_shared<wire::ToolClient>(
                std::make_shared<wire::HttpTransport>(endpoints[i].host, endpoints[i].port, config.tool_timeout_seconds));
        }
    }
}

std::vector<wire::ToolServer*> ScenarioRuntime::local_servers() const {
    std::vector<wire::ToolServer*> out;
    for (const auto& s : servers_) out.push_back(s.get());
    return out;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

void annotate(RunRecord& run, const ToolRegistry& registry) {
    if (run.approach == Approach::A4 && run.expected_agent) {
        run.verdict_agent = classify(*run.expected_agent, effective_trace(run, TraceLevel::Agent, registry), registry);
        run.verdict_flattened = classify(run.expected, effective_trace(run, TraceLevel::Flattened, registry), registry);
    } else {
        run.verdict_agent = classify(run.expected, effective_trace(run, TraceLevel::Agent, registry), registry);
        run.verdict_flattened.reset();
    }
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace

int cmd_gen(const ScenarioConfig& config, const GlobalOptions& options, std::ostream& log) {
    const sim::KpiToolPool pool(config.seed);
    write_text(pool_path(options.out), pool.to_json().dump(2) + "\n");
    const auto ks = config.scenario == "B" ? config.k_values : sim::kStressLengths;
    std::vector<sim::StressCase> cases;
    for (int k : ks) {
        auto c = sim::gen_stress_procedure(pool, k, config.seed);
        write_text(procedure_path(options.out, k), json{{"intent", c.intent}, {"procedure", c.procedure}}.dump(2) + "\n");
        cases.push_back(std::move(c));
    }
    write_text(options.out / "procedure_catalog.txt", sim::render_stress_catalog(cases));
    log << fmt::format("gen: {} tools, {} procedures (seed {}) -> {}\n", pool.definitions().size(), ks.size(),
                       config.seed, options.out.string());
    return exit_code::kOk;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

namespace {

struct Task {
    const ModelConfig* model;
    Approach approach;
    const ScenarioRuntime::Case* scenario_case;
    int repetition;
    std::string run_id;
};

std::string run_id_for(const std::string& scenario, Approach a, const std::string& model, const std::string& tag, int rep) {
    return fmt::format("{}-{}-{}-{}-r{:03}", scenario, to_string(a), model, tag, rep);
}

std::set<std::string> existing_run_ids(const fs::path& archive, std::ostream& log) {
    std::set<std::string> ids;
    std::ifstream in(archive);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.contains("run_id") || !doc["run_id"].is_string()) {
            log << fmt::format("run: ignoring corrupt archive line {}\n", line_no);
            continue;
        }
        ids.insert(doc["run_id"].get<std::string>());
    }
    return ids;
}

}  // namespace

int cmd_run(const ScenarioConfig& config, const GlobalOptions& options, std::ostream& log) {
    fs::create_directories(options.out);
    const auto archive = options.out / kRunsFile;
    const ScenarioRuntime runtime(config, options.out, options.servers);
    const auto done = existing_run_ids(archive, log);

    std::vector<Task> tasks;
    for (const auto& model : config.models)
        for (auto approach : config.approaches)
            for (const auto& c : runtime.cases())
                for (int rep = 1; rep <= config.runs_per_cell; ++rep) {
                    auto id = run_id_for(config.scenario, approach, model.id, c.tag, rep);
                    if (done.count(id) == 0) tasks.push_back(Task{&model, approach, &c, rep, std::move(id)});
                }
    log << fmt::format("run: {} new run(s), {} already archived\n", tasks.size(), done.size());

    std::map<std::string, std::shared_ptr<agent::RemoteLlmBackend>> remotes;
    for (const auto& model : config.models) {
        if (model.scripted) continue;
        auto backend = std::make_shared<agent::RemoteLlmBackend>(model.endpoint);
        backend->on_retry([&log](const std::string& line) { log << "run: " << line << '\n'; });
        remotes[model.id] = std::move(backend);
    }

    std::ofstream out(archive, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + archive.string());
    std::mutex out_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<int> backend_errors{0};
    std::atomic<int> completed{0};
    std::exception_ptr failure;

    auto execute = [&](const Task& t) {
        const auto& c = *t.scenario_case;
        const bool a4 = t.approach == Approach::A4;
        const auto expected_agent = a4 ? std::optional<Procedure>(sim::encapsulated_expectation(c.intent)) : std::nullopt;
        const auto ctx = agent::build_context(t.approach, c.intent, c.expected, runtime.prompts());
        const auto limits = config.max_turns ? agent::Limits{*config.max_turns} : agent::default_limits(c.expected.length());
        auto clock = make_clock(config.clock);

        std::unique_ptr<agent::ModelBackend> scripted;
        agent::ModelBackend* backend = nullptr;
        if (t.model->scripted) {
            const auto& s = t.model->script;
            std::vector<agent::PlannedCall> playbook;
            if (a4) playbook = agent::playbook_from_procedure(*expected_agent);
            else if (config.scenario == "A") playbook = agent::allocation_playbook(c.expected);
            else playbook = agent::playbook_from_procedure(c.expected);

            agent::ScriptOptions opts;
            opts.retrieve_first = t.approach == Approach::A2;
            const auto cell = fmt::format("{}|{}|{}", t.model->id, to_string(t.approach), c.tag);
            const bool faulted = s.fault.kind != agent::FaultKind::None &&
                                 sim::unit_interval(sim::keyed_draw(config.seed, "fault|" + cell, t.repetition)) < s.fault_rate;
            if (faulted) {
                opts.fault = s.fault;
                if (s.step_fraction)
                    opts.fault.step = std::max(1, static_cast<int>(static_cast<double>(playbook.size()) * *s.step_fraction));
            }
            opts.stop_probability = s.stop_probability;
            // Keyed by repetition only, so every k of a cell shares the same draws.
            opts.stop_seed = sim::keyed_draw(config.seed, "stop|" + t.model->id + "|" + std::string(to_string(t.approach)),
                                             t.repetition);
            try {
                scripted = std::make_unique<agent::ScriptedBackend>(t.model->id, std::move(playbook), c.intent, opts);
            } catch (const std::out_of_range& e) {
                throw ConfigError(fmt::format("{}: {}", t.run_id, e.what()));
            }
            backend = scripted.get();
        } else {
            backend = remotes.at(t.model->id).get();
        }

        auto run = agent::run_agent(ctx, c.intent, *backend, runtime.clients(), limits, *clock, t.run_id);
        run.run_id = t.run_id;
        run.scenario = config.scenario;
        run.expected = c.expected;
        run.expected_agent = expected_agent;
        if (run.terminated_reason == TerminatedReason::BackendError) ++backend_errors;

        std::lock_guard lock(out_mutex);
        out << to_archive_line(run) << '\n';
        out.flush();
        const int n = ++completed;
        if (n % 50 == 0 || n == static_cast<int>(tasks.size()))
            log << fmt::format("run: {}/{} complete\n", n, tasks.size());
    };

    auto worker = [&] {
        while (true) {
            const auto i = next++;
            if (i >= tasks.size()) return;
            try {
                execute(tasks[i]);
            } catch (...) {
                std::lock_guard lock(out_mutex);
                if (!failure) failure = std::current_exception();
                next = tasks.size();
                return;
            }
        }
    };

    const int width = std::max(1, std::min<int>(config.workers, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < width; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    if (backend_errors > 0) {
        log << fmt::format("run: {} run(s) ended with backend_error\n", backend_errors.load());
        return exit_code::kPartial;
    }
    return exit_code::kOk;
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

int cmd_classify(const ScenarioConfig&, const GlobalOptions& options, std::ostream& log) {
    const auto input = options.out / kRunsFile;
    const auto output = options.out / kClassifiedFile;
    std::ifstream in(input);
    if (!in) {
        log << "classify: cannot open " << input.string() << '\n';
        return exit_code::kUsage;
    }

    std::map<std::string, ToolRegistry> registries;
    std::ostringstream buffer;
    std::string line;
    int line_no = 0, corrupt = 0, classified = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        RunRecord run;
        try {
            run = from_archive_line(line);
        } catch (const std::exception& e) {
            ++corrupt;
            log << fmt::format("classify: line {}: corrupt record skipped ({})\n", line_no, e.what());
            continue;
        }
        auto reg = registries.find(run.scenario);
        if (reg == registries.end()) reg = registries.emplace(run.scenario, scenario_registry(run.scenario)).first;
        annotate(run, reg->second);
        buffer << to_archive_line(run) << '\n';
        ++classified;
    }
    write_text(output, buffer.str());
    log << fmt::format("classify: {} record(s) classified -> {}\n", classified, output.string());
    return corrupt > 0 ? exit_code::kPartial : exit_code::kOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

namespace {

std::string pct(double rate) { return fmt::format("{:.1f}%", rate * 100.0); }

void markdown_table(std::ostream& md, const std::vector<GroupSummary>& rows) {
    const std::vector<std::pair<Outcome, const char*>> columns{
        {Outcome::WrongTool, "Wrong Tool"},         {Outcome::DuplicateTool, "Duplicate Tool"},
        {Outcome::PrematureStop, "Premature Stop"}, {Outcome::WrongOrder, "Wrong Order"},
        {Outcome::NoToolCalls, "No Tool Calls"},    {Outcome::OtherDeviation, "Other"}};
    md << "| scenario | approach | model | k | runs | correctness | mean N_llm | median latency (ms) |";
    for (const auto& c : columns) md << ' ' << c.second << " |";
    md << "\n|---|---|---|---|---|---|---|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& r : rows) {
        md << fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} |", r.key.scenario, r.key.approach, r.key.model,
                          r.key.k_label(), r.runs, pct(r.correctness_rate), format_number(r.mean_n_llm),
                          format_number(r.latency.median));
        for (const auto& c : columns) {
            const auto it = r.error_counts.find(c.first);
            md << ' ' << (it == r.error_counts.end() ? 0 : it->second) << " |";
        }
        md << '\n';
    }
}

std::string csv_text(const std::vector<GroupSummary>& rows) {
    std::ostringstream out;
    write_summary_csv(out, rows);
    return out.str();
}

}  // namespace

int cmd_report(const ScenarioConfig& config, const GlobalOptions& options, std::ostream& log) {
    const auto input = options.out / kClassifiedFile;
    std::ifstream in(input);
    if (!in) {
        log << "report: cannot open " << input.string() << '\n';
        return exit_code::kUsage;
    }
    std::vector<ScoredRun> scored;
    std::vector<ScoredRun> flattened;
    std::string line;
    int line_no = 0, skipped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto run = from_archive_line(line);
            if (!run.verdict_agent) throw std::invalid_argument("record carries no verdict");
            const auto verdict = *run.verdict_agent;
            if (run.verdict_flattened) flattened.push_back(ScoredRun{run, *run.verdict_flattened});
            scored.push_back(ScoredRun{std::move(run), verdict});
        } catch (const std::exception& e) {
            ++skipped;
            log << fmt::format("report: line {}: skipped ({})\n", line_no, e.what());
        }
    }

    // Worker scheduling decides archive order; sort so aggregates do not depend on it.
    const auto by_id = [](const ScoredRun& a, const ScoredRun& b) { return a.run.run_id < b.run.run_id; };
    std::sort(scored.begin(), scored.end(), by_id);
    std::sort(flattened.begin(), flattened.end(), by_id);

    SummarizeOptions opts;
    opts.fold_other_into_wrong_order = config.fold_other_into_wrong_order;
    const auto by_cell = summarize(scored, opts);
    opts.grouping = GroupingSpec{true, true, false, false};
    const auto by_approach = summarize(scored, opts);
    opts.grouping = GroupingSpec{true, false, true, false};
    const auto by_model = summarize(scored, opts);
    opts.grouping = GroupingSpec{};
    const auto flat = summarize(flattened, opts);

    write_text(options.out / "summary.csv", csv_text(by_cell));
    write_text(options.out / "summary_by_approach.csv", csv_text(by_approach));
    write_text(options.out / "summary_by_model.csv", csv_text(by_model));

    std::ostringstream md;
    md << "# Procedure execution report\n\n";
    md << fmt::format("{} classified run(s). Verdicts are taken at the agent level; for A4 that is the single "
                      "encapsulated call.\n\n",
                      scored.size());
    md << "## Correctness rate and error distribution per cell\n\n";
    markdown_table(md, by_cell);
    md << "\n## By approach\n\n";
    markdown_table(md, by_approach);
    md << "\n## By model\n\n";
    markdown_table(md, by_model);
    if (!flat.empty()) {
        md << "\n## A4 internal procedure (flattened trace)\n\n";
        markdown_table(md, flat);
    }
    write_text(options.out / "report.md", md.str());

    log << fmt::format("report: {} group(s) -> {}\n", by_cell.size(), (options.out / "summary.csv").string());
    return skipped > 0 ? exit_code::kPartial : exit_code::kOk;
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

int cmd_serve(const ScenarioConfig& config, const GlobalOptions& options, std::ostream& log,
              const std::atomic<bool>& stop) {
    const ScenarioRuntime runtime(config, options.out, "");
    const auto endpoints =
        wire::parse_server_list(options.servers.empty() ? "127.0.0.1:8101,127.0.0.1:8102,127.0.0.1:8103" : options.servers);

    std::vector<std::unique_ptr<wire::HttpToolServer>> running;
    for (auto* server : runtime.local_servers()) {
        const auto index = static_cast<std::size_t>(server->id() - 1);
        if (index >= endpoints.size()) {
            log << fmt::format("serve: no endpoint for server {}, skipped\n", server->id());
            continue;
        }
        auto http = std::make_unique<wire::HttpToolServer>(*server);
        const int port = http->start(endpoints[index].host, endpoints[index].port);
        log << fmt::format("serve: server {} ({} tools) on {}:{}\n", server->id(), server->registry().size(),
                           endpoints[index].host, port);
        running.push_back(std::move(http));
    }
    log.flush();
    while (!stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    for (auto& s : running) s->stop();
    return exit_code::kOk;
}

}  // namespace toolseq::experiment
