#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "toolseq/serialize.hpp"

using namespace toolseq;
using namespace toolseq::experiment;
using namespace toolseq::test;
namespace fs = std::filesystem;

namespace {

json config_doc(const std::string& file) {
    std::ifstream in(config_dir() / file);
    return json::parse(in);
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("toolseq_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> lines_of(const fs::path& file) {
    std::ifstream in(file);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<RunRecord> classified(const fs::path& out) {
    std::vector<RunRecord> runs;
    for (const auto& line : lines_of(out / kClassifiedFile)) runs.push_back(from_archive_line(line));
    return runs;
}

GlobalOptions options_for(const fs::path& out) {
    GlobalOptions o;
    o.out = out;
    return o;
}

}  // namespace

TEST_CASE("config defaults per scenario") {
    json a = config_doc("scenario_a.json");
    a.erase("runs_per_cell");
    a.erase("approaches");
    const auto ca = parse_config(a);
    CHECK(ca.runs_per_cell == 50);
    CHECK(ca.approaches.size() == 4);
    CHECK(ca.seed == 42);

    json b = config_doc("scenario_b.json");
    b.erase("runs_per_cell");
    b.erase("k_values");
    const auto cb = parse_config(b);
    CHECK(cb.runs_per_cell == 30);
    CHECK(cb.k_values == std::vector<int>{5, 10, 20, 30, 40, 50});
}

TEST_CASE("config errors are reported") {
    auto bad = [](auto mutate) {
        json doc = config_doc("scenario_a.json");
        mutate(doc);
        return doc;
    };
    CHECK_THROWS_AS(parse_config(bad([](json& d) { d["scenario"] = "C"; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& d) { d["approaches"] = {"A5"}; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& d) { d["runs_per_cell"] = 0; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& d) { d["models"] = {{{"id", "m"}, {"fault", {{"kind", "x"}}}}}; })),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& d) { d["models"] = {{{"id", "m"}}, {{"id", "m"}}}; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& d) { d["clock"] = "wall"; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& d) { d.erase("fixtures"); })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& d) { d["prompts"]["templates"].erase("A3"); })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& d) { d["runs_per_cell"] = "many"; })), ConfigError);
    json b = config_doc("scenario_b.json");
    b["k_values"] = {5, 7};
    CHECK_THROWS_AS(parse_config(b), ConfigError);
    b = config_doc("scenario_b.json");
    b["kpi_algorithm"] = "xorshift";
    CHECK_THROWS_AS(parse_config(b), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("scenario A batch: 4 approaches x 50 runs, resumable") {
    const auto out = fresh_dir("a_batch");
    auto config = load_config(config_dir() / "scenario_a.json");
    config.workers = 4;
    std::ostringstream log;
    CHECK(cmd_run(config, options_for(out), log) == exit_code::kOk);
    CHECK(lines_of(out / kRunsFile).size() == 200);

    std::ostringstream again;
    CHECK(cmd_run(config, options_for(out), again) == exit_code::kOk);
    CHECK(again.str().find("0 new run(s)") != std::string::npos);
    CHECK(lines_of(out / kRunsFile).size() == 200);

    CHECK(cmd_classify(config, options_for(out), log) == exit_code::kOk);
    const auto runs = classified(out);
    REQUIRE(runs.size() == 200);
    for (const auto& r : runs) CHECK(r.verdict_agent->outcome == Outcome::Correct);

    CHECK(cmd_report(config, options_for(out), log) == exit_code::kOk);
    const auto rows = lines_of(out / "summary.csv");
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].find(",50,1,") != std::string::npos);
    CHECK(fs::exists(out / "summary_by_approach.csv"));
    CHECK(fs::exists(out / "summary_by_model.csv"));
    CHECK(slurp(out / "report.md").find("Correctness rate") != std::string::npos);
}

TEST_CASE("scenario B batch: 6 lengths x 30 runs") {
    const auto out = fresh_dir("b_batch");
    auto config = load_config(config_dir() / "scenario_b.json");
    config.models.resize(1);
    config.workers = 4;
    std::ostringstream log;
    CHECK(cmd_run(config, options_for(out), log) == exit_code::kOk);
    CHECK(lines_of(out / kRunsFile).size() == 180);
    CHECK(cmd_classify(config, options_for(out), log) == exit_code::kOk);
    for (const auto& r : classified(out)) CHECK(r.verdict_agent->outcome == Outcome::Correct);
    CHECK(cmd_report(config, options_for(out), log) == exit_code::kOk);
    CHECK(lines_of(out / "summary.csv").size() == 1 + 6);
}

TEST_CASE("controlled fault rate gives the expected error share") {
    const auto out = fresh_dir("b_fault_rate");
    json doc = config_doc("scenario_b.json");
    doc["models"] = {{{"id", "half"}, {"kind", "scripted"}, {"fault", {{"kind", "stop_after"}, {"step_fraction", 0.5}}},
                      {"fault_rate", 0.5}}};
    auto config = parse_config(doc);
    std::ostringstream log;
    cmd_run(config, options_for(out), log);
    cmd_classify(config, options_for(out), log);
    int premature = 0, correct = 0;
    for (const auto& r : classified(out)) {
        if (r.verdict_agent->outcome == Outcome::PrematureStop) ++premature;
        if (r.verdict_agent->outcome == Outcome::Correct) ++correct;
    }
    CHECK(premature + correct == 180);
    // Binomial(180, 0.5): 60..120 is far outside any plausible deviation.
    CHECK(premature > 60);
    CHECK(premature < 120);
}

TEST_CASE("duplicate_step faults classify as DuplicateTool") {
    const auto out = fresh_dir("a_duplicate");
    json doc = config_doc("scenario_a.json");
    doc["approaches"] = {"A1", "A3"};
    doc["runs_per_cell"] = 5;
    doc["models"] = {{{"id", "dup"}, {"kind", "scripted"}, {"fault", {{"kind", "duplicate_step"}, {"step", 2}}}}};
    auto config = parse_config(doc);
    std::ostringstream log;
    cmd_run(config, options_for(out), log);
    cmd_classify(config, options_for(out), log);
    const auto runs = classified(out);
    REQUIRE(runs.size() == 10);
    for (const auto& r : runs) CHECK(r.verdict_agent->outcome == Outcome::DuplicateTool);
}

TEST_CASE("every branch intent and approach runs clean with a perfect model") {
    const auto out = fresh_dir("a_extended");
    auto config = load_config(config_dir() / "scenario_a_extended.json");
    config.models.resize(1);
    config.runs_per_cell = 2;
    std::ostringstream log;
    CHECK(cmd_run(config, options_for(out), log) == exit_code::kOk);
    CHECK(cmd_classify(config, options_for(out), log) == exit_code::kOk);
    const auto runs = classified(out);
    CHECK(runs.size() == 12 * 4 * 2);
    for (const auto& r : runs) {
        CAPTURE(r.run_id);
        CHECK(r.verdict_agent->outcome == Outcome::Correct);
        if (r.approach == Approach::A4) CHECK(r.verdict_flattened->outcome == Outcome::Correct);
    }
}

TEST_CASE("classify skips corrupt lines and reports them") {
    const auto out = fresh_dir("corrupt");
    auto config = load_config(config_dir() / "scenario_a.json");
    config.runs_per_cell = 1;
    std::ostringstream log;
    cmd_run(config, options_for(out), log);
    {
        std::ofstream append(out / kRunsFile, std::ios::app);
        append << "{\"run_id\": truncated\n";
    }
    std::ostringstream clog;
    CHECK(cmd_classify(config, options_for(out), clog) == exit_code::kPartial);
    CHECK(clog.str().find("line 5") != std::string::npos);
    CHECK(lines_of(out / kClassifiedFile).size() == 4);
}

TEST_CASE("classifying an empty archive succeeds with empty output") {
    const auto out = fresh_dir("empty");
    { std::ofstream touch(out / kRunsFile); }
    auto config = load_config(config_dir() / "scenario_a.json");
    std::ostringstream log;
    CHECK(cmd_classify(config, options_for(out), log) == exit_code::kOk);
    CHECK(fs::exists(out / kClassifiedFile));
    CHECK(lines_of(out / kClassifiedFile).empty());
}

TEST_CASE("classification is idempotent on its own output") {
    const auto out = fresh_dir("idempotent");
    auto config = load_config(config_dir() / "scenario_a.json");
    config.runs_per_cell = 2;
    std::ostringstream log;
    cmd_run(config, options_for(out), log);
    cmd_classify(config, options_for(out), log);
    const auto first = slurp(out / kClassifiedFile);
    cmd_classify(config, options_for(out), log);
    CHECK(slurp(out / kClassifiedFile) == first);
}

TEST_CASE("gen is deterministic and honours the k list") {
    const auto a = fresh_dir("gen_a");
    const auto b = fresh_dir("gen_b");
    auto config = load_config(config_dir() / "scenario_b.json");
    std::ostringstream log;
    cmd_gen(config, options_for(a), log);
    cmd_gen(config, options_for(b), log);
    CHECK(slurp(a / "kpi_pool.json") == slurp(b / "kpi_pool.json"));
    for (int k : config.k_values) {
        const auto name = fs::path("procedures") / ("stress_k" + std::to_string(k) + ".json");
        CHECK(slurp(a / name) == slurp(b / name));
    }

    const auto c = fresh_dir("gen_c");
    config.k_values = {5, 50};
    cmd_gen(config, options_for(c), log);
    int files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(c / "procedures")) ++files;
    CHECK(files == 2);
}

TEST_CASE("run uses generated assets and rejects a mismatched seed") {
    const auto out = fresh_dir("gen_then_run");
    auto config = load_config(config_dir() / "scenario_b.json");
    config.models.resize(1);
    config.runs_per_cell = 1;
    std::ostringstream log;
    cmd_gen(config, options_for(out), log);
    CHECK(cmd_run(config, options_for(out), log) == exit_code::kOk);
    config.seed = 7;
    CHECK_THROWS_AS(cmd_run(config, options_for(out), log), ConfigError);
}

TEST_CASE("unreachable model endpoints give backend_error runs and exit 2") {
    const auto out = fresh_dir("unreachable");
    json doc = config_doc("scenario_a.json");
    doc["approaches"] = {"A4"};
    doc["runs_per_cell"] = 2;
    doc["models"] = {{{"id", "down"}, {"kind", "remote"}, {"base_url", "http://127.0.0.1:9/v1"}, {"retries", 0},
                      {"timeout_s", 0.5}}};
    auto config = parse_config(doc);
    std::ostringstream log;
    CHECK(cmd_run(config, options_for(out), log) == exit_code::kPartial);
    CHECK(cmd_classify(config, options_for(out), log) == exit_code::kOk);
    const auto runs = classified(out);
    REQUIRE(runs.size() == 2);
    for (const auto& r : runs) {
        CHECK(r.terminated_reason == TerminatedReason::BackendError);
        CHECK(r.verdict_agent->outcome == Outcome::NoToolCalls);
    }
}

TEST_CASE("runs can use tool servers over HTTP") {
    auto config = load_config(config_dir() / "scenario_a.json");
    config.runs_per_cell = 3;
    const auto out = fresh_dir("http_run");
    ScenarioRuntime hosts(config, out, "");
    std::vector<std::unique_ptr<wire::HttpToolServer>> http;
    std::string servers;
    for (auto* s : hosts.local_servers()) {
        http.push_back(std::make_unique<wire::HttpToolServer>(*s));
        const int port = http.back()->start();
        servers += (servers.empty() ? "" : ",") + std::string("127.0.0.1:") + std::to_string(port);
    }
    auto options = options_for(out);
    options.servers = servers;
    std::ostringstream log;
    CHECK(cmd_run(config, options, log) == exit_code::kOk);
    CHECK(cmd_classify(config, options, log) == exit_code::kOk);
    for (const auto& r : classified(out)) CHECK(r.verdict_agent->outcome == Outcome::Correct);
    for (auto& h : http) h->stop();
}
