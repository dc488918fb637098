#include "toolseq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace toolseq {

Millis latency_cost(const RunRecord& run) {
    Millis total = 0;
    for (const auto& step : run.llm_steps) total += step.duration();

    const auto& records = run.trace.records;
    for (const auto& rec : records) {
        if (rec.origin == CallOrigin::ToolInternal && rec.parent_step) {
            const auto parent = std::find_if(records.begin(), records.end(), [&](const ToolCallRecord& r) {
                return r.origin == CallOrigin::AgentIssued && r.step_index == *rec.parent_step;
            });
            if (parent != records.end() && rec.started_at >= parent->started_at && rec.ended_at <= parent->ended_at)
                continue;
        }
        total += rec.duration();
    }
    return total;
}

int n_llm_count(const RunRecord& run) { return static_cast<int>(run.llm_steps.size()); }

RunMetrics run_metrics(const RunRecord& run, const Verdict& verdict, std::size_t conformance_length) {
    RunMetrics m;
    m.latency_cost_ms = static_cast<double>(latency_cost(run));
    m.n_llm = n_llm_count(run);
    m.n_tool = static_cast<int>(conformance_length);
    m.reliability = verdict.outcome == Outcome::Correct ? 1 : 0;
    m.verdict = verdict;
    return m;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    if (q < 0 || q > 1) throw std::invalid_argument("quantile outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

namespace {

GroupKey key_for(const RunRecord& run, const GroupingSpec& g) {
    GroupKey key;
    key.scenario = g.by_scenario ? run.scenario : "*";
    key.approach = g.by_approach ? std::string(to_string(run.approach)) : "*";
    key.model = g.by_model ? run.model_id : "*";
    if (g.by_k) key.k = run.expected.length();
    return key;
}

}  // namespace

std::vector<GroupSummary> summarize(const std::vector<ScoredRun>& runs, const SummarizeOptions& options) {
    std::map<GroupKey, std::vector<const ScoredRun*>> groups;
    for (const auto& r : runs) groups[key_for(r.run, options.grouping)].push_back(&r);

    std::vector<GroupSummary> out;
    out.reserve(groups.size());
    for (const auto& [key, members] : groups) {
        GroupSummary s;
        s.key = key;
        s.runs = static_cast<int>(members.size());
        std::vector<double> latencies;
        int correct = 0;
        long total_llm = 0;
        for (const auto* r : members) {
            latencies.push_back(static_cast<double>(latency_cost(r->run)));
            total_llm += n_llm_count(r->run);
            auto outcome = r->verdict.outcome;
            if (outcome == Outcome::Correct) {
                ++correct;
                continue;
            }
            if (outcome == Outcome::OtherDeviation && options.fold_other_into_wrong_order)
                outcome = Outcome::WrongOrder;
            ++s.error_counts[outcome];
        }
        s.correctness_rate = static_cast<double>(correct) / s.runs;
        s.mean_n_llm = static_cast<double>(total_llm) / s.runs;
        s.latency.min = *std::min_element(latencies.begin(), latencies.end());
        s.latency.max = *std::max_element(latencies.begin(), latencies.end());
        s.latency.p25 = quantile(latencies, 0.25);
        s.latency.median = quantile(latencies, 0.5);
        s.latency.p75 = quantile(latencies, 0.75);
        s.latency.mean = std::accumulate(latencies.begin(), latencies.end(), 0.0) / s.runs;
        out.push_back(std::move(s));
    }
    return out;
}

std::string format_number(double value) { return fmt::format("{}", value); }

void write_summary_csv(std::ostream& out, const std::vector<GroupSummary>& rows) {
    out << kSummaryCsvHeader << '\n';
    auto count = [](const GroupSummary& s, Outcome o) {
        const auto it = s.error_counts.find(o);
        return it == s.error_counts.end() ? 0 : it->second;
    };
    for (const auto& s : rows) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", s.key.scenario, s.key.approach,
                           s.key.model, s.key.k_label(), s.runs, format_number(s.correctness_rate),
                           format_number(s.latency.min), format_number(s.latency.p25),
                           format_number(s.latency.median), format_number(s.latency.p75),
                           format_number(s.latency.max), format_number(s.latency.mean), format_number(s.mean_n_llm),
                           count(s, Outcome::WrongTool), count(s, Outcome::DuplicateTool),
                           count(s, Outcome::PrematureStop), count(s, Outcome::WrongOrder),
                           count(s, Outcome::NoToolCalls), count(s, Outcome::OtherDeviation));
    }
}

}  // namespace toolseq
