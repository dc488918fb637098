#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "toolseq/model.hpp"

namespace toolseq {

struct RunMetrics {
    double latency_cost_ms = 0;
    int n_llm = 0;
    int n_tool = 0;
    int reliability = 0;
    Verdict verdict;
};

/// Sum of every llm-step duration and every tool-call duration. Internal calls
/// whose interval lies inside their parent encapsulated call are covered by the
/// parent and not counted again.
Millis latency_cost(const RunRecord& run);

int n_llm_count(const RunRecord& run);

RunMetrics run_metrics(const RunRecord& run, const Verdict& verdict, std::size_t conformance_length);

/// Inclusive linear interpolation on sorted data, q in [0, 1].
double quantile(std::vector<double> values, double q);

/// Which dimensions of (scenario, approach, model, k) separate groups.
/// Dimensions left out are reported as "*".
struct GroupingSpec {
    bool by_scenario = true;
    bool by_approach = true;
    bool by_model = true;
    bool by_k = true;
};

struct GroupKey {
    std::string scenario;
    std::string approach;
    std::string model;
    std::optional<std::size_t> k;  // absent when k is not a grouping dimension

    auto operator<=>(const GroupKey&) const = default;

    /// k as printed in reports, "*" when absent.
    std::string k_label() const { return k ? std::to_string(*k) : "*"; }
};

struct LatencyStats {
    double min = 0, p25 = 0, median = 0, p75 = 0, max = 0, mean = 0;
};

struct GroupSummary {
    GroupKey key;
    int runs = 0;
    double correctness_rate = 0;
    LatencyStats latency;
    std::map<Outcome, int> error_counts;
    double mean_n_llm = 0;
};

struct ScoredRun {
    RunRecord run;
    Verdict verdict;
};

struct SummarizeOptions {
    GroupingSpec grouping;
    // Count OtherDeviation under WrongOrder instead of its own column.
    bool fold_other_into_wrong_order = false;
};

/// One summary per distinct group key, ordered by key.
std::vector<GroupSummary> summarize(const std::vector<ScoredRun>& runs, const SummarizeOptions& options = {});

inline constexpr const char* kSummaryCsvHeader =
    "scenario,approach,model,k,runs,correctness_rate,lat_min,lat_p25,lat_median,lat_p75,lat_max,lat_mean,"
    "mean_n_llm,err_wrong_tool,err_duplicate,err_premature,err_wrong_order,err_no_calls,err_other";

void write_summary_csv(std::ostream& out, const std::vector<GroupSummary>& rows);

/// Shortest round-trip decimal text of a double, for stable CSV output.
std::string format_number(double value);

}  // namespace toolseq
