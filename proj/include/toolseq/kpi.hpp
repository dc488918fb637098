#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "toolseq/model.hpp"
#include "toolseq/toolsim.hpp"

// Seeded pool of network analytics (KPI) tools for the long-sequence stress
// scenario, plus the stress procedure generator.

namespace toolseq::sim {

inline constexpr std::size_t kKpiPoolSize = 100;
inline constexpr const char* kKpiAlgorithm = "splitmix64-fnv1a64-v1";
inline constexpr const char* kStressIntent = "network_health";

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
/// One SplitMix64 output for the given state.
std::uint64_t splitmix64(std::uint64_t state);
/// Uniform double in [0, 1) from 53 high bits.
double unit_interval(std::uint64_t bits);
/// Counter-based draw keyed by (seed, key, counter).
std::uint64_t keyed_draw(std::uint64_t seed, std::string_view key, std::uint64_t counter = 0);

struct KpiDefinition {
    std::string name;
    std::string label;
    std::string unit;
    double low = 0;
    double high = 1;
    double threshold = 0;
    // True when values above the threshold are abnormal; false when values
    // below it are.
    bool abnormal_above = true;

    friend bool operator==(const KpiDefinition&, const KpiDefinition&) = default;
};

struct KpiReading {
    std::string tool_name;
    std::string region;
    double value = 0;
    std::string unit;
    bool abnormal = false;
};

class KpiToolPool {
public:
    /// Builds the 100-tool pool; thresholds depend on the seed.
    explicit KpiToolPool(std::uint64_t seed);
    KpiToolPool(std::uint64_t seed, std::vector<KpiDefinition> definitions);

    std::uint64_t seed() const { return seed_; }
    const std::vector<KpiDefinition>& definitions() const { return definitions_; }
    const KpiDefinition* find(std::string_view name) const;

    std::vector<ToolSpec> tool_specs() const;
    ToolRegistry registry() const;

    /// Throws std::out_of_range for an unknown tool.
    KpiReading query(const std::string& tool_name, const std::string& region) const;

    json to_json() const;
    static KpiToolPool from_json(const json& j);

private:
    std::uint64_t seed_;
    std::vector<KpiDefinition> definitions_;
};

/// kpi_query as a tool invocation: unknown tools become failed calls.
ToolResult kpi_query(const KpiToolPool& pool, const std::string& tool_name, const std::string& region);

inline const std::vector<int> kStressLengths{5, 10, 20, 30, 40, 50};

struct StressCase {
    Intent intent;
    Procedure procedure;
};

/// Draws k distinct tools (partial Fisher-Yates over keyed draws) and a
/// region. Throws std::out_of_range unless k is one of 5, 10, 20, 30, 40, 50.
StressCase gen_stress_procedure(const KpiToolPool& pool, int k, std::uint64_t seed);

/// Canonical text rendering of a procedure set, used both as the embedded
/// system-prompt catalog and as the repository payload.
std::string render_stress_catalog(const std::vector<StressCase>& cases);

}  // namespace toolseq::sim
