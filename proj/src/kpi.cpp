#include "toolseq/kpi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace toolseq::sim {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t state) {
    std::uint64_t z = state + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::uint64_t keyed_draw(std::uint64_t seed, std::string_view key, std::uint64_t counter) {
    return splitmix64(seed ^ splitmix64(fnv1a64(key) + counter));
}

namespace {

struct MetricTemplate {
    const char* suffix;
    const char* label;
    const char* unit;
    double low, high;
    bool abnormal_above;
};

constexpr MetricTemplate kMetrics[] = {
    {"cpu_load", "CPU Load", "%", 5, 95, true},
    {"memory_usage", "Memory Usage", "%", 10, 95, true},
    {"packet_loss_rate", "Packet Loss Rate", "%", 0, 5, true},
    {"latency", "Latency", "ms", 1, 80, true},
    {"jitter", "Jitter", "ms", 0, 20, true},
    {"session_count", "Session Count", "sessions", 100, 50000, true},
    {"request_success_rate", "Request Success Rate", "%", 90, 100, false},
    {"error_rate", "Error Rate", "%", 0, 5, true},
    {"throughput", "Throughput", "Mbps", 10, 2000, false},
    {"availability", "Availability", "%", 98, 100, false},
};

constexpr const char* kSubjects[] = {"amf", "smf", "upf", "pcf", "nrf", "ausf", "udm", "nssf", "gnb", "nef"};

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

KpiDefinition with_threshold(KpiDefinition d, std::uint64_t seed) {
    const double u = unit_interval(keyed_draw(seed, "threshold|" + d.name));
    const double t = d.abnormal_above ? 0.75 + 0.2 * u : 0.05 + 0.2 * u;
    d.threshold = std::round((d.low + (d.high - d.low) * t) * 100.0) / 100.0;
    return d;
}

std::vector<KpiDefinition> default_definitions(std::uint64_t seed) {
    std::vector<KpiDefinition> defs;
    defs.push_back({"avg_cell_throughput", "Average Cell Throughput", "Mbps", 20, 1500, 0, false});
    defs.push_back({"amf_load", "AMF Load", "%", 5, 100, 0, true});
    defs.push_back({"handover_success_rate", "Handover Success Rate", "%", 85, 100, 0, false});
    for (const auto* subject : kSubjects) {
        for (const auto& m : kMetrics) {
            if (defs.size() == kKpiPoolSize) break;
            defs.push_back({fmt::format("{}_{}", subject, m.suffix), fmt::format("{} {}", upper(subject), m.label),
                            m.unit, m.low, m.high, 0, m.abnormal_above});
        }
    }
    for (auto& d : defs) d = with_threshold(std::move(d), seed);
    return defs;
}

}  // namespace

KpiToolPool::KpiToolPool(std::uint64_t seed) : KpiToolPool(seed, default_definitions(seed)) {}

KpiToolPool::KpiToolPool(std::uint64_t seed, std::vector<KpiDefinition> definitions)
    : seed_(seed), definitions_(std::move(definitions)) {
    std::set<std::string> names;
    for (const auto& d : definitions_) {
        if (!is_valid_tool_name(d.name)) throw std::invalid_argument("invalid KPI tool name '" + d.name + "'");
        if (!names.insert(d.name).second) throw std::invalid_argument("duplicate KPI tool '" + d.name + "'");
    }
}

const KpiDefinition* KpiToolPool::find(std::string_view name) const {
    for (const auto& d : definitions_)
        if (d.name == name) return &d;
    return nullptr;
}

std::vector<ToolSpec> KpiToolPool::tool_specs() const {
    std::vector<ToolSpec> specs;
    specs.reserve(definitions_.size());
    for (const auto& d : definitions_) {
        specs.push_back(ToolSpec{d.name,
                                 fmt::format("Returns the {} KPI ({}) for the given region.", d.label, d.unit),
                                 {ParamSpec{"region", ValueKind::String, true, {}, "Target geographic region"}},
                                 ToolScope::Procedure,
                                 {}});
    }
    return specs;
}

ToolRegistry KpiToolPool::registry() const { return ToolRegistry(tool_specs()); }

KpiReading KpiToolPool::query(const std::string& tool_name, const std::string& region) const {
    const auto* d = find(tool_name);
    if (d == nullptr) throw std::out_of_range("unknown KPI tool '" + tool_name + "'");
    const double u = unit_interval(keyed_draw(seed_, tool_name + "|" + region));
    const double value = std::round((d->low + (d->high - d->low) * u) * 100.0) / 100.0;
    const bool abnormal = d->abnormal_above ? value > d->threshold : value < d->threshold;
    return KpiReading{tool_name, region, value, d->unit, abnormal};
}

json KpiToolPool::to_json() const {
    json tools = json::array();
    for (const auto& d : definitions_) {
        tools.push_back({{"name", d.name},
                         {"label", d.label},
                         {"unit", d.unit},
                         {"low", d.low},
                         {"high", d.high},
                         {"threshold", d.threshold},
                         {"abnormal_above", d.abnormal_above}});
    }
    return json{{"algorithm", kKpiAlgorithm}, {"seed", seed_}, {"m", definitions_.size()}, {"tools", std::move(tools)}};
}

KpiToolPool KpiToolPool::from_json(const json& j) {
    if (j.value("algorithm", std::string{}) != kKpiAlgorithm)
        throw std::invalid_argument("KPI pool uses an unsupported value algorithm");
    std::vector<KpiDefinition> defs;
    for (const auto& t : j.at("tools")) {
        defs.push_back(KpiDefinition{t.at("name").get<std::string>(), t.value("label", std::string{}),
                                     t.value("unit", std::string{}), t.at("low").get<double>(),
                                     t.at("high").get<double>(), t.at("threshold").get<double>(),
                                     t.value("abnormal_above", true)});
    }
    return KpiToolPool(j.at("seed").get<std::uint64_t>(), std::move(defs));
}

ToolResult kpi_query(const KpiToolPool& pool, const std::string& tool_name, const std::string& region) {
    if (pool.find(tool_name) == nullptr)
        return ToolResult{json{{"error", "unknown KPI tool '" + tool_name + "'"}}, true};
    const auto r = pool.query(tool_name, region);
    return ToolResult{json{{"kpi", r.tool_name}, {"region", r.region}, {"value", r.value}, {"unit", r.unit},
                           {"abnormal", r.abnormal}},
                      false};
}

StressCase gen_stress_procedure(const KpiToolPool& pool, int k, std::uint64_t seed) {
    if (std::find(kStressLengths.begin(), kStressLengths.end(), k) == kStressLengths.end())
        throw std::out_of_range(fmt::format("procedure length {} is not one of 5, 10, 20, 30, 40, 50", k));
    const auto& defs = pool.definitions();
    if (static_cast<std::size_t>(k) > defs.size())
        throw std::out_of_range(fmt::format("procedure length {} exceeds the pool size {}", k, defs.size()));

    std::vector<std::size_t> order(defs.size());
    std::iota(order.begin(), order.end(), 0);
    const auto draw_key = fmt::format("stress|k={}", k);
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
        const auto remaining = order.size() - i;
        const auto j = i + keyed_draw(seed, draw_key, i) % remaining;
        std::swap(order[i], order[j]);
    }
    const auto region = fmt::format("region-{}", keyed_draw(seed, fmt::format("region|k={}", k)) % 20 + 1);

    StressCase c;
    c.procedure.procedure_id = fmt::format("network_health_k{}", k);
    c.procedure.intent_key = kStressIntent;
    std::string tool_list;
    for (int i = 0; i < k; ++i) {
        const auto& name = defs[order[i]].name;
        c.procedure.steps.push_back(ExpectedStep{name, {{"region", ArgValue{region}}}});
        tool_list += fmt::format("{}{}", i == 0 ? "" : ", ", name);
    }
    c.intent.intent_key = kStressIntent;
    c.intent.structured = {{"region", region}, {"k", std::to_string(k)}, {"procedure_id", c.procedure.procedure_id}};
    c.intent.text = fmt::format(
        "Analyze the network health of {} using exactly these {} tools in this order: {}. "
        "Then summarize the collected KPIs and flag any abnormal metrics.",
        region, k, tool_list);
    return c;
}

std::string render_stress_catalog(const std::vector<StressCase>& cases) {
    std::string out;
    for (const auto& c : cases) {
        out += fmt::format("Procedure {} (intent: {}, k={}):\n", c.procedure.procedure_id, c.procedure.intent_key,
                           c.procedure.length());
        int n = 1;
        for (const auto& s : c.procedure.steps) out += fmt::format("  {}. {}(region)\n", n++, s.tool_name);
    }
    return out;
}

}  // namespace toolseq::sim
