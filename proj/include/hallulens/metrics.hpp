#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hallulens::metrics {

// One task metric value; rates with an empty denominator stay undefined and
// are never coerced to 0.
struct MetricValue {
    double value = 0.0;
    bool defined = true;
};

using MetricMap = std::map<std::string, MetricValue>;

struct TrialAggregate {
    std::string metric_name;
    std::vector<double> values;  // defined trial values, in trial order
    double mean = 0.0;
    double sample_std = 0.0;  // n-1 denominator; 0 when n == 1
    bool any_undefined = false;
    std::size_t trial_count = 0;  // configured trials, defined or not
};

// Per-metric mean and sample std across trials of the same task. Undefined
// trial values are excluded from the mean and flagged. Trials must share the
// same metric key set.
std::map<std::string, TrialAggregate> aggregate(const std::vector<MetricMap>& trials);

struct KendallTau {
    double tau = 0.0;
    bool defined = true;  // false when either vector is fully tied
};

// Kendall tau-b (tie-corrected) by exact pair enumeration. Both vectors must
// rank the same subjects (n >= 2).
KendallTau kendall_tau(const std::map<std::string, double>& a, const std::map<std::string, double>& b);

enum class ReportFormat { json, markdown, csv };

struct ModelResult {
    std::string model;
    std::map<std::string, TrialAggregate> metrics;
};

struct TaskResults {
    std::string task;
    std::vector<ModelResult> models;
};

// Canonical serializations. JSON is the machine format: sorted keys and
// 4-decimal floats, byte-stable across runs. Markdown renders rate metrics as
// percentage tables with 2 decimals; CSV is one row per (task, model, metric).
nlohmann::json report_json(const std::vector<TaskResults>& results);
std::string render_report(const std::vector<TaskResults>& results, ReportFormat format);
void emit_report(const std::vector<TaskResults>& results, ReportFormat format,
                 const std::filesystem::path& path);

// Rounds to 4 decimals for canonical JSON output.
double round4(double v);
nlohmann::json json_metric(const MetricValue& v);  // null when undefined

}  // namespace hallulens::metrics
