#include "hallulens/metrics.hpp"

#include "hallulens/util.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace hallulens::metrics {

using nlohmann::json;

std::map<std::string, TrialAggregate> aggregate(const std::vector<MetricMap>& trials) {
    if (trials.empty()) throw std::invalid_argument("aggregate: no trials");
    for (std::size_t i = 1; i < trials.size(); ++i) {
        if (trials[i].size() != trials[0].size() ||
            !std::equal(trials[i].begin(), trials[i].end(), trials[0].begin(),
                        [](const auto& a, const auto& b) { return a.first == b.first; }))
            throw std::invalid_argument("aggregate: trial metric shapes differ");
    }
    std::map<std::string, TrialAggregate> out;
    for (const auto& [name, _] : trials[0]) {
        TrialAggregate agg;
        agg.metric_name = name;
        agg.trial_count = trials.size();
        for (const MetricMap& t : trials) {
            const MetricValue& v = t.at(name);
            if (v.defined) agg.values.push_back(v.value);
            else agg.any_undefined = true;
        }
        if (!agg.values.empty()) {
            double sum = 0.0;
            for (double v : agg.values) sum += v;
            agg.mean = sum / static_cast<double>(agg.values.size());
            if (agg.values.size() > 1) {
                double ss = 0.0;
                for (double v : agg.values) ss += (v - agg.mean) * (v - agg.mean);
                agg.sample_std = std::sqrt(ss / static_cast<double>(agg.values.size() - 1));
            }
        }
        out.emplace(name, std::move(agg));
    }
    return out;
}

KendallTau kendall_tau(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
    if (a.size() != b.size() ||
        !std::equal(a.begin(), a.end(), b.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; }))
        throw std::invalid_argument("kendall_tau: subject sets differ");
    const std::size_t n = a.size();
    if (n < 2) throw std::invalid_argument("kendall_tau: need at least 2 subjects");

    std::vector<double> x, y;
    x.reserve(n);
    y.reserve(n);
    for (const auto& [subject, ax] : a) {
        x.push_back(ax);
        y.push_back(b.at(subject));
    }
    // ~13 models in practice; exact O(n^2) enumeration.
    double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;  // tied in both: excluded from every count
            if (dx == 0) ++ties_x;
            else if (dy == 0) ++ties_y;
            else if (dx * dy > 0) ++concordant;
            else ++discordant;
        }
    }
    double denom = std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
    if (denom == 0.0) return {0.0, false};  // a fully tied vector
    return {(concordant - discordant) / denom, true};
}

double round4(double v) { return std::round(v * 10000.0) / 10000.0; }

json json_metric(const MetricValue& v) {
    if (!v.defined) return nullptr;
    return round4(v.value);
}

json report_json(const std::vector<TaskResults>& results) {
    json out = json::object();
    for (const TaskResults& task : results) {
        json jt = json::object();
        for (const ModelResult& model : task.models) {
            json jm = json::object();
            for (const auto& [name, agg] : model.metrics) {
                json values = json::array();
                for (double v : agg.values) values.push_back(round4(v));
                jm[name] = json{{"values", values},
                                {"mean", agg.values.empty() ? json(nullptr) : json(round4(agg.mean))},
                                {"std", agg.values.empty() ? json(nullptr) : json(round4(agg.sample_std))},
                                {"trials", agg.trial_count},
                                {"undefined_trials", agg.any_undefined}};
            }
            jt[model.model] = std::move(jm);
        }
        out[task.task] = std::move(jt);
    }
    return out;
}

namespace {

std::string pct2(const TrialAggregate& agg) {
    if (agg.values.empty()) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", agg.mean * 100.0);
    return buf;
}

// Column layouts mirroring the published result tables; other metrics follow
// alphabetically.
const std::vector<std::string>& preferred_columns(const std::string& task) {
    static const std::vector<std::string> precise{"false_refusal_rate", "hallucination_rate_not_refused",
                                                  "correct_answer_rate"};
    static const std::vector<std::string> longwiki{"false_refusal_rate", "recall_at_k", "precision", "f1_at_k"};
    static const std::vector<std::string> nonexistent{"mixed_rate", "generated_rate", "average_rate"};
    static const std::vector<std::string> none{};
    if (task.find("precise") != std::string::npos) return precise;
    if (task.find("longwiki") != std::string::npos) return longwiki;
    if (task.find("nonexistent") != std::string::npos) return nonexistent;
    return none;
}

std::vector<std::string> column_order(const TaskResults& task) {
    std::set<std::string> all;
    for (const ModelResult& m : task.models)
        for (const auto& [name, _] : m.metrics) all.insert(name);
    std::vector<std::string> cols;
    for (const std::string& c : preferred_columns(task.task)) {
        if (all.erase(c)) cols.push_back(c);
    }
    cols.insert(cols.end(), all.begin(), all.end());
    return cols;
}

}  // namespace

std::string render_report(const std::vector<TaskResults>& results, ReportFormat format) {
    if (results.empty()) throw std::invalid_argument("emit_report: results must be non-empty");
    switch (format) {
        case ReportFormat::json:
            return report_json(results).dump(2) + "\n";
        case ReportFormat::markdown: {
            std::ostringstream os;
            for (const TaskResults& task : results) {
                std::vector<std::string> cols = column_order(task);
                os << "## " << task.task << "\n\n";
                os << "| Model |";
                for (const auto& c : cols) os << " " << c << " |";
                os << "\n|---|";
                for (std::size_t i = 0; i < cols.size(); ++i) os << "---|";
                os << "\n";
                for (const ModelResult& m : task.models) {
                    os << "| " << m.model << " |";
                    for (const auto& c : cols) {
                        auto it = m.metrics.find(c);
                        os << " " << (it == m.metrics.end() ? "-" : pct2(it->second)) << " |";
                    }
                    os << "\n";
                }
                os << "\n";
            }
            return os.str();
        }
        case ReportFormat::csv: {
            std::ostringstream os;
            os << "task,model,metric,mean,std,trials\n";
            for (const TaskResults& task : results) {
                for (const ModelResult& m : task.models) {
                    for (const auto& [name, agg] : m.metrics) {
                        os << task.task << "," << m.model << "," << name << ",";
                        if (agg.values.empty()) os << ",";
                        else {
                            char buf[64];
                            std::snprintf(buf, sizeof(buf), "%.4f,%.4f", agg.mean, agg.sample_std);
                            os << buf;
                        }
                        os << "," << agg.trial_count << "\n";
                    }
                }
            }
            return os.str();
        }
    }
    throw std::logic_error("unreachable report format");
}

void emit_report(const std::vector<TaskResults>& results, ReportFormat format,
                 const std::filesystem::path& path) {
    write_file_atomic(path, render_report(results, format));
}

}  // namespace hallulens::metrics
