#include "hallulens/metrics.hpp"

#include "hallulens/util.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace hallulens;

TEST_CASE("aggregate computes mean and sample std per metric") {
    using metrics::MetricMap;
    SUBCASE("constant values give zero std") {
        std::vector<MetricMap> trials(3, MetricMap{{"rate", {0.2, true}}});
        auto agg = metrics::aggregate(trials);
        CHECK(agg.at("rate").mean == doctest::Approx(0.2));
        CHECK(agg.at("rate").sample_std == doctest::Approx(0.0));
        CHECK(agg.at("rate").values.size() == 3);
    }
    SUBCASE("two-trial sample std uses the n-1 denominator") {
        std::vector<MetricMap> trials{{{"rate", {0.1, true}}}, {{"rate", {0.3, true}}}};
        auto agg = metrics::aggregate(trials);
        CHECK(agg.at("rate").mean == doctest::Approx(0.2));
        CHECK(agg.at("rate").sample_std == doctest::Approx(std::sqrt(0.02)));  // ~0.1414
    }
    SUBCASE("single trial: std zero by convention") {
        std::vector<MetricMap> trials{{{"rate", {0.4, true}}}};
        auto agg = metrics::aggregate(trials);
        CHECK(agg.at("rate").sample_std == 0.0);
    }
    SUBCASE("undefined trials excluded from the mean and flagged") {
        std::vector<MetricMap> trials{{{"h", {0.3, true}}}, {{"h", {0.0, false}}}, {{"h", {0.5, true}}}};
        auto agg = metrics::aggregate(trials);
        CHECK(agg.at("h").values.size() == 2);
        CHECK(agg.at("h").mean == doctest::Approx(0.4));
        CHECK(agg.at("h").any_undefined);
        CHECK(agg.at("h").trial_count == 3);
    }
    SUBCASE("shape mismatch raises") {
        std::vector<MetricMap> trials{{{"a", {1, true}}}, {{"b", {1, true}}}};
        CHECK_THROWS_AS(metrics::aggregate(trials), std::invalid_argument);
    }
}

namespace {

// Independent tau-b oracle: recount concordant/discordant/tied pairs from scratch.
double oracle_tau_b(const std::vector<double>& x, const std::vector<double>& y, bool& defined) {
    double c = 0, d = 0, tx = 0, ty = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) ++tx;
            else if (dy == 0) ++ty;
            else if ((dx > 0) == (dy > 0)) ++c;
            else ++d;
        }
    }
    double denom = std::sqrt((c + d + tx) * (c + d + ty));
    defined = denom != 0.0;
    return defined ? (c - d) / denom : 0.0;
}

std::map<std::string, double> as_rank_vector(const std::vector<double>& v) {
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out["m" + std::to_string(i)] = v[i];
    return out;
}

}  // namespace

TEST_CASE("kendall tau basics") {
    SUBCASE("identical rankings: 1") {
        auto a = as_rank_vector({1, 2, 3, 4, 5});
        CHECK(metrics::kendall_tau(a, a).tau == doctest::Approx(1.0));
    }
    SUBCASE("reversed rankings: -1") {
        auto a = as_rank_vector({1, 2, 3, 4, 5});
        auto b = as_rank_vector({5, 4, 3, 2, 1});
        CHECK(metrics::kendall_tau(a, b).tau == doctest::Approx(-1.0));
    }
    SUBCASE("one swapped pair: (5-1)/6") {
        auto a = as_rank_vector({1, 2, 3, 4});
        auto b = as_rank_vector({1, 3, 2, 4});
        CHECK(metrics::kendall_tau(a, b).tau == doctest::Approx(4.0 / 6.0));
    }
    SUBCASE("fully tied vector is undefined") {
        auto a = as_rank_vector({1, 2, 3});
        auto b = as_rank_vector({7, 7, 7});
        CHECK_FALSE(metrics::kendall_tau(a, b).defined);
    }
    SUBCASE("subject mismatch raises") {
        std::map<std::string, double> a{{"x", 1}, {"y", 2}};
        std::map<std::string, double> b{{"x", 1}, {"z", 2}};
        CHECK_THROWS_AS(metrics::kendall_tau(a, b), std::invalid_argument);
    }
    SUBCASE("n < 2 raises") {
        std::map<std::string, double> a{{"x", 1}};
        CHECK_THROWS_AS(metrics::kendall_tau(a, a), std::invalid_argument);
    }
}

TEST_CASE("kendall tau properties: symmetry and sign flip under negation") {
    SeededRng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + rng.uniform(9);
        std::vector<double> x(n), y(n), neg(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng.uniform(6));
            y[i] = static_cast<double>(rng.uniform(6));
            neg[i] = -y[i];
        }
        auto a = as_rank_vector(x), b = as_rank_vector(y), nb = as_rank_vector(neg);
        auto ab = metrics::kendall_tau(a, b);
        auto ba = metrics::kendall_tau(b, a);
        CHECK(ab.defined == ba.defined);
        if (ab.defined) {
            CHECK(ab.tau == doctest::Approx(ba.tau));
            auto flipped = metrics::kendall_tau(a, nb);
            CHECK(flipped.tau == doctest::Approx(-ab.tau));
        }
    }
}

TEST_CASE("kendall tau agrees with the exhaustive oracle on random vectors") {
    SeededRng rng(4242);
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t n = 2 + rng.uniform(9);  // up to 10 subjects
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng.uniform(8));
            y[i] = static_cast<double>(rng.uniform(8));
        }
        bool defined = false;
        double expect = oracle_tau_b(x, y, defined);
        auto got = metrics::kendall_tau(as_rank_vector(x), as_rank_vector(y));
        REQUIRE(got.defined == defined);
        if (defined) REQUIRE(got.tau == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("report emission") {
    metrics::TrialAggregate frr;
    frr.metric_name = "false_refusal_rate";
    frr.values = {0.0413, 0.0420};
    frr.mean = 0.04165;
    frr.sample_std = 0.000494974746;
    frr.trial_count = 2;
    metrics::TaskResults task;
    task.task = "precisewikiqa";
    task.models.push_back({"model-x", {{"false_refusal_rate", frr}}});
    std::vector<metrics::TaskResults> results{task};

    SUBCASE("json is canonical and repeatable") {
        std::string a = metrics::render_report(results, metrics::ReportFormat::json);
        std::string b = metrics::render_report(results, metrics::ReportFormat::json);
        CHECK(a == b);
        auto parsed = nlohmann::json::parse(a);
        CHECK(parsed["precisewikiqa"]["model-x"]["false_refusal_rate"]["mean"] == doctest::Approx(0.0417));
    }
    SUBCASE("markdown renders a percentage table") {
        std::string md = metrics::render_report(results, metrics::ReportFormat::markdown);
        CHECK(md.find("| Model |") != std::string::npos);
        CHECK(md.find("false_refusal_rate") != std::string::npos);
        CHECK(md.find("4.17") != std::string::npos);  // 0.04165 -> 4.17%
    }
    SUBCASE("csv has one row per task x model x metric") {
        std::string csv = metrics::render_report(results, metrics::ReportFormat::csv);
        auto lines = split(trim(csv), '\n');
        CHECK(lines.size() == 2);  // header + 1 metric row
        CHECK(lines[1].rfind("precisewikiqa,model-x,false_refusal_rate,", 0) == 0);
    }
    SUBCASE("empty results are rejected") {
        CHECK_THROWS_AS(metrics::render_report({}, metrics::ReportFormat::json), std::invalid_argument);
    }
    SUBCASE("emit_report writes the file") {
        auto dir = testsupport::fresh_temp_dir("report");
        metrics::emit_report(results, metrics::ReportFormat::json, dir / "r.json");
        CHECK(std::filesystem::exists(dir / "r.json"));
    }
}

TEST_CASE("round4 keeps canonical float text stable") {
    CHECK(metrics::round4(0.123449) == doctest::Approx(0.1234));
    CHECK(nlohmann::json(metrics::round4(0.1234)).dump() == "0.1234");
    CHECK(nlohmann::json(metrics::round4(1.0 / 3.0)).dump() == "0.3333");
}
