#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabbench/common.hpp"
#include "tabbench/data.hpp"
#include "tabbench/frontier.hpp"
#include "tabbench/metrics.hpp"

namespace tabbench::sweep {

using Json = nlohmann::json;

// A single trainable configuration: {"family": ..., "params": {...}} plus
// an optional {"objective": {...}} wrapper for robust MLP training.
using Config = Json;

struct GridSpec {
    std::string family;  // boosted | forest | linear | mlp
    std::map<std::string, std::vector<Json>> params;
    std::map<std::string, std::vector<Json>> objective_params;  // crossed with params
    std::map<std::string, int> epoch_overrides;                 // dataset name -> epochs

    static GridSpec from_json_file(const std::string& path);
    static GridSpec from_json(const Json& j);
};

// Full cross product in lexicographic order of parameter names and value
// positions; objective wrapper values are crossed in after base params.
std::vector<Config> expand_grid(const GridSpec& spec);

// Stable 64-bit FNV-1a hash of the canonical (sorted-key) serialization,
// rendered as 16 hex digits so ids order lexicographically.
std::string config_id(const Config& config);

struct SplitMetrics {
    double accuracy = 0.0;
    double worst_group_accuracy = 0.0;
    double accuracy_disparity = 0.0;
    double cross_entropy = 0.0;
    double cvar_risk = 0.0;
    double doro_cvar_risk = 0.0;
    double dp_diff = 0.0;
    double eo_diff = 0.0;
    std::array<double, kNumGroups> group_accuracy{};
    std::array<Eigen::Index, kNumGroups> group_n{};

    Eigen::Index total_n() const;
    Eigen::Index smallest_group_n() const;
    bool all_finite() const;
};

struct RunRecord {
    std::string dataset;
    std::string id;  // config_id
    Config config;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    std::string status = "ok";  // ok | failed
    std::string error;
    SplitMetrics val;
    SplitMetrics test;

    Json to_json() const;
    static RunRecord from_json(const Json& j);
};

// Risk levels used when evaluating CVaR / DORO-CVaR record fields.
struct MetricLevels {
    double alpha = 0.5;
    double epsilon = 0.01;
};

// Train one config on the dataset's train split and evaluate val/test.
// Training failures come back as a status=failed record, never a throw.
RunRecord run_config(const Config& config, const data::TabularDataset& ds, std::uint64_t base_seed,
                     const MetricLevels& levels);

// Append-only JSON-lines persistence with a version header.
class ResultStore {
public:
    explicit ResultStore(std::string path);
    void append(const RunRecord& record);
    std::vector<RunRecord> load() const;
    std::set<std::string> recorded_ids() const;
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Execute all configs not yet in the store, `parallelism` at a time.
// Per-config seeds derive from (base_seed, config_id), so the resulting
// record set is independent of parallelism and of resume boundaries.
// Returns {ok, failed, skipped} counts.
struct SweepTally {
    int ok = 0;
    int failed = 0;
    int skipped = 0;
};
SweepTally run_sweep(const std::vector<Config>& configs, const data::TabularDataset& ds,
                     int parallelism, std::uint64_t base_seed, ResultStore& store,
                     const MetricLevels& levels,
                     const std::function<void(const RunRecord&)>& on_record = nullptr);

enum class RuleKind { BestAccuracy, BestWorstGroup, BestCVaR, BestDoroCVaR };

struct SelectionRule {
    RuleKind kind = RuleKind::BestAccuracy;
    data::Split split = data::Split::Val;  // selection split; Train is invalid
};

class SelectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argmax (argmin for risk rules) over ok records; ties break toward the
// lexicographically smallest config_id.
std::string select(const std::vector<RunRecord>& records, const SelectionRule& rule);

struct CiComparison {
    bool significant = false;
    metrics::BinomialCI interval_a;
    metrics::BinomialCI interval_b;
};

enum class CiGroup { Overall, Worst };

// Two-record 95% Clopper-Pearson comparison on test accuracy; worst-group
// comparisons conservatively use the smallest subgroup's sample size.
CiComparison compare_ci(const RunRecord& a, const RunRecord& b, CiGroup group);

struct SensitivityPoint {
    int rank = 0;
    std::string id;
    double metric = 0.0;
    double ci_width = 0.0;
};

struct SensitivityResult {
    std::map<std::string, Json> kept_ranges;  // param -> {"min","max"} or value list
    std::map<std::string, std::vector<SensitivityPoint>> series;  // dataset -> ranked points
};

// Winner-span grid truncation: keep only hyperparameter values inside
// the span of the per-dataset winners, then rank survivors per dataset.
SensitivityResult sensitivity(const std::map<std::string, std::vector<RunRecord>>& by_dataset,
                              const SelectionRule& rule);

// Frontier on (accuracy, worst-group accuracy) of ok records for a split.
struct FrontierRow {
    std::string id;
    double m1 = 0.0;
    double m2 = 0.0;
    bool on_frontier = false;
};
std::vector<FrontierRow> frontier_report(const std::vector<RunRecord>& records, data::Split split);

// Pearson correlation matrix across the eight test metrics of ok records.
struct CorrelationReport {
    std::vector<std::string> metric_names;
    Matrix r;  // 8 x 8, NaN where a metric is constant
};
CorrelationReport correlations(const std::vector<RunRecord>& records, data::Split split);

}  // namespace tabbench::sweep
