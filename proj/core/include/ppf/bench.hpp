#pragma once

#include <ppf/ambiguity.hpp>
#include <ppf/catalog.hpp>
#include <ppf/forest.hpp>

#include <array>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppf {

/// Knobs of the synthetic workload generator.
struct ScenarioConfig
{
    std::string name = "custom";
    double structural_overlap = 0.5;    ///< ρ_s: fraction of each plan taken by the shared skeleton
    double feasibility_ratio = 1.0;     ///< ρ_f: fraction of annotation-consistent alternatives per choice point
    double engine_diversity = 0.5;      ///< ρ_e: probability an engine supports a given operator symbol
    std::size_t num_plans = 100;        ///< m
    std::size_t nodes_per_plan = 25;    ///< N̄ (leaves included)
    std::uint64_t seed = 1;

    std::size_t engines = 3;
    std::size_t max_alternatives = 10;  ///< largest k per choice point when factoring m
    std::vector<std::size_t> shape;     ///< explicit alternatives per choice point (overrides m)
    std::size_t domains = 1;            ///< embedding domains
    bool unique_tags = true;            ///< every alternative carries its own semantic tag (otherwise: its domain)
    /// Relative weight of each constraint family when drawing faults, in TYPE..TEMPORAL order.
    std::array<double, 7> family_weights = {1, 1, 1, 1, 1, 1, 0};

    /// Throws std::invalid_argument on out-of-range knobs.
    void validate() const;
    /// Alternatives per choice point; ∏ ≥ m.
    std::vector<std::size_t> choice_shape() const;
};

struct ConfigError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// Named presets: s1–s6 follow the (m, N̄) of the six published scenarios; `mixed` and `single` are the
/// multi-domain and single-domain baseline workloads.
ScenarioConfig preset(const std::string &name);
std::vector<std::string> preset_names();

ScenarioConfig config_from_json(const nlohmann::json &doc);
nlohmann::json config_to_json(const ScenarioConfig &c);

struct Workload
{
    AmbiguousQuerySpec spec;
    Catalog catalog;
    std::size_t num_plans = 0;          ///< candidates to expand (limit)
    std::size_t faulty_alternatives = 0;
    std::vector<std::size_t> faults_per_family = std::vector<std::size_t>(7, 0);
};

/// Deterministic in (config, seed).
Workload generate(const ScenarioConfig &config);

struct ScenarioRow
{
    std::string name;
    SizeStats stats;
    double label_ms = 0;
    double runtime_ms = 0;              ///< build + label
    double throughput = 0;              ///< total_nodes per second of runtime
    std::size_t certificates = 0;
    bool feasible = false;
    bool within_bounds = false;
};

ScenarioRow run_scenario(const ScenarioConfig &config);

struct NaiveReport
{
    std::size_t total_operator_instances = 0;
    std::size_t total_nodes = 0;
    std::size_t feasible_plans = 0;
    std::set<std::string> feasible_set;   ///< normalized serializations of fully feasible candidates (leaf kinds bound)
    double runtime_ms = 0;
};

struct MemoReport
{
    std::size_t memo_merges = 0;
    std::size_t incorrect_merges = 0;
    double incorrect_pct = 0;
};

struct BaselineReport
{
    NaiveReport naive;
    MemoReport memo_no_ann;
    SizeStats ppf;
};

/// Canonical text of a plan after merging structurally identical sub-DAGs; the oracle's notion of plan identity.
std::string normalized_plan_text(const Plan &plan);

/// Baseline A: materialize and fully check every candidate on its own.
NaiveReport baseline_naive(const std::vector<Plan> &candidates, const Catalog &catalog);
/// Baseline B: memoize operators by symbol, input kinds and parameters, ignoring annotations. A merge is incorrect
/// when the reused node's annotation class differs from the one it is merged into.
MemoReport baseline_memo_no_annotations(const std::vector<Plan> &candidates, const Catalog &catalog);
BaselineReport compare_baselines(const AmbiguousQuerySpec &spec, const Catalog &catalog,
                                 std::optional<std::size_t> limit = std::nullopt);

/// Pearson correlation; NaN when either series is constant or sizes differ.
double pearson(const std::vector<double> &x, const std::vector<double> &y);

struct CorrelationReport
{
    std::vector<std::pair<std::string, double>> pairs;
};

/// r for (UniqF, runtime), (PrU, runtime), (total nodes, runtime) and (total nodes, throughput).
CorrelationReport correlations(const std::vector<ScenarioRow> &rows);

nlohmann::json row_to_json(const ScenarioRow &row);
std::string format_rows_text(const std::vector<ScenarioRow> &rows);
std::string format_rows_records(const std::vector<ScenarioRow> &rows);
std::string format_correlations(const CorrelationReport &report);

}
