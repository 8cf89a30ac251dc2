#include "cli.hpp"

#include <ppf/bench.hpp>
#include <ppf/hash.hpp>
#include <ppf/labeling.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>

namespace ppf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char *kToolVersion = "0.1.0";

/// A problem with the user's input (missing file, malformed document, bad flag value).
struct InputError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError(path + ": cannot open file");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const std::string &path)
{
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error &e) {
        throw InputError(path + ": " + e.what());
    }
}

/// Timing and memory fields vary between identical runs; digests ignore them.
json without_timing(json j)
{
    // correlations pair every statistic with runtime or throughput, so they vary with timing too
    static const std::set<std::string> timing = {"build_ms",    "label_ms",          "runtime_ms",
                                                 "peak_mem_kb", "throughput_nodes_per_s", "naive_runtime_ms",
                                                 "correlations"};
    if (j.is_object()) {
        json out = json::object();
        for (auto &[k, v] : j.items())
            if (!timing.contains(k))
                out[k] = without_timing(v);
        return out;
    }
    if (j.is_array()) {
        json out = json::array();
        for (auto &v : j)
            out.push_back(without_timing(v));
        return out;
    }
    return j;
}

std::string digest_of(std::string_view text) { return to_hex(fnv1a(text)); }

/// Collects what a run read and wrote; serialized as manifest.json.
class Run
{
  public:
    Run(std::string command, std::string out_dir) : command_(std::move(command)), out_dir_(std::move(out_dir)) {}

    void input(const std::string &path) { inputs_.push_back({{"path", path}, {"digest", digest_of(read_file(path))}}); }
    void flag(const std::string &name, json value) { flags_[name] = std::move(value); }
    void seed(std::uint64_t s) { seed_ = s; }
    void catalog(const Catalog &c) { catalog_digest_ = to_hex(c.digest()); }

    void write_json(const std::string &name, const json &doc)
    {
        write_text(name, doc.dump(2) + "\n", without_timing(doc).dump());
    }

    void write_text(const std::string &name, const std::string &text, std::optional<std::string> digest_basis = {})
    {
        fs::create_directories(out_dir_);
        fs::path path = fs::path(out_dir_) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw InputError(path.string() + ": cannot write file");
        out << text;
        outputs_[name] = digest_of(digest_basis ? *digest_basis : text);
    }

    std::string path(const std::string &name) const { return (fs::path(out_dir_) / name).string(); }

    void finish()
    {
        json manifest{{"command", command_},
                      {"inputs", inputs_},
                      {"flags", flags_},
                      {"tool_version", kToolVersion},
                      {"output_digests", outputs_}};
        manifest["seed"] = seed_ ? json(*seed_) : json(nullptr);
        manifest["catalog_digest"] = catalog_digest_ ? json(*catalog_digest_) : json(nullptr);
        fs::create_directories(out_dir_);
        std::ofstream(fs::path(out_dir_) / "manifest.json") << manifest.dump(2) << "\n";
    }

  private:
    std::string command_;
    std::string out_dir_;
    json inputs_ = json::array();
    json flags_ = json::object();
    json outputs_ = json::object();
    std::optional<std::uint64_t> seed_;
    std::optional<std::string> catalog_digest_;
};

Catalog load_catalog(Run &run, const std::string &path)
{
    run.input(path);
    try {
        Catalog c = load_catalog_file(path);
        run.catalog(c);
        return c;
    } catch (const std::exception &e) {
        throw InputError(path + ": " + e.what());
    }
}

template <class F>
auto parse_input(const std::string &path, F &&parse)
{
    try {
        return parse(read_file(path));
    } catch (const InputError &) {
        throw;
    } catch (const std::exception &e) {
        throw InputError(path + ": " + e.what());
    }
}

void print_certificates(std::ostream &out, const std::vector<Certificate> &certs)
{
    for (std::size_t i = 0; i < certs.size(); ++i) {
        const Certificate &c = certs[i];
        out << "certificate " << i + 1 << " [" << to_string(c.family) << "] at operator " << c.operator_id;
        if (c.plan_index)
            out << " (candidate " << *c.plan_index << ")";
        out << ": " << c.message() << "\n";
        out << "  subplan {";
        for (std::size_t j = 0; j < c.subplan.size(); ++j)
            out << (j ? ", " : "") << c.subplan[j];
        out << "}\n";
        for (const auto &e : c.witness.evidence) {
            out << "  evidence " << e.facet << ": expected " << e.expected;
            if (!e.actual.empty())
                out << ", found " << e.actual;
            out << "\n";
        }
    }
}

json certificates_json(const std::vector<Certificate> &certs)
{
    json arr = json::array();
    for (const auto &c : certs)
        arr.push_back(certificate_to_json(c));
    return arr;
}

/// Fails loudly when a stats row breaks its own identities.
void assert_identities(const SizeStats &s, const std::string &name)
{
    const double total = static_cast<double>(s.total_nodes);
    bool ok = s.pruned_unique == s.unique_all - s.unique_feasible && s.unique_feasible <= s.unique_all;
    if (total > 0)
        ok = ok && std::abs(s.packed_ratio_pre - static_cast<double>(s.unique_all) / total) < 1e-12 &&
             std::abs(s.packed_ratio_post - static_cast<double>(s.unique_feasible) / total) < 1e-12;
    if (!ok)
        throw std::logic_error("stats identities violated for scenario " + name);
}

/*======================================================================================================================
 * Commands
 *====================================================================================================================*/

struct Common
{
    std::string out_dir = ".";
};

struct BuildArgs
{
    std::string spec, catalog;
    bool repair = false, no_prune = false, stats = false;
    std::optional<std::size_t> limit;
};

int cmd_build(const BuildArgs &a, const Common &common, std::ostream &out)
{
    Run run("build", common.out_dir);
    run.flag("repair_crs", a.repair);
    run.flag("no_prune", a.no_prune);
    run.flag("limit", a.limit ? json(*a.limit) : json(nullptr));
    Catalog catalog = load_catalog(run, a.catalog);
    run.input(a.spec);
    AmbiguousQuerySpec spec = parse_input(a.spec, [](const std::string &text) { return load_spec(text); });

    BuildOptions opts;
    opts.prune = !a.no_prune;
    opts.limit = a.limit;
    std::size_t k = 1;
    for (const auto &cp : spec.choice_points)
        k = std::max(k, cp.alternatives.size());
    opts.alternatives = k;

    PlanExpander expander(spec, a.limit);
    CandidateSource source = [&]() -> std::optional<Candidate> {
        auto c = expander.next();
        if (c && a.repair) {
            c->plan = repair_crs(c->plan, catalog);
            c->report = validate_signature(c->plan);
        }
        return c;
    };
    BuildResult result = build(source, catalog, opts);
    assert_identities(result.stats, "build");

    ForestDocument doc{result.forest, catalog, result.stats, result.certificates};
    run.write_json("forest.json", forest_document_to_json(doc));
    run.write_json("certificates.json", certificates_json(result.certificates));
    run.write_json("stats.json", stats_to_json(result.stats));

    const auto &s = result.stats;
    out << "candidates: " << s.num_plans << ", surviving: " << s.surviving_plans << ", forest nodes: "
        << result.forest.size() << ", certificates: " << result.certificates.size() << "\n";
    if (a.stats)
        out << std::fixed << std::setprecision(2) << "UniqA " << s.unique_all << "  UniqF " << s.unique_feasible
            << "  PkA " << s.packed_ratio_pre << "  PkF " << s.packed_ratio_post << "  PrU " << s.pruned_unique
            << "  build " << s.build_ms << " ms\n";
    print_certificates(out, result.certificates);
    out << "wrote " << run.path("forest.json") << "\n";
    run.finish();
    return result.forest.roots.empty() ? kInfeasible : kOk;
}

int cmd_label(const std::string &forest_path, const Common &common, std::ostream &out)
{
    Run run("label", common.out_dir);
    run.input(forest_path);
    ForestDocument doc = parse_input(forest_path, [](const std::string &text) {
        return forest_document_from_json(json::parse(text));
    });
    run.catalog(doc.catalog);

    if (doc.forest.roots.empty()) {
        json verdict{{"verdict", "no roots"}, {"infeasible_roots", json::array()},
                     {"certificates", certificates_json(doc.certificates)}, {"label_counts", json::array()},
                     {"pruned_label_log", json::array()}, {"sweeps", 0}};
        run.write_json("verdict.json", verdict);
        out << "verdict: no roots (every candidate was pruned while building)\n";
        print_certificates(out, doc.certificates);
        run.finish();
        return kInfeasible;
    }

    Labeling labels = label(doc.forest, doc.catalog);
    FeasibilityVerdict verdict;
    try {
        verdict = is_feasible(doc.forest, labels, doc.catalog);
    } catch (const std::invalid_argument &e) {
        throw InputError(forest_path + ": " + e.what());
    }
    run.write_json("verdict.json", verdict_to_json(verdict, doc.forest, labels));
    out << "verdict: " << (verdict.feasible ? "Feasible" : "Infeasible") << " after " << labels.sweeps
        << " sweeps; labels " << labels.mass.front() << " -> " << labels.mass.back() << "\n";
    print_certificates(out, verdict.certificates);
    run.finish();
    return verdict.feasible ? kOk : kInfeasible;
}

struct ExplainArgs
{
    std::string plan, catalog;
    std::optional<std::string> certificates;
    bool repair = false;
};

int cmd_explain(const ExplainArgs &a, const Common &common, std::ostream &out)
{
    Run run("explain", common.out_dir);
    run.flag("repair_crs", a.repair);
    Catalog catalog = load_catalog(run, a.catalog);
    run.input(a.plan);
    Plan plan = parse_input(a.plan, [](const std::string &text) { return load_plan(text); });
    if (a.repair)
        plan = repair_crs(plan, catalog);

    std::vector<Certificate> certs;
    if (a.certificates) {
        run.input(*a.certificates);
        json doc = read_json(*a.certificates);
        const json &arr = doc.is_object() && doc.contains("certificates") ? doc["certificates"] : doc;
        try {
            for (const auto &c : arr)
                certs.push_back(certificate_from_json(c));
        } catch (const std::exception &e) {
            throw InputError(*a.certificates + ": " + e.what());
        }
    } else {
        std::set<std::string> seen;
        for (const Witness &w : check_plan(plan, catalog)) {
            Certificate c = minimal_certificate(plan, w, catalog);
            if (seen.insert(certificate_to_json(c).dump()).second)
                certs.push_back(std::move(c));
        }
    }

    json results = json::array();
    bool all_ok = true;
    for (const auto &c : certs) {
        Verification v = verify_certificate(c, plan, catalog);
        all_ok = all_ok && v.ok;
        json j = certificate_to_json(c);
        j["verified"] = v.ok;
        if (!v.ok)
            j["rejection"] = v.reason;
        results.push_back(std::move(j));
    }
    run.write_json("explain.json", {{"feasible", certs.empty()}, {"certificates", results}});
    if (certs.empty())
        out << "plan is feasible under this catalog\n";
    print_certificates(out, certs);
    for (std::size_t i = 0; i < certs.size(); ++i)
        out << "certificate " << i + 1 << ": "
            << (results[i]["verified"].get<bool>() ? "verified" : "REJECTED: " + results[i]["rejection"].get<std::string>())
            << "\n";
    run.finish();
    if (a.certificates)
        return all_ok ? kOk : kInfeasible;
    return certs.empty() ? kOk : kInfeasible;
}

struct UnpackArgs
{
    std::string forest;
    std::optional<std::size_t> limit;
    bool feasible_only = false;
};

int cmd_unpack(const UnpackArgs &a, const Common &common, std::ostream &out)
{
    Run run("unpack", common.out_dir);
    run.flag("limit", a.limit ? json(*a.limit) : json(nullptr));
    run.flag("feasible_only", a.feasible_only);
    run.input(a.forest);
    ForestDocument doc = parse_input(a.forest, [](const std::string &text) {
        return forest_document_from_json(json::parse(text));
    });
    run.catalog(doc.catalog);
    UnpackResult r;
    if (a.feasible_only)
        r = extract_feasible(doc.forest, label(doc.forest, doc.catalog), a.limit);
    else
        r = unpack(doc.forest, a.limit);
    std::string text;
    json plans = json::array();
    for (std::size_t i = 0; i < r.plans.size(); ++i) {
        text += "# plan " + std::to_string(i) + "\n" + write_plan(r.plans[i]) + "\n";
        plans.push_back(plan_to_json(r.plans[i]));
    }
    run.write_text("plans.txt", text);
    run.write_json("plans.json", {{"plans", plans}, {"truncated", r.truncated}});
    out << r.plans.size() << " plan(s)" << (r.truncated ? " (truncated at limit)" : "") << "\n";
    run.finish();
    return kOk;
}

struct BenchArgs
{
    std::vector<std::string> presets;
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string format = "text";
};

int cmd_bench(const BenchArgs &a, const Common &common, std::ostream &out)
{
    Run run("bench", common.out_dir);
    run.flag("format", a.format);
    run.flag("jobs", a.jobs);
    if (a.seed)
        run.seed(*a.seed);

    std::vector<ScenarioConfig> configs;
    try {
        if (a.config) {
            run.input(*a.config);
            json doc = read_json(*a.config);
            if (doc.is_array())
                for (const auto &c : doc)
                    configs.push_back(config_from_json(c));
            else
                configs.push_back(config_from_json(doc));
        }
        auto names = a.presets;
        if (names.empty() && !a.config)
            names = {"s1", "s2", "s3", "s4", "s5", "s6"};
        for (const auto &n : names)
            configs.push_back(preset(n));
    } catch (const ConfigError &e) {
        throw InputError(e.what());
    } catch (const json::exception &e) {
        throw InputError(std::string("scenario config: ") + e.what());
    }
    if (a.seed)
        for (auto &c : configs)
            c.seed = *a.seed;
    for (const auto &c : configs)
        try {
            c.validate();
            generate(c);
        } catch (const ConfigError &e) {
            throw InputError(c.name + ": " + e.what());
        }

    std::vector<ScenarioRow> rows(configs.size());
    const std::size_t jobs = std::max<std::size_t>(1, a.jobs);
    for (std::size_t start = 0; start < configs.size(); start += jobs) {
        std::vector<std::future<ScenarioRow>> running;
        for (std::size_t i = start; i < std::min(configs.size(), start + jobs); ++i)
            running.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                         [&configs, i] { return run_scenario(configs[i]); }));
        for (std::size_t i = 0; i < running.size(); ++i)
            rows[start + i] = running[i].get();
    }

    json doc{{"scenarios", json::array()}, {"correlations", json::object()}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        assert_identities(rows[i].stats, rows[i].name);
        if (!rows[i].within_bounds)
            throw std::logic_error("size bound violated for scenario " + rows[i].name);
        json r = row_to_json(rows[i]);
        r["config"] = config_to_json(configs[i]);
        doc["scenarios"].push_back(std::move(r));
    }
    CorrelationReport corr = correlations(rows);
    for (const auto &[name, r] : corr.pairs)
        doc["correlations"][name] = std::isnan(r) ? json(nullptr) : json(r);
    run.write_json("bench.json", doc);

    out << (a.format == "records" ? format_rows_records(rows) : format_rows_text(rows));
    if (a.format != "records" && rows.size() > 1)
        out << format_correlations(corr);
    run.finish();
    return kOk;
}

struct BaselineArgs
{
    std::optional<std::string> spec, catalog, preset_name;
    std::optional<std::size_t> limit;
    std::optional<std::uint64_t> seed;
};

int cmd_compare_baselines(const BaselineArgs &a, const Common &common, std::ostream &out)
{
    Run run("compare-baselines", common.out_dir);
    AmbiguousQuerySpec spec;
    Catalog catalog;
    std::optional<std::size_t> limit = a.limit;
    if (a.preset_name) {
        ScenarioConfig cfg;
        try {
            cfg = preset(*a.preset_name);
        } catch (const ConfigError &e) {
            throw InputError(e.what());
        }
        if (a.seed) {
            cfg.seed = *a.seed;
            run.seed(*a.seed);
        }
        run.flag("preset", *a.preset_name);
        Workload wl = generate(cfg);
        spec = std::move(wl.spec);
        catalog = std::move(wl.catalog);
        run.catalog(catalog);
        if (!limit)
            limit = wl.num_plans;
    } else {
        if (!a.spec || !a.catalog)
            throw InputError("compare-baselines needs either --preset or both a spec and --catalog");
        catalog = load_catalog(run, *a.catalog);
        run.input(*a.spec);
        spec = parse_input(*a.spec, [](const std::string &text) { return load_spec(text); });
    }
    run.flag("limit", limit ? json(*limit) : json(nullptr));

    BaselineReport r = compare_baselines(spec, catalog, limit);
    json doc{{"naive", {{"total_operator_instances", r.naive.total_operator_instances},
                        {"total_nodes", r.naive.total_nodes},
                        {"feasible_plans", r.naive.feasible_plans},
                        {"naive_runtime_ms", r.naive.runtime_ms}}},
             {"memo_no_ann", {{"memo_merges", r.memo_no_ann.memo_merges},
                              {"incorrect_merges", r.memo_no_ann.incorrect_merges},
                              {"incorrect_pct", std::lround(r.memo_no_ann.incorrect_pct)}}},
             {"ppf", stats_to_json(r.ppf)}};
    run.write_json("baselines.json", doc);
    out << "Baseline A (naive): " << r.naive.total_operator_instances << " operator instances, "
        << r.naive.feasible_plans << " feasible plans\n";
    out << "Baseline B (memo without annotations): " << r.memo_no_ann.memo_merges << " merges, "
        << r.memo_no_ann.incorrect_merges << " incorrect (" << std::lround(r.memo_no_ann.incorrect_pct) << "%)\n";
    out << "Packed forest: " << r.ppf.unique_all << " unique nodes before pruning, " << r.ppf.unique_feasible
        << " after\n";
    run.finish();
    return kOk;
}

}

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Packed plan forests: build, label, explain and benchmark ambiguous query plans", "ppf"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    Common common;
    app.add_option("--out", common.out_dir, "Output directory (default: current directory)");

    BuildArgs build_args;
    auto *build_cmd = app.add_subcommand("build", "Pack every candidate of an ambiguous spec into a forest");
    build_cmd->add_option("spec", build_args.spec, "Spec (JSON) or single plan (text/JSON)")->required();
    build_cmd->add_option("-c,--catalog", build_args.catalog, "Catalog JSON")->required();
    build_cmd->add_flag("--repair-crs", build_args.repair, "Insert declared reprojections before spatial joins");
    build_cmd->add_option("--limit", build_args.limit, "Stop after this many candidates");
    build_cmd->add_flag("--no-prune", build_args.no_prune, "Keep infeasible candidates in the forest");
    build_cmd->add_flag("--stats", build_args.stats, "Print size statistics");
    build_cmd->add_option("--out", common.out_dir, "Output directory");

    std::string forest_path;
    auto *label_cmd = app.add_subcommand("label", "Propagate feasibility labels over a forest and report a verdict");
    label_cmd->add_option("forest", forest_path, "forest.json written by build")->required();
    label_cmd->add_option("--out", common.out_dir, "Output directory");

    ExplainArgs explain_args;
    auto *explain_cmd = app.add_subcommand("explain", "Certify why a single plan is infeasible, or verify certificates");
    explain_cmd->add_option("plan", explain_args.plan, "Plan (text or JSON)")->required();
    explain_cmd->add_option("-c,--catalog", explain_args.catalog, "Catalog JSON")->required();
    explain_cmd->add_option("--certificates", explain_args.certificates, "Certificates to verify against the plan");
    explain_cmd->add_flag("--repair-crs", explain_args.repair, "Repair CRS mismatches before checking");
    explain_cmd->add_option("--out", common.out_dir, "Output directory");

    UnpackArgs unpack_args;
    auto *unpack_cmd = app.add_subcommand("unpack", "Enumerate the plans packed in a forest");
    unpack_cmd->add_option("forest", unpack_args.forest, "forest.json written by build")->required();
    unpack_cmd->add_option("--limit", unpack_args.limit, "Stop after this many plans");
    unpack_cmd->add_flag("--feasible-only", unpack_args.feasible_only, "Only plans whose labels survive");
    unpack_cmd->add_option("--out", common.out_dir, "Output directory");

    BenchArgs bench_args;
    auto *bench_cmd = app.add_subcommand("bench", "Run synthetic scenarios and report packing statistics");
    bench_cmd->add_option("presets", bench_args.presets, "Preset names (default: s1..s6)");
    bench_cmd->add_option("--config", bench_args.config, "Scenario config JSON (object or array)");
    bench_cmd->add_option("--seed", bench_args.seed, "Override every scenario's seed");
    bench_cmd->add_option("--jobs", bench_args.jobs, "Scenarios run in parallel")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--format", bench_args.format, "Table format")->check(CLI::IsMember({"text", "records"}));
    bench_cmd->add_option("--out", common.out_dir, "Output directory");

    BaselineArgs baseline_args;
    auto *baseline_cmd = app.add_subcommand("compare-baselines", "Compare naive enumeration and annotation-blind memoization");
    baseline_cmd->add_option("spec", baseline_args.spec, "Spec (JSON) or single plan");
    baseline_cmd->add_option("-c,--catalog", baseline_args.catalog, "Catalog JSON");
    baseline_cmd->add_option("--preset", baseline_args.preset_name, "Generate the workload from a preset instead");
    baseline_cmd->add_option("--seed", baseline_args.seed, "Seed for --preset");
    baseline_cmd->add_option("--limit", baseline_args.limit, "Stop after this many candidates");
    baseline_cmd->add_option("--out", common.out_dir, "Output directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion &) {
        out << kToolVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError &e) {
        if (const auto *sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front(); sub && e.get_exit_code() == 0)
            out << sub->help();
        err << "error: " << e.what() << "\n";
        return kInputError;
    }

    try {
        if (*build_cmd)
            return cmd_build(build_args, common, out);
        if (*label_cmd)
            return cmd_label(forest_path, common, out);
        if (*explain_cmd)
            return cmd_explain(explain_args, common, out);
        if (*unpack_cmd)
            return cmd_unpack(unpack_args, common, out);
        if (*bench_cmd)
            return cmd_bench(bench_args, common, out);
        if (*baseline_cmd)
            return cmd_compare_baselines(baseline_args, common, out);
    } catch (const InputError &e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const ParseError &e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const CatalogError &e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const SpecError &e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const json::exception &e) {
        err << "error: malformed document: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception &e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
    return kInputError;
}

}
