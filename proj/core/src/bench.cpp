#include <ppf/bench.hpp>
#include <ppf/labeling.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace ppf {

using nlohmann::json;

/*======================================================================================================================
 * Configuration
 *====================================================================================================================*/

void ScenarioConfig::validate() const
{
    auto unit = [](double v, const char *name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError(std::string(name) + " must lie in [0, 1]");
    };
    unit(structural_overlap, "structural_overlap");
    unit(feasibility_ratio, "feasibility_ratio");
    unit(engine_diversity, "engine_diversity");
    if (shape.empty() && num_plans < 1)
        throw ConfigError("num_plans must be >= 1");
    if (nodes_per_plan < 1)
        throw ConfigError("nodes_per_plan must be >= 1");
    if (engines < 1)
        throw ConfigError("engines must be >= 1");
    if (domains < 1)
        throw ConfigError("domains must be >= 1");
    if (max_alternatives < 2)
        throw ConfigError("max_alternatives must be >= 2");
    for (std::size_t k : shape)
        if (k < 1)
            throw ConfigError("every choice point needs at least one alternative");
    double total = 0;
    for (double w : family_weights) {
        if (w < 0)
            throw ConfigError("family weights must be non-negative");
        total += w;
    }
    if (total <= 0)
        throw ConfigError("at least one family weight must be positive");
    if (family_weights[6] > 0)
        throw ConfigError("TEMPORAL faults cannot be injected inside a relation-valued fragment (no cast leaves the "
                          "temporal kind); set its weight to 0");
}

std::vector<std::size_t> ScenarioConfig::choice_shape() const
{
    if (!shape.empty())
        return shape;
    if (num_plans == 1)
        return {};
    // factor m into choice points of at most max_alternatives, first-fit decreasing
    std::vector<std::size_t> primes;
    std::size_t rest = num_plans;
    for (std::size_t p = 2; p * p <= rest; ++p)
        while (rest % p == 0) {
            primes.push_back(p);
            rest /= p;
        }
    if (rest > 1)
        primes.push_back(rest);
    std::sort(primes.rbegin(), primes.rend());
    if (primes.front() <= max_alternatives) {
        std::vector<std::size_t> bins;
        for (std::size_t p : primes) {
            std::size_t best = bins.size();
            for (std::size_t i = 0; i < bins.size(); ++i)
                if (bins[i] * p <= max_alternatives && (best == bins.size() || bins[i] > bins[best]))
                    best = i;
            if (best == bins.size())
                bins.push_back(p);
            else
                bins[best] *= p;
        }
        std::sort(bins.rbegin(), bins.rend());
        return bins;
    }
    // a prime factor exceeds the cap: equal-sized choice points whose product covers m; expansion stops at m
    std::size_t c = 1;
    while (std::pow(static_cast<double>(max_alternatives), static_cast<double>(c)) < static_cast<double>(num_plans))
        ++c;
    auto k = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(num_plans), 1.0 / static_cast<double>(c)) - 1e-9));
    while (std::pow(static_cast<double>(k), static_cast<double>(c)) < static_cast<double>(num_plans))
        ++k;
    return std::vector<std::size_t>(c, k);
}

ScenarioConfig preset(const std::string &name)
{
    ScenarioConfig c;
    c.name = name;
    c.num_plans = 100;
    c.nodes_per_plan = 25;
    c.max_alternatives = 100;
    if (name == "s1") {
        c.structural_overlap = 0.12, c.feasibility_ratio = 0.75, c.engine_diversity = 0.5, c.seed = 1;
    } else if (name == "s2") {
        c.structural_overlap = 0.08, c.feasibility_ratio = 0.75, c.engine_diversity = 0.7, c.seed = 2;
    } else if (name == "s3") {
        c.structural_overlap = 0.16, c.feasibility_ratio = 0.75, c.engine_diversity = 0.3, c.seed = 3;
    } else if (name == "s4") {
        c.structural_overlap = 0.08, c.feasibility_ratio = 0.30, c.engine_diversity = 0.5, c.seed = 4;
    } else if (name == "s5") {
        c.structural_overlap = 0.08, c.feasibility_ratio = 0.75, c.engine_diversity = 0.9, c.seed = 5;
    } else if (name == "s6") {
        c.num_plans = 1000, c.nodes_per_plan = 50, c.max_alternatives = 1000;
        c.structural_overlap = 0.60, c.feasibility_ratio = 0.65, c.engine_diversity = 0.5, c.seed = 6;
    } else if (name == "mixed") {
        c.num_plans = 20, c.max_alternatives = 20;
        c.structural_overlap = 0.4, c.feasibility_ratio = 0.8, c.engine_diversity = 0.6, c.seed = 7;
        c.domains = 2, c.unique_tags = false;
    } else if (name == "single") {
        c.num_plans = 20, c.max_alternatives = 20;
        c.structural_overlap = 0.4, c.feasibility_ratio = 1.0, c.engine_diversity = 0.0, c.seed = 8;
        c.engines = 1, c.domains = 1, c.unique_tags = false;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return c;
}

std::vector<std::string> preset_names() { return {"s1", "s2", "s3", "s4", "s5", "s6", "mixed", "single"}; }

ScenarioConfig config_from_json(const json &j)
{
    ScenarioConfig c = j.contains("preset") ? preset(j["preset"].get<std::string>()) : ScenarioConfig{};
    c.name = j.value("name", c.name);
    c.structural_overlap = j.value("structural_overlap", c.structural_overlap);
    c.feasibility_ratio = j.value("feasibility_ratio", c.feasibility_ratio);
    c.engine_diversity = j.value("engine_diversity", c.engine_diversity);
    c.num_plans = j.value("num_plans", c.num_plans);
    c.nodes_per_plan = j.value("nodes_per_plan", c.nodes_per_plan);
    c.seed = j.value("seed", c.seed);
    c.engines = j.value("engines", c.engines);
    c.max_alternatives = j.value("max_alternatives", c.max_alternatives);
    c.shape = j.value("shape", c.shape);
    c.domains = j.value("domains", c.domains);
    c.unique_tags = j.value("unique_tags", c.unique_tags);
    if (j.contains("family_weights")) {
        auto w = j["family_weights"].get<std::vector<double>>();
        if (w.size() != 7)
            throw ConfigError("family_weights needs 7 entries (TYPE..TEMPORAL)");
        std::copy(w.begin(), w.end(), c.family_weights.begin());
    }
    c.validate();
    return c;
}

json config_to_json(const ScenarioConfig &c)
{
    return {{"name", c.name},
            {"structural_overlap", c.structural_overlap},
            {"feasibility_ratio", c.feasibility_ratio},
            {"engine_diversity", c.engine_diversity},
            {"num_plans", c.num_plans},
            {"nodes_per_plan", c.nodes_per_plan},
            {"seed", c.seed},
            {"engines", c.engines},
            {"max_alternatives", c.max_alternatives},
            {"shape", c.shape},
            {"domains", c.domains},
            {"unique_tags", c.unique_tags},
            {"family_weights", c.family_weights}};
}

/*======================================================================================================================
 * Generator
 *====================================================================================================================*/

namespace {

/// Portable bounded draw (the standard distributions are implementation-defined).
std::size_t below(std::mt19937_64 &rng, std::size_t n) { return n <= 1 ? 0 : static_cast<std::size_t>(rng() % n); }

double unit_draw(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class T>
void shuffle(std::vector<T> &v, std::mt19937_64 &rng)
{
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[below(rng, i)]);
}

constexpr std::size_t kMinFragment = 5;

/// Builds plan text line by line with fresh ids.
class PlanWriter
{
  public:
    NodeId leaf(const std::string &collection)
    {
        NodeId id = next_++;
        out_ << "LEAF " << id << ' ' << collection << '\n';
        ++size_;
        return id;
    }

    NodeId op(const std::string &symbol, const std::vector<std::pair<std::string, std::string>> &params,
              const std::vector<NodeId> &children)
    {
        NodeId id = next_++;
        out_ << id << ' ' << symbol;
        for (const auto &[k, v] : params)
            out_ << ' ' << k << '=' << v;
        out_ << " <-";
        for (NodeId c : children) {
            out_ << ' ';
            if (c == kNoNode)
                out_ << '_';
            else
                out_ << c;
        }
        out_ << '\n';
        ++size_;
        return id;
    }

    void root(NodeId id) { out_ << "ROOT " << id << '\n'; }
    std::string text() const { return out_.str(); }
    std::size_t size() const { return size_; }

  private:
    std::ostringstream out_;
    NodeId next_ = 0;
    std::size_t size_ = 0;
};

struct FragmentSpec
{
    std::string uid;            ///< unique per alternative
    std::size_t domain = 0;
    ConstraintFamily family = ConstraintFamily::TYPE;
    bool faulty = false;
    std::size_t target_size = kMinFragment;
    bool unique_tags = true;
};

/// Relation-valued fragment: [pad selects] → classify → llm_enrich → knn → X(family), X injecting the fault.
std::string write_fragment(const FragmentSpec &f, Catalog &catalog)
{
    PlanWriter w;
    const std::string u = f.uid;
    const std::string d = std::to_string(f.domain);
    const std::string docs = "Docs" + d;
    const std::string qv = "qv" + d;
    auto as = [&](const std::string &suffix) { return std::pair<std::string, std::string>{"as", u + suffix}; };

    NodeId x = kNoNode;
    switch (f.family) {
        case ConstraintFamily::TYPE: {
            NodeId leaf = w.leaf(docs);
            NodeId kw = w.op("keyword", {{"terms", "w" + u}}, {leaf});
            NodeId dr = w.op("xi_d_r", {{"target", "s" + u}}, {kw});
            x = w.op("xi_r_d", {{"domain", "corpus" + d}, {"key", "docid"}, as("rd")}, {dr});
            if (!f.faulty)
                catalog.mappings.insert(normalize_mapping("docid -> s" + u));
            break;
        }
        case ConstraintFamily::BOUND: {
            NodeId leaf = w.leaf(docs);
            x = w.op("knn", {{"q", f.faulty ? "?q" + u : qv}, {"k", "3"}, as("in")}, {leaf});
            break;
        }
        case ConstraintFamily::ALIGN: {
            NodeId leaf = w.leaf(f.faulty ? "DocsForeign" : docs);
            x = w.op("knn", {{"q", qv}, {"k", "3"}, as("in")}, {leaf});
            break;
        }
        case ConstraintFamily::CRS: {
            NodeId places = w.leaf("Places");
            NodeId geo = w.op("xi_r_g", {as("rg")}, {places});
            NodeId regions = w.leaf(f.faulty ? "Regions3857" : "Regions4326");
            NodeId sj = w.op("sjoin", {{"pred", "p" + u}}, {geo, regions});
            NodeId gr = w.op("xi_g_r", {as("gr")}, {sj});
            x = w.op("xi_r_d", {{"domain", "corpus" + d}, {"key", "docid"}, as("rd")}, {gr});
            break;
        }
        case ConstraintFamily::PLACE: {
            NodeId leaf = w.leaf(docs);
            std::vector<std::pair<std::string, std::string>> params{{"q", qv}, {"k", "3"}, as("in")};
            if (f.faulty)
                params.emplace_back("index", "geohash");
            x = w.op("knn", params, {leaf});
            break;
        }
        case ConstraintFamily::UNCERT: {
            NodeId leaf = w.leaf(docs);
            NodeId mid = f.faulty ? w.op("knn", {{"q", qv}, {"k", "3"}, as("in")}, {leaf})
                                  : w.op("fulltext", {{"expr", "e" + u}}, {leaf});
            x = w.op("keyword", {{"terms", "w" + u}}, {mid});
            break;
        }
        default:
            throw ConfigError("unsupported fault family");
    }

    // shared head: semantic enrichment tagged per alternative (or per domain)
    const std::string tag = f.unique_tags ? "t" + u : "dom" + d;
    std::vector<std::pair<std::string, std::string>> knn_params{{"q", qv}, {"k", "10"}};
    std::vector<std::pair<std::string, std::string>> llm_params{{"task", tag}};
    std::vector<std::pair<std::string, std::string>> cls_params{{"label", tag}};
    if (f.unique_tags) {
        knn_params.push_back(as("top"));
        cls_params.push_back(as("cls"));
    }
    NodeId top = w.op("knn", knn_params, {x});
    NodeId llm = w.op("llm_enrich", llm_params, {top});
    NodeId head = w.op("classify", cls_params, {llm});
    for (std::size_t j = 0; w.size() < f.target_size; ++j)
        head = w.op("select", {{"theta", "f" + u + "_" + std::to_string(j)}}, {head});
    w.root(head);
    return w.text();
}

Catalog base_catalog(const ScenarioConfig &cfg, std::mt19937_64 &rng)
{
    Catalog cat;
    auto add = [&](std::string name, DataKind kind, std::string label, std::string key,
                   std::optional<std::string> crs = std::nullopt) {
        CollectionDescriptor c;
        c.name = name;
        c.kind = kind;
        c.label = std::move(label);
        c.key = std::move(key);
        c.crs = std::move(crs);
        cat.collections[name] = std::move(c);
    };
    for (std::size_t d = 0; d < cfg.domains; ++d) {
        add("Docs" + std::to_string(d), DataKind::Docs, "corpus" + std::to_string(d), "docid");
        cat.vectors["qv" + std::to_string(d)] = "corpus" + std::to_string(d);
    }
    add("DocsForeign", DataKind::Docs, "foreign", "docid");
    add("Orders", DataKind::Relation, "Orders", "oid");
    add("Customers", DataKind::Relation, "Customers", "cid");
    add("Suppliers", DataKind::Relation, "Suppliers", "sid");
    add("Places", DataKind::Relation, "Places", "pid", "EPSG:4326");
    add("Regions4326", DataKind::Geometry, "Polygon", "rid", "EPSG:4326");
    add("Regions3857", DataKind::Geometry, "Polygon", "rid", "EPSG:3857");

    // engine diversity: each engine supports each symbol with probability ρ_e, at least one engine per symbol
    std::vector<std::string> engines;
    for (std::size_t e = 0; e < cfg.engines; ++e) {
        engines.push_back("engine" + std::to_string(e));
        cat.engines[engines.back()];
    }
    for (const auto &kind : all_operator_kinds()) {
        bool any = false;
        for (const auto &e : engines)
            if (unit_draw(rng) < cfg.engine_diversity) {
                cat.engines[e].ops.insert(std::string(kind.name));
                any = true;
            }
        if (!any)
            cat.engines[engines[below(rng, engines.size())]].ops.insert(std::string(kind.name));
    }
    for (auto &[_, e] : cat.engines)
        if (e.ops.contains("knn"))
            e.indexes.insert("embedding");

    OperatorTemplate knn;
    knn.epsilon = 0.05;
    knn.requires_index = "embedding";
    knn.required = {"q"};
    cat.templates["knn"] = knn;
    OperatorTemplate keyword;
    keyword.deterministic_only = true;
    cat.templates["keyword"] = keyword;
    cat.bins["epsilon"] = BinTable{{0.01, 0.05, 0.1, 0.5}, true};
    return cat;
}

}

Workload generate(const ScenarioConfig &cfg)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    Workload wl;
    wl.catalog = base_catalog(cfg, rng);

    const auto shape = cfg.choice_shape();
    const std::size_t c = std::max<std::size_t>(shape.size(), 1);
    std::size_t total = 1;
    for (std::size_t k : shape)
        total = std::min<std::size_t>(total * k, std::numeric_limits<std::size_t>::max() / 1024);
    wl.num_plans = shape.empty() ? 1 : (cfg.shape.empty() ? cfg.num_plans : total);

    // skeleton: root project, (c−1) joins combining the sites, then shared side subtrees attached by joins
    auto skeleton_size = static_cast<std::size_t>(std::llround(cfg.structural_overlap * static_cast<double>(cfg.nodes_per_plan)));
    skeleton_size = std::max(skeleton_size, c);
    if (cfg.nodes_per_plan < skeleton_size + c * kMinFragment)
        throw ConfigError("nodes_per_plan " + std::to_string(cfg.nodes_per_plan) + " leaves no room for " +
                          std::to_string(c) + " fragments beside a skeleton of " + std::to_string(skeleton_size) +
                          " nodes");

    PlanWriter sk;
    std::vector<SiteRef> sites;
    NodeId spine;
    std::size_t j = 0;
    if (shape.empty()) {
        NodeId leaf = sk.leaf("Orders");
        spine = sk.op("select", {{"theta", "sk" + std::to_string(j++)}}, {leaf});
    } else if (c == 1) {
        spine = sk.op("select", {{"theta", "sk" + std::to_string(j++)}}, {kNoNode});
        sites.push_back({spine, 0});
    } else {
        spine = sk.op("join", {{"theta", "sk" + std::to_string(j++)}}, {kNoNode, kNoNode});
        sites.push_back({spine, 0});
        sites.push_back({spine, 1});
        for (std::size_t i = 2; i < c; ++i) {
            spine = sk.op("join", {{"theta", "sk" + std::to_string(j++)}}, {spine, kNoNode});
            sites.push_back({spine, 1});
        }
    }
    const char *side_leaves[] = {"Orders", "Customers", "Suppliers"};
    std::size_t remaining = skeleton_size > sk.size() + 1 ? skeleton_size - sk.size() - 1 : 0;
    std::size_t side = 0;
    while (remaining >= 2) {
        std::size_t t = std::min<std::size_t>(5, remaining - 1);
        NodeId top = sk.leaf(side_leaves[side % 3]);
        for (std::size_t i = 1; i < t; ++i)
            top = sk.op("select", {{"theta", "side" + std::to_string(side) + "_" + std::to_string(i)}}, {top});
        spine = sk.op("join", {{"theta", "sk" + std::to_string(j++)}}, {spine, top});
        remaining -= t + 1;
        ++side;
    }
    if (remaining == 1)
        spine = sk.op("select", {{"theta", "sk" + std::to_string(j++)}}, {spine});
    NodeId root = sk.op("project", {{"attrs", "out"}}, {spine});
    sk.root(root);
    wl.spec.skeleton = parse_plan(sk.text(), {.allow_open_slots = true});

    // fragments fill the rest of each plan
    const std::size_t frag_nodes = cfg.nodes_per_plan > sk.size() ? cfg.nodes_per_plan - sk.size() : 0;
    std::vector<ConstraintFamily> families;
    std::vector<double> weights;
    for (auto f : kFamilyOrder) {
        families.push_back(f);
        weights.push_back(cfg.family_weights[static_cast<std::size_t>(f)]);
    }
    double weight_sum = 0;
    for (double w : weights)
        weight_sum += w;
    auto draw_family = [&] {
        double r = unit_draw(rng) * weight_sum;
        for (std::size_t i = 0; i < families.size(); ++i) {
            if (r < weights[i] && weights[i] > 0)
                return families[i];
            r -= weights[i];
        }
        for (std::size_t i = families.size(); i-- > 0;)
            if (weights[i] > 0)
                return families[i];
        return families.front();
    };

    std::size_t uid = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const std::size_t k = shape[i];
        ChoicePoint cp;
        cp.predicate = "p" + std::to_string(i);
        cp.dimension = static_cast<Dimension>(i % 3);
        cp.site = sites[i];
        const std::size_t target = frag_nodes / c + (i < frag_nodes % c ? 1 : 0);
        const auto faulty_count = static_cast<std::size_t>(std::llround((1.0 - cfg.feasibility_ratio) * static_cast<double>(k)));
        std::vector<bool> faulty(k, false);
        for (std::size_t a = 0; a < faulty_count && a < k; ++a)
            faulty[a] = true;
        shuffle(faulty, rng);
        std::vector<std::size_t> domain(k);
        for (std::size_t a = 0; a < k; ++a)
            domain[a] = a % cfg.domains;
        shuffle(domain, rng);

        for (std::size_t a = 0; a < k; ++a) {
            FragmentSpec fs;
            fs.uid = std::to_string(uid++);
            fs.domain = domain[a];
            fs.family = draw_family();
            fs.faulty = faulty[a];
            fs.target_size = target;
            fs.unique_tags = cfg.unique_tags;
            Alternative alt;
            alt.label = std::string(to_string(fs.family)) + (fs.faulty ? " (faulty)" : "") + " #" + fs.uid;
            alt.fragment = parse_plan(write_fragment(fs, wl.catalog));
            cp.alternatives.push_back(std::move(alt));
            if (fs.faulty) {
                ++wl.faulty_alternatives;
                ++wl.faults_per_family[static_cast<std::size_t>(fs.family)];
            }
        }
        wl.spec.choice_points.push_back(std::move(cp));
    }
    validate_spec(wl.spec);
    wl.catalog.finalize();
    return wl;
}

/*======================================================================================================================
 * Scenario runs and reports
 *====================================================================================================================*/

ScenarioRow run_scenario(const ScenarioConfig &config)
{
    Workload wl = generate(config);
    BuildOptions opts;
    opts.limit = wl.num_plans;
    std::size_t k = 1;
    for (const auto &cp : wl.spec.choice_points)
        k = std::max(k, cp.alternatives.size());
    opts.alternatives = k;

    const auto t0 = std::chrono::steady_clock::now();
    BuildResult built = build(wl.spec, wl.catalog, opts);
    const auto t1 = std::chrono::steady_clock::now();
    Labeling labels = label(built.forest, wl.catalog);
    const auto t2 = std::chrono::steady_clock::now();

    ScenarioRow row;
    row.name = config.name;
    row.stats = built.stats;
    row.label_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    row.runtime_ms = std::chrono::duration<double, std::milli>(t2 - t0).count();
    row.throughput = row.runtime_ms > 0 ? static_cast<double>(row.stats.total_nodes) / (row.runtime_ms / 1000.0) : 0;
    row.certificates = built.certificates.size();
    row.feasible = !built.forest.roots.empty();
    for (NodeId r : built.forest.roots)
        row.feasible = row.feasible && !labels.empty(r);
    row.within_bounds = row.stats.within_size_bounds(std::max(row.stats.unique_all, row.stats.unique_feasible));
    return row;
}

double pearson(const std::vector<double> &x, const std::vector<double> &y)
{
    if (x.size() != y.size() || x.size() < 2)
        return std::nan("");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0)
        return std::nan("");
    return sxy / std::sqrt(sxx * syy);
}

CorrelationReport correlations(const std::vector<ScenarioRow> &rows)
{
    std::vector<double> uniqf, pru, total, runtime, throughput;
    for (const auto &r : rows) {
        uniqf.push_back(static_cast<double>(r.stats.unique_feasible));
        pru.push_back(static_cast<double>(r.stats.pruned_unique));
        total.push_back(static_cast<double>(r.stats.total_nodes));
        runtime.push_back(r.runtime_ms);
        throughput.push_back(r.throughput);
    }
    return {{{"UniqF~runtime", pearson(uniqf, runtime)},
             {"PrU~runtime", pearson(pru, runtime)},
             {"total_nodes~runtime", pearson(total, runtime)},
             {"total_nodes~throughput", pearson(total, throughput)}}};
}

json row_to_json(const ScenarioRow &row)
{
    json j = stats_to_json(row.stats);
    j["scenario"] = row.name;
    j["label_ms"] = row.label_ms;
    j["runtime_ms"] = row.runtime_ms;
    j["throughput_nodes_per_s"] = row.throughput;
    j["certificates"] = row.certificates;
    j["within_size_bounds"] = row.within_bounds;
    return j;
}

std::string format_rows_text(const std::vector<ScenarioRow> &rows)
{
    std::ostringstream out;
    out << std::left << std::setw(9) << "Scenario" << std::right << std::setw(6) << "m" << std::setw(7) << "N"
        << std::setw(9) << "UniqA" << std::setw(9) << "UniqF" << std::setw(7) << "PkA" << std::setw(7) << "PkF"
        << std::setw(8) << "PrU" << std::setw(11) << "ms" << std::setw(10) << "MemK" << '\n';
    out << std::fixed;
    for (const auto &r : rows) {
        const auto &s = r.stats;
        out << std::left << std::setw(9) << r.name << std::right << std::setw(6) << s.num_plans << std::setw(7)
            << std::setprecision(1) << s.nodes_per_plan << std::setw(9) << s.unique_all << std::setw(9)
            << s.unique_feasible << std::setw(7) << std::setprecision(2) << s.packed_ratio_pre << std::setw(7)
            << s.packed_ratio_post << std::setw(8) << s.pruned_unique << std::setw(11) << std::setprecision(1)
            << r.runtime_ms << std::setw(10) << s.peak_mem_kb << '\n';
    }
    return out.str();
}

std::string format_rows_records(const std::vector<ScenarioRow> &rows)
{
    std::ostringstream out;
    out << "scenario,m,N_bar,UniqA,UniqF,PkA,PkF,PrU,runtime_ms,peak_mem_kb,total_nodes,throughput\n";
    out << std::fixed;
    for (const auto &r : rows) {
        const auto &s = r.stats;
        out << r.name << ',' << s.num_plans << ',' << std::setprecision(2) << s.nodes_per_plan << ',' << s.unique_all
            << ',' << s.unique_feasible << ',' << std::setprecision(4) << s.packed_ratio_pre << ','
            << s.packed_ratio_post << ',' << s.pruned_unique << ',' << std::setprecision(3) << r.runtime_ms << ','
            << s.peak_mem_kb << ',' << s.total_nodes << ',' << std::setprecision(1) << r.throughput << '\n';
    }
    return out.str();
}

std::string format_correlations(const CorrelationReport &report)
{
    std::ostringstream out;
    out << "Pearson correlations across scenarios (throughput = total nodes / runtime)\n";
    out << std::fixed << std::setprecision(3);
    for (const auto &[name, r] : report.pairs) {
        out << "  " << std::left << std::setw(24) << name << ' ';
        if (std::isnan(r))
            out << "n/a";
        else
            out << r;
        out << '\n';
    }
    return out.str();
}

}
