#include <ppf/catalog.hpp>

#include <ppf/hash.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ppf {

using nlohmann::json;

namespace {

constexpr std::pair<std::string_view, Granularity> kGranularities[] = {
    {"Day", Granularity::Day},
    {"Week", Granularity::Week},
    {"CalendarWeek", Granularity::CalendarWeek},
    {"FiscalQuarter", Granularity::FiscalQuarter},
    {"CalendarYear", Granularity::CalendarYear},
    {"FiscalYear", Granularity::FiscalYear},
};

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::pair<std::string, std::string> split_arrow(std::string_view text)
{
    auto pos = text.find("->");
    if (pos == std::string_view::npos)
        throw CatalogError("expected 'a -> b', got '" + std::string(text) + "'");
    auto a = trim(text.substr(0, pos));
    auto b = trim(text.substr(pos + 2));
    if (a.empty() || b.empty())
        throw CatalogError("expected 'a -> b', got '" + std::string(text) + "'");
    return {a, b};
}

std::string format_bound(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

const json & section(const json &doc, const char *name)
{
    static const json empty = json::object();
    return doc.contains(name) ? doc.at(name) : empty;
}

}

std::string_view to_string(Granularity g)
{
    for (auto [name, value] : kGranularities)
        if (value == g)
            return name;
    return "Day";
}

std::optional<Granularity> parse_granularity(std::string_view text)
{
    for (auto [name, value] : kGranularities)
        if (name == text)
            return value;
    return std::nullopt;
}

std::string normalize_mapping(std::string_view text)
{
    auto [a, b] = split_arrow(text);
    return a + " -> " + b;
}

std::string BinTable::label(std::size_t index) const { return "≤" + format_bound(bounds.at(index)); }

/*======================================================================================================================
 * Catalog
 *====================================================================================================================*/

void Catalog::finalize()
{
    // every label mentioned by edges or collections takes part in the taxonomy
    for (const auto &[name, e] : edges) {
        taxonomy[e.source];
        taxonomy[e.target];
    }
    for (auto &[name, c] : collections) {
        if (c.name.empty())
            c.name = name;
        if (c.label.empty())
            c.label = name;
        if (c.kind == DataKind::Nodes)
            taxonomy[c.label];
        if (c.engine && !engines.contains(*c.engine))
            throw CatalogError("collection '" + name + "' is hosted on undeclared engine '" + *c.engine + "'");
    }
    std::vector<std::string> parents_to_add;
    for (const auto &[label, parents] : taxonomy)
        for (const auto &p : parents)
            if (!taxonomy.contains(p))
                parents_to_add.push_back(p);
    for (const auto &p : parents_to_add)
        taxonomy[p];

    // Reflexive-transitive closure; a cycle would break antisymmetry of the subtype order.
    closure_.clear();
    std::map<std::string, int> state;
    auto visit = [&](auto &&self, const std::string &label) -> const std::set<std::string> & {
        if (state[label] == 2)
            return closure_[label];
        if (state[label] == 1)
            throw CatalogError("label taxonomy is cyclic at '" + label + "'");
        state[label] = 1;
        std::set<std::string> up{label};
        for (const auto &p : taxonomy.at(label)) {
            const auto &pu = self(self, p);
            up.insert(pu.begin(), pu.end());
        }
        state[label] = 2;
        return closure_[label] = std::move(up);
    };
    for (const auto &[label, _] : taxonomy)
        visit(visit, label);

    for (auto &[id, table] : bins) {
        if (table.bounds.empty())
            throw CatalogError("bin table '" + id + "' is empty");
        for (std::size_t i = 1; i < table.bounds.size(); ++i)
            if (!(table.bounds[i - 1] < table.bounds[i]))
                throw CatalogError("bin table '" + id + "' is not strictly increasing");
        for (double b : table.bounds)
            if (!std::isfinite(b))
                throw CatalogError("bin table '" + id + "' has a non-finite bound");
    }

    std::set<std::pair<std::string, std::string>> sym;
    for (const auto &[a, b] : tag_compat) {
        sym.emplace(a, b);
        sym.emplace(b, a);
    }
    tag_compat = std::move(sym);

    for (const auto &[sym_name, _] : templates)
        if (!parse_symbol(sym_name))
            throw CatalogError("template for unknown operator '" + sym_name + "'");
    for (const auto &[engine, desc] : engines)
        for (const auto &op : desc.ops)
            if (!parse_symbol(op))
                throw CatalogError("engine '" + engine + "' lists unknown operator '" + op + "'");
}

const CollectionDescriptor * Catalog::collection(std::string_view name) const
{
    auto it = collections.find(std::string(name));
    return it == collections.end() ? nullptr : &it->second;
}

const OperatorTemplate * Catalog::template_for(Symbol symbol) const
{
    auto it = templates.find(std::string(to_string(symbol)));
    return it == templates.end() ? nullptr : &it->second;
}

const std::set<std::string> & Catalog::supertypes(const std::string &label) const
{
    auto it = closure_.find(label);
    if (it != closure_.end())
        return it->second;
    // labels outside the taxonomy are only related to themselves
    thread_local std::map<std::string, std::set<std::string>> singletons;
    auto [pos, _] = singletons.try_emplace(label, std::set<std::string>{label});
    return pos->second;
}

bool Catalog::is_subtype(const std::string &sub, const std::string &super) const
{
    return supertypes(sub).contains(super);
}

bool Catalog::tags_compatible(const std::string &a, const std::string &b) const
{
    return a == b || tag_compat.contains({a, b});
}

bool Catalog::has_mapping(std::string_view from, std::string_view to) const
{
    return mappings.contains(std::string(from) + " -> " + std::string(to));
}

std::set<std::string> Catalog::engines_supporting(Symbol symbol, const std::optional<std::string> &index) const
{
    std::set<std::string> out;
    const std::string name(to_string(symbol));
    for (const auto &[engine, desc] : engines)
        if (desc.ops.contains(name) && (!index || desc.indexes.contains(*index)))
            out.insert(engine);
    return out;
}

std::set<std::string> Catalog::all_engines() const
{
    std::set<std::string> out;
    for (const auto &[engine, _] : engines)
        out.insert(engine);
    return out;
}

std::uint64_t Catalog::digest() const { return fnv1a(catalog_to_json(*this).dump()); }

/*======================================================================================================================
 * JSON
 *====================================================================================================================*/

Catalog catalog_from_json(const json &doc)
{
    if (!doc.is_object())
        throw CatalogError("catalog must be a JSON object");
    Catalog cat;
    try {
        const json &schema = section(doc, "schema");
        for (const auto &[name, c] : section(schema, "collections").items()) {
            CollectionDescriptor d;
            d.name = name;
            auto kind = parse_data_kind(c.value("kind", "Relation"));
            if (!kind)
                throw CatalogError("collection '" + name + "' has unknown kind");
            d.kind = *kind;
            d.label = c.value("label", name);
            d.key = c.value("key", "");
            if (c.contains("attributes"))
                d.attributes = c["attributes"].get<std::vector<std::string>>();
            if (c.contains("crs"))
                d.crs = c["crs"].get<std::string>();
            if (c.contains("granularity")) {
                d.granularity = parse_granularity(c["granularity"].get<std::string>());
                if (!d.granularity)
                    throw CatalogError("collection '" + name + "' has unknown granularity");
            }
            if (c.contains("engine"))
                d.engine = c["engine"].get<std::string>();
            cat.collections[name] = std::move(d);
        }
        for (const auto &m : section(schema, "mappings"))
            cat.mappings.insert(normalize_mapping(m.get<std::string>()));
        for (const auto &[id, v] : section(schema, "vectors").items())
            cat.vectors[id] = v.is_string() ? v.get<std::string>() : v.at("domain").get<std::string>();
        for (const auto &[label, parents] : section(schema, "taxonomy").items())
            cat.taxonomy[label] = parents.get<std::vector<std::string>>();
        for (const auto &[name, e] : section(schema, "edges").items())
            cat.edges[name] = EdgeDescriptor{e.at("source").get<std::string>(), e.at("target").get<std::string>()};
        for (const auto &pair : section(schema, "tag_compat"))
            cat.tag_compat.emplace(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
        for (const auto &t : section(schema, "transforms"))
            cat.transforms.insert(split_arrow(t.get<std::string>()));
        if (schema.contains("geocode_crs"))
            cat.geocode_crs = schema["geocode_crs"].get<std::string>();

        for (const auto &[engine, e] : section(doc, "engines").items()) {
            EngineDescriptor d;
            if (e.contains("ops"))
                d.ops = e["ops"].get<std::set<std::string>>();
            if (e.contains("indexes"))
                d.indexes = e["indexes"].get<std::set<std::string>>();
            cat.engines[engine] = std::move(d);
        }

        for (const auto &[op, t] : section(doc, "templates").items()) {
            OperatorTemplate d;
            if (t.contains("epsilon"))
                d.epsilon = t["epsilon"].get<double>();
            d.deterministic_only = t.value("deterministic_only", false);
            if (t.contains("requires_index"))
                d.requires_index = t["requires_index"].get<std::string>();
            if (t.contains("granularity")) {
                d.granularity = parse_granularity(t["granularity"].get<std::string>());
                if (!d.granularity)
                    throw CatalogError("template '" + op + "' has unknown granularity");
            }
            if (t.contains("required"))
                d.required = t["required"].get<std::vector<std::string>>();
            cat.templates[op] = std::move(d);
        }

        for (const auto &[id, b] : section(doc, "bins").items()) {
            BinTable table;
            if (b.is_array()) {
                table.bounds = b.get<std::vector<double>>();
            } else {
                table.bounds = b.at("bounds").get<std::vector<double>>();
                table.nonnegative = b.value("nonnegative", true);
            }
            cat.bins[id] = std::move(table);
        }
    } catch (const json::exception &e) {
        throw CatalogError(std::string("malformed catalog: ") + e.what());
    }
    cat.finalize();
    return cat;
}

json catalog_to_json(const Catalog &cat)
{
    json collections = json::object();
    for (const auto &[name, c] : cat.collections) {
        json d{{"kind", std::string(to_string(c.kind))}, {"label", c.label}};
        if (!c.key.empty())
            d["key"] = c.key;
        if (!c.attributes.empty())
            d["attributes"] = c.attributes;
        if (c.crs)
            d["crs"] = *c.crs;
        if (c.granularity)
            d["granularity"] = std::string(to_string(*c.granularity));
        if (c.engine)
            d["engine"] = *c.engine;
        collections[name] = std::move(d);
    }
    json edges = json::object();
    for (const auto &[name, e] : cat.edges)
        edges[name] = {{"source", e.source}, {"target", e.target}};
    json compat = json::array();
    for (const auto &[a, b] : cat.tag_compat)
        if (a < b)
            compat.push_back({a, b});
    json transforms = json::array();
    for (const auto &[a, b] : cat.transforms)
        transforms.push_back(a + " -> " + b);

    json schema{
        {"collections", std::move(collections)},
        {"mappings", cat.mappings},
        {"vectors", cat.vectors},
        {"taxonomy", cat.taxonomy},
        {"edges", std::move(edges)},
        {"tag_compat", std::move(compat)},
        {"transforms", std::move(transforms)},
        {"geocode_crs", cat.geocode_crs},
    };

    json engines = json::object();
    for (const auto &[name, e] : cat.engines)
        engines[name] = {{"ops", e.ops}, {"indexes", e.indexes}};

    json templates = json::object();
    for (const auto &[name, t] : cat.templates) {
        json d = json::object();
        if (t.epsilon)
            d["epsilon"] = *t.epsilon;
        if (t.deterministic_only)
            d["deterministic_only"] = true;
        if (t.requires_index)
            d["requires_index"] = *t.requires_index;
        if (t.granularity)
            d["granularity"] = std::string(to_string(*t.granularity));
        if (!t.required.empty())
            d["required"] = t.required;
        templates[name] = std::move(d);
    }

    json bins = json::object();
    for (const auto &[id, b] : cat.bins)
        bins[id] = {{"bounds", b.bounds}, {"nonnegative", b.nonnegative}};

    return json{{"schema", std::move(schema)}, {"engines", std::move(engines)}, {"templates", std::move(templates)},
                {"bins", std::move(bins)}};
}

Catalog load_catalog_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw CatalogError("cannot open catalog file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error &e) {
        throw CatalogError(path + ": " + e.what());
    }
    try {
        return catalog_from_json(doc);
    } catch (const CatalogError &e) {
        throw CatalogError(path + ": " + e.what());
    }
}

/*======================================================================================================================
 * Discretization
 *====================================================================================================================*/

std::size_t discretize_index(double value, const BinTable &table)
{
    if (table.bounds.empty())
        throw DomainError("empty bin table");
    if (std::isnan(value))
        throw DomainError("cannot discretize NaN");
    if (table.nonnegative && value < 0)
        throw DomainError("negative value " + format_bound(value) + " for a nonnegative bin table");
    auto it = std::lower_bound(table.bounds.begin(), table.bounds.end(), value);
    if (it == table.bounds.end())
        return table.bounds.size() - 1;
    return static_cast<std::size_t>(it - table.bounds.begin());
}

std::string discretize(double value, const Catalog &catalog, const std::string &table_id)
{
    auto it = catalog.bins.find(table_id);
    if (it == catalog.bins.end())
        throw DomainError("unknown bin table '" + table_id + "'");
    return it->second.label(discretize_index(value, it->second));
}

}
