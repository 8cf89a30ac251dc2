#pragma once

#include <ppf/algebra.hpp>

#include <cstdint>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ppf {

struct Witness;

/*======================================================================================================================
 * Catalog
 *====================================================================================================================*/

enum class Granularity : std::uint8_t { Day, Week, CalendarWeek, FiscalQuarter, CalendarYear, FiscalYear };

std::string_view to_string(Granularity g);
std::optional<Granularity> parse_granularity(std::string_view text);

struct CollectionDescriptor
{
    std::string name;
    DataKind kind = DataKind::Relation;
    std::string label;                      ///< node label, doc domain, geometry type; defaults to the name
    std::string key;                        ///< identifier attribute (e.g. `docid`)
    std::vector<std::string> attributes;
    std::optional<std::string> crs;         ///< geometry CRS, or CRS produced when geocoding this relation
    std::optional<Granularity> granularity; ///< granularity of temporal attributes
    std::optional<std::string> engine;      ///< hosting engine
};

struct EdgeDescriptor
{
    std::string source;
    std::string target;
};

struct EngineDescriptor
{
    std::set<std::string> ops;              ///< supported operator names
    std::set<std::string> indexes;          ///< index capabilities, e.g. `embedding`
};

struct OperatorTemplate
{
    std::optional<double> epsilon;          ///< approximate operators carry an error bound
    bool deterministic_only = false;        ///< rejects ε-bounded inputs
    std::optional<std::string> requires_index;
    std::optional<Granularity> granularity; ///< default granularity for temporal filters
    std::vector<std::string> required;      ///< parameters that must be bound
};

struct BinTable
{
    std::vector<double> bounds;             ///< strictly increasing closed upper bounds
    bool nonnegative = true;

    std::string label(std::size_t index) const;
};

struct CatalogError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// The three annotation sources (schema metadata, system catalog, operator templates) plus discretization tables.
/// Immutable after load.
class Catalog
{
  public:
    std::map<std::string, CollectionDescriptor> collections;
    std::set<std::string> mappings;                          ///< normalized `a -> b`
    std::map<std::string, std::string> vectors;              ///< query vector id -> embedding domain
    std::map<std::string, std::vector<std::string>> taxonomy; ///< label -> direct parents
    std::map<std::string, EdgeDescriptor> edges;
    std::set<std::pair<std::string, std::string>> tag_compat; ///< symmetric, stored both ways
    std::set<std::pair<std::string, std::string>> transforms; ///< CRS pairs with a declared reprojection
    std::string geocode_crs = "EPSG:4326";
    std::map<std::string, EngineDescriptor> engines;
    std::map<std::string, OperatorTemplate> templates;        ///< by operator name
    std::map<std::string, BinTable> bins;

    /// Validates invariants and computes derived tables. Throws CatalogError.
    void finalize();

    const CollectionDescriptor * collection(std::string_view name) const;
    const OperatorTemplate * template_for(Symbol symbol) const;
    /// Reflexive-transitive supertypes of `label` in the taxonomy.
    const std::set<std::string> & supertypes(const std::string &label) const;
    bool is_subtype(const std::string &sub, const std::string &super) const;
    bool tags_compatible(const std::string &a, const std::string &b) const;
    bool has_mapping(std::string_view from, std::string_view to) const;
    std::set<std::string> engines_supporting(Symbol symbol, const std::optional<std::string> &index) const;
    std::set<std::string> all_engines() const;

    std::uint64_t digest() const;

  private:
    std::map<std::string, std::set<std::string>> closure_;
};

Catalog catalog_from_json(const nlohmann::json &doc);
nlohmann::json catalog_to_json(const Catalog &catalog);
Catalog load_catalog_file(const std::string &path);

std::string normalize_mapping(std::string_view text);

struct DomainError : std::domain_error
{
    using std::domain_error::domain_error;
};

/// Label of the smallest bin whose closed upper bound is >= value; saturates at the last bin.
std::string discretize(double value, const Catalog &catalog, const std::string &table_id);
std::size_t discretize_index(double value, const BinTable &table);

/*======================================================================================================================
 * Annotation vectors
 *====================================================================================================================*/

enum class Binding : std::uint8_t { Bound, Unbound };

/// What an operator requires of the input arriving at one slot. Empty optionals impose nothing.
struct SlotExpectation
{
    enum class Align : std::uint8_t { Label, Embedding };

    std::optional<std::set<std::string>> accepted;  ///< label or embedding domains the input must fall into
    Align align = Align::Label;
    std::string align_source;                       ///< edge type or query vector the expectation stems from
    std::optional<std::string> crs;
    std::optional<Granularity> granularity;
    bool deterministic_only = false;

    bool operator==(const SlotExpectation &) const = default;
};

struct MappingStatus
{
    std::string name;                               ///< `docid -> sid`
    bool present = false;

    bool operator==(const MappingStatus &) const = default;
};

/// ε-bounded uncertainty is an ordinal bin into the catalog's `epsilon` table; -1 means deterministic.
struct Uncertainty
{
    int eps_bin = -1;
    std::string eps_label;

    bool deterministic() const { return eps_bin < 0; }
    bool operator==(const Uncertainty &) const = default;
};

/// Six-facet metadata profile of one operator. An unset optional means the facet is unknown (its provenance lies
/// outside the annotated sub-DAG) or does not apply to this data kind.
struct AnnotationVector
{
    // type profile
    std::optional<DataKind> output_kind;
    std::optional<std::string> label;
    std::set<std::string> supertypes;
    std::optional<std::string> key;
    std::optional<MappingStatus> mapping;
    std::optional<std::string> undeclared_collection;
    std::vector<SlotExpectation> inputs;
    std::map<std::string, std::string> bins;
    // binding status
    std::map<std::string, Binding> binding;
    // reference system
    std::optional<std::string> crs;
    std::optional<Granularity> granularity;
    std::optional<std::string> units;
    // placement
    std::set<std::string> placement;
    // uncertainty
    std::optional<Uncertainty> uncertainty;
    // semantic tags
    std::optional<std::set<std::string>> tags;

    bool operator==(const AnnotationVector &) const = default;

    /// Canonical text of every facet except placement.
    std::string canonical_without_placement() const;
    std::string canonical() const;
};

nlohmann::json annotation_to_json(const AnnotationVector &ann);
AnnotationVector annotation_from_json(const nlohmann::json &doc);

/// Annotation derivation never fails: unknown child facets propagate as unknown, and an operator no engine can host
/// gets an empty placement. Pure function of its arguments.
AnnotationVector derive_annotation(const OperatorInstance &op, std::span<const AnnotationVector *const> children,
                                   const Catalog &catalog);
AnnotationVector derive_leaf_annotation(const LeafRef &leaf, const Catalog &catalog);
/// Annotation of a child whose sub-DAG is not available: every facet unknown.
AnnotationVector opaque_annotation();

/// Like derive_annotation, but returns a PLACE witness when no engine supports the operator.
std::variant<AnnotationVector, Witness> annotate(const OperatorInstance &op,
                                                 std::span<const AnnotationVector *const> children,
                                                 const Catalog &catalog, NodeId at = kNoNode);

/// Derives annotations for every node of a plan (children first). Open or dangling slots read as opaque. With `only`,
/// nodes outside the set are skipped and read as opaque by their parents.
std::map<NodeId, AnnotationVector> annotate_plan(const Plan &plan, const Catalog &catalog,
                                                 const std::set<NodeId> *only = nullptr);

/// Fills leaf kinds from the catalog where the plan leaves them open.
void bind_leaf_kinds(Plan &plan, const Catalog &catalog);

}
