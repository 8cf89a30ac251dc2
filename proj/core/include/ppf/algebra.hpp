#pragma once

#include <cstdint>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ppf {

/*======================================================================================================================
 * Data kinds and the operator vocabulary
 *====================================================================================================================*/

enum class DataKind : std::uint8_t { Relation, Nodes, Edges, Paths, Docs, Geometry, Temporal };

inline constexpr std::size_t kNumDataKinds = 7;

std::string_view to_string(DataKind kind);
std::optional<DataKind> parse_data_kind(std::string_view text);

/// Every operator row of the ILP operator table, plus the temporal cast and
/// temporal filter used by the fiscal/calendar example.
enum class Symbol : std::uint8_t {
    // relational
    Select, Project, Join, GroupBy,
    // graph
    Traverse, Match,
    // text / vector
    Keyword, FullText, VectorTopK, DocSimilarityJoin,
    // spatial
    SpatialSelect, SpatialJoin, Reproject, SpatialKnn,
    // semantic / LLM
    ExtractEntities, ExtractRelations, Classify, LlmEnrich,
    // cross-model casts
    RelToNodes, GraphToRel, RelToDocs, DocsToRel, RelToGeom, GeomToRel,
    // temporal extension
    RelToTemporal, TemporalSelect,
};

enum class OperatorFamily : std::uint8_t { Relational, Graph, TextVector, Spatial, Semantic, CrossModel, Temporal };

struct OperatorKind
{
    Symbol symbol;
    std::string_view name;          ///< token used in plan files, e.g. `knn`
    std::string_view display;       ///< mathematical rendering, e.g. `ν^k`
    OperatorFamily family;
    std::vector<DataKind> input_kinds;
    DataKind output_kind;
    std::vector<std::string_view> required_params;
    bool extension = false;         ///< not part of the core operator table

    std::size_t arity() const { return input_kinds.size(); }
};

const OperatorKind & operator_kind(Symbol symbol);
std::span<const OperatorKind> all_operator_kinds();
std::optional<Symbol> parse_symbol(std::string_view name);
inline std::string_view to_string(Symbol s) { return operator_kind(s).name; }

/*======================================================================================================================
 * Operator instances and plans
 *====================================================================================================================*/

enum class ParamTag : std::uint8_t { Predicate, AttrList, CrsCode, VectorRef, Integer, ThresholdBin, Text };

std::string_view to_string(ParamTag tag);
/// Parameter tags are a function of the parameter name.
ParamTag tag_for_param(std::string_view name);

struct Param
{
    ParamTag tag = ParamTag::Text;
    std::string value;              ///< opaque canonical string

    /// Values written `?name` denote a declared but unbound query input.
    bool unbound() const { return !value.empty() && value.front() == '?'; }

    bool operator==(const Param &) const = default;
};

struct OperatorInstance
{
    Symbol symbol;
    std::map<std::string, Param> params;

    const OperatorKind & kind() const { return operator_kind(symbol); }
    const Param * param(std::string_view name) const;
    /// Canonical `name=value` list, sorted by name.
    std::string canonical_params() const;

    bool operator==(const OperatorInstance &) const = default;
};

OperatorInstance make_op(Symbol symbol, std::initializer_list<std::pair<std::string, std::string>> params = {});

using NodeId = std::int64_t;
inline constexpr NodeId kNoNode = -1;

/// A reference to a named base collection declared in the catalog.
struct LeafRef
{
    std::string collection;
    std::optional<DataKind> kind;   ///< may be filled from the catalog

    bool operator==(const LeafRef &) const = default;
};

struct PlanNode
{
    NodeId id = kNoNode;
    std::variant<LeafRef, OperatorInstance> payload;
    std::vector<NodeId> children;   ///< index = input slot; kNoNode marks an open slot

    bool is_leaf() const { return std::holds_alternative<LeafRef>(payload); }
    const LeafRef & leaf() const { return std::get<LeafRef>(payload); }
    const OperatorInstance & op() const { return std::get<OperatorInstance>(payload); }
    std::optional<DataKind> output_kind() const;

    bool operator==(const PlanNode &) const = default;
};

/// An Intermediate Logical Plan: a DAG of typed operators over base collections.
struct Plan
{
    std::map<NodeId, PlanNode> nodes;
    std::vector<NodeId> roots;

    const PlanNode & at(NodeId id) const;
    PlanNode & at(NodeId id);
    bool contains(NodeId id) const { return nodes.contains(id); }
    NodeId max_id() const { return nodes.empty() ? kNoNode : nodes.rbegin()->first; }
    std::size_t num_operators() const;
    std::size_t num_leaves() const { return nodes.size() - num_operators(); }

    NodeId add_leaf(NodeId id, std::string collection, std::optional<DataKind> kind = std::nullopt);
    NodeId add_op(NodeId id, OperatorInstance op, std::vector<NodeId> children);

    /// Parent ids per node, in ascending order.
    std::map<NodeId, std::vector<NodeId>> parents() const;
    /// All nodes reachable from `from` through child edges, including `from`.
    std::vector<NodeId> descendants(NodeId from) const;

    bool operator==(const Plan &) const = default;
};

/*======================================================================================================================
 * Validation
 *====================================================================================================================*/

struct StructuralError
{
    enum class Kind { Cycle, MissingSlot, ArityMismatch, DanglingChild, UnknownRoot, NoRoots } kind;
    NodeId node = kNoNode;
    std::string detail;
};

struct KindViolation
{
    NodeId parent;
    NodeId child;
    std::size_t slot;
    DataKind expected;
    DataKind actual;
};

struct SignatureReport
{
    std::vector<StructuralError> structural;
    std::vector<KindViolation> violations;

    bool ok() const { return structural.empty() && violations.empty(); }
};

/// Checks the plan is well formed and that every edge carries the data kind the parent expects at that slot.
/// Structural problems are reported separately; kind checks only run on structurally sound plans. Leaves whose
/// kind is unknown are not checked.
SignatureReport validate_signature(const Plan &plan);

/// Structural checks only: slot bijection, dangling ids, roots, acyclicity.
std::vector<StructuralError> check_structure(const Plan &plan);

struct CycleError : std::runtime_error
{
    NodeId from, to;
    CycleError(NodeId from, NodeId to);
};

/// Children before parents; ties broken by ascending id. Throws CycleError naming one back edge.
std::vector<NodeId> topological_order(const Plan &plan);

/// Removes nodes not reachable from any root.
void prune_unreachable(Plan &plan);

/*======================================================================================================================
 * Serialization
 *====================================================================================================================*/

struct ParseError : std::runtime_error
{
    std::size_t line;
    std::string field;
    ParseError(std::size_t line, std::string field, const std::string &message);
};

/// Merkle-style hash of the sub-DAG rooted at each node (symbol, params, ordered child hashes).
std::map<NodeId, std::uint64_t> structural_hashes(const Plan &plan);

/// Renumbers nodes canonically: roots ordered by structural hash, then post-order DFS in slot order.
Plan canonicalize(const Plan &plan);

/// Canonical text: byte equality implies structural equality.
std::string serialize_plan(const Plan &plan);
/// Text of the plan with its own ids (no renumbering).
std::string write_plan(const Plan &plan);

struct PlanParseOptions
{
    bool allow_open_slots = false;  ///< `_` in child lists (skeletons)
    bool allow_site_leaf = false;   ///< `LEAF <id> @site` (fragments)
    bool require_roots = true;
};

Plan parse_plan(std::string_view text, const PlanParseOptions &opts = {});

/// Structured-object encoding with the same field names as the text format.
nlohmann::json plan_to_json(const Plan &plan);
Plan plan_from_json(const nlohmann::json &doc, const PlanParseOptions &opts = {});
/// Accepts either the line format or a JSON document (detected by a leading `{`).
Plan load_plan(std::string_view content, const PlanParseOptions &opts = {});

/// Merges structurally identical sub-DAGs (same payload, same children after merging) into one node each.
Plan hash_cons(const Plan &plan);

/// Structural equality modulo node ids.
bool structurally_equal(const Plan &a, const Plan &b);

}
