#pragma once

#include <ppf/algebra.hpp>
#include <ppf/ambiguity.hpp>
#include <ppf/catalog.hpp>
#include <ppf/feasibility.hpp>

#include <cstdint>
#include <functional>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ppf {

/// One packed node: an operator (or base collection) with an annotation class. Identity excludes children; the
/// alternative child tuples are its OR derivations.
struct PPFNode
{
    NodeId id = kNoNode;
    std::variant<LeafRef, OperatorInstance> payload;
    std::string key;                                ///< symbol, canonical params, annotation class (no placement)
    std::uint64_t digest = 0;
    AnnotationVector annotation;                    ///< class representative; placement is the members' intersection
    std::vector<AnnotationVector> members;          ///< distinct annotation vectors merged into this class
    std::vector<std::vector<NodeId>> derivations;   ///< ordered child tuples, no duplicates

    bool is_leaf() const { return std::holds_alternative<LeafRef>(payload); }
    const OperatorInstance & op() const { return std::get<OperatorInstance>(payload); }
    std::size_t arity() const { return is_leaf() ? 0 : op().kind().arity(); }
};

/// Identity key of a payload under an annotation: equal keys may share a node when placements intersect.
std::string forest_key(const std::variant<LeafRef, OperatorInstance> &payload, const AnnotationVector &ann);

class PackedPlanForest
{
  public:
    std::vector<PPFNode> nodes;                     ///< node id == index
    std::vector<NodeId> roots;                      ///< ascending, unique
    std::vector<std::pair<std::size_t, Witness>> pruned_witnesses;

    /// Reuses the first node with an equal key whose class placement intersects `ann.placement` (narrowing the class
    /// placement to the intersection), otherwise creates one; then records `children` as a derivation if new.
    NodeId lookup_or_create(const std::variant<LeafRef, OperatorInstance> &payload, const AnnotationVector &ann,
                            const std::vector<NodeId> &children);

    void add_root(NodeId id);
    const PPFNode & at(NodeId id) const { return nodes.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return nodes.size(); }
    /// Distinct (parent, child) pairs over all derivations.
    std::size_t num_edges() const;
    std::size_t max_arity() const;
    /// Children before parents; ties by ascending id.
    std::vector<NodeId> topological_order() const;
    /// Keeps only nodes reachable from roots, renumbering in ascending old-id order.
    void compact();

    bool operator==(const PackedPlanForest &other) const;

  private:
    std::unordered_map<std::string, std::vector<NodeId>> index_;

    friend PackedPlanForest forest_from_json(const nlohmann::json &doc);
    void reindex();
};

struct SizeStats
{
    std::size_t num_plans = 0;            ///< m
    double nodes_per_plan = 0;            ///< N̄, leaves included
    std::size_t total_nodes = 0;          ///< Σ plan sizes = m·N̄
    std::size_t unique_all = 0;           ///< UniqA: shadow pass without pruning
    std::size_t unique_feasible = 0;      ///< UniqF: nodes of feasible plans
    double packed_ratio_pre = 0;          ///< PkA
    double packed_ratio_post = 0;         ///< PkF
    std::size_t pruned_unique = 0;        ///< PrU
    double build_ms = 0;
    long peak_mem_kb = 0;                 ///< process resident high-water mark (getrusage)
    // size-bound parameters
    std::size_t n = 0;                    ///< largest candidate plan
    std::size_t k = 0;                    ///< alternatives per site (given, else m)
    std::size_t d = 0;                    ///< largest arity
    std::size_t num_annotations = 0;      ///< |𝒜|: distinct annotation vectors seen
    std::size_t num_edges = 0;
    std::size_t surviving_plans = 0;

    /// Recomputes PkA, PkF and PrU from the counts.
    void finalize();
    bool within_size_bounds(std::size_t forest_nodes) const;
};

nlohmann::json stats_to_json(const SizeStats &s);
SizeStats stats_from_json(const nlohmann::json &doc);

struct BuildOptions
{
    bool prune = true;                            ///< false: keep every candidate (the shadow forest is the result)
    bool minimize = true;                         ///< package witnesses as minimal certificates
    std::optional<std::size_t> limit;             ///< stop after this many candidates
    std::optional<std::size_t> alternatives;      ///< k for the size bound; defaults to m
};

struct BuildResult
{
    PackedPlanForest forest;
    std::vector<Certificate> certificates;        ///< deduplicated
    SizeStats stats;
};

using CandidateSource = std::function<std::optional<Candidate>()>;

/// Packs candidates into a forest, pruning each candidate root-ward of its first failure on every branch.
BuildResult build(const CandidateSource &next, const Catalog &catalog, const BuildOptions &opts = {});
BuildResult build(const AmbiguousQuerySpec &spec, const Catalog &catalog, const BuildOptions &opts = {});
BuildResult build(const std::vector<Plan> &plans, const Catalog &catalog, const BuildOptions &opts = {});

/// Restricts enumeration to some derivations; returns the allowed derivation indexes of a node (empty = dead). A leaf
/// has the single implicit derivation 0.
using DerivationFilter = std::function<std::vector<std::size_t>(NodeId)>;

struct UnpackResult
{
    std::vector<Plan> plans;
    bool truncated = false;
};

/// Every plan obtained by fixing one derivation per reachable node, per root, in lexicographic derivation order.
/// Plans use forest ids as node ids.
UnpackResult unpack(const PackedPlanForest &forest, std::optional<std::size_t> limit = std::nullopt,
                    const DerivationFilter &filter = {});

/// `{nodes: [{id, key, digest, payload, annotation_class, members, derivations}], roots, pruned_witnesses}`, nodes in
/// (digest, id) order.
nlohmann::json forest_to_json(const PackedPlanForest &forest);
PackedPlanForest forest_from_json(const nlohmann::json &doc);

/// Self-contained build output: forest plus the catalog it was annotated against, stats and certificates.
struct ForestDocument
{
    PackedPlanForest forest;
    Catalog catalog;
    SizeStats stats;
    std::vector<Certificate> certificates;
};

nlohmann::json forest_document_to_json(const ForestDocument &doc);
ForestDocument forest_document_from_json(const nlohmann::json &doc);

}
