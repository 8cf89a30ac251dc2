#pragma once

#include <ppf/algebra.hpp>
#include <ppf/ambiguity.hpp>
#include <ppf/bench.hpp>
#include <ppf/catalog.hpp>
#include <ppf/feasibility.hpp>
#include <ppf/forest.hpp>
#include <ppf/labeling.hpp>

#include <nlohmann/json.hpp>

#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ppf::test {

/*======================================================================================================================
 * Fixtures
 *====================================================================================================================*/

std::string fixture_path(std::string_view relative);
std::string read_file(const std::string &path);
Catalog fixture_catalog(std::string_view relative);
Plan fixture_plan(std::string_view relative);
AmbiguousQuerySpec fixture_spec(std::string_view relative);

/// A small catalog covering every data kind, two embedding domains, a label taxonomy, two CRSs with a declared
/// transform, fiscal/calendar granularities and the discretization tables the unit tests use. Returned as JSON so a
/// test can tweak one entry before loading it.
nlohmann::json unit_catalog_json();
Catalog unit_catalog();

/// Build options that keep every candidate (no pruning).
inline BuildOptions keep_all()
{
    BuildOptions opts;
    opts.prune = false;
    return opts;
}

/// Build options that stop after `n` candidates.
inline BuildOptions first_n(std::size_t n)
{
    BuildOptions opts;
    opts.limit = n;
    return opts;
}

/*======================================================================================================================
 * Generators
 *====================================================================================================================*/

/// A random plan that passes validate_signature against unit_catalog(): leaves of every kind, operators whose input
/// kinds are available, children drawn from earlier nodes (so subplans are shared), one root.
Plan random_plan(std::mt19937_64 &rng, std::size_t max_operators);

/// Random small scenario (≤ 4 choice points, ≤ 3 alternatives each) with unique aliases.
ScenarioConfig random_small_config(std::mt19937_64 &rng, std::uint64_t seed);

/*======================================================================================================================
 * Independent oracles
 *====================================================================================================================*/

/// Tree unfolding of the sub-DAG at `root`: symbol, sorted params and children in slot order; leaves by collection.
/// Two roots compare equal iff their unfolded trees are identical, regardless of node ids or sharing.
std::string tree_text(const Plan &plan, NodeId root);

/// A plan is fully feasible iff its signature is sound and every operator passes every local check on the
/// annotations derived from the whole plan.
bool oracle_fully_feasible(const Plan &plan, const Catalog &catalog);

/// {tree_text(r) : candidate fully feasible, r a root of the candidate}.
std::set<std::string> oracle_feasible_roots(const std::vector<Plan> &candidates, const Catalog &catalog);

/// {tree_text(first root)} of every plan (unpack and extract_feasible yield one root per plan).
std::set<std::string> root_trees(const std::vector<Plan> &plans);

/// The witness that annotating only `members` (everything else opaque) produces at `sink`, if any.
std::optional<Witness> witness_on(const Plan &plan, const std::set<NodeId> &members, NodeId sink,
                                  const Catalog &catalog);

/// Every proper connected sub-DAG of the certificate's subplan (connected = every member reaches the sink inside the
/// set) fails to reproduce the witness (family, evidence and input slot), and the subplan itself reproduces it.
bool oracle_exhaustively_minimal(const Plan &plan, const Certificate &cert, const Catalog &catalog,
                                 std::string *why = nullptr);

/// Corrupted copies of a certificate: one node dropped, evidence altered, family swapped, sink moved, extra node
/// added. Every one of them must be rejected by verify_certificate.
std::vector<Certificate> mutate_certificate(const Certificate &cert, const Plan &plan, std::mt19937_64 &rng);

/// Σ|Λ(n)| over the forest.
std::size_t total_label_space(const PackedPlanForest &forest);

/// Every plan produced by expand() as a vector of plans.
std::vector<Plan> candidate_plans(const AmbiguousQuerySpec &spec, std::optional<std::size_t> limit = std::nullopt);

}
