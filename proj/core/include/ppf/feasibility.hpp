#pragma once

#include <ppf/algebra.hpp>
#include <ppf/catalog.hpp>

#include <array>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ppf {

/// Local constraint families, in the order check_local evaluates them.
enum class ConstraintFamily : std::uint8_t { TYPE, BOUND, ALIGN, CRS, PLACE, UNCERT, TEMPORAL };

inline constexpr std::array<ConstraintFamily, 7> kFamilyOrder = {
    ConstraintFamily::TYPE, ConstraintFamily::BOUND, ConstraintFamily::ALIGN, ConstraintFamily::CRS,
    ConstraintFamily::PLACE, ConstraintFamily::UNCERT, ConstraintFamily::TEMPORAL,
};

std::string_view to_string(ConstraintFamily f);
std::optional<ConstraintFamily> parse_family(std::string_view text);
/// Families that compare an operator with one of its inputs; the rest read the operator's own annotation only.
bool is_edge_family(ConstraintFamily f);

struct Evidence
{
    std::string facet;
    std::string expected;
    std::string actual;

    bool operator==(const Evidence &) const = default;
};

/// Constant-size evidence for one violated family at one operator. Re-checkable against annotations alone.
struct Witness
{
    static constexpr std::size_t kMaxEvidence = 4;

    ConstraintFamily family = ConstraintFamily::TYPE;
    std::vector<Evidence> evidence;
    NodeId at_operator = kNoNode;
    std::optional<std::size_t> slot;   ///< input slot for edge families

    bool operator==(const Witness &) const = default;
};

/// Human-readable diagnostic, e.g. "Traversal infeasible: ...".
std::string describe(const Witness &w);

/// Checks one edge family between an operator annotation and the input at `slot`.
std::optional<Witness> check_edge(ConstraintFamily family, const AnnotationVector &ann, std::size_t slot,
                                  const AnnotationVector &child, NodeId at = kNoNode);
/// Checks one operator-only family.
std::optional<Witness> check_unary(ConstraintFamily family, const AnnotationVector &ann, NodeId at = kNoNode);

/// Evaluates TYPE → BOUND → ALIGN → CRS → PLACE → UNCERT → TEMPORAL and returns the first failure. Reads nothing but its
/// arguments. A facet that is unknown on either side never fails.
std::optional<Witness> check_local(const AnnotationVector &ann, std::span<const AnnotationVector *const> children,
                                   NodeId at = kNoNode);
/// Convenience overload; `op` is carried for call-site symmetry with annotate.
std::optional<Witness> check_local(const OperatorInstance &op, const AnnotationVector &ann,
                                   std::span<const AnnotationVector *const> children, NodeId at = kNoNode);

/// First witness for every node of the plan whose inputs all passed; nodes above a failure are not checked.
/// Signature violations become TYPE witnesses.
std::vector<Witness> check_plan(const Plan &plan, const Catalog &catalog);

/*======================================================================================================================
 * Certificates
 *====================================================================================================================*/

struct Certificate
{
    std::vector<NodeId> subplan;       ///< sorted
    NodeId operator_id = kNoNode;
    ConstraintFamily family = ConstraintFamily::TYPE;
    Witness witness;
    bool minimal = true;               ///< false when minimization could not shrink below the whole plan
    std::optional<std::size_t> plan_index;

    std::string message() const { return describe(witness); }
    bool operator==(const Certificate &) const = default;
};

/// Packages a witness with the smallest sub-DAG below its operator that still reproduces it. Nodes are removed one
/// at a time (together with whatever is then disconnected from the operator) while re-annotation of the remainder
/// still yields the same witness.
Certificate minimal_certificate(const Plan &plan, const Witness &witness, const Catalog &catalog);

struct Verification
{
    bool ok = false;
    std::string reason;

    explicit operator bool() const { return ok; }
};

/// Re-annotates the certificate's subplan from its own leaves and checks that the witness reappears at the sink and
/// that removing any single non-sink node makes it disappear.
Verification verify_certificate(const Certificate &cert, const Plan &plan, const Catalog &catalog);

/// Does the witness reappear when only `members` are annotated (everything else opaque)?
bool reproduces(const Plan &plan, const std::set<NodeId> &members, const Witness &witness, const Catalog &catalog);

nlohmann::json witness_to_json(const Witness &w);
Witness witness_from_json(const nlohmann::json &doc);
nlohmann::json certificate_to_json(const Certificate &c);
Certificate certificate_from_json(const nlohmann::json &doc);

/*======================================================================================================================
 * CRS repair
 *====================================================================================================================*/

/// Inserts a reprojection above the left input of every spatial join whose geometry inputs disagree on CRS, when the
/// catalog declares that transform. Returns a new plan; idempotent.
Plan repair_crs(const Plan &plan, const Catalog &catalog);

}
