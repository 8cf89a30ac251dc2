#pragma once

#include <ppf/algebra.hpp>

#include <cstddef>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppf {

/// The three sources of multiplicity in a cross-model query.
enum class Dimension : std::uint8_t { AttachmentScope, PredicateInterpretation, OperatorAlternative };

std::string_view to_string(Dimension d);
std::optional<Dimension> parse_dimension(std::string_view text);

/// An input slot of a skeleton node; the fragment's root is spliced into it.
struct SiteRef
{
    NodeId node = kNoNode;
    std::size_t slot = 0;

    bool operator==(const SiteRef &) const = default;
};

/// One reading of a predicate. The fragment is a small plan with a single root; a `LEAF <id> @site` node stands for
/// whatever currently occupies the site slot.
struct Alternative
{
    std::string label;
    std::optional<SiteRef> site;   ///< overrides the choice point's site (attachment-scope alternatives)
    Plan fragment;
};

struct ChoicePoint
{
    std::string predicate;
    Dimension dimension = Dimension::OperatorAlternative;
    SiteRef site;
    std::vector<Alternative> alternatives;

    SiteRef site_of(std::size_t alt) const { return alternatives.at(alt).site.value_or(site); }
};

struct AmbiguousQuerySpec
{
    Plan skeleton;
    std::vector<ChoicePoint> choice_points;

    /// ∏ |alternatives|, saturating at SIZE_MAX.
    std::size_t num_candidates() const;
    /// First node id used by the fragments of choice point `index`.
    NodeId fragment_base(std::size_t index) const;
};

struct SpecError : std::runtime_error
{
    std::string choice_point;
    SpecError(std::string choice_point, const std::string &message);
};

/// Checks choice points against the skeleton: sites exist, every fragment has one root, `@site` leaves refer to an
/// occupied slot, and fragment output kinds match the slot's kind. Throws SpecError naming the choice point.
void validate_spec(const AmbiguousQuerySpec &spec);

struct Candidate
{
    std::size_t index = 0;                  ///< position in lexicographic order
    std::vector<std::size_t> choice;        ///< chosen alternative per choice point
    Plan plan;
    SignatureReport report;                 ///< violations travel with the plan; the builder prunes them
};

/// Splices one alternative per choice point into the skeleton (in choice-point order) and drops unreachable nodes.
Plan splice(const AmbiguousQuerySpec &spec, const std::vector<std::size_t> &choice);

/// Lazy odometer over the Cartesian product of alternatives, last choice point varying fastest.
class PlanExpander
{
  public:
    explicit PlanExpander(const AmbiguousQuerySpec &spec, std::optional<std::size_t> limit = std::nullopt);

    std::optional<Candidate> next();
    std::size_t yielded() const { return yielded_; }

  private:
    const AmbiguousQuerySpec &spec_;
    std::optional<std::size_t> limit_;
    std::vector<std::size_t> odometer_;
    std::size_t yielded_ = 0;
    bool done_ = false;
};

std::vector<Candidate> expand(const AmbiguousQuerySpec &spec, std::optional<std::size_t> limit = std::nullopt);

struct SiteDescriptor
{
    std::string label;
    SiteRef site;
    std::size_t alternative = 0;
};

/// Every declared attachment site of the choice points bound to `predicate_id` (declared, not deduplicated).
/// Throws SpecError for an unknown predicate.
std::vector<SiteDescriptor> attachment_variants(const AmbiguousQuerySpec &spec, const std::string &predicate_id);

/// `{skeleton, choice_points: [{predicate, dimension, site: {node, slot}, alternatives: [{label, site?, fragment}]}]}`
/// where skeleton and fragments are plan text (or plan objects). Validates before returning.
AmbiguousQuerySpec spec_from_json(const nlohmann::json &doc);
nlohmann::json spec_to_json(const AmbiguousQuerySpec &spec);
/// A `.json` spec document, or a bare plan file treated as a spec without choice points.
AmbiguousQuerySpec load_spec(std::string_view content);

}
