#include "support.hpp"

#include <doctest.h>

#include <random>
#include <stdexcept>

using namespace ppf;
using namespace ppf::test;

namespace {

PackedPlanForest forest_of(const std::vector<std::string> &plans, const Catalog &cat)
{
    std::vector<Plan> parsed;
    for (const auto &text : plans)
        parsed.push_back(parse_plan(text));
    return build(parsed, cat, keep_all()).forest;
}

/// A certificate from a verdict holds on the plan obtained by some derivation of its operator.
bool certificate_holds(const Certificate &cert, const PackedPlanForest &forest, const Catalog &cat)
{
    const PPFNode &n = forest.at(cert.operator_id);
    std::size_t options = n.is_leaf() ? 1 : n.derivations.size();
    for (std::size_t d = 0; d < options; ++d)
        if (verify_certificate(cert, derivation_plan(forest, cert.operator_id, d), cat))
            return true;
    return false;
}

/// Brute force: a root is feasible iff some plan unpacked through it is fully feasible.
std::set<NodeId> oracle_live_roots(const PackedPlanForest &forest, const Catalog &cat)
{
    std::set<NodeId> live;
    for (const auto &p : unpack(forest).plans)
        if (oracle_fully_feasible(p, cat))
            live.insert(p.roots.front());
    return live;
}

std::set<std::string> oracle_feasible_unpacked(const PackedPlanForest &forest, const Catalog &cat)
{
    std::set<std::string> out;
    for (const auto &p : unpack(forest).plans)
        if (oracle_fully_feasible(p, cat))
            out.insert(tree_text(p, p.roots.front()));
    return out;
}

void check_labeling_properties(const PackedPlanForest &forest, const Labeling &labels)
{
    REQUIRE(labels.alive.size() == forest.size());
    REQUIRE(labels.mass.size() == labels.sweeps + 1);
    CHECK(labels.mass.front() == total_label_space(forest));
    CHECK(labels.mass.back() == labels.total());
    for (std::size_t i = 1; i < labels.mass.size(); ++i) {
        CHECK(labels.mass[i] <= labels.mass[i - 1]);
        if (i + 1 < labels.mass.size())
            CHECK(labels.mass[i] < labels.mass[i - 1]);   // every sweep but the last removes something
    }
    CHECK(labels.mass[labels.sweeps] == labels.mass[labels.sweeps - 1]);
    CHECK(labels.sweeps <= total_label_space(forest) + 1);
    for (const auto &n : forest.nodes) {
        if (n.is_leaf())
            continue;
        for (std::size_t d : labels.supported[n.id]) {
            REQUIRE(d < n.derivations.size());
            for (NodeId c : n.derivations[d])
                CHECK_FALSE(labels.empty(c));
        }
        CHECK(labels.empty(n.id) == labels.supported[n.id].empty());
    }
}

}

TEST_SUITE("labeling")
{
    TEST_CASE("a compatible chain keeps every label in one sweep")
    {
        auto cat = unit_catalog();
        auto f = forest_of({"LEAF 0 Docs\n1 knn q=q_sust k=5 <- 0\n2 xi_d_r target=sid <- 1\n"
                            "3 select theta=a <- 2\n4 project attrs=sid <- 3\nROOT 4\n"},
                           cat);
        auto labels = label(f, cat);
        CHECK(labels.sweeps == 1);
        for (const auto &n : f.nodes)
            CHECK(labels.count(n.id) == n.members.size());
        CHECK(labels.log.empty());
        check_labeling_properties(f, labels);
        auto v = is_feasible(f, labels, cat);
        CHECK(v.feasible);
        CHECK(v.certificates.empty());
        CHECK(extract_feasible(f, labels).plans.size() == 1);
    }

    TEST_CASE("a granularity clash empties the consumer and everything above it")
    {
        auto cat = unit_catalog();
        auto f = forest_of({"LEAF 0 Projects\n1 xi_r_t <- 0\n2 tselect window=q3 granularity=CalendarWeek <- 1\n"
                            "3 tselect window=q4 <- 2\nROOT 3\n"},
                           cat);
        auto labels = label(f, cat);
        check_labeling_properties(f, labels);
        CHECK_FALSE(labels.empty(0));
        CHECK_FALSE(labels.empty(1));
        CHECK(labels.empty(2));
        CHECK(labels.empty(3));
        REQUIRE(labels.log.size() == 1);   // the parent dies for lack of input, which is not re-explained
        CHECK(labels.log[0].node == 2);
        CHECK(labels.log[0].witness.family == ConstraintFamily::TEMPORAL);
        CHECK(describe(labels.log[0].witness).rfind("Temporal granularity mismatch", 0) == 0);

        auto v = is_feasible(f, labels, cat);
        CHECK_FALSE(v.feasible);
        CHECK(v.infeasible_roots == std::vector<NodeId>{3});
        REQUIRE(v.certificates.size() == 1);
        CHECK(v.certificates[0].family == ConstraintFamily::TEMPORAL);
        CHECK(certificate_holds(v.certificates[0], f, cat));
        CHECK(extract_feasible(f, labels).plans.empty());
    }

    TEST_CASE("a node survives through its one live derivation")
    {
        // LegacyDocs looks like Docs but its key maps to nothing, so only the Docs reading reaches a relation.
        auto doc = unit_catalog_json();
        doc["schema"]["collections"]["LegacyDocs"] = {{"kind", "Docs"}, {"label", "sustainability"}, {"key", "ref"}};
        auto cat = catalog_from_json(doc);
        auto f = forest_of({"LEAF 0 Docs\n1 knn q=q_sust k=5 <- 0\n2 xi_d_r target=sid <- 1\n3 select theta=a <- 2\n"
                            "ROOT 3\n",
                            "LEAF 0 LegacyDocs\n1 knn q=q_sust k=5 <- 0\n2 xi_d_r target=sid <- 1\n"
                            "3 select theta=a <- 2\nROOT 3\n"},
                           cat);
        REQUIRE(f.roots.size() == 1);
        const PPFNode &top = f.at(f.roots[0]);
        REQUIRE(top.derivations.size() == 2);

        auto labels = label(f, cat);
        check_labeling_properties(f, labels);
        CHECK_FALSE(labels.empty(top.id));
        REQUIRE(labels.supported[top.id].size() == 1);
        const std::size_t live = labels.supported[top.id][0];
        const std::size_t dead = 1 - live;
        CHECK(labels.empty(top.derivations[dead][0]));
        CHECK(is_feasible(f, labels, cat).feasible);

        auto extracted = extract_feasible(f, labels);
        REQUIRE(extracted.plans.size() == 1);
        const Plan &p = extracted.plans[0];
        CHECK(p.at(top.id).children == top.derivations[live]);
        CHECK_FALSE(p.contains(top.derivations[dead][0]));
        CHECK(oracle_fully_feasible(p, cat));
    }

    TEST_CASE("infeasibility is decided per root")
    {
        auto cat = unit_catalog();
        auto f = forest_of({"LEAF 0 Docs\n1 knn q=q_sust k=5 <- 0\n2 xi_d_r target=sid <- 1\nROOT 2\n",
                            "LEAF 0 Projects\n1 xi_r_t <- 0\n2 tselect window=q3 granularity=CalendarWeek <- 1\n"
                            "ROOT 2\n"},
                           cat);
        REQUIRE(f.roots.size() == 2);
        auto labels = label(f, cat);
        auto v = is_feasible(f, labels, cat);
        CHECK_FALSE(v.feasible);
        REQUIRE(v.infeasible_roots.size() == 1);
        NodeId bad = v.infeasible_roots[0];
        CHECK(std::holds_alternative<OperatorInstance>(f.at(bad).payload));
        CHECK(f.at(bad).op().symbol == Symbol::TemporalSelect);
        auto extracted = extract_feasible(f, labels);
        REQUIRE(extracted.plans.size() == 1);
        CHECK(extracted.plans[0].roots.front() != bad);
        CHECK(oracle_live_roots(f, cat).size() == 1);
    }

    TEST_CASE("the Example 3 double fault yields exactly two independent certificates")
    {
        auto spec = fixture_spec("example3/spec.json");
        auto cat = fixture_catalog("example3/catalog_double_fault.json");
        auto f = build(spec, cat, keep_all()).forest;
        auto labels = label(f, cat);
        check_labeling_properties(f, labels);
        auto v = is_feasible(f, labels, cat);
        CHECK_FALSE(v.feasible);
        CHECK(extract_feasible(f, labels).plans.empty());
        REQUIRE(v.certificates.size() == 2);
        std::set<ConstraintFamily> families;
        for (const auto &c : v.certificates) {
            families.insert(c.family);
            CHECK(certificate_holds(c, f, cat));
            CHECK(c.subplan.size() <= 3);
        }
        CHECK(families == std::set<ConstraintFamily>{ConstraintFamily::ALIGN, ConstraintFamily::TEMPORAL});

        SUBCASE("the healthy catalog is feasible with the same forest shape")
        {
            auto ok = fixture_catalog("example3/catalog.json");
            auto g = build(spec, ok, keep_all()).forest;
            auto l = label(g, ok);
            CHECK(is_feasible(g, l, ok).feasible);
            CHECK(root_trees(extract_feasible(g, l).plans) == oracle_feasible_roots(candidate_plans(spec), ok));
        }
    }

    TEST_CASE("labels reach the same fixed point under any sweep order")
    {
        auto spec = fixture_spec("example3/spec.json");
        for (const char *catalog : {"example3/catalog.json", "example3/catalog_double_fault.json",
                                    "example3/catalog_temporal_fault.json", "example3/catalog_embedding_fault.json"}) {
            auto cat = fixture_catalog(catalog);
            auto f = build(spec, cat, keep_all()).forest;
            auto reference = label(f, cat);
            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                auto other = label(f, cat, {.order_seed = seed});
                INFO(catalog, " seed ", seed);
                CHECK(other.alive == reference.alive);
                CHECK(other.supported == reference.supported);
                check_labeling_properties(f, other);
            }
        }
    }

    TEST_CASE("labeling agrees with brute force on generated workloads")
    {
        std::mt19937_64 rng(97);
        std::size_t checked = 0, infeasible = 0;
        for (std::uint64_t seed = 1; seed <= 80; ++seed) {
            auto wl = generate(random_small_config(rng, seed));
            if (wl.spec.num_candidates() > 64)
                continue;
            INFO("seed ", seed);
            auto f = build(wl.spec, wl.catalog, keep_all()).forest;
            auto labels = label(f, wl.catalog);
            check_labeling_properties(f, labels);
            auto shuffled = label(f, wl.catalog, {.order_seed = seed});
            CHECK(shuffled.alive == labels.alive);

            auto live = oracle_live_roots(f, wl.catalog);
            std::set<NodeId> kept;
            for (NodeId r : f.roots)
                if (!labels.empty(r))
                    kept.insert(r);
            CHECK(kept == live);

            auto v = is_feasible(f, labels, wl.catalog);
            CHECK(v.feasible == (live.size() == f.roots.size()));
            CHECK(v.feasible == v.certificates.empty());
            for (const auto &c : v.certificates)
                CHECK(certificate_holds(c, f, wl.catalog));

            auto extracted = extract_feasible(f, labels);
            CHECK(root_trees(extracted.plans) == oracle_feasible_unpacked(f, wl.catalog));
            CHECK(root_trees(extracted.plans) ==
                  oracle_feasible_roots(candidate_plans(wl.spec), wl.catalog));
            ++checked;
            infeasible += v.feasible ? 0 : 1;
        }
        CHECK(checked >= 40);
        CHECK(infeasible > 0);
    }

    TEST_CASE("labels from another forest are rejected")
    {
        auto cat = unit_catalog();
        auto small = forest_of({"LEAF 0 Suppliers\n1 select theta=a <- 0\nROOT 1\n"}, cat);
        auto large = forest_of({"LEAF 0 Suppliers\n1 select theta=a <- 0\n2 project attrs=sid <- 1\nROOT 2\n"}, cat);
        auto labels = label(small, cat);
        CHECK_THROWS_AS(is_feasible(large, labels, cat), std::invalid_argument);
        CHECK_THROWS_AS(extract_feasible(large, labels), std::invalid_argument);
    }

    TEST_CASE("verdicts serialize with their certificates")
    {
        auto spec = fixture_spec("example3/spec.json");
        auto cat = fixture_catalog("example3/catalog_double_fault.json");
        auto f = build(spec, cat, keep_all()).forest;
        auto labels = label(f, cat);
        auto v = is_feasible(f, labels, cat);
        auto doc = verdict_to_json(v, f, labels);
        CHECK(doc.at("verdict") == "Infeasible");
        REQUIRE(doc.at("certificates").size() == 2);
        for (std::size_t i = 0; i < v.certificates.size(); ++i)
            CHECK(certificate_from_json(doc["certificates"][i]) == v.certificates[i]);
        CHECK(doc.dump() == verdict_to_json(v, f, labels).dump());
    }
}
