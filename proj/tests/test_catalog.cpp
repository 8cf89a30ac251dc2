#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace ppf;
using namespace ppf::test;

namespace {

std::map<NodeId, AnnotationVector> annotate_text(const std::string &text, const Catalog &catalog)
{
    Plan p = parse_plan(text);
    bind_leaf_kinds(p, catalog);
    return annotate_plan(p, catalog);
}

Catalog with(const std::function<void(nlohmann::json &)> &edit)
{
    auto doc = unit_catalog_json();
    edit(doc);
    return catalog_from_json(doc);
}

}

TEST_SUITE("catalog")
{
    TEST_CASE("geocoding a relation takes the CRS from the schema")
    {
        auto anns = annotate_text("LEAF 0 Projects\n1 xi_r_g <- 0\nROOT 1\n", unit_catalog());
        CHECK(anns.at(1).output_kind == DataKind::Geometry);
        CHECK(anns.at(1).crs == "EPSG:4326");
        CHECK(anns.at(1).label == "Point");
    }

    TEST_CASE("a relation without a declared CRS geocodes to the catalog default")
    {
        auto cat = with([](auto &d) { d["schema"]["geocode_crs"] = "EPSG:3035"; });
        auto anns = annotate_text("LEAF 0 Suppliers\n1 xi_r_g <- 0\nROOT 1\n", cat);
        CHECK(anns.at(1).crs == "EPSG:3035");
    }

    TEST_CASE("spatial selection is placed only where it is supported")
    {
        auto anns = annotate_text("LEAF 0 Sites\n1 sselect pred=within <- 0\nROOT 1\n", unit_catalog());
        CHECK(anns.at(1).placement == std::set<std::string>{"postgis"});
    }

    TEST_CASE("placement intersects operator support with index requirements")
    {
        auto anns = annotate_text("LEAF 0 Docs\n1 knn q=q_sust k=5 <- 0\nROOT 1\n", unit_catalog());
        CHECK(anns.at(1).placement == std::set<std::string>{"qdrant"});

        auto no_index = with([](auto &d) { d["engines"]["qdrant"].erase("indexes"); });
        auto bare = annotate_text("LEAF 0 Docs\n1 knn q=q_sust k=5 <- 0\nROOT 1\n", no_index);
        CHECK(bare.at(1).placement.empty());
    }

    TEST_CASE("an operator no engine hosts yields a placement witness")
    {
        auto cat = with([](auto &d) { d["engines"]["postgis"]["ops"] = nlohmann::json::array({"sjoin"}); });
        AnnotationVector leaf = derive_leaf_annotation(LeafRef{"Sites", DataKind::Geometry}, cat);
        const AnnotationVector *kids[] = {&leaf};
        auto result = annotate(make_op(Symbol::SpatialSelect, {{"pred", "within"}}), kids, cat, 5);
        REQUIRE(std::holds_alternative<Witness>(result));
        CHECK(std::get<Witness>(result).family == ConstraintFamily::PLACE);
        CHECK(std::get<Witness>(result).at_operator == 5);
        // derive_annotation itself never fails
        CHECK(derive_annotation(make_op(Symbol::SpatialSelect, {{"pred", "within"}}), kids, cat).placement.empty());
    }

    TEST_CASE("approximate operators carry an ε-bin from their template")
    {
        auto anns = annotate_text("LEAF 0 Docs\n1 knn q=q_sust k=5 <- 0\nROOT 1\n", unit_catalog());
        REQUIRE(anns.at(1).uncertainty.has_value());
        CHECK_FALSE(anns.at(1).uncertainty->deterministic());
        CHECK(anns.at(1).uncertainty->eps_label == "≤0.05");
        CHECK(anns.at(0).uncertainty->deterministic());
    }

    TEST_CASE("uncertainty propagation")
    {
        auto cat = unit_catalog();
        SUBCASE("projection over a deterministic child stays deterministic")
        {
            auto anns = annotate_text("LEAF 0 Suppliers\n1 project attrs=sid <- 0\nROOT 1\n", cat);
            CHECK(anns.at(1).uncertainty->deterministic());
        }
        SUBCASE("operators above an approximate input are approximate")
        {
            auto anns = annotate_text(
                "LEAF 0 Docs\n1 knn q=q_sust k=5 <- 0\n2 xi_d_r target=sid <- 1\n3 project attrs=sid <- 2\nROOT 3\n", cat);
            CHECK(anns.at(3).uncertainty->eps_label == "≤0.05");
        }
        SUBCASE("ε-bins compose by maximum, not by sum")
        {
            auto anns = annotate_text("LEAF 0 Docs\n1 knn q=q_sust k=5 <- 0\nLEAF 2 Docs\n"
                                      "3 docsim q=q_sust threshold=0.83 <- 1 2\nROOT 3\n",
                                      cat);
            CHECK(anns.at(3).uncertainty->eps_label == "≤0.1");
            CHECK(anns.at(3).bins.at("threshold") == "≤0.9");
        }
    }

    TEST_CASE("binding status follows parameters and template requirements")
    {
        auto cat = unit_catalog();
        auto unbound = annotate_text("LEAF 0 Docs\n1 knn q=?q_eu k=5 <- 0\nROOT 1\n", cat);
        CHECK(unbound.at(1).binding.at("q") == Binding::Unbound);
        auto undeclared = annotate_text("LEAF 0 Docs\n1 knn q=q_nowhere k=5 <- 0\nROOT 1\n", cat);
        CHECK(undeclared.at(1).binding.at("q") == Binding::Unbound);
        auto bound = annotate_text("LEAF 0 Docs\n1 knn q=q_sust k=5 <- 0\nROOT 1\n", cat);
        CHECK(bound.at(1).binding.at("q") == Binding::Bound);
        CHECK(bound.at(1).binding.at("k") == Binding::Bound);
    }

    TEST_CASE("semantic tags carry embedding domains upward")
    {
        auto anns = annotate_text("LEAF 0 EUDocs\n1 knn q=q_eu k=5 <- 0\n2 llm_enrich task=summarize <- 1\nROOT 2\n",
                                  unit_catalog());
        CHECK(*anns.at(1).tags == std::set<std::string>{"EUguidelines"});
        CHECK(*anns.at(2).tags == std::set<std::string>{"EUguidelines", "summarize"});
        CHECK_FALSE(opaque_annotation().tags.has_value());
    }

    TEST_CASE("discretization")
    {
        auto cat = unit_catalog();
        CHECK(discretize(0.83, cat, "similarity") == "≤0.9");   // smallest closed upper bound ≥ value
        CHECK(discretize(0.8, cat, "similarity") == "≤0.8");    // boundary value stays in its own bin
        CHECK(discretize(0.0, cat, "similarity") == "≤0.5");
        CHECK(discretize(1e9, cat, "distance") == "≤1000");     // saturates at the last bin
        CHECK_THROWS_AS(discretize(-1.0, cat, "distance"), DomainError);
        CHECK_THROWS_AS(discretize(std::nan(""), cat, "distance"), DomainError);
        CHECK_THROWS_AS(discretize(0.5, cat, "no_such_table"), DomainError);

        // independent oracle: direct scan of the bounds
        const auto &table = cat.bins.at("similarity");
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.2);
        for (int i = 0; i < 500; ++i) {
            double v = u(rng);
            std::size_t expect = table.bounds.size() - 1;
            for (std::size_t b = 0; b < table.bounds.size(); ++b)
                if (v <= table.bounds[b]) {
                    expect = b;
                    break;
                }
            CHECK(discretize_index(v, table) == expect);
        }
    }

    TEST_CASE("catalog load checks its invariants")
    {
        CHECK_THROWS_AS(with([](auto &d) { d["schema"]["taxonomy"] = {{"A", {"B"}}, {"B", {"A"}}}; }), CatalogError);
        CHECK_THROWS_AS(with([](auto &d) { d["bins"]["similarity"] = {0.9, 0.5}; }), CatalogError);
        CHECK_THROWS_AS(with([](auto &d) { d["bins"]["similarity"] = nlohmann::json::array(); }), CatalogError);
        CHECK_THROWS_AS(with([](auto &d) { d["engines"]["x"] = {{"ops", {"teleport"}}}; }), CatalogError);
        CHECK_THROWS_AS(with([](auto &d) { d["schema"]["collections"]["Z"] = {{"kind", "Blob"}}; }), CatalogError);
        CHECK_THROWS_AS(catalog_from_json(nlohmann::json::array()), CatalogError);
        CHECK_THROWS_AS(load_catalog_file(fixture_path("does/not/exist.json")), CatalogError);
    }

    TEST_CASE("the subtype relation is a partial order")
    {
        auto cat = with([](auto &d) {
            d["schema"]["taxonomy"] = {{"Supplier", {"Organization"}}, {"Organization", {"Agent"}}};
        });
        for (const auto &label : {"Supplier", "Organization", "Agent", "Part"})
            CHECK(cat.is_subtype(label, label));
        CHECK(cat.is_subtype("Supplier", "Organization"));
        CHECK(cat.is_subtype("Organization", "Agent"));
        CHECK(cat.is_subtype("Supplier", "Agent"));
        CHECK_FALSE(cat.is_subtype("Agent", "Supplier"));
        CHECK_FALSE(cat.is_subtype("Company", "Organization"));
    }

    TEST_CASE("tag compatibility is symmetric")
    {
        auto cat = with([](auto &d) { d["schema"]["tag_compat"] = nlohmann::json::array({nlohmann::json::array({"FundingDocs", "EUguidelines"})}); });
        CHECK(cat.tags_compatible("FundingDocs", "EUguidelines"));
        CHECK(cat.tags_compatible("EUguidelines", "FundingDocs"));
        CHECK(cat.tags_compatible("x", "x"));
        CHECK_FALSE(cat.tags_compatible("FundingDocs", "sustainability"));
    }

    TEST_CASE("mappings are normalized")
    {
        CHECK(normalize_mapping("docid->sid") == "docid -> sid");
        CHECK(normalize_mapping("  docid  ->  sid ") == "docid -> sid");
        CHECK(unit_catalog().has_mapping("docid", "sid"));
        CHECK_FALSE(unit_catalog().has_mapping("docid", "pid"));
    }

    TEST_CASE("catalog JSON round-trips")
    {
        auto cat = unit_catalog();
        auto back = catalog_from_json(catalog_to_json(cat));
        CHECK(back.digest() == cat.digest());
        CHECK(catalog_to_json(back) == catalog_to_json(cat));
        CHECK(fixture_catalog("example3/catalog.json").digest() != cat.digest());
    }

    TEST_CASE("annotation is a pure function of its inputs")
    {
        auto cat = unit_catalog();
        std::mt19937_64 rng(11);
        for (int i = 0; i < 100; ++i) {
            Plan p = random_plan(rng, 10);
            auto a = annotate_plan(p, cat);
            auto b = annotate_plan(p, catalog_from_json(unit_catalog_json()));
            CHECK(a == b);
            for (const auto &[id, ann] : a)
                CHECK(annotation_from_json(annotation_to_json(ann)) == ann);
        }
    }

    TEST_CASE("uncertainty never downgrades along a root-ward path")
    {
        auto cat = unit_catalog();
        std::mt19937_64 rng(12);
        std::size_t approximate_edges = 0;
        for (int i = 0; i < 300; ++i) {
            Plan p = random_plan(rng, 14);
            auto anns = annotate_plan(p, cat);
            for (const auto &[id, node] : p.nodes)
                for (NodeId c : node.children) {
                    const auto &cu = anns.at(c).uncertainty;
                    const auto &pu = anns.at(id).uncertainty;
                    REQUIRE(cu.has_value());
                    REQUIRE(pu.has_value());
                    CHECK(pu->eps_bin >= cu->eps_bin);
                    approximate_edges += !cu->deterministic();
                }
        }
        CHECK(approximate_edges > 0);
    }

    TEST_CASE("annotation facets range over a finite catalog vocabulary")
    {
        auto cat = unit_catalog();
        std::set<std::string> crs_codes, engines = cat.all_engines(), eps_labels, tag_domain;
        for (const auto &[n, c] : cat.collections)
            if (c.crs)
                crs_codes.insert(*c.crs);
        crs_codes.insert(cat.geocode_crs);
        for (std::size_t i = 0; i < cat.bins.at("epsilon").bounds.size(); ++i)
            eps_labels.insert(cat.bins.at("epsilon").label(i));
        for (const auto &[q, d] : cat.vectors)
            tag_domain.insert(d);

        std::mt19937_64 rng(13);
        std::set<std::string> distinct;
        for (int i = 0; i < 400; ++i) {
            Plan p = random_plan(rng, 10);
            // a reprojection names its target CRS as a parameter, which joins the plan's vocabulary
            std::set<std::string> plan_crs = crs_codes;
            for (const auto &[id, n] : p.nodes)
                if (!n.is_leaf() && n.op().symbol == Symbol::Reproject)
                    plan_crs.insert(n.op().param("to")->value);
            for (const auto &[id, a] : annotate_plan(p, cat)) {
                distinct.insert(a.canonical());
                if (a.crs)
                    CHECK(plan_crs.contains(*a.crs));
                for (const auto &e : a.placement)
                    CHECK(engines.contains(e));
                if (a.uncertainty && !a.uncertainty->deterministic())
                    CHECK(eps_labels.contains(a.uncertainty->eps_label));
                if (a.tags)
                    for (const auto &t : *a.tags)
                        CHECK((tag_domain.contains(t) || t.rfind("task", 0) == 0));
            }
        }
        // distinct vectors stay far below the number of annotated nodes
        CHECK(distinct.size() < 400 * 10);
    }
}
