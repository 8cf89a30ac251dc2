#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>

using namespace ppf;
using namespace ppf::test;

namespace {

Alternative alt(std::string label, const std::string &fragment, std::optional<SiteRef> site = std::nullopt)
{
    return Alternative{std::move(label), site, parse_plan(fragment, {.allow_site_leaf = true})};
}

/// "in Europe" over a geocoded project relation: three readings of the same spatial predicate.
AmbiguousQuerySpec in_europe_spec()
{
    AmbiguousQuerySpec spec;
    spec.skeleton = parse_plan("LEAF 0 Projects\n1 xi_r_g <- 0\n2 xi_g_r <- 1\n3 project attrs=projid <- 2\nROOT 3\n");
    ChoicePoint cp;
    cp.predicate = "in Europe";
    cp.dimension = Dimension::PredicateInterpretation;
    cp.site = {2, 0};
    cp.alternatives.push_back(
        alt("spatial join", "LEAF 0 @site\nLEAF 1 Regions4326\n2 sjoin pred=within <- 0 1\nROOT 2\n"));
    cp.alternatives.push_back(alt("country filter", "LEAF 0 @site\n1 sselect pred=country_in_eu <- 0\nROOT 1\n"));
    cp.alternatives.push_back(alt("nearest neighbour", "LEAF 0 @site\n1 sknn k=1 ref=europe <- 0\nROOT 1\n"));
    spec.choice_points.push_back(std::move(cp));
    validate_spec(spec);
    return spec;
}

/// "documents similar to the sustainability report": the same predicate attached at the supplier or project side.
AmbiguousQuerySpec attachment_spec(SiteRef second_site)
{
    AmbiguousQuerySpec spec;
    spec.skeleton = parse_plan("LEAF 0 Suppliers\n1 select theta=s <- 0\nLEAF 2 Projects\n3 select theta=p <- 2\n"
                               "4 join theta=x <- 1 3\nROOT 4\n");
    ChoicePoint cp;
    cp.predicate = "documents similar to the sustainability report";
    cp.dimension = Dimension::AttachmentScope;
    cp.site = {4, 0};
    const char *docs = "LEAF 0 @site\nLEAF 1 Docs\n2 knn q=q_sust k=5 <- 1\n3 xi_d_r target=%s <- 2\n"
                       "4 join theta=%s <- 0 3\nROOT 4\n";
    auto fragment = [&](const std::string &target) {
        std::string f = docs;
        for (int i = 0; i < 2; ++i)
            f.replace(f.find("%s"), 2, target);
        return f;
    };
    cp.alternatives.push_back(alt("supplier documents", fragment("sid"), SiteRef{4, 0}));
    cp.alternatives.push_back(alt("project documents", fragment("projid"), second_site));
    spec.choice_points.push_back(std::move(cp));
    validate_spec(spec);
    return spec;
}

/// n choice points with k alternatives each, on a chain of selections.
AmbiguousQuerySpec chain_spec(std::size_t n, std::size_t k)
{
    AmbiguousQuerySpec spec;
    std::string sk = "LEAF 0 Suppliers\n";
    for (std::size_t i = 1; i <= n; ++i)
        sk += std::to_string(i) + " select theta=s" + std::to_string(i) + " <- " + std::to_string(i - 1) + "\n";
    sk += "ROOT " + std::to_string(n) + "\n";
    spec.skeleton = parse_plan(sk);
    for (std::size_t i = 1; i <= n; ++i) {
        ChoicePoint cp;
        cp.predicate = "p" + std::to_string(i);
        cp.site = {static_cast<NodeId>(i), 0};
        for (std::size_t a = 0; a < k; ++a)
            cp.alternatives.push_back(alt("a" + std::to_string(a),
                                          "LEAF 0 @site\n1 select theta=c" + std::to_string(i) + "_" +
                                              std::to_string(a) + " <- 0\nROOT 1\n"));
        spec.choice_points.push_back(std::move(cp));
    }
    validate_spec(spec);
    return spec;
}

}

TEST_SUITE("ambiguity")
{
    TEST_CASE("no choice points yields exactly the skeleton")
    {
        AmbiguousQuerySpec spec = load_spec(read_file(fixture_path("example1/plan.txt")));
        CHECK(spec.choice_points.empty());
        CHECK(spec.num_candidates() == 1);
        auto cands = expand(spec);
        REQUIRE(cands.size() == 1);
        CHECK(cands[0].plan == spec.skeleton);
        CHECK(cands[0].choice.empty());
    }

    TEST_CASE("three binary choice points give eight distinct plans")
    {
        auto spec = chain_spec(3, 2);
        auto cands = expand(spec);
        CHECK(cands.size() == 8);
        std::set<std::string> texts;
        for (const auto &c : cands) {
            texts.insert(serialize_plan(c.plan));
            CHECK(c.report.ok());
        }
        CHECK(texts.size() == 8);
        // lexicographic order, last choice point fastest
        CHECK(cands[0].choice == std::vector<std::size_t>{0, 0, 0});
        CHECK(cands[1].choice == std::vector<std::size_t>{0, 0, 1});
        CHECK(cands[7].choice == std::vector<std::size_t>{1, 1, 1});
        for (std::size_t i = 0; i < cands.size(); ++i)
            CHECK(cands[i].index == i);
    }

    TEST_CASE("cardinality is the product of alternatives")
    {
        for (std::size_t n = 0; n <= 4; ++n)
            for (std::size_t k = 1; k <= 3; ++k) {
                auto spec = chain_spec(n, k);
                std::size_t expect = 1;
                for (std::size_t i = 0; i < n; ++i)
                    expect *= k;
                CHECK(spec.num_candidates() == expect);
                CHECK(expand(spec).size() == expect);
            }
    }

    TEST_CASE("\"in Europe\" yields three plans that differ only at the site")
    {
        auto spec = in_europe_spec();
        auto cands = expand(spec);
        REQUIRE(cands.size() == 3);
        std::set<std::string> texts;
        for (const auto &c : cands) {
            texts.insert(serialize_plan(c.plan));
            // everything outside the fragment is the skeleton
            for (const auto &[id, node] : spec.skeleton.nodes) {
                REQUIRE(c.plan.contains(id));
                CHECK(c.plan.at(id).payload == node.payload);
                if (id != 2)
                    CHECK(c.plan.at(id).children == node.children);
            }
            // the site now holds the fragment's root, which reads the old occupant
            NodeId top = c.plan.at(2).children[0];
            CHECK(top >= spec.fragment_base(0));
            CHECK(c.plan.descendants(top).size() >= 3);
            auto under = c.plan.descendants(top);
            CHECK(std::find(under.begin(), under.end(), NodeId{1}) != under.end());
        }
        CHECK(texts.size() == 3);
        auto cat = unit_catalog();
        for (const auto &c : cands)
            CHECK(check_plan(c.plan, cat).empty());
    }

    TEST_CASE("skeleton nodes keep their ids in every candidate")
    {
        auto spec = fixture_spec("example3/spec.json");
        for (const auto &c : expand(spec))
            for (const auto &[id, node] : spec.skeleton.nodes) {
                REQUIRE(c.plan.contains(id));
                CHECK(c.plan.at(id).payload == node.payload);
            }
    }

    TEST_CASE("expansion is lazy and honours a limit")
    {
        auto spec = chain_spec(4, 3);
        PlanExpander ex(spec, 5);
        std::size_t n = 0;
        while (auto c = ex.next())
            ++n;
        CHECK(n == 5);
        CHECK(ex.yielded() == 5);
        CHECK(expand(spec, 100).size() == 81);
        CHECK(expand(spec, 0).empty());
    }

    TEST_CASE("attachment variants")
    {
        SUBCASE("two declared sites")
        {
            auto spec = attachment_spec({4, 1});
            auto v = attachment_variants(spec, "documents similar to the sustainability report");
            REQUIRE(v.size() == 2);
            CHECK(v[0].site == SiteRef{4, 0});
            CHECK(v[1].site == SiteRef{4, 1});
            CHECK(v[0].label == "supplier documents");
            CHECK(v[1].alternative == 1);
            auto cands = expand(spec);
            REQUIRE(cands.size() == 2);
            auto cat = unit_catalog();
            for (const auto &c : cands)
                CHECK(check_plan(c.plan, cat).empty());
        }
        SUBCASE("a single-site predicate")
        {
            auto spec = in_europe_spec();
            spec.choice_points[0].alternatives.resize(1);
            auto v = attachment_variants(spec, "in Europe");
            REQUIRE(v.size() == 1);
            CHECK(v[0].site == SiteRef{2, 0});
        }
        SUBCASE("sites that coincide are still reported separately")
        {
            auto spec = attachment_spec({4, 0});
            auto v = attachment_variants(spec, "documents similar to the sustainability report");
            CHECK(v.size() == 2);
            CHECK(v[0].site == v[1].site);
            // splice oracle: both candidates put their fragment under the same node and slot
            auto cands = expand(spec);
            CHECK(cands[0].plan.at(4).children[0] != 1);
            CHECK(cands[1].plan.at(4).children[0] != 1);
            CHECK(serialize_plan(cands[0].plan) != serialize_plan(cands[1].plan));
        }
        SUBCASE("an unknown predicate")
        {
            CHECK_THROWS_AS(attachment_variants(in_europe_spec(), "nowhere"), SpecError);
        }
    }

    TEST_CASE("specs are validated against the skeleton")
    {
        auto bad = [](auto edit) {
            auto spec = in_europe_spec();
            edit(spec);
            validate_spec(spec);
        };
        CHECK_THROWS_AS(bad([](auto &s) { s.choice_points[0].site = {42, 0}; }), SpecError);
        CHECK_THROWS_AS(bad([](auto &s) { s.choice_points[0].site = {2, 3}; }), SpecError);
        CHECK_THROWS_AS(bad([](auto &s) { s.choice_points[0].alternatives.clear(); }), SpecError);
        CHECK_THROWS_AS(bad([](auto &s) { s.choice_points[0].alternatives[0].fragment.roots.push_back(0); }), SpecError);
        // a fragment delivering the wrong kind for the slot
        CHECK_THROWS_AS(bad([](auto &s) {
                            s.choice_points[0].alternatives[1] =
                                alt("wrong kind", "LEAF 0 @site\n1 xi_g_r <- 0\nROOT 1\n");
                        }),
                        SpecError);
        try {
            bad([](auto &s) { s.choice_points[0].site = {42, 0}; });
        } catch (const SpecError &e) {
            CHECK(e.choice_point == "in Europe");
        }
    }

    TEST_CASE("open slots must be filled by a fragment")
    {
        AmbiguousQuerySpec spec;
        spec.skeleton = parse_plan("LEAF 0 S\n1 join theta=x <- 0 _\nROOT 1\n", {.allow_open_slots = true});
        ChoicePoint cp;
        cp.predicate = "right side";
        cp.site = {1, 1};
        cp.alternatives.push_back(alt("needs an occupant", "LEAF 0 @site\n1 select theta=a <- 0\nROOT 1\n"));
        spec.choice_points.push_back(cp);
        CHECK_THROWS_AS(validate_spec(spec), SpecError);
        spec.choice_points[0].alternatives[0] = alt("fresh", "LEAF 0 Parts\n1 select theta=a <- 0\nROOT 1\n");
        CHECK_NOTHROW(validate_spec(spec));
        auto cands = expand(spec);
        REQUIRE(cands.size() == 1);
        CHECK(check_structure(cands[0].plan).empty());
    }

    TEST_CASE("spec JSON round-trips")
    {
        for (const auto &spec : {in_europe_spec(), attachment_spec({4, 1}), fixture_spec("example3/spec.json")}) {
            auto back = spec_from_json(spec_to_json(spec));
            CHECK(spec_to_json(back) == spec_to_json(spec));
            auto a = expand(spec), b = expand(back);
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i)
                CHECK(a[i].plan == b[i].plan);
        }
        // a document without a skeleton is malformed input rather than a bad choice point
        CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"choice_points": []})")), ParseError);
    }

    TEST_CASE("candidate count saturates")
    {
        AmbiguousQuerySpec spec = chain_spec(1, 2);
        auto cp = spec.choice_points[0];
        spec.choice_points.assign(70, cp);   // 2^70 overflows
        CHECK(spec.num_candidates() == std::numeric_limits<std::size_t>::max());
    }

    TEST_CASE("dimension names round-trip")
    {
        for (auto d : {Dimension::AttachmentScope, Dimension::PredicateInterpretation, Dimension::OperatorAlternative})
            CHECK(parse_dimension(to_string(d)) == d);
    }
}
