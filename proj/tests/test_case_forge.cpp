#include "ciforge/case_forge.hpp"
#include "ciforge/error.hpp"
#include "ciforge/norms.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace ciforge;
using namespace ciforge::forge;
using answers::Feature;
namespace t = ciforge::testing;

namespace {

const std::vector<statute::Norm>& seeds() {
  static const auto s = statute::load_norms(t::fixture("seeds.jsonl"));
  return s;
}

const statute::Norm& seed(const std::string& id) {
  for (const auto& s : seeds())
    if (s.leaf_id == id) return s;
  throw std::runtime_error("no seed " + id);
}

std::string response(const std::string& norm, int i) {
  return text::read_file(t::fixture("responses/synth/" + norm + "/s" + std::to_string(i) + ".txt"));
}

Case with_background(std::string bg) {
  Case c;
  c.background = std::move(bg);
  return c;
}

SynthesisResult synth(SynthesisConfig cfg) {
  gateway::GatewayConfig g;
  g.max_inflight = 2;
  gateway::ModelGateway gw(g, gateway::Cassette::load(t::fixture("synthesis_cassette.jsonl")));
  return run_synthesis(seeds(), gw, cfg);
}

}  // namespace

TEST_SUITE("case_forge") {
  TEST_CASE("generation prompts") {
    auto permit = build_generation_prompt(seed("164.502(j)(1)(i)"));
    CHECK(permit.find(seed("164.502(j)(1)(i)").full_text) != std::string::npos);
    CHECK(permit.find("Permit") != std::string::npos);
    auto forbid = build_generation_prompt(seed("164.502(a)(5)(ii)(b)(1)"));
    CHECK(forbid.find("Forbid") != std::string::npos);
    for (const auto& s : seeds())
      CHECK(build_generation_prompt(s).find("[Sender, Sender Role, Recipient, Recipient Role, Subject, Subject Role, Type]") !=
            std::string::npos);
  }

  TEST_CASE("generation request samples at temperature one") {
    auto req = generation_request(seeds().front());
    CHECK(req.n_samples == 5);
    CHECK(req.temperature == 1.0);
  }

  TEST_CASE("whistleblower response") {
    auto c = parse_case_response(response("164.502(j)(1)(i)", 0), seed("164.502(j)(1)(i)"));
    CHECK(*c.feature(Feature::Sender) == "Jane");
    CHECK(*c.feature(Feature::SenderRole) == "Nurse");
    CHECK(c.compliance == Compliance::Permit);
    CHECK(c.applicability == Applicability::Applicable);
    CHECK(c.background.rfind("Jane, a nurse", 0) == 0);
    CHECK(feature_filter(c));
    CHECK(consistency_filter(c, seed("164.502(j)(1)(i)")));
  }

  TEST_CASE("sale of records response") {
    const auto& s = seed("164.502(a)(5)(ii)(b)(1)");
    auto c = parse_case_response(response("164.502(a)(5)(ii)(b)(1)", 0), s);
    CHECK(c.compliance == Compliance::Forbid);
    REQUIRE(c.cited_norm_ids.size() == 1);
    CHECK(c.cited_norm_ids[0].canonical() == "164.502(a)(5)(ii)(b)(1)");
    CHECK(consistency_filter(c, s));
  }

  TEST_CASE("response without sections") {
    CHECK_THROWS_AS(parse_case_response("lorem ipsum", seeds().front()), Error);
  }

  TEST_CASE("feature filter") {
    auto c = parse_case_response(response("164.502(j)(1)(i)", 0), seed("164.502(j)(1)(i)"));
    CHECK(feature_filter(c));
    auto missing = c;
    missing.set_feature(Feature::Recipient, std::nullopt);
    CHECK_FALSE(feature_filter(missing));
    auto none = c;
    none.set_feature(Feature::SubjectRole, "None");
    CHECK_FALSE(feature_filter(none));
    auto optional_gone = c;
    optional_gone.set_feature(Feature::Purpose, std::nullopt);
    CHECK(feature_filter(optional_gone));
  }

  TEST_CASE("consistency filter") {
    const auto& s = seed("164.502(j)(1)(i)");
    auto c = parse_case_response(response("164.502(j)(1)(i)", 0), s);
    auto other = c;
    other.cited_norm_ids = {NormId::parse("164.506")};
    CHECK_FALSE(norm_match(other, s));
    CHECK_FALSE(consistency_filter(other, s));
    auto forbid = c;
    forbid.compliance = Compliance::Forbid;
    CHECK_FALSE(conclusion_match(forbid, s));
    auto parent = c;
    parent.cited_norm_ids = {NormId::parse("164.502(j)(1)")};
    CHECK_FALSE(norm_match(parent, s));
  }

  TEST_CASE("single candidate is selected") {
    auto r = diversity_select({{"164.502(a)", {with_background("only one")}}});
    REQUIRE(r.selected.cases.size() == 1);
    CHECK(r.selected.cases[0].background == "only one");
    CHECK(r.unfilled.empty());
  }

  TEST_CASE("min-max prefers the disjoint candidate") {
    const std::string first = "a nurse reported unsafe sterilization to the health department";
    const std::string disjoint = "clinic sold billing data for money without permission";
    for (bool dup_first : {true, false}) {
      std::vector<Case> pool = dup_first ? std::vector<Case>{with_background(first), with_background(disjoint)}
                                         : std::vector<Case>{with_background(disjoint), with_background(first)};
      std::map<std::string, std::vector<Case>> cands = {{"164.502(a)", {with_background(first)}}, {"164.502(b)", pool}};
      auto mm = diversity_select(cands);
      REQUIRE(mm.selected.cases.size() == 2);
      CHECK(mm.selected.cases[1].background == disjoint);
      SelectionOptions hr;
      hr.strategy = Selection::HighestRouge;
      CHECK(diversity_select(cands, hr).selected.cases[1].background == first);
    }
  }

  TEST_CASE("empty pools are reported") {
    auto r = diversity_select({{"164.502(a)", {}}, {"164.502(b)", {with_background("x")}}});
    CHECK(r.unfilled == std::vector<std::string>{"164.502(a)"});
    CHECK(r.selected.cases.size() == 1);
  }

  TEST_CASE("random pick without diversity is seeded") {
    std::vector<Case> pool;
    for (int i = 0; i < 10; ++i) pool.push_back(with_background("case " + std::to_string(i)));
    SelectionOptions opts;
    opts.diversity = false;
    opts.seed = 42;
    auto a = diversity_select({{"164.502(a)", pool}}, opts);
    auto b = diversity_select({{"164.502(a)", pool}}, opts);
    CHECK(a.selected.cases[0].background == b.selected.cases[0].background);
  }

  TEST_CASE("replay synthesis stage counts") {
    auto r = synth({});
    const auto& s = r.manifest["stage_counts"];
    CHECK(s["generated"] == 20);
    CHECK(s["parsed"] == 19);
    CHECK(s["after_feature"] == 15);
    CHECK(s["after_norm"] == 12);
    CHECK(s["after_conclusion"] == 9);
    CHECK(s["selected"] == 4);
    CHECK(r.cases.cases.size() == 4);
    for (const auto& c : r.cases.cases) CHECK(c.seed_norm_id.has_value());
  }

  TEST_CASE("ablations let rejected candidates through") {
    auto count = [](const SynthesisResult& r) {
      std::size_t n = 0;
      for (const auto& [_, pool] : r.pools) n += pool.size();
      return n;
    };
    auto base = synth({});
    SynthesisConfig no_conc;
    no_conc.conclusion_filter = false;
    CHECK(count(synth(no_conc)) == count(base) + 3);
    SynthesisConfig no_norm;
    no_norm.norm_filter = false;
    CHECK(count(synth(no_norm)) == count(base) + 3);
    SynthesisConfig no_feat;
    no_feat.feature_filter = false;
    CHECK(count(synth(no_feat)) == count(base) + 4);
  }

  TEST_CASE("synthesis is deterministic") {
    auto a = synth({});
    auto b = synth({});
    CHECK(cases_to_jsonl(a.cases.cases) == cases_to_jsonl(b.cases.cases));
    CHECK(a.manifest.dump() == b.manifest.dump());
  }

  TEST_CASE("case json round-trip") {
    for (const auto& c : synth({}).cases.cases) {
      auto back = Case::from_json(c.to_json());
      CHECK(back.to_json() == c.to_json());
    }
  }
}
