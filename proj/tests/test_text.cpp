#include "ciforge/answer_parsing.hpp"
#include "ciforge/error.hpp"
#include "ciforge/labels.hpp"
#include "ciforge/norm_id.hpp"
#include "ciforge/text.hpp"

#include <doctest.h>

using namespace ciforge;

TEST_SUITE("text") {
  TEST_CASE("norm id canonical form round-trips") {
    for (const char* s : {"164.502(a)(1)(ii)", "164.502", "164.502(j)(1)(i)", "164.502(a)(5)(ii)(b)(1)"}) {
      auto id = NormId::parse(s);
      CHECK(id.canonical() == s);
      CHECK(NormId::parse(id.canonical()) == id);
    }
  }

  TEST_CASE("norm id labels are lowercased and whitespace dropped") {
    auto id = NormId::parse("164.502 (a)(5)(ii)(B)(1)");
    CHECK(id.canonical() == "164.502(a)(5)(ii)(b)(1)");
    CHECK(canonicalize_norm_id("§ 164.502(A)") == "164.502(a)");
  }

  TEST_CASE("malformed ids are rejected") {
    CHECK_THROWS_AS(NormId::parse("not an id"), Error);
    CHECK_FALSE(NormId::try_parse("164").has_value());
    CHECK_FALSE(NormId::try_parse("164.502()").has_value());
  }

  TEST_CASE("prefix and parent") {
    auto leaf = NormId::parse("164.502(a)(1)(ii)");
    CHECK(NormId::parse("164.502(a)").is_prefix_of(leaf));
    CHECK(leaf.is_prefix_of(leaf));
    CHECK_FALSE(NormId::parse("164.502(b)").is_prefix_of(leaf));
    CHECK(leaf.parent().canonical() == "164.502(a)(1)");
    CHECK(leaf.section_only().canonical() == "164.502");
  }

  TEST_CASE("document order puts 164.502(b) after 164.502(a)(5)") {
    CHECK(canonical_less("164.502(a)(5)", "164.502(b)"));
    CHECK(canonical_less("164.502", "164.502(a)"));
    CHECK(canonical_less("164.502(j)", "164.504"));
    CHECK_FALSE(canonical_less("164.504", "164.502(j)"));
  }

  TEST_CASE("norm id mentions in prose") {
    auto found = find_norm_ids("as permitted by § 164.504(b) and 164.506(c)(2), not 45 CFR part 160");
    REQUIRE(found.size() == 2);
    CHECK(found[0].id.canonical() == "164.504(b)");
    CHECK(found[1].id.canonical() == "164.506(c)(2)");
  }

  TEST_CASE("paragraph references resolve against the enclosing section") {
    auto refs = find_paragraph_refs("Except as provided in paragraph (a)(5)(ii)(B)(2) of this section",
                                    NormId::parse("164.502"));
    REQUIRE(refs.size() == 1);
    CHECK(refs[0].id.canonical() == "164.502(a)(5)(ii)(b)(2)");
  }

  TEST_CASE("text helpers") {
    CHECK(text::trim("  a b \n") == "a b");
    CHECK(text::collapse_ws("a  b\t\nc") == "a b c");
    CHECK(text::word_count("one two  three") == 3);
    CHECK(text::word_count("") == 0);
    CHECK(text::is_none_sentinel(" None "));
    CHECK(text::is_none_sentinel("None."));
    CHECK_FALSE(text::is_none_sentinel("Nonetheless"));
    CHECK(text::iequals("Permit", "PERMIT"));
  }

  TEST_CASE("half-up rounding at two decimals") {
    CHECK(text::fixed2((85.21 + 44.44) / 2) == "64.83");
    CHECK(text::fixed2(99.534) == "99.53");
    CHECK(text::fixed2(100.0 * 106 / 107) == "99.07");
    CHECK(text::fixed2(0.005) == "0.01");
    CHECK(text::fixed2(0) == "0.00");
  }

  TEST_CASE("sha256 of a known string") {
    CHECK(text::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("question splitting") {
    auto q = answers::split_questions("Q1: first\nline two\n\nQ2: second\nQ10: tenth");
    REQUIRE(q.size() == 3);
    CHECK(text::trim(q[1]) == "first\nline two");
    CHECK(text::trim(q[2]) == "second");
    CHECK(text::trim(q[10]) == "tenth");
  }

  TEST_CASE("feature list parsing") {
    auto f = answers::parse_features(
        "Sender: Jane, Sender Role: Nurse, Recipient: Tom, Recipient Role: Health department official, "
        "Subject: Affected patients, Subject Role: Patients, Type: Protected health information, "
        "Purpose: Report misconduct, In Reply To: None, Consented By: None, Belief: None");
    using answers::Feature;
    CHECK(*f[static_cast<std::size_t>(Feature::Sender)] == "Jane");
    CHECK(*f[static_cast<std::size_t>(Feature::SenderRole)] == "Nurse");
    CHECK(*f[static_cast<std::size_t>(Feature::RecipientRole)] == "Health department official");
    CHECK(*f[static_cast<std::size_t>(Feature::Type)] == "Protected health information");
    CHECK_FALSE(f[static_cast<std::size_t>(Feature::InReplyTo)].has_value());
    CHECK_FALSE(f[static_cast<std::size_t>(Feature::Belief)].has_value());
  }

  TEST_CASE("relation answers") {
    CHECK(answers::relation_answer("Permit") == Compliance::Permit);
    CHECK(answers::relation_answer("The case is forbidden.") == Compliance::Forbid);
    CHECK(answers::relation_answer("Not applicable") == Compliance::NotApplicable);
    CHECK_FALSE(answers::relation_answer("unclear").has_value());
  }

  TEST_CASE("label parsing") {
    CHECK(parse_compliance("permit") == Compliance::Permit);
    CHECK(parse_applicability("Not Applicable") == Applicability::NotApplicable);
    CHECK(parse_polarity("Forbid") == Polarity::Forbid);
    CHECK_FALSE(parse_polarity("maybe").has_value());
  }
}
