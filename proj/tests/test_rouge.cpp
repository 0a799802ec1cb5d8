#include "ciforge/rouge.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace ciforge;
namespace t = ciforge::testing;

TEST_SUITE("rouge") {
  TEST_CASE("identical and disjoint texts") {
    CHECK(rouge::rouge_l("the cat sat", "the cat sat") == doctest::Approx(1.0));
    CHECK(rouge::rouge_l("alpha beta", "gamma delta") == 0.0);
    CHECK(rouge::rouge_l("", "anything") == 0.0);
    CHECK(rouge::rouge_l("", "") == 0.0);
  }

  TEST_CASE("one substituted word") {
    rouge::Vocabulary v;
    auto a = v.encode("the cat sat on the mat");
    auto b = v.encode("the cat lay on the mat");
    CHECK(rouge::lcs_length(a, b) == 5);
    CHECK(t::brute_force_lcs(a, b) == 5);
    CHECK(rouge::rouge_l_tokens(a, b) == doctest::Approx(5.0 / 6.0));
  }

  TEST_CASE("tokenization ignores case and punctuation") {
    CHECK(rouge::rouge_l("The Cat, sat.", "the cat sat") == doctest::Approx(1.0));
  }

  TEST_CASE("lcs agrees with the exhaustive oracle") {
    for (const auto& [a, b] : t::random_pairs(300, 7)) {
      REQUIRE(rouge::lcs_length(a, b) == t::brute_force_lcs(a, b));
      CHECK(rouge::rouge_l_tokens(a, b) == doctest::Approx(t::oracle_rouge(a, b)));
    }
  }

  TEST_CASE("symmetry and self-similarity") {
    for (const auto& [a, b] : t::random_pairs(200, 11)) {
      CHECK(rouge::rouge_l_tokens(a, b) == doctest::Approx(rouge::rouge_l_tokens(b, a)));
      if (!a.empty()) CHECK(rouge::rouge_l_tokens(a, a) == doctest::Approx(1.0));
      double s = rouge::rouge_l_tokens(a, b);
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }

  TEST_CASE("parallel kernels match the serial reference") {
    auto pairs = t::random_pairs(120, 3, 40);
    std::vector<rouge::TokenSeq> cands, pool;
    for (const auto& [a, b] : pairs) {
      cands.push_back(a);
      pool.push_back(b);
    }
    CHECK(rouge::omp::max_similarity(cands, pool) == rouge::serial::max_similarity(cands, pool));
    CHECK(rouge::omp::similarity_matrix(cands) == rouge::serial::similarity_matrix(cands));
    auto empty = rouge::omp::max_similarity(cands, {});
    CHECK(empty == std::vector<double>(cands.size(), 0.0));
  }
}
