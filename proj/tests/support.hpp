#pragma once

#include "ciforge/case.hpp"
#include "ciforge/evalkit.hpp"
#include "ciforge/rouge.hpp"
#include "ciforge/text.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace ciforge::testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(CIFORGE_FIXTURE_DIR) / name; }
inline std::filesystem::path data_file(const std::string& name) { return std::filesystem::path(CIFORGE_DATA_DIR) / name; }

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("ciforge-" + tag + "-" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Longest common subsequence by branch-and-bound enumeration of the common
// subsequences of `a` and `b`. Each branch either skips a[i] or takes it at
// the earliest position in b past the current match.
namespace detail {
inline void lcs_search(const rouge::TokenSeq& a, const rouge::TokenSeq& b, std::size_t i, std::size_t pos,
                       std::size_t len, std::size_t& best) {
  if (len > best) best = len;
  if (i == a.size() || pos == b.size()) return;
  if (len + std::min(a.size() - i, b.size() - pos) <= best) return;
  for (std::size_t k = pos; k < b.size(); ++k) {
    if (b[k] == a[i]) {
      lcs_search(a, b, i + 1, k + 1, len + 1, best);
      break;
    }
  }
  lcs_search(a, b, i + 1, pos, len, best);
}
}  // namespace detail

inline std::size_t brute_force_lcs(const rouge::TokenSeq& a, const rouge::TokenSeq& b) {
  std::size_t best = 0;
  detail::lcs_search(a, b, 0, 0, 0, best);
  return best;
}

inline double oracle_rouge(const rouge::TokenSeq& a, const rouge::TokenSeq& b) {
  if (a.empty() || b.empty()) return 0.0;
  double l = static_cast<double>(brute_force_lcs(a, b));
  double p = l / static_cast<double>(a.size());
  double r = l / static_cast<double>(b.size());
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

inline std::vector<std::pair<rouge::TokenSeq, rouge::TokenSeq>> random_pairs(std::size_t n, std::uint64_t seed,
                                                                              std::size_t max_len = 20) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<rouge::TokenSeq, rouge::TokenSeq>> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t vocab = 2 + static_cast<std::uint32_t>(rng() % 7);
    auto make = [&] {
      rouge::TokenSeq s(rng() % (max_len + 1));
      for (auto& t : s) t = static_cast<std::uint32_t>(rng() % vocab);
      return s;
    };
    auto a = make();
    auto b = make();
    out.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

// Plain arithmetic over a binary confusion matrix, positive class first.
struct BinaryOracle {
  double prec_pos, rec_pos, f1_pos, prec_neg, rec_neg, f1_neg, acc, macro_f1;
};

inline BinaryOracle binary_oracle(double tp, double fn, double fp, double tn) {
  auto f1 = [](double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); };
  BinaryOracle o{};
  o.prec_pos = tp + fp == 0 ? 0 : 100 * tp / (tp + fp);
  o.rec_pos = tp + fn == 0 ? 0 : 100 * tp / (tp + fn);
  o.f1_pos = f1(o.prec_pos, o.rec_pos);
  o.prec_neg = tn + fn == 0 ? 0 : 100 * tn / (tn + fn);
  o.rec_neg = tn + fp == 0 ? 0 : 100 * tn / (tn + fp);
  o.f1_neg = f1(o.prec_neg, o.rec_neg);
  o.acc = 100 * (tp + tn) / (tp + fn + fp + tn);
  o.macro_f1 = (o.f1_pos + o.f1_neg) / 2;
  return o;
}

// Full-size count fixtures: one synthetic case per seed norm, real test
// cases and a pool of irrelevant cases, all with distinct backgrounds.
struct ScaleFixture {
  std::vector<Case> synthetic;
  std::vector<Case> real_applicable;
  std::vector<Case> real_irrelevant;
  std::map<std::string, std::vector<Case>> forbid_pools;
};

inline NormId scale_norm(int i) { return NormId{164, 600 + i / 10, {std::string(1, static_cast<char>('a' + i % 10))}}; }

inline Case scale_case(const std::string& background, std::optional<Compliance> comp, Provenance prov) {
  Case c;
  c.background = background;
  c.provenance = prov;
  if (comp) {
    c.applicability = *comp == Compliance::NotApplicable ? Applicability::NotApplicable : Applicability::Applicable;
    c.compliance = comp;
  }
  return c;
}

inline ScaleFixture scale_fixture(std::size_t permit = 269, std::size_t forbid = 40, std::size_t test_permit = 80,
                                  std::size_t test_forbid = 27, std::size_t negatives = 416,
                                  std::size_t pool_size = 5) {
  ScaleFixture f;
  int norm = 0;
  for (std::size_t i = 0; i < permit; ++i, ++norm) {
    Case c = scale_case("synthetic permit case " + std::to_string(i), Compliance::Permit, Provenance::Synthetic);
    c.seed_norm_id = scale_norm(norm);
    c.cited_norm_ids = {*c.seed_norm_id};
    f.synthetic.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < forbid; ++i, ++norm) {
    NormId id = scale_norm(norm);
    auto& pool = f.forbid_pools[id.canonical()];
    for (std::size_t k = 0; k < pool_size; ++k) {
      Case c = scale_case("synthetic forbid case " + std::to_string(i) + " variant " + std::to_string(k),
                          Compliance::Forbid, Provenance::Synthetic);
      c.seed_norm_id = id;
      c.cited_norm_ids = {id};
      pool.push_back(c);
      if (k == 0) f.synthetic.push_back(std::move(c));
    }
  }
  for (std::size_t i = 0; i < test_permit + test_forbid; ++i) {
    bool p = i < test_permit;
    Case c = scale_case("real applicable case " + std::to_string(i), p ? Compliance::Permit : Compliance::Forbid,
                        Provenance::Real);
    c.cited_norm_ids = {scale_norm(static_cast<int>(i % permit))};
    f.real_applicable.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < negatives; ++i)
    f.real_irrelevant.push_back(
        scale_case("real irrelevant case " + std::to_string(i), Compliance::NotApplicable, Provenance::Real));
  return f;
}

}  // namespace ciforge::testing
