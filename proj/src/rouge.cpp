#include "ciforge/rouge.hpp"

#include "ciforge/text.hpp"

#include <algorithm>

namespace ciforge::rouge {

TokenSeq Vocabulary::encode(std::string_view text) {
  TokenSeq out;
  for (auto& tok : text::alnum_tokens(text)) {
    auto [it, inserted] = ids_.try_emplace(std::move(tok), static_cast<std::uint32_t>(ids_.size()));
    out.push_back(it->second);
  }
  return out;
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  const TokenSeq& outer = a.size() >= b.size() ? a : b;
  const TokenSeq& inner = a.size() >= b.size() ? b : a;
  std::vector<std::size_t> row(inner.size() + 1, 0);
  for (std::uint32_t x : outer) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= inner.size(); ++j) {
      std::size_t up = row[j];
      row[j] = x == inner[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[inner.size()];
}

double rouge_l_tokens(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0.0;
  double l = static_cast<double>(lcs_length(a, b));
  if (l == 0.0) return 0.0;
  double p = l / static_cast<double>(b.size());
  double r = l / static_cast<double>(a.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l(std::string_view a, std::string_view b) {
  Vocabulary v;
  TokenSeq ta = v.encode(a);
  TokenSeq tb = v.encode(b);
  return rouge_l_tokens(ta, tb);
}

namespace serial {

std::vector<double> max_similarity(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& pool) {
  std::vector<double> out(candidates.size(), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (const auto& p : pool) out[i] = std::max(out[i], rouge_l_tokens(candidates[i], p));
  }
  return out;
}

std::vector<double> similarity_matrix(const std::vector<TokenSeq>& texts) {
  const std::size_t n = texts.size();
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = rouge_l_tokens(texts[i], texts[j]);
      m[i * n + j] = s;
      m[j * n + i] = s;
    }
  }
  return m;
}

}  // namespace serial

namespace omp {

std::vector<double> max_similarity(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& pool) {
  const auto n = static_cast<long>(candidates.size());
  const auto m = static_cast<long>(pool.size());
  std::vector<double> out(candidates.size(), 0.0);
  if (n == 0 || m == 0) return out;
  // Flatten (candidate, pool) pairs so small candidate lists still spread.
  std::vector<double> scores(static_cast<std::size_t>(n * m));
#pragma omp parallel for schedule(dynamic, 8)
  for (long k = 0; k < n * m; ++k) {
    scores[static_cast<std::size_t>(k)] =
        rouge_l_tokens(candidates[static_cast<std::size_t>(k / m)], pool[static_cast<std::size_t>(k % m)]);
  }
  for (long i = 0; i < n; ++i) {
    auto row = scores.begin() + i * m;
    out[static_cast<std::size_t>(i)] = *std::max_element(row, row + m);
  }
  return out;
}

std::vector<double> similarity_matrix(const std::vector<TokenSeq>& texts) {
  const auto n = static_cast<long>(texts.size());
  std::vector<double> m(static_cast<std::size_t>(n * n), 0.0);
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    for (long j = i; j < n; ++j) {
      double s = rouge_l_tokens(texts[static_cast<std::size_t>(i)], texts[static_cast<std::size_t>(j)]);
      m[static_cast<std::size_t>(i * n + j)] = s;
      m[static_cast<std::size_t>(j * n + i)] = s;
    }
  }
  return m;
}

}  // namespace omp

}  // namespace ciforge::rouge
