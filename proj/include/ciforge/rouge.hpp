#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ciforge::rouge {

using TokenSeq = std::vector<std::uint32_t>;

// Interns lowercase alphanumeric tokens so LCS runs over integers.
class Vocabulary {
 public:
  TokenSeq encode(std::string_view text);
  std::size_t size() const { return ids_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
};

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

// Balanced F-measure of LCS precision and recall; 0 if either side is empty.
double rouge_l_tokens(const TokenSeq& a, const TokenSeq& b);
double rouge_l(std::string_view a, std::string_view b);

// For each candidate, the highest ROUGE-L against any text in `pool`
// (0 when the pool is empty). Both variants return identical values.
namespace serial {
std::vector<double> max_similarity(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& pool);
std::vector<double> similarity_matrix(const std::vector<TokenSeq>& texts);
}  // namespace serial

namespace omp {
std::vector<double> max_similarity(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& pool);
// Row-major n*n symmetric matrix with a unit diagonal for non-empty texts.
std::vector<double> similarity_matrix(const std::vector<TokenSeq>& texts);
}  // namespace omp

}  // namespace ciforge::rouge
