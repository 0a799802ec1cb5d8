#pragma once

#include "ciforge/statute_graph.hpp"

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

// Adapter for the federal-regulations XML rendering (DIV5 part, DIV6 subpart,
// DIV8 section, P paragraphs with "(a)(1)(i)(A)" labels).
namespace ciforge::ecfr {

struct ConvertOptions {
  std::string root_id = "HIPAA";
  std::string law_name = "HIPAA Privacy Rule";
  // Keep only this subpart letter (empty keeps all).
  std::string subpart;
};

// Errors: MalformedDocument when no part or section elements are found.
statute::StatuteSourceDocument convert_xml(std::string_view xml, const ConvertOptions& opts = {});

// Paragraph depth for a label given the labels currently open (outermost
// first), following the a / 1 / i / A / 1 / i cycle. Returns -1 when the
// label does not fit.
int paragraph_level(const std::vector<std::string>& open, const std::string& label);

// GET <base>/api/versioner/v1/full/<date>/title-<title>.xml?part=<part>.
// Errors: NetworkError.
std::string fetch_part_xml(const std::string& base_url, const std::string& date, int title, int part,
                           std::chrono::seconds timeout = std::chrono::seconds(120));

}  // namespace ciforge::ecfr
