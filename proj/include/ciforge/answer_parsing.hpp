#pragma once

#include "ciforge/labels.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Helpers for reading free-form model answers: numbered question sections,
// "Key: value" feature lists and label spotting.
namespace ciforge::answers {

// Splits "Q1: ... Q2. ... **Q3**: ..." into question number -> answer text.
// Markers must start a line (after optional markdown bullets or emphasis).
// The first non-empty answer per number wins.
std::map<int, std::string> split_questions(std::string_view text);

// Same idea for "Step 1: ... Step 2: ..." transcripts; order of appearance.
std::vector<std::pair<int, std::string>> split_steps(std::string_view text);

enum class Feature {
  Sender,
  SenderRole,
  Recipient,
  RecipientRole,
  Subject,
  SubjectRole,
  Type,
  Purpose,
  InReplyTo,
  ConsentedBy,
  Belief,
};
inline constexpr std::size_t kFeatureCount = 11;
inline constexpr std::size_t kVitalFeatureCount = 7;  // Sender .. Type

// Display label ("Sender Role") and JSON key ("sender_role").
std::string_view display_name(Feature f);
std::string_view json_key(Feature f);
inline constexpr std::array<Feature, kFeatureCount> kAllFeatures = {
    Feature::Sender,  Feature::SenderRole, Feature::Recipient, Feature::RecipientRole,
    Feature::Subject, Feature::SubjectRole, Feature::Type,     Feature::Purpose,
    Feature::InReplyTo, Feature::ConsentedBy, Feature::Belief};

using FeatureValues = std::array<std::optional<std::string>, kFeatureCount>;

// Locates "Label: value" pairs by label position so values may contain
// commas. "None" sentinels become absent. First occurrence per label wins.
FeatureValues parse_features(std::string_view text);

// Earliest word-bounded, case-insensitive occurrence among `phrases`; at the
// same offset the longer phrase wins. Returns the index into `phrases`.
std::optional<std::size_t> first_phrase(std::string_view text, const std::vector<std::string_view>& phrases);

// Strips wrapping whitespace, markdown emphasis, quotes and trailing
// separators from a short answer.
std::string clean_answer(std::string_view s);

// Earliest Permit / Forbid / Not Applicable wording in an answer
// ("permitted", "forbids", "N/A" included).
std::optional<Compliance> relation_answer(std::string_view answer);

}  // namespace ciforge::answers
