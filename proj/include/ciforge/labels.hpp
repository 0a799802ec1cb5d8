#pragma once

#include <optional>
#include <string_view>

namespace ciforge {

enum class Polarity { Permit, Forbid };
enum class Applicability { Applicable, NotApplicable };
enum class Compliance { Permit, Forbid, NotApplicable };

std::string_view to_string(Polarity p);
std::string_view to_string(Applicability a);
std::string_view to_string(Compliance c);

// Accept spaced spellings ("Not Applicable", "not applicable") as well as
// the JSON forms ("NotApplicable").
std::optional<Polarity> parse_polarity(std::string_view s);
std::optional<Applicability> parse_applicability(std::string_view s);
std::optional<Compliance> parse_compliance(std::string_view s);

inline Compliance to_compliance(Polarity p) { return p == Polarity::Permit ? Compliance::Permit : Compliance::Forbid; }

}  // namespace ciforge
