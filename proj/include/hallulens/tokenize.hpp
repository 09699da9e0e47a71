#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hallulens {

// Whitespace tokens after Unicode-space normalization. This is the token unit
// for the 256-token passage rule and the 10-word gold-answer filter.
std::vector<std::string> whitespace_tokens(std::string_view text);
std::size_t count_whitespace_tokens(std::string_view text);

// Collapses all Unicode whitespace runs to single ASCII spaces and trims.
std::string normalize_whitespace(std::string_view text);

// Scoring tokens: lowercased maximal alphanumeric runs. Used by the lexical index.
std::vector<std::string> scoring_tokens(std::string_view text);

// Sentence boundaries. Normative rule (documented in the README):
//   a sentence ends at [.!?] followed by optional closing quotes/brackets
//   ["')\]], then at least one whitespace character, when the next character
//   is an uppercase letter, a digit, or an opening quote/bracket ["'([].
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace hallulens
