#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace fsbench {

enum class Sentiment { Positive, Negative, Neutral };

// Exactly "Positive", "Negative", "Neutral".
std::string_view to_string(Sentiment s) noexcept;
// Case-insensitive.
std::optional<Sentiment> parse_sentiment_word(std::string_view word) noexcept;

enum class Strategy { ZeroShot, FewShot, CoT, DKCoT, ADFCoT };

inline constexpr std::array<Strategy, 5> kAllStrategies = {Strategy::ZeroShot, Strategy::FewShot, Strategy::CoT,
                                                          Strategy::DKCoT, Strategy::ADFCoT};

// Identifier form used in config and file names ("ZeroShot", "DKCoT", ...).
std::string_view to_string(Strategy s) noexcept;
// Display form used in reports ("Zero-Shot", "DK-CoT", ...).
std::string_view display_name(Strategy s) noexcept;
// Accepts either form, case-insensitively.
std::optional<Strategy> parse_strategy(std::string_view name) noexcept;

}  // namespace fsbench
