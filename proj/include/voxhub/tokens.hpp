#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace voxhub {

/// Number of maximal whitespace-delimited runs in `text`.
std::size_t token_count(std::string_view text);

std::vector<std::string> split_tokens(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens,
                        std::string_view sep = " ");

/// Collapses whitespace runs to single spaces and trims both ends.
std::string normalize_whitespace(std::string_view text);

bool is_space(char c) noexcept;

}  // namespace voxhub
