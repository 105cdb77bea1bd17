#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "voxhub/tokens.hpp"

namespace voxhub {

struct ChunkingConfig {
  std::string terminators = ".!?;:";
  std::string soft_breaks = ",";
  std::size_t max_tokens = 12;
  std::size_t min_tokens = 3;
  char insert_mark = ',';
  bool merge_short = true;

  /// Throws invalid_input unless max_tokens >= max(1, min_tokens) and the
  /// terminator and soft-break sets are disjoint.
  void validate() const;

  bool is_terminator(char c) const noexcept;
  bool is_soft_break(char c) const noexcept;
};

/// A piece of agent reply that is synthesized and streamed on its own.
///
/// `inserted_after` holds the token positions (0-based, within this chunk)
/// whose trailing character is a mark added by rebalancing rather than
/// part of the original reply.
struct Chunk {
  std::string text;
  std::size_t token_count = 0;
  std::size_t inserted_break_count = 0;
  std::vector<std::size_t> inserted_after;

  bool operator==(const Chunk&) const = default;

  static Chunk from_text(std::string_view text);
};

/// Splits after every run of terminator characters that ends a token.
std::vector<Chunk> segment(std::string_view text, const ChunkingConfig& cfg = {});

/// Splits over-long chunks into near-equal pieces (earlier pieces take the
/// remainder) and, when enabled, merges chunks shorter than min_tokens.
std::vector<Chunk> rebalance(const std::vector<Chunk>& chunks, const ChunkingConfig& cfg = {});

/// Near-equal partition of `tokens` into ceil(tokens / max_tokens) sizes,
/// non-increasing.
std::vector<std::size_t> split_sizes(std::size_t tokens, std::size_t max_tokens);

std::vector<Chunk> chunk_response(std::string_view text, const ChunkingConfig& cfg = {});

/// The original token sequence: inserted marks removed, tokens of all chunks
/// concatenated in order.
std::vector<std::string> original_tokens(const std::vector<Chunk>& chunks);

}  // namespace voxhub
