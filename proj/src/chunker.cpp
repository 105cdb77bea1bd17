#include "voxhub/chunker.hpp"

#include <algorithm>

#include "voxhub/error.hpp"

namespace voxhub {

namespace {

bool contains(std::string_view set, char c) { return set.find(c) != std::string_view::npos; }

Chunk make_chunk(std::vector<std::string> tokens, std::vector<std::size_t> inserted_after) {
  Chunk c;
  c.token_count = tokens.size();
  c.text = join_tokens(tokens);
  c.inserted_break_count = inserted_after.size();
  c.inserted_after = std::move(inserted_after);
  return c;
}

Chunk merge(const Chunk& a, const Chunk& b) {
  Chunk out;
  out.text = a.text + " " + b.text;
  out.token_count = a.token_count + b.token_count;
  out.inserted_after = a.inserted_after;
  for (std::size_t pos : b.inserted_after) out.inserted_after.push_back(pos + a.token_count);
  out.inserted_break_count = out.inserted_after.size();
  return out;
}

void split_oversize(const Chunk& chunk, const ChunkingConfig& cfg, std::vector<Chunk>& out) {
  if (chunk.token_count <= cfg.max_tokens) {
    out.push_back(chunk);
    return;
  }
  std::vector<std::string> tokens = split_tokens(chunk.text);
  std::size_t begin = 0;
  std::vector<std::size_t> sizes = split_sizes(tokens.size(), cfg.max_tokens);
  for (std::size_t piece = 0; piece < sizes.size(); ++piece) {
    std::size_t end = begin + sizes[piece];
    std::vector<std::string> piece_tokens(tokens.begin() + begin, tokens.begin() + end);
    std::vector<std::size_t> inserted;
    for (std::size_t pos : chunk.inserted_after)
      if (pos >= begin && pos < end) inserted.push_back(pos - begin);
    bool last = piece + 1 == sizes.size();
    char tail = piece_tokens.back().back();
    if (!last && !cfg.is_terminator(tail) && !cfg.is_soft_break(tail)) {
      piece_tokens.back().push_back(cfg.insert_mark);
      inserted.push_back(piece_tokens.size() - 1);
    }
    out.push_back(make_chunk(std::move(piece_tokens), std::move(inserted)));
    begin = end;
  }
}

std::vector<Chunk> merge_short(std::vector<Chunk> chunks, const ChunkingConfig& cfg) {
  std::vector<Chunk> out;
  std::size_t i = 0;
  while (i < chunks.size()) {
    Chunk current = chunks[i++];
    while (current.token_count < cfg.min_tokens && i < chunks.size() &&
           current.token_count + chunks[i].token_count <= cfg.max_tokens) {
      current = merge(current, chunks[i++]);
    }
    out.push_back(std::move(current));
  }
  if (out.size() >= 2) {
    Chunk& last = out.back();
    Chunk& prev = out[out.size() - 2];
    if (last.token_count < cfg.min_tokens && prev.token_count + last.token_count <= cfg.max_tokens) {
      prev = merge(prev, last);
      out.pop_back();
    }
  }
  return out;
}

}  // namespace

void ChunkingConfig::validate() const {
  if (max_tokens < std::max<std::size_t>(1, min_tokens))
    throw Error(ErrorCode::invalid_input, "max_tokens must be >= max(1, min_tokens)");
  for (char c : terminators)
    if (contains(soft_breaks, c))
      throw Error(ErrorCode::invalid_input, std::string("'") + c + "' is both terminator and soft break");
}

bool ChunkingConfig::is_terminator(char c) const noexcept { return contains(terminators, c); }
bool ChunkingConfig::is_soft_break(char c) const noexcept { return contains(soft_breaks, c); }

Chunk Chunk::from_text(std::string_view text) {
  return make_chunk(split_tokens(text), {});
}

std::vector<Chunk> segment(std::string_view text, const ChunkingConfig& cfg) {
  std::vector<Chunk> out;
  std::vector<std::string> pending;
  for (std::string& token : split_tokens(text)) {
    bool ends_sentence = cfg.is_terminator(token.back());
    pending.push_back(std::move(token));
    if (ends_sentence) {
      out.push_back(make_chunk(std::move(pending), {}));
      pending.clear();
    }
  }
  if (!pending.empty()) out.push_back(make_chunk(std::move(pending), {}));
  return out;
}

std::vector<std::size_t> split_sizes(std::size_t tokens, std::size_t max_tokens) {
  if (tokens == 0) return {};
  std::size_t pieces = (tokens + max_tokens - 1) / max_tokens;
  std::size_t base = tokens / pieces;
  std::size_t extra = tokens % pieces;
  std::vector<std::size_t> sizes(pieces, base);
  for (std::size_t i = 0; i < extra; ++i) ++sizes[i];
  return sizes;
}

std::vector<Chunk> rebalance(const std::vector<Chunk>& chunks, const ChunkingConfig& cfg) {
  cfg.validate();
  std::vector<Chunk> split;
  for (const Chunk& c : chunks) split_oversize(c, cfg, split);
  if (!cfg.merge_short) return split;
  return merge_short(std::move(split), cfg);
}

std::vector<Chunk> chunk_response(std::string_view text, const ChunkingConfig& cfg) {
  return rebalance(segment(text, cfg), cfg);
}

std::vector<std::string> original_tokens(const std::vector<Chunk>& chunks) {
  std::vector<std::string> out;
  for (const Chunk& c : chunks) {
    std::vector<std::string> tokens = split_tokens(c.text);
    for (std::size_t pos : c.inserted_after) tokens.at(pos).pop_back();
    out.insert(out.end(), tokens.begin(), tokens.end());
  }
  return out;
}

}  // namespace voxhub
