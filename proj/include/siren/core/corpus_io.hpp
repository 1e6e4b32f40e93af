#pragma once

#include <filesystem>

#include "siren/core/types.hpp"

namespace siren {

// Corpus directory layout:
//   meta.json         {"d", "item_vocab", "user_vocab", "context_vocab", "seed",
//                      "counts": {"items", "sequences", "impressions"}}
//   items.jsonl       {"item_id", "id_features", "embedding": base64 LE float32}
//   sequences.jsonl   {"user_id", "events": [[item_id, timestamp], ...]}
//   impressions.jsonl {"user_id", "target_item_id", "context", "user_features",
//                      "label", "event_time"}
// Output is byte-stable: the same corpus always serializes to the same bytes.

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// Malformed lines raise ParseError with the 1-based line number; declared
// counts or dimensions that disagree with the records raise SchemaError.
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace siren
