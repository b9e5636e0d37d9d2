#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace finrag::corpus {

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Chunking budget in whitespace-delimited word tokens.
struct ChunkConfig {
    int chunk_size_tokens = 512;
    int overlap_tokens = 64;

    void validate() const;  // requires 0 <= overlap < chunk_size
};

struct Table {
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> rows;
    std::optional<std::string> caption;
};

enum class SegmentKind { Text, Table, Header };

struct Segment {
    SegmentKind kind = SegmentKind::Text;
    std::string text;             // populated for Text/Header
    std::optional<Table> table;   // populated for Table

    static Segment make_text(std::string t);
    static Segment make_header(std::string t);
    static Segment make_table(Table t);
};

struct Document {
    std::string id;
    std::vector<Segment> segments;
    std::map<std::string, std::string> source_meta;
};

enum class PassageKind { TextChunk, TableRow };

/// A retrievable unit: a text chunk or one linearized table row.
struct Passage {
    std::string id;        // "{doc_id}#{segment_index}#{position}"
    std::string text;
    PassageKind kind = PassageKind::TextChunk;
    std::string doc_id;
    int position = 0;      // chunk index or row index within the segment
    int token_count = 0;
};

std::string to_string(SegmentKind k);
std::string to_string(PassageKind k);
PassageKind passage_kind_from_string(std::string_view s);

/// Whitespace-delimited word tokens; the token definition used for all
/// chunk-size accounting.
std::vector<std::string> word_tokens(std::string_view text);
int count_tokens(std::string_view text);

std::string passage_id(std::string_view doc_id, int segment_index, int position);

/// Parses the ingestion format: {id, meta?, segments:[{kind, text? | table:{headers, rows, caption?}}]}.
/// Rejects ragged tables (naming the offending row) and empty documents.
Document parse_document(const nlohmann::json& raw);
Document parse_document_text(const std::string& json_text);

/// "h1: v1 | h2: v2 | ..." with delimiter-doubling escapes for cells that
/// contain "|" or ": ".
std::string escape_cell(std::string_view cell);
std::string unescape_cell(std::string_view cell);
std::string linearize_row(const Table& table, size_t row);

/// Rebuilds (header, value) pairs from a linearized row passage.
std::vector<std::pair<std::string, std::string>> split_linearized_row(std::string_view passage_text);

/// One passage per row, header context prepended to every row.
std::vector<Passage> linearize_table(const Table& table,
                                     const std::string& doc_id = "",
                                     int segment_index = 0);

/// Splits a text/header segment into token windows of at most
/// chunk_size_tokens, consecutive windows sharing exactly overlap_tokens.
std::vector<Passage> chunk_text(const Segment& segment, const ChunkConfig& cfg,
                                const std::string& doc_id = "",
                                int segment_index = 0);

/// Chunks all text segments and linearizes all tables. Pure function of its
/// inputs; passage ids are deterministic functions of (doc, segment, position).
std::vector<Passage> build_corpus(const std::vector<Document>& docs, const ChunkConfig& cfg);

nlohmann::json passage_to_json(const Passage& p);
Passage passage_from_json(const nlohmann::json& j);
nlohmann::json document_to_json(const Document& d);

std::vector<Passage> read_passages_jsonl(const std::string& path);
void write_passages_jsonl(const std::vector<Passage>& passages, const std::string& path);

}  // namespace finrag::corpus
