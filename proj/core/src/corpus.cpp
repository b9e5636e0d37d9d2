#include "finrag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace finrag::corpus {

void ChunkConfig::validate() const {
    if (chunk_size_tokens <= 0) {
        throw CorpusError("chunk_size_tokens must be positive");
    }
    if (overlap_tokens < 0 || overlap_tokens >= chunk_size_tokens) {
        throw CorpusError("overlap_tokens must satisfy 0 <= overlap < chunk_size");
    }
}

Segment Segment::make_text(std::string t) {
    Segment s;
    s.kind = SegmentKind::Text;
    s.text = std::move(t);
    return s;
}

Segment Segment::make_header(std::string t) {
    Segment s;
    s.kind = SegmentKind::Header;
    s.text = std::move(t);
    return s;
}

Segment Segment::make_table(Table t) {
    Segment s;
    s.kind = SegmentKind::Table;
    s.table = std::move(t);
    return s;
}

std::string to_string(SegmentKind k) {
    switch (k) {
        case SegmentKind::Text: return "text";
        case SegmentKind::Table: return "table";
        case SegmentKind::Header: return "header";
    }
    return "text";
}

std::string to_string(PassageKind k) {
    return k == PassageKind::TableRow ? "table_row" : "text_chunk";
}

PassageKind passage_kind_from_string(std::string_view s) {
    if (s == "table_row") return PassageKind::TableRow;
    if (s == "text_chunk") return PassageKind::TextChunk;
    throw CorpusError("unknown passage kind: " + std::string(s));
}

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

int count_tokens(std::string_view text) {
    return static_cast<int>(word_tokens(text).size());
}

std::string passage_id(std::string_view doc_id, int segment_index, int position) {
    std::string id(doc_id);
    id += '#';
    id += std::to_string(segment_index);
    id += '#';
    id += std::to_string(position);
    return id;
}

namespace {

Table parse_table(const nlohmann::json& jt) {
    Table t;
    if (!jt.contains("headers") || !jt["headers"].is_array() || jt["headers"].empty()) {
        throw CorpusError("table requires non-empty headers");
    }
    for (const auto& h : jt["headers"]) t.headers.push_back(h.get<std::string>());
    if (jt.contains("rows")) {
        size_t row_idx = 0;
        for (const auto& jr : jt["rows"]) {
            std::vector<std::string> row;
            for (const auto& cell : jr) {
                if (cell.is_string()) {
                    row.push_back(cell.get<std::string>());
                } else {
                    row.push_back(cell.dump());
                }
            }
            if (row.size() != t.headers.size()) {
                std::ostringstream os;
                os << "ragged table: row " << row_idx << " has " << row.size()
                   << " cells, expected " << t.headers.size();
                throw CorpusError(os.str());
            }
            t.rows.push_back(std::move(row));
            ++row_idx;
        }
    }
    if (jt.contains("caption") && jt["caption"].is_string()) {
        t.caption = jt["caption"].get<std::string>();
    }
    return t;
}

}  // namespace

Document parse_document(const nlohmann::json& raw) {
    Document doc;
    if (!raw.is_object()) throw CorpusError("document must be a JSON object");
    if (!raw.contains("id") || !raw["id"].is_string() || raw["id"].get<std::string>().empty()) {
        throw CorpusError("document requires a non-empty string id");
    }
    doc.id = raw["id"].get<std::string>();
    if (raw.contains("meta") && raw["meta"].is_object()) {
        for (auto it = raw["meta"].begin(); it != raw["meta"].end(); ++it) {
            doc.source_meta[it.key()] =
                it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
        }
    }
    if (!raw.contains("segments") || !raw["segments"].is_array() || raw["segments"].empty()) {
        throw CorpusError("empty document: " + doc.id);
    }
    for (const auto& js : raw["segments"]) {
        const std::string kind = js.value("kind", "text");
        if (kind == "table") {
            if (!js.contains("table")) throw CorpusError("table segment missing table object");
            doc.segments.push_back(Segment::make_table(parse_table(js["table"])));
        } else if (kind == "header") {
            doc.segments.push_back(Segment::make_header(js.value("text", "")));
        } else if (kind == "text") {
            doc.segments.push_back(Segment::make_text(js.value("text", "")));
        } else {
            throw CorpusError("unknown segment kind: " + kind);
        }
    }
    return doc;
}

Document parse_document_text(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    return parse_document(j);
}

std::string escape_cell(std::string_view cell) {
    std::string out;
    out.reserve(cell.size());
    for (size_t i = 0; i < cell.size(); ++i) {
        if (cell[i] == '|') {
            out += "||";
        } else if (cell[i] == ':' && i + 1 < cell.size() && cell[i + 1] == ' ') {
            out += ":: ";
            ++i;
        } else {
            out += cell[i];
        }
    }
    return out;
}

std::string unescape_cell(std::string_view cell) {
    std::string out;
    out.reserve(cell.size());
    for (size_t i = 0; i < cell.size(); ++i) {
        if (cell[i] == '|' && i + 1 < cell.size() && cell[i + 1] == '|') {
            out += '|';
            ++i;
        } else if (cell[i] == ':' && i + 2 < cell.size() && cell[i + 1] == ':' && cell[i + 2] == ' ') {
            out += ": ";
            i += 2;
        } else {
            out += cell[i];
        }
    }
    return out;
}

std::string linearize_row(const Table& table, size_t row) {
    if (row >= table.rows.size()) throw CorpusError("row index out of range");
    const auto& cells = table.rows[row];
    std::string out;
    for (size_t c = 0; c < table.headers.size(); ++c) {
        if (c > 0) out += " | ";
        out += escape_cell(table.headers[c]);
        out += ": ";
        out += escape_cell(cells[c]);
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> split_linearized_row(std::string_view text) {
    // Split on " | " separators that are not part of an escaped "||".
    std::vector<std::string> fields;
    std::string current;
    for (size_t i = 0; i < text.size();) {
        if (text[i] == '|' && i + 1 < text.size() && text[i + 1] == '|') {
            current += "||";
            i += 2;
            continue;
        }
        if (text[i] == ' ' && i + 2 < text.size() && text[i + 1] == '|' && text[i + 2] == ' ') {
            fields.push_back(current);
            current.clear();
            i += 3;
            continue;
        }
        current += text[i];
        ++i;
    }
    fields.push_back(current);

    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& f : fields) {
        // First unescaped ": " splits header from value.
        size_t split = std::string::npos;
        for (size_t i = 0; i + 1 < f.size(); ++i) {
            if (f[i] == ':' && f[i + 1] == ':' && i + 2 < f.size() && f[i + 2] == ' ') {
                ++i;  // escaped ":: "
                continue;
            }
            if (f[i] == ':' && f[i + 1] == ' ') {
                split = i;
                break;
            }
        }
        if (split == std::string::npos) {
            pairs.emplace_back(unescape_cell(f), "");
        } else {
            pairs.emplace_back(unescape_cell(f.substr(0, split)),
                               unescape_cell(f.substr(split + 2)));
        }
    }
    return pairs;
}

std::vector<Passage> linearize_table(const Table& table, const std::string& doc_id,
                                     int segment_index) {
    if (table.headers.empty()) throw CorpusError("table requires non-empty headers");
    for (size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != table.headers.size()) {
            std::ostringstream os;
            os << "ragged table: row " << r << " has " << table.rows[r].size()
               << " cells, expected " << table.headers.size();
            throw CorpusError(os.str());
        }
    }
    std::vector<Passage> out;
    out.reserve(table.rows.size());
    for (size_t r = 0; r < table.rows.size(); ++r) {
        Passage p;
        p.text = linearize_row(table, r);
        p.kind = PassageKind::TableRow;
        p.doc_id = doc_id;
        p.position = static_cast<int>(r);
        p.id = passage_id(doc_id, segment_index, p.position);
        p.token_count = count_tokens(p.text);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Passage> chunk_text(const Segment& segment, const ChunkConfig& cfg,
                                const std::string& doc_id, int segment_index) {
    if (segment.kind == SegmentKind::Table) {
        throw CorpusError("chunk_text expects a text or header segment");
    }
    cfg.validate();
    const std::vector<std::string> tokens = word_tokens(segment.text);
    std::vector<Passage> out;
    if (tokens.empty()) return out;

    const size_t n = tokens.size();
    const size_t size = static_cast<size_t>(cfg.chunk_size_tokens);
    const size_t overlap = static_cast<size_t>(cfg.overlap_tokens);
    size_t start = 0;
    int position = 0;
    while (true) {
        const size_t end = std::min(start + size, n);
        std::string text;
        for (size_t i = start; i < end; ++i) {
            if (i > start) text += ' ';
            text += tokens[i];
        }
        Passage p;
        p.text = std::move(text);
        p.kind = PassageKind::TextChunk;
        p.doc_id = doc_id;
        p.position = position;
        p.id = passage_id(doc_id, segment_index, position);
        p.token_count = static_cast<int>(end - start);
        out.push_back(std::move(p));
        if (end == n) break;
        start = end - overlap;
        ++position;
    }
    return out;
}

std::vector<Passage> build_corpus(const std::vector<Document>& docs, const ChunkConfig& cfg) {
    cfg.validate();
    std::set<std::string> seen_ids;
    for (const auto& d : docs) {
        if (!seen_ids.insert(d.id).second) {
            throw CorpusError("duplicate doc id: " + d.id);
        }
    }
    std::vector<Passage> corpus;
    for (const auto& d : docs) {
        for (size_t s = 0; s < d.segments.size(); ++s) {
            const auto& seg = d.segments[s];
            const int seg_idx = static_cast<int>(s);
            if (seg.kind == SegmentKind::Table) {
                auto rows = linearize_table(*seg.table, d.id, seg_idx);
                corpus.insert(corpus.end(), rows.begin(), rows.end());
            } else {
                auto chunks = chunk_text(seg, cfg, d.id, seg_idx);
                corpus.insert(corpus.end(), chunks.begin(), chunks.end());
            }
        }
    }
    return corpus;
}

nlohmann::json passage_to_json(const Passage& p) {
    return nlohmann::json{{"id", p.id},
                          {"text", p.text},
                          {"kind", to_string(p.kind)},
                          {"doc_id", p.doc_id},
                          {"position", p.position},
                          {"token_count", p.token_count}};
}

Passage passage_from_json(const nlohmann::json& j) {
    Passage p;
    p.id = j.at("id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.kind = passage_kind_from_string(j.at("kind").get<std::string>());
    p.doc_id = j.at("doc_id").get<std::string>();
    p.position = j.at("position").get<int>();
    p.token_count = j.at("token_count").get<int>();
    return p;
}

nlohmann::json document_to_json(const Document& d) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : d.segments) {
        nlohmann::json js{{"kind", to_string(s.kind)}};
        if (s.kind == SegmentKind::Table) {
            nlohmann::json jt{{"headers", s.table->headers}, {"rows", s.table->rows}};
            if (s.table->caption) jt["caption"] = *s.table->caption;
            js["table"] = jt;
        } else {
            js["text"] = s.text;
        }
        segs.push_back(js);
    }
    return nlohmann::json{{"id", d.id}, {"meta", d.source_meta}, {"segments", segs}};
}

std::vector<Passage> read_passages_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open passage file: " + path);
    std::vector<Passage> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(passage_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

void write_passages_jsonl(const std::vector<Passage>& passages, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CorpusError("cannot write passage file: " + path);
    for (const auto& p : passages) {
        out << passage_to_json(p).dump() << '\n';
    }
}

}  // namespace finrag::corpus
