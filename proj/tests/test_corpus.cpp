#include <doctest.h>

#include <random>

#include "finrag/corpus.hpp"

using namespace finrag;
using corpus::ChunkConfig;
using corpus::Document;
using corpus::Passage;
using corpus::Segment;
using corpus::SegmentKind;
using corpus::Table;

namespace {

std::string repeat_tokens(int n) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += "w" + std::to_string(i);
    }
    return out;
}

}  // namespace

TEST_CASE("parse_document maps paragraph and table to typed segments") {
    nlohmann::json j{
        {"id", "doc1"},
        {"meta", {{"company", "Acme Corp"}}},
        {"segments",
         nlohmann::json::array(
             {{{"kind", "text"}, {"text", "Revenue grew strongly."}},
              {{"kind", "table"},
               {"table",
                {{"headers", {"Year", "Revenue", "Net Income"}},
                 {"rows", {{"2020", "$5.2B", "$1.1B"}, {"2019", "$4.8B", "$0.9B"}}}}}}})}};
    Document doc = corpus::parse_document(j);
    CHECK(doc.id == "doc1");
    CHECK(doc.source_meta.at("company") == "Acme Corp");
    REQUIRE(doc.segments.size() == 2);
    CHECK(doc.segments[0].kind == SegmentKind::Text);
    CHECK(doc.segments[1].kind == SegmentKind::Table);
    CHECK(doc.segments[1].table->rows.size() == 2);
}

TEST_CASE("parse_document rejects ragged tables naming the row") {
    nlohmann::json j{
        {"id", "doc1"},
        {"segments",
         nlohmann::json::array(
             {{{"kind", "table"},
               {"table",
                {{"headers", {"A", "B", "C"}},
                 {"rows", {{"1", "2", "3"}, {"4", "5", "6"}, {"7", "8"}}}}}}})}};
    CHECK_THROWS_WITH_AS(corpus::parse_document(j),
                         doctest::Contains("row 2"), corpus::CorpusError);
}

TEST_CASE("parse_document rejects empty documents") {
    CHECK_THROWS_AS(corpus::parse_document_text(R"({"id":"d","segments":[]})"),
                    corpus::CorpusError);
    CHECK_THROWS_AS(corpus::parse_document_text(R"({"id":"d"})"), corpus::CorpusError);
}

TEST_CASE("10-K style input keeps source order and kinds") {
    nlohmann::json segments = nlohmann::json::array();
    segments.push_back({{"kind", "header"}, {"text", "Item 7. MD&A"}});
    segments.push_back({{"kind", "text"}, {"text", "Paragraph one."}});
    segments.push_back({{"kind", "text"}, {"text", "Paragraph two."}});
    segments.push_back(
        {{"kind", "table"},
         {"table",
          {{"headers", {"Year", "Revenue"}},
           {"rows", nlohmann::json::array({nlohmann::json::array({"2020", "5"})})}}}});
    segments.push_back({{"kind", "text"}, {"text", "Paragraph three."}});
    segments.push_back(
        {{"kind", "table"},
         {"table",
          {{"headers", {"Year", "Costs"}},
           {"rows", nlohmann::json::array({nlohmann::json::array({"2020", "3"})})}}}});
    Document doc = corpus::parse_document({{"id", "tenk"}, {"segments", segments}});
    REQUIRE(doc.segments.size() == 6);
    CHECK(doc.segments[0].kind == SegmentKind::Header);
    CHECK(doc.segments[1].kind == SegmentKind::Text);
    CHECK(doc.segments[2].kind == SegmentKind::Text);
    CHECK(doc.segments[3].kind == SegmentKind::Table);
    CHECK(doc.segments[4].kind == SegmentKind::Text);
    CHECK(doc.segments[5].kind == SegmentKind::Table);
}

TEST_CASE("linearize_table produces the header-prepended row form") {
    Table t;
    t.headers = {"Year", "Revenue", "Net Income"};
    t.rows = {{"2020", "$5.2B", "$1.1B"}};
    auto rows = corpus::linearize_table(t);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].text == "Year: 2020 | Revenue: $5.2B | Net Income: $1.1B");
    CHECK(rows[0].kind == corpus::PassageKind::TableRow);
}

TEST_CASE("linearize_table degenerate 1x1 table") {
    Table t;
    t.headers = {"X"};
    t.rows = {{"7"}};
    auto rows = corpus::linearize_table(t);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].text == "X: 7");
}

TEST_CASE("linearize_table emits one passage per row with positions") {
    Table t;
    t.headers = {"Year", "Revenue"};
    t.rows = {{"2018", "1"}, {"2019", "2"}, {"2020", "3"}};
    auto rows = corpus::linearize_table(t, "d", 4);
    REQUIRE(rows.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(rows[static_cast<size_t>(i)].position == i);
        CHECK(rows[static_cast<size_t>(i)].kind == corpus::PassageKind::TableRow);
        CHECK(rows[static_cast<size_t>(i)].id == "d#4#" + std::to_string(i));
    }
}

TEST_CASE("linearized rows round-trip cells exactly") {
    Table t;
    t.headers = {"Metric", "Value", "Period"};
    t.rows = {{"operating expenses", "$1,204", "Q3 2019"}, {"net income", "88.1", "FY2020"}};
    for (size_t r = 0; r < t.rows.size(); ++r) {
        auto pairs = corpus::split_linearized_row(corpus::linearize_row(t, r));
        REQUIRE(pairs.size() == t.headers.size());
        for (size_t c = 0; c < t.headers.size(); ++c) {
            CHECK(pairs[c].first == t.headers[c]);
            CHECK(pairs[c].second == t.rows[r][c]);
        }
    }
}

TEST_CASE("delimiter-bearing cells survive the escaping round trip") {
    const std::vector<std::string> nasty = {"a | b", "x: y", "a||b", "plain", "ends with |",
                                            ": starts", "a :: b"};
    Table t;
    t.headers = {"H"};
    for (const auto& cell : nasty) {
        t.rows = {{cell}};
        auto pairs = corpus::split_linearized_row(corpus::linearize_row(t, 0));
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].first == "H");
        CHECK(pairs[0].second == cell);
    }
}

TEST_CASE("chunk_text keeps short paragraphs whole") {
    auto chunks = corpus::chunk_text(Segment::make_text(repeat_tokens(300)), ChunkConfig{512, 64});
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].token_count == 300);
}

TEST_CASE("chunk_text windows cover 1000 tokens with exact 64-token overlaps") {
    const auto tokens = corpus::word_tokens(repeat_tokens(1000));
    auto chunks = corpus::chunk_text(Segment::make_text(repeat_tokens(1000)), ChunkConfig{512, 64});
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].token_count == 512);
    CHECK(chunks[1].token_count == 512);
    CHECK(chunks[2].token_count == 104);

    // Window bookkeeping: starts advance by size - overlap.
    std::vector<std::vector<std::string>> chunk_tokens;
    for (const auto& c : chunks) chunk_tokens.push_back(corpus::word_tokens(c.text));
    // Consecutive chunks share exactly the overlap suffix/prefix.
    for (size_t k = 0; k + 1 < chunk_tokens.size(); ++k) {
        const auto& a = chunk_tokens[k];
        const auto& b = chunk_tokens[k + 1];
        std::vector<std::string> suffix(a.end() - 64, a.end());
        std::vector<std::string> prefix(b.begin(), b.begin() + 64);
        CHECK(suffix == prefix);
    }
    // Union covers the source sequence: first chunk plus each chunk's
    // non-overlap tail reconstructs the original tokens.
    std::vector<std::string> rebuilt = chunk_tokens[0];
    for (size_t k = 1; k < chunk_tokens.size(); ++k) {
        rebuilt.insert(rebuilt.end(), chunk_tokens[k].begin() + 64, chunk_tokens[k].end());
    }
    CHECK(rebuilt == tokens);
}

TEST_CASE("chunk_text property: non-overlap regions concatenate to the source tokens") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = static_cast<int>(rng() % 1500);
        const int size = 32 + static_cast<int>(rng() % 200);
        const int overlap = static_cast<int>(rng() % static_cast<unsigned>(size));
        const std::string text = repeat_tokens(n);
        const auto tokens = corpus::word_tokens(text);
        auto chunks = corpus::chunk_text(Segment::make_text(text), ChunkConfig{size, overlap});
        if (n == 0) {
            CHECK(chunks.empty());
            continue;
        }
        std::vector<std::string> rebuilt;
        for (size_t k = 0; k < chunks.size(); ++k) {
            auto ct = corpus::word_tokens(chunks[k].text);
            CHECK(static_cast<int>(ct.size()) <= size);
            rebuilt.insert(rebuilt.end(), ct.begin() + (k == 0 ? 0 : overlap), ct.end());
        }
        CHECK(rebuilt == tokens);
    }
}

TEST_CASE("chunk_text of empty segment returns nothing") {
    CHECK(corpus::chunk_text(Segment::make_text(""), ChunkConfig{}).empty());
    CHECK(corpus::chunk_text(Segment::make_text("   \n \t"), ChunkConfig{}).empty());
}

TEST_CASE("ChunkConfig invariants") {
    CHECK_THROWS_AS(corpus::chunk_text(Segment::make_text("a"), ChunkConfig{512, 512}),
                    corpus::CorpusError);
    CHECK_THROWS_AS(corpus::chunk_text(Segment::make_text("a"), ChunkConfig{512, -1}),
                    corpus::CorpusError);
}

TEST_CASE("build_corpus flattens documents deterministically") {
    auto make_doc = [](const std::string& id, const std::string& text) {
        Document d;
        d.id = id;
        d.segments.push_back(Segment::make_text(text));
        return d;
    };
    std::vector<Document> docs{make_doc("a", "alpha beta"), make_doc("b", "gamma delta")};
    auto corpus1 = corpus::build_corpus(docs, ChunkConfig{});
    REQUIRE(corpus1.size() == 2);
    CHECK(corpus1[0].id == "a#0#0");
    CHECK(corpus1[1].id == "b#0#0");

    auto corpus2 = corpus::build_corpus(docs, ChunkConfig{});
    REQUIRE(corpus1.size() == corpus2.size());
    for (size_t i = 0; i < corpus1.size(); ++i) {
        CHECK(corpus::passage_to_json(corpus1[i]).dump() ==
              corpus::passage_to_json(corpus2[i]).dump());
    }
}

TEST_CASE("build_corpus rejects duplicate doc ids") {
    Document d;
    d.id = "same";
    d.segments.push_back(Segment::make_text("x"));
    CHECK_THROWS_AS(corpus::build_corpus({d, d}, ChunkConfig{}), corpus::CorpusError);
}

TEST_CASE("build_corpus over a FinQA-style page yields chunks plus one passage per table row") {
    Document d;
    d.id = "page";
    d.segments.push_back(Segment::make_text("The company discusses results."));  // pre_text
    Table t;
    t.headers = {"Year", "Provision"};
    t.rows = {{"2018", "135"}, {"2019", "142"}, {"2020", "150"}};
    d.segments.push_back(Segment::make_table(t));
    d.segments.push_back(Segment::make_text("Additional notes follow."));  // post_text

    auto passages = corpus::build_corpus({d}, ChunkConfig{});
    REQUIRE(passages.size() == 5);  // 1 chunk + 3 rows + 1 chunk
    int rows = 0, chunks = 0;
    for (const auto& p : passages) {
        if (p.kind == corpus::PassageKind::TableRow) ++rows;
        if (p.kind == corpus::PassageKind::TextChunk) ++chunks;
    }
    CHECK(rows == 3);
    CHECK(chunks == 2);
}

TEST_CASE("passage jsonl round trip") {
    Passage p;
    p.id = "d#1#2";
    p.text = "Year: 2020 | Revenue: $5.2B";
    p.kind = corpus::PassageKind::TableRow;
    p.doc_id = "d";
    p.position = 2;
    p.token_count = 6;
    auto j = corpus::passage_to_json(p);
    Passage q = corpus::passage_from_json(j);
    CHECK(q.id == p.id);
    CHECK(q.text == p.text);
    CHECK(q.kind == p.kind);
    CHECK(q.doc_id == p.doc_id);
    CHECK(q.position == p.position);
    CHECK(q.token_count == p.token_count);
}
