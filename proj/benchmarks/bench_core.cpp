#include <benchmark/benchmark.h>

#include <random>

#include "finrag/agent.hpp"
#include "finrag/index.hpp"
#include "finrag/mining.hpp"
#include "finrag/program.hpp"

using namespace finrag;

namespace {

std::vector<corpus::Passage> synthetic_passages(int n) {
    static const std::vector<std::string> vocabulary{
        "revenue",  "income",    "expenses", "assets",   "liabilities", "segment",
        "total",    "operating", "net",      "cash",     "growth",      "margin",
        "quarter",  "fiscal",    "2018",     "2019",     "2020",        "provision",
        "interest", "debt",      "capital",  "dividend", "inventory",   "goodwill"};
    std::mt19937 rng(7);
    std::vector<corpus::Passage> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::string text;
        const int len = 8 + static_cast<int>(rng() % 24);
        for (int w = 0; w < len; ++w) {
            if (w) text += ' ';
            text += vocabulary[rng() % vocabulary.size()];
        }
        corpus::Passage p;
        p.id = "p" + std::to_string(i);
        p.text = std::move(text);
        p.doc_id = "bench";
        out.push_back(std::move(p));
    }
    return out;
}

const index::Index& bench_index() {
    static const index::Index idx = [] {
        return index::build_index(synthetic_passages(2000), embed::make_hash_provider(256));
    }();
    return idx;
}

}  // namespace

static void BM_HashEmbed(benchmark::State& state) {
    embed::HashEmbeddingProvider provider(256);
    const std::string text =
        "provision for income taxes was 142 million in 2019 per the consolidated statement";
    for (auto _ : state) {
        benchmark::DoNotOptimize(provider.embed(text));
    }
}
BENCHMARK(BM_HashEmbed);

static void BM_BuildIndex(benchmark::State& state) {
    const auto passages = synthetic_passages(static_cast<int>(state.range(0)));
    auto provider = embed::make_hash_provider(256);
    for (auto _ : state) {
        benchmark::DoNotOptimize(index::build_index(passages, provider));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildIndex)->Arg(500)->Arg(2000);

static void BM_HybridRetrieve(benchmark::State& state) {
    const auto& idx = bench_index();
    index::HybridConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(index::retrieve("total segment revenue growth 2020", idx, cfg));
    }
}
BENCHMARK(BM_HybridRetrieve);

static void BM_Bm25Score(benchmark::State& state) {
    const auto& idx = bench_index();
    index::HybridConfig cfg;
    int i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            index::bm25_score("operating expenses 2019", i++ % idx.n_passages, idx, cfg));
    }
}
BENCHMARK(BM_Bm25Score);

static void BM_ParseProgram(benchmark::State& state) {
    const std::string src =
        "v_begin, v_end, n = 2847, 3214, 2\n"
        "cagr = (v_end / v_begin) ** (1/n) - 1\n"
        "result = round(cagr * 100, 2)\n";
    for (auto _ : state) {
        benchmark::DoNotOptimize(program::parse_program(src));
    }
}
BENCHMARK(BM_ParseProgram);

static void BM_ExecuteProgram(benchmark::State& state) {
    const auto prog = program::parse_program(
        "v_begin, v_end, n = 2847, 3214, 2\n"
        "cagr = (v_end / v_begin) ** (1/n) - 1\n"
        "result = round(cagr * 100, 2)\n");
    for (auto _ : state) {
        benchmark::DoNotOptimize(program::execute_program(prog));
    }
}
BENCHMARK(BM_ExecuteProgram);

static void BM_ContrastiveLoss(benchmark::State& state) {
    embed::HashEmbeddingProvider provider(256);
    const auto q = provider.embed("operating expenses in 2019");
    const auto pos = provider.embed("operating expenses were 3214 in 2019");
    std::vector<embed::Vec> negs;
    for (int i = 0; i < 8; ++i) {
        negs.push_back(provider.embed("operating expenses were " + std::to_string(i) +
                                      " in 20" + std::to_string(10 + i)));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(mining::contrastive_loss(q, pos, negs));
    }
}
BENCHMARK(BM_ContrastiveLoss);

static void BM_BufferAdd(benchmark::State& state) {
    const auto passages = synthetic_passages(64);
    for (auto _ : state) {
        agent::EvidenceBuffer buf(15);
        for (size_t i = 0; i < passages.size(); ++i) {
            buf.add(passages[i], 0.01 * static_cast<double>(i % 50), 1 + static_cast<int>(i % 3),
                    3, 0.2);
        }
        benchmark::DoNotOptimize(buf.size());
    }
}
BENCHMARK(BM_BufferAdd);

BENCHMARK_MAIN();
