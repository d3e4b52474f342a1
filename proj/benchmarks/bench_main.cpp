#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "repairenv/analysis.hpp"
#include "repairenv/digest.hpp"
#include "repairenv/error_category.hpp"
#include "repairenv/tool_protocol.hpp"
#include "repairenv/unified_diff.hpp"

using namespace repairenv;

namespace {

std::string message_with_calls(int calls) {
    std::string raw = "<think>Check the build script, then upgrade.</think>\nLooking at the wrapper.\n";
    for (int i = 0; i < calls; ++i)
        raw += R"(<tool_call>{"name": "write_file", "arguments": {"file_path": "src/F)" + std::to_string(i) +
               R"(.java", "updated_contents": "class F { int x = 1; }\n"}}</tool_call>)" + "\n";
    return raw;
}

FileTree source_tree(int files, int lines) {
    FileTree tree;
    for (int f = 0; f < files; ++f) {
        std::string body;
        for (int l = 0; l < lines; ++l) body += "    statement_" + std::to_string(l) + "();\n";
        tree["src/File" + std::to_string(f) + ".java"] = FileEntry{body, false};
    }
    return tree;
}

}  // namespace

static void BM_ParseAssistant(benchmark::State& state) {
    const auto raw = message_with_calls(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(parse_assistant(raw));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * raw.size()));
}
BENCHMARK(BM_ParseAssistant)->Arg(1)->Arg(8)->Arg(64);

static void BM_SerializeAssistant(benchmark::State& state) {
    const auto msg = parse_assistant(message_with_calls(static_cast<int>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(serialize_assistant(msg));
}
BENCHMARK(BM_SerializeAssistant)->Arg(1)->Arg(8)->Arg(64);

static void BM_DiffTrees(benchmark::State& state) {
    const auto before = source_tree(20, static_cast<int>(state.range(0)));
    auto after = before;
    for (auto& [path, entry] : after) entry.bytes.insert(entry.bytes.size() / 2, "    inserted();\n");
    for (auto _ : state) benchmark::DoNotOptimize(diff_trees(before, after));
}
BENCHMARK(BM_DiffTrees)->Arg(100)->Arg(1000);

static void BM_ApplyPatch(benchmark::State& state) {
    const auto before = source_tree(20, static_cast<int>(state.range(0)));
    auto after = before;
    for (auto& [path, entry] : after) entry.bytes.insert(entry.bytes.size() / 2, "    inserted();\n");
    const auto patch = diff_trees(before, after);
    for (auto _ : state) benchmark::DoNotOptimize(apply_patch(before, patch));
}
BENCHMARK(BM_ApplyPatch)->Arg(100)->Arg(1000);

static void BM_DigestTree(benchmark::State& state) {
    const auto tree = source_tree(static_cast<int>(state.range(0)), 200);
    for (auto _ : state) benchmark::DoNotOptimize(digest_tree(tree));
}
BENCHMARK(BM_DigestTree)->Arg(10)->Arg(100);

static void BM_CategorizeError(benchmark::State& state) {
    const std::vector<std::string> corpus = {
        "Could not resolve all dependencies for configuration ':compileClasspath'",
        "Permission denied while opening /var/cache/artifact",
        "Segmentation fault (core dumped)",
        "The Gradle version 5.6.4 used in the build has been deprecated",
    };
    for (auto _ : state)
        for (const auto& s : corpus) benchmark::DoNotOptimize(categorize_error(s));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * corpus.size()));
}
BENCHMARK(BM_CategorizeError);

static void BM_TransitionMatrix(benchmark::State& state) {
    const std::vector<std::string> tools = {"read_file", "write_file", "run_sh", "validate_and_build", "find_files"};
    std::vector<std::vector<std::string>> seqs(static_cast<std::size_t>(state.range(0)));
    std::size_t k = 0;
    for (auto& s : seqs)
        for (int i = 0; i < 30; ++i) s.push_back(tools[(k++ * 7) % tools.size()]);
    for (auto _ : state) benchmark::DoNotOptimize(transition_matrix(seqs));
}
BENCHMARK(BM_TransitionMatrix)->Arg(10)->Arg(1000);
BENCHMARK_MAIN();
