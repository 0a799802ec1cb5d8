#include "pipeline.hpp"

#include <doctest.h>

using namespace ciforge;
namespace t = ciforge::testing;
using json = nlohmann::json;

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2") {
    CHECK(t::run_cli({"frobnicate"}).code == 2);
    CHECK(t::run_cli({}).code == 2);
    CHECK(t::run_cli({"evaluate", "--task", "compliance"}).code == 2);
  }

  TEST_CASE("help exits 0") {
    auto r = t::run_cli({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("synthesize") != std::string::npos);
  }

  TEST_CASE("replay without a cassette is a configuration error") {
    auto dir = t::temp_dir("nocassette");
    auto r = t::run_cli({"--out", dir.string(), "synthesize", "--mode", "replay", "--seeds",
                         t::fixture("seeds.jsonl").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find('\n') == r.err.size() - 1);
    r = t::run_cli({"--out", dir.string(), "synthesize", "--mode", "replay", "--cassette", "/nonexistent.jsonl",
                    "--seeds", t::fixture("seeds.jsonl").string()});
    CHECK(r.code == 2);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("live mode without a key") {
    auto dir = t::temp_dir("nokey");
    unsetenv("CI_FORGE_API_KEY");
    auto r = t::run_cli({"--out", dir.string(), "synthesize", "--mode", "live", "--api-base", "http://127.0.0.1:9",
                         "--seeds", t::fixture("seeds.jsonl").string()});
    CHECK(r.code == 2);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("config file validation") {
    auto dir = t::temp_dir("config");
    text::write_file(dir / "bad.json", R"({"gateway": {"mode": "replay", "bogus": 1}})");
    CHECK(t::run_cli({"--config", (dir / "bad.json").string(), "extract-norms"}).code == 2);
    text::write_file(dir / "broken.json", "{");
    CHECK(t::run_cli({"--config", (dir / "broken.json").string(), "extract-norms"}).code == 2);
    CHECK(t::run_cli({"--config", (dir / "missing.json").string(), "extract-norms"}).code == 2);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("runtime errors exit 1") {
    auto dir = t::temp_dir("runtime");
    text::write_file(dir / "empty.json", R"({"law_name": "X", "nodes": []})");
    auto r = t::run_cli({"--out", dir.string(), "ingest-statute", "--snapshot", (dir / "empty.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("EmptyDocument") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("evaluate the transcript fixture") {
    auto dir = t::temp_dir("evaluate");
    auto r = t::run_cli({"--out", dir.string(), "evaluate", "--task", "compliance", "--mode", "multi-step", "--gold",
                         t::fixture("eval_gold_compliance.jsonl").string(), "--pred",
                         t::fixture("eval_pred_compliance_multi_step.jsonl").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("64.83") != std::string::npos);
    auto report = json::parse(text::read_file(dir / "report_compliance_multi-step.json"));
    CHECK(text::fixed2(report["macro_f1"].get<double>()) == "64.83");
    CHECK(text::fixed2(report["norm_retrieval_accuracy"].get<double>()) == "53.27");
    auto manifest = json::parse(text::read_file(dir / "manifests/evaluate.json"));
    CHECK(manifest.contains("config_sha256"));
    CHECK(manifest["inputs"].size() == 2);

    auto c = t::run_cli({"--out", dir.string(), "compare", "--a", (dir / "report_compliance_multi-step.json").string(),
                         "--b", (dir / "report_compliance_multi-step.json").string()});
    CHECK(c.code == 0);
    auto deltas = json::parse(text::read_file(dir / "compare.json"));
    for (const auto& d : deltas) CHECK(d["delta"].get<double>() == 0.0);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("full offline pipeline") {
    auto dir = t::temp_dir("pipeline");
    auto r = t::run_pipeline(dir);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    for (const char* f : {"statute.json", "graph.json", "norms.jsonl", "seeds.jsonl", "cases.jsonl", "pools.jsonl",
                          "real_applicable.jsonl", "real_irrelevant.jsonl", "annotation_queue.jsonl",
                          "dataset/split_manifest.json", "instructions/recitation.jsonl", "flow_verdicts.jsonl"})
      CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
    auto synth = json::parse(text::read_file(dir / "manifests/synthesize.json"));
    const auto& counts = synth["counts"];
    std::vector<std::string> stages = {"generated", "parsed", "after_feature", "after_norm", "after_conclusion",
                                       "selected"};
    for (std::size_t i = 1; i < stages.size(); ++i)
      CHECK(counts[stages[i]].get<std::size_t>() <= counts[stages[i - 1]].get<std::size_t>());
    CHECK(text::read_lines(dir / "seeds.jsonl").size() == 4);
    CHECK(text::read_lines(dir / "cases.jsonl").size() == 4);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("ablation flag reaches the synthesis manifest") {
    auto dir = t::temp_dir("ablation");
    auto r = t::run_cli({"--out", dir.string(), "synthesize", "--mode", "replay", "--cassette",
                         t::fixture("synthesis_cassette.jsonl").string(), "--seeds", t::fixture("seeds.jsonl").string(),
                         "--no-conclusion-filter"});
    REQUIRE(r.code == 0);
    auto report = json::parse(text::read_file(dir / "synthesis_report.json"));
    CHECK(report["filters"]["conclusion"] == false);
    CHECK(report["stage_counts"]["after_conclusion"] == report["stage_counts"]["after_norm"]);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("reruns are byte-identical") {
    auto dir = t::temp_dir("rerun");
    REQUIRE(t::run_pipeline(dir).code == 0);
    auto first = t::snapshot_tree(dir);
    std::filesystem::remove_all(dir);
    REQUIRE(t::run_pipeline(dir).code == 0);
    auto second = t::snapshot_tree(dir);
    CHECK(first.size() == second.size());
    for (const auto& [name, body] : first) CHECK_MESSAGE(second[name] == body, name);
    std::filesystem::remove_all(dir);
  }
}
