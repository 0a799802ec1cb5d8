// Rebuilds the replay cassettes under tests/fixtures from the hand-written
// responses in tests/fixtures/responses. Requests come from the same
// builders the pipeline uses, so a prompt change shows up as a fixture diff.
#include "ciforge/case_forge.hpp"
#include "ciforge/corpus.hpp"
#include "ciforge/gateway.hpp"
#include "ciforge/norms.hpp"
#include "ciforge/statute_graph.hpp"
#include "ciforge/text.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace ciforge;

namespace {

std::vector<std::string> read_texts(const fs::path& p) {
  std::vector<std::string> texts(1);
  for (const auto& line : text::split_lines(text::read_file(p))) {
    if (line == "=====") {
      texts.emplace_back();
      continue;
    }
    texts.back() += line + "\n";
  }
  for (auto& t : texts) t = text::trim(t);
  return texts;
}

gateway::ChatResponse canned(std::vector<std::string> texts) {
  gateway::ChatResponse r;
  r.texts = std::move(texts);
  r.model_name = "fixture";
  return r;
}

// 107 compliance cases (87 Permit, 20 Forbid) with multi-step transcripts:
// 72 permits and 10 forbids judged correctly, the first 57 rows citing the
// gold norm.
void write_eval_fixture(const fs::path& out) {
  const std::vector<std::string> norms = {"164.502(j)(1)(i)", "164.512(c)(1)", "164.512(e)(1)", "164.502(a)(1)(ii)",
                                          "164.502(a)(5)(ii)(b)(1)"};
  std::vector<Case> gold;
  std::string transcripts;
  for (int i = 0; i < 107; ++i) {
    bool permit = i < 87;
    bool correct = permit ? i < 72 : i < 97;
    Case c;
    c.background = "Evaluation case " + std::to_string(i) + ": a disclosure of health records between two parties.";
    c.applicability = Applicability::Applicable;
    c.compliance = permit ? Compliance::Permit : Compliance::Forbid;
    c.seed_norm_id = NormId::parse(norms[static_cast<std::size_t>(i) % norms.size()]);
    c.cited_norm_ids = {*c.seed_norm_id};
    c.provenance = Provenance::Real;
    std::string predicted_label = correct == permit ? "Permit" : "Forbid";
    std::string cited = i < 57 ? c.seed_norm_id->canonical() : "164.530(c)";
    std::string t = "Step 1: Sender: A, Sender Role: doctor, Recipient: B, Recipient Role: doctor, Subject: C, "
                    "Subject Role: patient, Type: medical records\nStep 2: " +
                    cited + "\nStep 3: " + predicted_label + ".";
    transcripts += "{\"case_id\":" + std::to_string(i) + ",\"transcript\":" + nlohmann::json(t).dump() + "}\n";
    gold.push_back(std::move(c));
  }
  save_cases(out / "eval_gold_compliance.jsonl", gold);
  text::write_file(out / "eval_pred_compliance_multi_step.jsonl", transcripts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regenerate replay fixtures"};
  std::string statute_path, fixtures, out;
  app.add_option("--statute", statute_path, "Statute snapshot")->required();
  app.add_option("--fixtures", fixtures, "Fixture directory holding responses/ and cap_snapshot.jsonl")->required();
  app.add_option("--out", out, "Where to write cassettes (default: --fixtures)");
  CLI11_PARSE(app, argc, argv);
  if (out.empty()) out = fixtures;
  fs::create_directories(out);
  const fs::path responses = fs::path(fixtures) / "responses";

  try {
    auto classify = std::make_shared<gateway::Cassette>();
    auto norms = statute::extract_norms(statute::parse_statute(statute::StatuteSourceDocument::load(statute_path)));
    statute::ClassifyOptions copts;
    for (const auto& n : norms) {
      classify->append(statute::classification_request(n, copts),
                       canned(read_texts(responses / "classify" / (n.leaf_id + ".txt"))));
      fs::path resample = responses / "classify" / (n.leaf_id + ".resample.txt");
      if (fs::exists(resample)) classify->append(statute::resample_request(n, copts), canned(read_texts(resample)));
    }
    classify->save(fs::path(out) / "classification_cassette.jsonl");

    gateway::GatewayConfig gcfg;
    gcfg.max_inflight = 1;
    gateway::ModelGateway replay(gcfg, classify);
    auto seeds = statute::seed_norms(statute::classify_norms(norms, replay, copts)).seeds;
    statute::save_norms(fs::path(out) / "seeds.jsonl", seeds);

    auto synth = std::make_shared<gateway::Cassette>();
    forge::SynthesisConfig scfg;
    for (const auto& s : seeds) {
      std::vector<std::string> texts;
      for (int i = 0; i < scfg.samples_per_norm; ++i)
        texts.push_back(read_texts(responses / "synth" / s.leaf_id / ("s" + std::to_string(i) + ".txt")).front());
      synth->append(forge::generation_request(s, scfg), canned(std::move(texts)));
    }
    synth->save(fs::path(out) / "synthesis_cassette.jsonl");

    auto extract = std::make_shared<gateway::Cassette>();
    auto source = corpus::snapshot_source(fs::path(fixtures) / "cap_snapshot.jsonl");
    auto records = corpus::length_filter(corpus::fetch_cases("HIPAA Privacy Rule", *source, {}));
    for (const auto& r : records)
      extract->append(corpus::extraction_request(r), canned(read_texts(responses / "extract" / (r.source_id + ".txt"))));
    extract->save(fs::path(out) / "extraction_cassette.jsonl");

    std::string all = text::read_file(fs::path(out) / "classification_cassette.jsonl") +
                      text::read_file(fs::path(out) / "synthesis_cassette.jsonl") +
                      text::read_file(fs::path(out) / "extraction_cassette.jsonl");
    text::write_file(fs::path(out) / "pipeline_cassette.jsonl", all);

    write_eval_fixture(out);

    std::cout << classify->size() << " classification, " << synth->size() << " synthesis, " << extract->size()
              << " extraction entries; " << seeds.size() << " seeds\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
