// Offline acceptance run: one PASS/FAIL line per criterion, nonzero exit if
// any criterion fails.
#include "ciforge/case_forge.hpp"
#include "ciforge/corpus.hpp"
#include "ciforge/error.hpp"
#include "ciforge/evalkit.hpp"
#include "ciforge/norms.hpp"
#include "ciforge/statute_graph.hpp"
#include "pipeline.hpp"

#include <chrono>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace ciforge;
namespace t = ciforge::testing;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail.clear();
    pass = false;
    detail += (detail.empty() ? "" : "; ") + why;
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool within(double value, double expected) { return std::abs(value - expected) <= 0.01 + 1e-9; }

Outcome metric_reproduction() {
  Outcome o;
  auto start = std::chrono::steady_clock::now();
  using eval::Label;
  eval::Confusion cm = {{{Label::Applicable, Label::Applicable}, 106},
                        {{Label::Applicable, Label::NotApplicable}, 1},
                        {{Label::NotApplicable, Label::Applicable}, 0},
                        {{Label::NotApplicable, Label::NotApplicable}, 107}};
  auto r = eval::report_from_confusion(eval::Task::Applicability, cm);
  const auto& a = r.per_class.at(Label::Applicable);
  if (!within(a.precision, 100.00)) o.fail("precision " + text::fixed2(a.precision));
  if (!within(a.recall, 99.07)) o.fail("recall " + text::fixed2(a.recall));
  if (!within(a.f1, 99.53)) o.fail("f1 " + text::fixed2(a.f1));
  if (!within(r.accuracy, 99.53)) o.fail("accuracy " + text::fixed2(r.accuracy));

  // macro F1 over the two per-class F1 values as reported
  eval::EvalReport m;
  m.task = eval::Task::Compliance;
  m.per_class[Label::Permit].f1 = 85.21;
  m.per_class[Label::Forbid].f1 = 44.44;
  m.macro_f1 = (m.per_class[Label::Permit].f1 + m.per_class[Label::Forbid].f1) / 2;
  if (text::fixed2(m.macro_f1) != "64.83") o.fail("macro_f1 printed " + text::fixed2(m.macro_f1));
  // and through scoring: the transcript fixture has exactly those per-class F1s
  auto gold = load_cases(t::fixture("eval_gold_compliance.jsonl"));
  auto preds = eval::load_judgments(t::fixture("eval_pred_compliance_multi_step.jsonl"), gold.size(),
                                    eval::Task::Compliance, eval::PromptMode::MultiStep);
  auto s = eval::score(preds, gold, eval::Task::Compliance);
  if (text::fixed2(s.per_class.at(Label::Permit).f1) != "85.21" ||
      text::fixed2(s.per_class.at(Label::Forbid).f1) != "44.44" || text::fixed2(s.macro_f1) != "64.83")
    o.fail("fixture scores " + text::fixed2(s.per_class.at(Label::Permit).f1) + "/" +
           text::fixed2(s.per_class.at(Label::Forbid).f1) + "/" + text::fixed2(s.macro_f1));
  double secs = seconds_since(start);
  if (secs >= 1.0) o.fail("took " + std::to_string(secs) + "s");
  if (o.pass)
    o.detail = "Prec " + text::fixed2(a.precision) + " Rec " + text::fixed2(a.recall) + " F1 " + text::fixed2(a.f1) +
               " Acc " + text::fixed2(r.accuracy) + ", Ma-F1 " + text::fixed2(m.macro_f1);
  return o;
}

Outcome norm_retrieval() {
  Outcome o;
  double v = eval::norm_retrieval_percent(57, 107);
  if (!within(v, 53.27) || text::fixed2(v) != "53.27") o.fail("got " + text::fixed2(v));
  auto gold = load_cases(t::fixture("eval_gold_compliance.jsonl"));
  auto preds = eval::load_judgments(t::fixture("eval_pred_compliance_multi_step.jsonl"), gold.size(),
                                    eval::Task::Compliance, eval::PromptMode::MultiStep);
  eval::ScoreOptions opts;
  opts.norm_retrieval = true;
  auto r = eval::score(preds, gold, eval::Task::Compliance, opts);
  if (!r.norm_retrieval_accuracy || text::fixed2(*r.norm_retrieval_accuracy) != "53.27")
    o.fail("scored fixture gives " + (r.norm_retrieval_accuracy ? text::fixed2(*r.norm_retrieval_accuracy) : "none"));
  if (o.pass) o.detail = "57/107 -> " + text::fixed2(v) + "%";
  return o;
}

Outcome rouge_oracle() {
  Outcome o;
  auto start = std::chrono::steady_clock::now();
  std::size_t agree = 0, sym = 0, self = 0, total = 0;
  for (const auto& [a, b] : t::random_pairs(1000, 2024)) {
    ++total;
    if (rouge::lcs_length(a, b) == t::brute_force_lcs(a, b)) ++agree;
    if (rouge::rouge_l_tokens(a, b) == rouge::rouge_l_tokens(b, a)) ++sym;
    bool self_ok = (a.empty() || rouge::rouge_l_tokens(a, a) == 1.0) && (b.empty() || rouge::rouge_l_tokens(b, b) == 1.0);
    if (self_ok) ++self;
  }
  if (agree != total) o.fail(std::to_string(total - agree) + " LCS mismatches");
  if (sym != total) o.fail(std::to_string(total - sym) + " asymmetric pairs");
  if (self != total) o.fail(std::to_string(total - self) + " self-similarity failures");
  double secs = seconds_since(start);
  if (secs >= 30.0) o.fail("took " + std::to_string(secs) + "s");
  if (o.pass) o.detail = std::to_string(agree) + "/" + std::to_string(total) + " pairs agree with the oracle";
  return o;
}

const std::vector<std::pair<std::string, std::string>> kWhistleblowerChain = {
    {"HIPAA", "HIPAA Privacy Rule"},
    {"Part164", "PART 164 \u2014 SECURITY AND PRIVACY"},
    {"Part164SubpartE", "Subpart E\u2014Privacy of Individually Identifiable Health Information"},
    {"164.502", "§ 164.502 Uses and disclosures of protected health information: General rules."},
    {"164.502(j)", "(j) Standard: Disclosures by whistleblowers and workforce member crime victims"},
    {"164.502(j)(1)",
     "(1) Disclosures by whistleblowers.  A covered entity is not considered to have violated the requirements of "
     "this subpart if a member of its workforce or a business associate discloses protected health information, "
     "provided that:"},
    {"164.502(j)(1)(i)",
     "(i) The workforce member or business associate believes in good faith that the covered entity has engaged in "
     "conduct that is unlawful or otherwise violates professional or clinical standards, or that the care, services, "
     "or conditions provided by the covered entity potentially endangers one or more patients, workers, or the "
     "public."},
};

Outcome statute_pipeline() {
  Outcome o;
  auto g = statute::parse_statute(statute::StatuteSourceDocument::load(t::data_file("mini_hipaa.json")));
  if (g.nodes().size() < 30) o.fail("only " + std::to_string(g.nodes().size()) + " nodes");
  for (const char* id : {"164.502(a)(1)(ii)", "164.502(j)(1)(i)"})
    if (!g.find(id)) o.fail(std::string("missing ") + id);
  try {
    g.validate();
  } catch (const std::exception& e) {
    o.fail(std::string("tree invalid: ") + e.what());
  }
  const auto& refers = g.refer_edges();
  bool has_refer = std::any_of(refers.begin(), refers.end(), [](const statute::ReferEdge& e) {
    return e.source == "164.502(a)(1)(ii)" && e.target == "164.504(b)";
  });
  if (!has_refer) o.fail("refer edge 164.502(a)(1)(ii) -> 164.504(b) missing");
  auto norms = statute::extract_norms(g);
  if (norms.size() != g.leaf_count()) o.fail("norms " + std::to_string(norms.size()) + " != leaves");

  auto it = std::find_if(norms.begin(), norms.end(), [](const statute::Norm& n) { return n.leaf_id == "164.502(j)(1)(i)"; });
  if (it == norms.end()) {
    o.fail("no 164.502(j)(1)(i) norm");
    return o;
  }
  auto lines = text::split_lines(it->full_text);
  if (lines.size() != kWhistleblowerChain.size()) {
    o.fail("chain has " + std::to_string(lines.size()) + " segments");
  } else {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto colon = lines[i].find(':');
      std::string key = lines[i].substr(0, colon);
      std::string body = colon == std::string::npos ? "" : text::collapse_ws(lines[i].substr(colon + 1));
      if (key != kWhistleblowerChain[i].first || body != text::collapse_ws(kWhistleblowerChain[i].second))
        o.fail("segment " + std::to_string(i) + " differs: " + lines[i].substr(0, 60));
    }
  }
  if (o.pass)
    o.detail = std::to_string(g.nodes().size()) + " nodes, " + std::to_string(norms.size()) +
               " norms, whistleblower chain matches in " + std::to_string(lines.size()) + " segments";
  return o;
}

struct Candidate {
  std::string norm;
  std::string background;
  bool feature, norm_ok, conclusion;
};

Outcome filter_conformance() {
  Outcome o;
  auto seeds = statute::load_norms(t::fixture("seeds.jsonl"));
  auto cassette = gateway::Cassette::load(t::fixture("synthesis_cassette.jsonl"));

  std::vector<Candidate> cands;
  std::size_t generated = 0;
  {
    gateway::ModelGateway gw({}, cassette);
    for (const auto& s : seeds) {
      for (const auto& raw : gw.complete(forge::generation_request(s)).texts) {
        ++generated;
        try {
          auto c = forge::parse_case_response(raw, s);
          cands.push_back({canonicalize_norm_id(s.leaf_id), c.background, forge::feature_filter(c),
                           forge::norm_match(c, s), forge::conclusion_match(c, s)});
        } catch (const Error&) {
        }
      }
    }
  }
  if (generated != 20) o.fail("fixture has " + std::to_string(generated) + " candidates");

  struct Variant {
    const char* name;
    bool feature, norm, conclusion;
  };
  for (Variant v : {Variant{"default", true, true, true}, Variant{"--no-feature-filter", false, true, true},
                    Variant{"--no-norm-filter", true, false, true}, Variant{"--no-conclusion-filter", true, true, false}}) {
    forge::SynthesisConfig cfg;
    cfg.feature_filter = v.feature;
    cfg.norm_filter = v.norm;
    cfg.conclusion_filter = v.conclusion;
    gateway::ModelGateway gw({}, cassette);
    auto r = forge::run_synthesis(seeds, gw, cfg);
    std::set<std::pair<std::string, std::string>> pooled;
    for (const auto& [id, pool] : r.pools)
      for (const auto& c : pool) pooled.insert({id, c.background});
    for (const auto& c : cands) {
      bool expect = (!v.feature || c.feature) && (!v.norm || c.norm_ok) && (!v.conclusion || c.conclusion);
      bool got = pooled.count({c.norm, c.background}) != 0;
      if (expect != got) o.fail(std::string(v.name) + ": candidate for " + c.norm + (got ? " kept" : " dropped"));
    }
    const auto& s = r.manifest["stage_counts"];
    std::size_t prev = SIZE_MAX;
    for (const char* stage : {"generated", "parsed", "after_feature", "after_norm", "after_conclusion", "selected"}) {
      auto n = s[stage].get<std::size_t>();
      if (n > prev) o.fail(std::string(v.name) + ": stage " + stage + " grows");
      prev = n;
    }
  }
  std::size_t violators = std::count_if(cands.begin(), cands.end(),
                                        [](const Candidate& c) { return !(c.feature && c.norm_ok && c.conclusion); });
  if (violators == 0) o.fail("fixture exercises no filter");
  if (o.pass)
    o.detail = std::to_string(cands.size()) + " parsed candidates, " + std::to_string(violators) +
               " violators, 4 configurations consistent";
  return o;
}

Outcome diversity_selection() {
  Outcome o;
  auto bg = [](std::string s) {
    Case c;
    c.background = std::move(s);
    return c;
  };
  const std::string chosen = "a nurse reported unsafe sterilization practices to the state health department";
  const std::string disjoint = "clinic sold billing records for money without permission";
  std::map<std::string, std::vector<Case>> cands = {{"164.502(a)", {bg(chosen)}},
                                                    {"164.502(b)", {bg(chosen), bg(disjoint)}}};
  forge::SelectionOptions hr;
  hr.strategy = forge::Selection::HighestRouge;
  for (int run = 0; run < 10; ++run) {
    auto mm = forge::diversity_select(cands);
    auto hi = forge::diversity_select(cands, hr);
    if (mm.selected.cases.size() != 2 || mm.selected.cases[1].background != disjoint)
      o.fail("min-max did not pick the disjoint candidate on run " + std::to_string(run));
    if (hi.selected.cases.size() != 2 || hi.selected.cases[1].background != chosen)
      o.fail("highest-rouge did not pick the duplicate on run " + std::to_string(run));
  }
  if (o.pass) o.detail = "min-max -> disjoint, highest-rouge -> duplicate, 10/10 runs";
  return o;
}

Outcome round_trip(const std::filesystem::path& run_dir) {
  Outcome o;
  auto idx = statute::NormIndex::from_graph(
      statute::parse_statute(statute::StatuteSourceDocument::load(run_dir / "statute.json")));
  std::size_t checked = 0;
  auto check = [&](const std::string& file, eval::Task task) {
    for (const auto& c : load_cases(run_dir / "dataset" / file)) {
      for (auto mode : {eval::PromptMode::Vanilla, eval::PromptMode::MultiStep}) {
        ++checked;
        try {
          auto ex = eval::compile_example(c, task, mode, &idx);
          auto j = eval::parse_judgment(ex.response, task, mode);
          if (j.conclusion != eval::gold_label(c, task)) o.fail(file + ": label lost");
          if (task == eval::Task::Compliance && mode == eval::PromptMode::MultiStep &&
              std::find(j.norm_ids.begin(), j.norm_ids.end(), *c.seed_norm_id) == j.norm_ids.end())
            o.fail(file + ": seed norm lost");
        } catch (const std::exception& e) {
          o.fail(file + ": " + e.what());
        }
      }
    }
  };
  check("applicability_train.jsonl", eval::Task::Applicability);
  check("applicability_test.jsonl", eval::Task::Applicability);
  check("compliance_train.jsonl", eval::Task::Compliance);
  check("compliance_test.jsonl", eval::Task::Compliance);
  if (checked == 0) o.fail("empty dataset");
  if (o.pass) o.detail = std::to_string(checked) + " case/mode pairs recovered";
  return o;
}

Outcome corpus_assembly() {
  Outcome o;
  auto f = t::scale_fixture();
  auto b = corpus::assemble(f.synthetic, f.real_applicable, f.real_irrelevant);
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> rows;
  for (const auto& r : b.split_manifest) rows[{r.split, r.label, r.provenance}] = r.count;
  const std::vector<std::pair<std::tuple<std::string, std::string, std::string>, std::size_t>> want = {
      {{"applicability_train", "Applicable", "Synthetic"}, 309},
      {{"applicability_train", "NotApplicable", "Real"}, 309},
      {{"applicability_test", "Applicable", "Real"}, 107},
      {{"applicability_test", "NotApplicable", "Real"}, 107},
      {{"compliance_train", "Permit", "Synthetic"}, 269},
      {{"compliance_train", "Forbid", "Synthetic"}, 40},
      {{"compliance_test", "Permit", "Real"}, 80},
      {{"compliance_test", "Forbid", "Real"}, 27},
  };
  for (const auto& [key, n] : want) {
    if (rows[key] != n)
      o.fail(std::get<0>(key) + "/" + std::get<1>(key) + " = " + std::to_string(rows[key]) + ", want " + std::to_string(n));
  }
  if (b.split_manifest.size() != want.size()) o.fail("manifest has " + std::to_string(b.split_manifest.size()) + " rows");

  corpus::AssembleConfig cfg;
  cfg.oversample_forbid = true;
  auto ob = corpus::assemble(f.synthetic, f.real_applicable, f.real_irrelevant, cfg, f.forbid_pools);
  std::map<std::string, std::size_t> per_norm;
  std::size_t forbid = 0;
  for (const auto& c : ob.compliance_train) {
    if (c.compliance != Compliance::Forbid) continue;
    ++forbid;
    ++per_norm[c.seed_norm_id ? c.seed_norm_id->canonical() : ""];
  }
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [_, n] : per_norm) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  if (forbid != 269) o.fail("oversampled forbid = " + std::to_string(forbid));
  if (per_norm.size() != 40) o.fail("oversampling covers " + std::to_string(per_norm.size()) + " norms");
  if (hi - lo > 1) o.fail("per-norm spread " + std::to_string(lo) + ".." + std::to_string(hi));
  if (o.pass)
    o.detail = "8 split counts exact; oversampled 269 forbid over 40 norms, " + std::to_string(lo) + ".." +
               std::to_string(hi) + " each";
  return o;
}

Outcome determinism(const std::filesystem::path& dir) {
  Outcome o;
  auto first = t::run_pipeline(dir);
  if (first.code != 0) {
    o.fail("first run: " + text::trim(first.err));
    return o;
  }
  auto a = t::snapshot_tree(dir);
  std::filesystem::remove_all(dir);
  auto second = t::run_pipeline(dir);
  if (second.code != 0) {
    o.fail("second run: " + text::trim(second.err));
    return o;
  }
  auto b = t::snapshot_tree(dir);
  for (const char* must : {"cases.jsonl", "dataset/applicability_train.jsonl", "dataset/applicability_test.jsonl",
                           "dataset/compliance_train.jsonl", "dataset/compliance_test.jsonl",
                           "dataset/split_manifest.json", "report_compliance_multi-step.json",
                           "report_compliance_multi-step.txt"})
    if (!a.count(must)) o.fail(std::string("missing ") + must);
  if (a.size() != b.size()) o.fail("file sets differ");
  for (const auto& [name, body] : a)
    if (b[name] != body) o.fail(name + " differs");
  if (o.pass) o.detail = std::to_string(a.size()) + " files byte-identical across two runs";
  return o;
}

}  // namespace

int main() {
  auto run_dir = t::temp_dir("acceptance");
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric reproduction", metric_reproduction},
      {"norm-retrieval metric", norm_retrieval},
      {"ROUGE-L oracle equivalence", rouge_oracle},
      {"statute pipeline", statute_pipeline},
      {"filter conformance", filter_conformance},
      {"diversity selection", diversity_selection},
      // the determinism run leaves its outputs in run_dir for the round trip
      {"determinism", [&] { return determinism(run_dir); }},
      {"round-trip compilation", [&] { return round_trip(run_dir); }},
      {"corpus assembly at scale", corpus_assembly},
  };
  const std::map<std::string, int> number = {
      {"metric reproduction", 1}, {"norm-retrieval metric", 2}, {"ROUGE-L oracle equivalence", 3},
      {"statute pipeline", 4},    {"filter conformance", 5},    {"diversity selection", 6},
      {"round-trip compilation", 7}, {"corpus assembly at scale", 8}, {"determinism", 9}};

  std::map<int, std::string> lines;
  int failures = 0;
  for (auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    int n = number.at(name);
    lines[n] = std::string(o.pass ? "PASS" : "FAIL") + "  " + std::to_string(n) + ". " + name + ": " + o.detail;
  }
  for (const auto& [_, line] : lines) std::cout << line << "\n";
  std::cout << (9 - failures) << "/9 criteria passed\n";
  std::filesystem::remove_all(run_dir);
  return failures == 0 ? 0 : 1;
}
