#include "cli.hpp"

#include "ciforge/case.hpp"
#include "ciforge/case_forge.hpp"
#include "ciforge/ci_core.hpp"
#include "ciforge/corpus.hpp"
#include "ciforge/ecfr.hpp"
#include "ciforge/error.hpp"
#include "ciforge/evalkit.hpp"
#include "ciforge/gateway.hpp"
#include "ciforge/norms.hpp"
#include "ciforge/statute_graph.hpp"
#include "ciforge/text.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>

#ifndef CIFORGE_DATA_DIR
#define CIFORGE_DATA_DIR "data"
#endif

namespace ciforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

template <typename T>
T take(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    config_error("config key '" + key + "' has the wrong type");
  }
}

// Reads one config section, rejecting keys nobody claimed.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) config_error("config section '" + name_ + "' must be an object");
  }
  template <typename T>
  void read(const std::string& key, T& dst) {
    seen_.insert(key);
    if (j_.contains(key)) dst = take<T>(j_[key], name_ + "." + key);
  }
  template <typename T>
  void read(const std::string& key, std::optional<T>& dst) {
    seen_.insert(key);
    if (j_.contains(key) && !j_[key].is_null()) dst = take<T>(j_[key], name_ + "." + key);
  }
  void done() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) config_error("unknown config key '" + name_ + "." + k + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void validate(const PipelineConfig& c) {
  gateway::parse_mode(c.gateway_mode);
  forge::parse_selection(c.selection);
  if (c.samples_per_norm < 1) config_error("samples_per_norm must be positive");
  if (c.max_inflight < 1) config_error("max_inflight must be positive");
  if (c.retry_budget < 0 || c.classify_retry_budget < 0) config_error("retry budgets must be non-negative");
  if (c.max_results == 0) config_error("max_results must be positive");
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) config_error("config must be a JSON object");
  PipelineConfig c;
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& { return j.contains(name) ? j[name] : empty; };

  Section st(section("statute"), "statute");
  st.read("snapshot", c.statute_snapshot);
  st.read("xml", c.statute_xml);
  st.read("ecfr_base", c.ecfr_base);
  st.read("ecfr_date", c.ecfr_date);
  st.read("title", c.ecfr_title);
  st.read("part", c.ecfr_part);
  st.read("subpart", c.ecfr_subpart);
  st.read("classify_retry_budget", c.classify_retry_budget);
  st.done();

  Section gw(section("gateway"), "gateway");
  gw.read("mode", c.gateway_mode);
  gw.read("cassette", c.cassette);
  gw.read("api_base", c.api_base);
  gw.read("model", c.model);
  gw.read("max_inflight", c.max_inflight);
  gw.read("retry_budget", c.retry_budget);
  gw.done();

  Section sy(section("synthesis"), "synthesis");
  sy.read("samples_per_norm", c.samples_per_norm);
  sy.read("feature_filter", c.feature_filter);
  sy.read("norm_filter", c.norm_filter);
  sy.read("conclusion_filter", c.conclusion_filter);
  sy.read("diversity", c.diversity);
  sy.read("selection", c.selection);
  sy.done();

  Section co(section("corpus"), "corpus");
  co.read("snapshot", c.cap_snapshot);
  co.read("api_base", c.cap_api);
  co.read("keyword", c.keyword);
  co.read("negative_keyword", c.negative_keyword);
  co.read("max_results", c.max_results);
  co.done();

  Section ds(section("dataset"), "dataset");
  ds.read("train_negatives", c.train_negatives);
  ds.read("test_negatives", c.test_negatives);
  ds.read("oversample", c.oversample);
  ds.read("random_negatives", c.random_negatives);
  ds.done();

  Section ci(section("ci"), "ci");
  ci.read("role_lexicon", c.role_lexicon);
  ci.read("predicates", c.predicates);
  ci.done();

  static const std::set<std::string> top = {"statute", "gateway", "synthesis", "corpus", "dataset", "ci",
                                            "seed",    "output_dir"};
  for (const auto& [k, _] : j.items()) {
    if (!top.count(k)) config_error("unknown config key '" + k + "'");
  }
  if (j.contains("seed")) c.seed = take<std::uint64_t>(j["seed"], "seed");
  if (j.contains("output_dir")) c.output_dir = take<std::string>(j["output_dir"], "output_dir");
  validate(c);
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  if (!fs::exists(path)) config_error("config file not found: " + path);
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    config_error(path + ": " + e.what());
  }
  PipelineConfig c = from_json(j);
  // Relative paths in a config file are relative to the file.
  fs::path base = fs::absolute(path).parent_path();
  for (std::string* p : {&c.statute_snapshot, &c.statute_xml, &c.cassette, &c.cap_snapshot, &c.role_lexicon,
                         &c.predicates, &c.output_dir}) {
    if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return c;
}

json PipelineConfig::to_json() const {
  return {
      {"statute",
       {{"snapshot", statute_snapshot},
        {"xml", statute_xml},
        {"ecfr_base", ecfr_base},
        {"ecfr_date", ecfr_date},
        {"title", ecfr_title},
        {"part", ecfr_part},
        {"subpart", ecfr_subpart},
        {"classify_retry_budget", classify_retry_budget}}},
      {"gateway",
       {{"mode", gateway_mode},
        {"cassette", cassette},
        {"api_base", api_base},
        {"model", model},
        {"max_inflight", max_inflight},
        {"retry_budget", retry_budget}}},
      {"synthesis",
       {{"samples_per_norm", samples_per_norm},
        {"feature_filter", feature_filter},
        {"norm_filter", norm_filter},
        {"conclusion_filter", conclusion_filter},
        {"diversity", diversity},
        {"selection", selection}}},
      {"corpus",
       {{"snapshot", cap_snapshot},
        {"api_base", cap_api},
        {"keyword", keyword},
        {"negative_keyword", negative_keyword},
        {"max_results", max_results}}},
      {"dataset",
       {{"train_negatives", opt_json(train_negatives)},
        {"test_negatives", opt_json(test_negatives)},
        {"oversample", oversample},
        {"random_negatives", random_negatives}}},
      {"ci", {{"role_lexicon", role_lexicon}, {"predicates", predicates}}},
      {"seed", seed},
      {"output_dir", output_dir},
  };
}

std::string PipelineConfig::sha256() const { return text::sha256_hex(to_json().dump()); }

namespace {

// Per-run record. Paths are stored relative to the output directory and
// inputs by content hash so reruns elsewhere produce the same bytes.
struct Manifest {
  std::string command;
  json inputs = json::object();
  json outputs = json::array();
  json counts = json::object();
  json extra = json::object();

  void input(const std::string& role, const fs::path& p) {
    inputs[role] = fs::is_regular_file(p) ? text::sha256_hex(text::read_file(p)) : std::string("-");
  }
  void output(const fs::path& out_dir, const fs::path& p) {
    outputs.push_back(fs::proximate(p, out_dir).generic_string());
  }
};

fs::path require_file(const std::string& flag, const fs::path& p) {
  if (p.empty()) config_error(flag + " is required");
  if (!fs::is_regular_file(p)) config_error(flag + ": file not found: " + p.string());
  return p;
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

std::unique_ptr<gateway::ModelGateway> make_gateway(const PipelineConfig& cfg) {
  gateway::GatewayConfig g;
  g.mode = gateway::parse_mode(cfg.gateway_mode);
  g.apply_env();
  if (!cfg.api_base.empty()) g.api_base = cfg.api_base;
  g.model = cfg.model;
  g.max_inflight = cfg.max_inflight;
  g.retry_budget = cfg.retry_budget;

  std::shared_ptr<gateway::Cassette> cassette;
  switch (g.mode) {
    case gateway::Mode::Replay:
      if (cfg.cassette.empty()) config_error("replay mode requires --cassette");
      if (!fs::is_regular_file(cfg.cassette)) config_error("cassette not found: " + cfg.cassette);
      cassette = gateway::Cassette::load(cfg.cassette);
      break;
    case gateway::Mode::Record:
      if (cfg.cassette.empty()) config_error("record mode requires --cassette");
      cassette = gateway::Cassette::load(cfg.cassette, true);
      break;
    case gateway::Mode::Live:
      break;
  }
  if (g.mode != gateway::Mode::Replay) {
    if (g.api_key.empty()) throw Error(ErrorCode::AuthMissing, "CI_FORGE_API_KEY is not set");
    if (g.api_base.empty()) config_error("live and record modes need CI_FORGE_API_BASE or --api-base");
  }
  return std::make_unique<gateway::ModelGateway>(g, cassette);
}

statute::NormIndex load_norm_index(const fs::path& norms_path, const fs::path& statute_path) {
  // The graph also resolves inner nodes, which real cases sometimes cite.
  if (!statute_path.empty() && fs::is_regular_file(statute_path))
    return statute::NormIndex::from_graph(statute::parse_statute(statute::StatuteSourceDocument::load(statute_path)));
  if (!norms_path.empty() && fs::is_regular_file(norms_path)) return statute::NormIndex::from_norms(statute::load_norms(norms_path));
  config_error("compile needs --norms or --statute to resolve norm contents");
}

void write_json(const fs::path& p, const json& j) { text::write_file(p, j.dump(2) + "\n"); }

// --- subcommands ------------------------------------------------------------

struct StatuteArgs {
  std::string snapshot, xml;
  bool fetch = false;
};

void cmd_ingest_statute(const PipelineConfig& cfg, const StatuteArgs& a, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  std::string snapshot = a.snapshot.empty() ? cfg.statute_snapshot : a.snapshot;
  std::string xml = a.xml.empty() ? cfg.statute_xml : a.xml;

  ecfr::ConvertOptions conv;
  conv.subpart = cfg.ecfr_subpart;
  statute::StatuteSourceDocument doc;
  if (a.fetch) {
    doc = ecfr::convert_xml(ecfr::fetch_part_xml(cfg.ecfr_base, cfg.ecfr_date, cfg.ecfr_title, cfg.ecfr_part), conv);
    m.extra["source"] = "ecfr:" + cfg.ecfr_date;
  } else if (!xml.empty()) {
    m.input("xml", require_file("--xml", xml));
    doc = ecfr::convert_xml(text::read_file(xml), conv);
    m.extra["source"] = "xml";
  } else {
    m.input("snapshot", require_file("--snapshot", snapshot));
    doc = statute::StatuteSourceDocument::load(snapshot);
    m.extra["source"] = "snapshot";
  }
  auto graph = statute::parse_statute(doc);

  write_json(dir / "statute.json", doc.to_json());
  write_json(dir / "graph.json", graph.to_json());
  m.output(dir, dir / "statute.json");
  m.output(dir, dir / "graph.json");
  m.counts = {{"nodes", graph.nodes().size()},
              {"leaves", graph.leaf_count()},
              {"refer_edges", graph.refer_edges().size()},
              {"dangling_refers", graph.dangling_refers().size()}};
  out << "statute: " << graph.nodes().size() << " nodes, " << graph.leaf_count() << " leaves, "
      << graph.refer_edges().size() << " refer edges (" << graph.dangling_refers().size() << " dangling)\n";
}

void cmd_extract_norms(const PipelineConfig& cfg, const std::string& statute_in, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  fs::path in = require_file("--statute", or_default(statute_in, dir / "statute.json"));
  m.input("statute", in);
  auto graph = statute::parse_statute(statute::StatuteSourceDocument::load(in));
  auto norms = statute::extract_norms(graph);
  statute::save_norms(dir / "norms.jsonl", norms);
  m.output(dir, dir / "norms.jsonl");
  m.counts = {{"norms", norms.size()}, {"leaves", graph.leaf_count()}};
  out << "norms: " << norms.size() << "\n";
}

void cmd_classify(const PipelineConfig& cfg, const std::string& norms_in, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  fs::path in = require_file("--norms", or_default(norms_in, dir / "norms.jsonl"));
  m.input("norms", in);
  if (!cfg.cassette.empty()) m.input("cassette", cfg.cassette);
  auto gw = make_gateway(cfg);
  statute::ClassifyOptions opts;
  opts.retry_budget = cfg.classify_retry_budget;
  statute::ClassifyStats stats;
  auto classified = statute::classify_norms(statute::load_norms(in), *gw, opts, &stats);
  auto sel = statute::seed_norms(classified);

  statute::save_norms(dir / "norms_classified.jsonl", classified);
  statute::save_norms(dir / "seeds.jsonl", sel.seeds);
  m.output(dir, dir / "norms_classified.jsonl");
  m.output(dir, dir / "seeds.jsonl");

  std::size_t permit = 0, forbid = 0;
  for (const auto& s : sel.seeds) (*s.polarity == Polarity::Permit ? permit : forbid)++;
  json types = json::object();
  for (const auto& [t, n] : sel.type_counts) types[std::string(statute::to_string(t))] = n;
  m.counts = {{"norms", classified.size()}, {"seeds", sel.seeds.size()}, {"permit", permit},
              {"forbid", forbid},           {"ambiguous", sel.ambiguous.size()}, {"flagged", stats.flagged},
              {"resampled", stats.resampled}, {"types", types}};
  m.extra["ambiguous"] = sel.ambiguous;
  out << "classified " << classified.size() << " norms: " << permit << " permit seeds, " << forbid
      << " forbid seeds, " << sel.ambiguous.size() << " ambiguous, " << stats.flagged << " flagged\n";
}

void cmd_synthesize(const PipelineConfig& cfg, const std::string& seeds_in, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  fs::path in = require_file("--seeds", or_default(seeds_in, dir / "seeds.jsonl"));
  m.input("seeds", in);
  auto gw = make_gateway(cfg);
  m.input("cassette", cfg.cassette);

  forge::SynthesisConfig sc;
  sc.samples_per_norm = cfg.samples_per_norm;
  sc.feature_filter = cfg.feature_filter;
  sc.norm_filter = cfg.norm_filter;
  sc.conclusion_filter = cfg.conclusion_filter;
  sc.selection.strategy = forge::parse_selection(cfg.selection);
  sc.selection.diversity = cfg.diversity;
  sc.selection.seed = cfg.seed;
  auto seeds = statute::load_norms(in);
  for (const auto& s : seeds) {
    if (!s.polarity) throw Error(ErrorCode::InvalidInput, "seed " + s.leaf_id + " has no polarity");
  }
  auto result = forge::run_synthesis(seeds, *gw, sc);

  save_cases(dir / "cases.jsonl", result.cases.cases);
  std::vector<Case> pooled;
  for (const auto& [_, pool] : result.pools) pooled.insert(pooled.end(), pool.begin(), pool.end());
  save_cases(dir / "pools.jsonl", pooled);
  write_json(dir / "synthesis_report.json", result.manifest);
  m.output(dir, dir / "cases.jsonl");
  m.output(dir, dir / "pools.jsonl");
  m.output(dir, dir / "synthesis_report.json");
  m.counts = result.manifest.at("stage_counts");
  m.extra["unfilled"] = result.manifest.at("unfilled");

  const auto& sc_json = result.manifest.at("stage_counts");
  for (const char* k : {"seeds", "generated", "parsed", "after_feature", "after_norm", "after_conclusion", "selected"})
    out << k << ": " << sc_json.at(k).get<std::size_t>() << "\n";
}

struct CapArgs {
  std::string overrides;
};

void cmd_ingest_cap(const PipelineConfig& cfg, const CapArgs& a, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  std::unique_ptr<corpus::CaseSource> source;
  if (!cfg.cap_snapshot.empty()) {
    m.input("snapshot", require_file("--snapshot", cfg.cap_snapshot));
    source = corpus::snapshot_source(cfg.cap_snapshot);
  } else if (!cfg.cap_api.empty()) {
    const char* token = std::getenv("CI_FORGE_CAP_TOKEN");
    source = corpus::http_source(cfg.cap_api, token ? token : "");
  } else {
    config_error("ingest-cap needs --snapshot or --api");
  }
  auto gw = make_gateway(cfg);
  m.input("cassette", cfg.cassette);

  corpus::FetchLimits limits;
  limits.max_results = cfg.max_results;
  auto relevant_raw = corpus::fetch_cases(cfg.keyword, *source, limits);
  auto relevant = corpus::length_filter(relevant_raw);
  auto negatives_raw = corpus::fetch_cases(cfg.negative_keyword, *source, limits);
  auto negatives = corpus::length_filter(negatives_raw);

  auto extractions = corpus::extract_real_cases(relevant, *gw);
  std::size_t reviewed_drop = 0;
  if (!a.overrides.empty()) {
    m.input("overrides", require_file("--overrides", a.overrides));
    std::size_t before = extractions.size();
    extractions = corpus::apply_overrides(std::move(extractions), a.overrides);
    reviewed_drop = before - extractions.size();
  }

  std::set<std::string> relevant_ids;
  for (const auto& r : relevant) relevant_ids.insert(r.source_id);
  std::vector<Case> applicable, irrelevant;
  std::size_t flagged = 0, extracted_na = 0;
  for (const auto& ex : extractions) {
    if (ex.flags.any()) ++flagged;
    if (ex.c.applicability == Applicability::Applicable && ex.c.compliance &&
        *ex.c.compliance != Compliance::NotApplicable) {
      applicable.push_back(ex.c);
    } else {
      ++extracted_na;
    }
  }
  std::size_t overlap = 0;
  for (const auto& r : negatives) {
    if (relevant_ids.count(r.source_id)) {
      ++overlap;
      continue;
    }
    irrelevant.push_back(corpus::negative_case(r));
  }
  // Relevant-keyword hits judged not applicable go after the keyword negatives.
  for (const auto& ex : extractions) {
    if (!(ex.c.applicability == Applicability::Applicable && ex.c.compliance &&
          *ex.c.compliance != Compliance::NotApplicable)) {
      Case c = ex.c;
      c.applicability = Applicability::NotApplicable;
      c.compliance = Compliance::NotApplicable;
      irrelevant.push_back(std::move(c));
    }
  }

  corpus::save_records(dir / "real_records.jsonl", relevant);
  save_cases(dir / "real_applicable.jsonl", applicable);
  save_cases(dir / "real_irrelevant.jsonl", irrelevant);
  corpus::save_annotation_queue(dir / "annotation_queue.jsonl", extractions);
  for (const char* f : {"real_records.jsonl", "real_applicable.jsonl", "real_irrelevant.jsonl", "annotation_queue.jsonl"})
    m.output(dir, dir / f);

  std::size_t permit = 0, forbid = 0;
  for (const auto& c : applicable) (*c.compliance == Compliance::Permit ? permit : forbid)++;
  m.counts = {{"fetched_relevant", relevant_raw.size()},
              {"after_length_filter", relevant.size()},
              {"fetched_negative", negatives_raw.size()},
              {"negatives_after_length_filter", negatives.size()},
              {"negatives_overlapping_relevant", overlap},
              {"dropped_by_review", reviewed_drop},
              {"extracted", extractions.size()},
              {"extracted_not_applicable", extracted_na},
              {"flagged", flagged},
              {"applicable", applicable.size()},
              {"permit", permit},
              {"forbid", forbid},
              {"irrelevant", irrelevant.size()}};
  out << "real cases: " << applicable.size() << " applicable (" << permit << " permit, " << forbid << " forbid), "
      << irrelevant.size() << " irrelevant, " << flagged << " flagged for review\n";
}

struct AssembleArgs {
  std::string synthetic, real_applicable, real_irrelevant, forbid_pool;
};

void cmd_assemble(const PipelineConfig& cfg, const AssembleArgs& a, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  fs::path syn = require_file("--synthetic", or_default(a.synthetic, dir / "cases.jsonl"));
  fs::path app = require_file("--real-applicable", or_default(a.real_applicable, dir / "real_applicable.jsonl"));
  fs::path irr = require_file("--real-irrelevant", or_default(a.real_irrelevant, dir / "real_irrelevant.jsonl"));
  m.input("synthetic", syn);
  m.input("real_applicable", app);
  m.input("real_irrelevant", irr);

  corpus::AssembleConfig ac;
  ac.train_negatives = cfg.train_negatives;
  ac.test_negatives = cfg.test_negatives;
  ac.random_negatives = cfg.random_negatives;
  ac.oversample_forbid = cfg.oversample;
  ac.seed = cfg.seed;

  std::map<std::string, std::vector<Case>> pools;
  if (cfg.oversample) {
    fs::path pool_path = or_default(a.forbid_pool, dir / "pools.jsonl");
    if (fs::is_regular_file(pool_path)) {
      m.input("forbid_pool", pool_path);
      for (auto& c : load_cases(pool_path)) {
        if (c.seed_norm_id && c.compliance == Compliance::Forbid) pools[c.seed_norm_id->canonical()].push_back(std::move(c));
      }
    } else if (!a.forbid_pool.empty()) {
      config_error("--forbid-pool: file not found: " + a.forbid_pool);
    }
  }

  auto bundle = corpus::assemble(load_cases(syn), load_cases(app), load_cases(irr), ac, pools);
  fs::path ds = dir / "dataset";
  fs::create_directories(ds);
  bundle.save(ds);
  for (const char* f : {"applicability_train.jsonl", "applicability_test.jsonl", "compliance_train.jsonl",
                        "compliance_test.jsonl", "split_manifest.json"})
    m.output(dir, ds / f);
  m.counts = bundle.manifest_json();
  for (const auto& row : bundle.split_manifest)
    out << row.split << " " << row.label << " " << row.provenance << ": " << row.count << "\n";
}

struct CompileArgs {
  std::string dataset, norms, statute, mode = "both";
  bool recitation = false;
  bool render = false;
};

void cmd_compile(const PipelineConfig& cfg, const CompileArgs& a, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  fs::path ds = or_default(a.dataset, dir / "dataset");
  fs::path norms_path = or_default(a.norms, dir / "norms.jsonl");
  fs::path statute_path = or_default(a.statute, dir / "statute.json");
  auto index = load_norm_index(norms_path, statute_path);

  std::vector<eval::PromptMode> modes;
  if (a.mode == "both") {
    modes = {eval::PromptMode::Vanilla, eval::PromptMode::MultiStep};
  } else {
    modes = {eval::parse_prompt_mode(a.mode)};
  }
  fs::path inst = dir / "instructions";
  fs::create_directories(inst);

  for (const char* task_name : {"applicability", "compliance"}) {
    eval::Task task = eval::parse_task(task_name);
    for (const char* split : {"train", "test"}) {
      std::string stem = std::string(task_name) + "_" + split;
      fs::path in = require_file("--dataset", ds / (stem + ".jsonl"));
      m.input(stem, in);
      auto cases = load_cases(in);
      for (auto mode : modes) {
        std::string mode_name(eval::to_string(mode));
        std::replace(mode_name.begin(), mode_name.end(), '-', '_');
        std::string body, rendered;
        for (const auto& c : cases) {
          auto ex = eval::compile_example(c, task, mode, &index);
          body += ex.to_json().dump() + "\n";
          if (a.render) rendered += eval::render_prompt(ex) + "\n" + ex.response + "\n\n";
        }
        fs::path p = inst / (stem + "_" + mode_name + ".jsonl");
        text::write_file(p, body);
        m.output(dir, p);
        if (a.render) {
          fs::path r = inst / (stem + "_" + mode_name + ".txt");
          text::write_file(r, rendered);
          m.output(dir, r);
        }
        m.counts[stem + "_" + mode_name] = cases.size();
      }
    }
  }

  if (a.recitation) {
    if (!fs::is_regular_file(norms_path)) config_error("--recitation needs --norms");
    m.input("norms", norms_path);
    std::string body;
    auto norms = statute::load_norms(norms_path);
    for (const auto& n : norms) body += eval::compile_recitation(n.leaf_id, n.full_text).to_json().dump() + "\n";
    text::write_file(inst / "recitation.jsonl", body);
    m.output(dir, inst / "recitation.jsonl");
    m.counts["recitation"] = norms.size();
  }
  for (const auto& [k, v] : m.counts.items()) out << k << ": " << v.get<std::size_t>() << "\n";
}

struct EvaluateArgs {
  std::string task, mode = "vanilla", gold, pred, norm_credit = "containment", report;
  bool norm_retrieval = false;
};

void cmd_evaluate(const PipelineConfig& cfg, const EvaluateArgs& a, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  auto task = eval::parse_task(a.task);
  auto mode = eval::parse_prompt_mode(a.mode);
  if (task == eval::Task::Recitation) config_error("evaluate supports applicability and compliance");
  fs::path gold = require_file("--gold", a.gold);
  fs::path pred = require_file("--pred", a.pred);
  m.input("gold", gold);
  m.input("pred", pred);

  auto golds = load_cases(gold);
  auto preds = eval::load_judgments(pred, golds.size(), task, mode);
  eval::ScoreOptions so;
  so.norm_retrieval = a.norm_retrieval || (task == eval::Task::Compliance && mode == eval::PromptMode::MultiStep);
  so.credit = eval::parse_norm_credit(a.norm_credit);
  auto report = eval::score(preds, golds, task, so);

  fs::path rp = or_default(a.report, dir / ("report_" + a.task + "_" + std::string(eval::to_string(mode)) + ".json"));
  if (rp.has_parent_path()) fs::create_directories(rp.parent_path());
  write_json(rp, report.to_json());
  fs::path tp = rp;
  tp.replace_extension(".txt");
  text::write_file(tp, report.to_table());
  m.output(dir, rp);
  m.output(dir, tp);
  m.counts = {{"total", report.total}};
  m.extra["macro_f1"] = text::fixed2(report.macro_f1);
  m.extra["accuracy"] = text::fixed2(report.accuracy);
  out << report.to_table();
}

struct CompareArgs {
  std::string a, b, out_path;
  bool pre_rounded = false;
};

void cmd_compare(const PipelineConfig& cfg, const CompareArgs& args, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  fs::path pa = require_file("--a", args.a);
  fs::path pb = require_file("--b", args.b);
  m.input("a", pa);
  m.input("b", pb);
  auto ra = eval::EvalReport::from_json(json::parse(text::read_file(pa)));
  auto rb = eval::EvalReport::from_json(json::parse(text::read_file(pb)));
  auto deltas = eval::compare_reports(ra, rb, args.pre_rounded ? eval::DeltaMode::PreRounded : eval::DeltaMode::FullPrecision);
  fs::path op = or_default(args.out_path, dir / "compare.json");
  if (op.has_parent_path()) fs::create_directories(op.parent_path());
  write_json(op, eval::deltas_to_json(deltas));
  m.output(dir, op);
  m.counts = {{"metrics", deltas.size()}};
  out << eval::deltas_to_table(deltas);
}

struct FlowArgs {
  std::string cases;
};

void cmd_check_flow(const PipelineConfig& cfg, const FlowArgs& a, Manifest& m, std::ostream& out) {
  fs::path dir = cfg.output_dir;
  fs::path lex_path = or_default(cfg.role_lexicon, fs::path(CIFORGE_DATA_DIR) / "role_lexicon.json");
  fs::path pred_path = or_default(cfg.predicates, fs::path(CIFORGE_DATA_DIR) / "predicates.json");
  fs::path in = require_file("--cases", a.cases);
  m.input("cases", in);
  m.input("role_lexicon", require_file("--role-lexicon", lex_path));
  m.input("predicates", require_file("--predicates", pred_path));
  auto roles = ci::RoleLexicon::load(lex_path);
  auto preds = ci::load_predicates(pred_path);

  std::string body;
  std::map<std::string, std::size_t> tally;
  auto cases = load_cases(in);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    json row = {{"case_id", i}};
    auto flow = cases[i].to_flow();
    if (!flow.valid()) {
      row["verdict"] = "Invalid";
      tally["Invalid"]++;
    } else {
      std::vector<ci::FlowVerdict> verdicts;
      json per = json::object();
      for (const auto& p : preds) {
        auto v = ci::check_flow(flow, p, roles);
        verdicts.push_back(v);
        if (v != ci::FlowVerdict::NotApplicable) per[p.norm_id.canonical()] = ci::to_string(v);
      }
      auto agg = ci::aggregate_verdicts(verdicts);
      row["norms"] = per;
      row["verdict"] = ci::to_string(agg);
      tally[std::string(ci::to_string(agg))]++;
    }
    out << i << "\t" << row["verdict"].get<std::string>() << "\n";
    body += row.dump() + "\n";
  }
  text::write_file(dir / "flow_verdicts.jsonl", body);
  m.output(dir, dir / "flow_verdicts.jsonl");
  m.counts = tally;
  m.counts["cases"] = cases.size();
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Config:
    case ErrorCode::AuthMissing:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ci-forge: statute norms, synthetic cases, datasets and evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  std::string config_path, out_dir, mode, cassette, api_base, selection;
  int samples = 0;
  std::uint64_t seed = 0;
  auto* o_config = app.add_option("--config", config_path, "Pipeline config (JSON)");
  auto* o_out = app.add_option("--out", out_dir, "Output directory (default: out)");
  auto* o_seed = app.add_option("--seed", seed, "Random seed");
  (void)o_config;

  auto gateway_opts = [&](CLI::App* sc) {
    sc->add_option("--mode", mode, "Gateway mode: live | record | replay");
    sc->add_option("--cassette", cassette, "Cassette JSONL for record/replay");
    sc->add_option("--api-base", api_base, "Chat endpoint base URL (overrides CI_FORGE_API_BASE)");
  };

  StatuteArgs statute_args;
  auto* s_ingest = app.add_subcommand("ingest-statute", "Load a statute snapshot or regulation XML into a graph");
  s_ingest->add_option("--snapshot", statute_args.snapshot, "Statute document JSON {law_name, nodes}");
  s_ingest->add_option("--xml", statute_args.xml, "Regulation XML file (DIV5/DIV6/DIV8 layout)");
  s_ingest->add_flag("--fetch", statute_args.fetch, "Download the part from the regulations API");

  std::string statute_in;
  auto* s_extract = app.add_subcommand("extract-norms", "One norm per leaf, root-first path text");
  s_extract->add_option("--statute", statute_in, "Statute document (default: <out>/statute.json)");

  std::string norms_in;
  auto* s_classify = app.add_subcommand("classify-norms", "Type norms through the gateway and pick seeds");
  s_classify->add_option("--norms", norms_in, "Norms JSONL (default: <out>/norms.jsonl)");
  gateway_opts(s_classify);

  std::string seeds_in;
  bool no_feature = false, no_norm = false, no_conclusion = false, no_diversity = false;
  auto* s_synth = app.add_subcommand("synthesize", "Generate, filter and select one case per seed norm");
  s_synth->add_option("--seeds", seeds_in, "Seed norms JSONL (default: <out>/seeds.jsonl)");
  gateway_opts(s_synth);
  auto* o_samples = s_synth->add_option("--samples", samples, "Samples per norm");
  s_synth->add_flag("--no-feature-filter", no_feature, "Keep cases missing vital features");
  s_synth->add_flag("--no-norm-filter", no_norm, "Keep cases not citing the seed norm");
  s_synth->add_flag("--no-conclusion-filter", no_conclusion, "Keep cases whose conclusion disagrees with the seed");
  s_synth->add_flag("--no-diversity", no_diversity, "Pick a seeded random candidate instead of ROUGE-L ranking");
  s_synth->add_option("--selection", selection, "min-max | highest-rouge");

  CapArgs cap_args;
  std::string cap_snapshot, cap_api, keyword, negative_keyword;
  std::size_t max_results = 0;
  auto* s_cap = app.add_subcommand("ingest-cap", "Fetch, length-filter and extract real court cases");
  s_cap->add_option("--snapshot", cap_snapshot, "Case snapshot JSONL {source_id, court, decision_text, query_keyword}");
  s_cap->add_option("--api", cap_api, "Case-law API base URL (token from CI_FORGE_CAP_TOKEN)");
  s_cap->add_option("--keyword", keyword, "Query for relevant cases");
  s_cap->add_option("--negatives", negative_keyword, "Query for irrelevant cases");
  auto* o_max = s_cap->add_option("--max-results", max_results, "Cap per query");
  s_cap->add_option("--overrides", cap_args.overrides, "Reviewed annotation file (keep/drop/replace)");
  gateway_opts(s_cap);

  AssembleArgs asm_args;
  bool oversample = false, random_negatives = false;
  std::size_t train_neg = 0, test_neg = 0;
  auto* s_asm = app.add_subcommand("assemble", "Build applicability and compliance train/test splits");
  s_asm->add_option("--synthetic", asm_args.synthetic, "Synthetic cases (default: <out>/cases.jsonl)");
  s_asm->add_option("--real-applicable", asm_args.real_applicable, "Real applicable cases");
  s_asm->add_option("--real-irrelevant", asm_args.real_irrelevant, "Real irrelevant cases, relevance order");
  s_asm->add_option("--forbid-pool", asm_args.forbid_pool, "Extra forbid candidates per norm (default: <out>/pools.jsonl)");
  s_asm->add_flag("--oversample", oversample, "Oversample forbid training cases up to the permit count");
  s_asm->add_flag("--random-negatives", random_negatives, "Sample negatives with the seed instead of relevance order");
  auto* o_train_neg = s_asm->add_option("--train-negatives", train_neg, "Applicability train negatives");
  auto* o_test_neg = s_asm->add_option("--test-negatives", test_neg, "Applicability test negatives");

  CompileArgs comp_args;
  auto* s_comp = app.add_subcommand("compile", "Render instruction/response training files");
  s_comp->add_option("--dataset", comp_args.dataset, "Dataset directory (default: <out>/dataset)");
  s_comp->add_option("--norms", comp_args.norms, "Norms JSONL, used when no statute document is found");
  s_comp->add_option("--statute", comp_args.statute, "Statute document for norm contents (default: <out>/statute.json)");
  s_comp->add_option("--mode,--prompt-mode", comp_args.mode, "vanilla | multi-step | both");
  s_comp->add_flag("--recitation", comp_args.recitation, "Also emit law-recitation examples");
  s_comp->add_flag("--render", comp_args.render, "Also write rendered plain-text prompts");

  EvaluateArgs eval_args;
  auto* s_eval = app.add_subcommand("evaluate", "Score judgment transcripts against gold cases");
  s_eval->add_option("--task", eval_args.task, "applicability | compliance")->required();
  s_eval->add_option("--mode,--prompt-mode", eval_args.mode, "vanilla | multi-step");
  s_eval->add_option("--gold", eval_args.gold, "Gold cases JSONL")->required();
  s_eval->add_option("--pred", eval_args.pred, "Transcripts JSONL {case_id, transcript}")->required();
  s_eval->add_option("--norm-credit", eval_args.norm_credit, "containment | exact-set | prefix");
  s_eval->add_flag("--norm-retrieval", eval_args.norm_retrieval, "Report norm retrieval accuracy");
  s_eval->add_option("--report", eval_args.report, "Report path (default: <out>/report_<task>_<mode>.json)");

  CompareArgs cmp_args;
  auto* s_cmp = app.add_subcommand("compare", "Per-metric deltas between two reports (a - b)");
  s_cmp->add_option("--a", cmp_args.a, "Report A")->required();
  s_cmp->add_option("--b", cmp_args.b, "Report B")->required();
  s_cmp->add_flag("--pre-rounded", cmp_args.pre_rounded, "Difference the 2-decimal values");
  s_cmp->add_option("--output", cmp_args.out_path, "Delta JSON path (default: <out>/compare.json)");

  FlowArgs flow_args;
  std::string lexicon, predicates;
  auto* s_flow = app.add_subcommand("check-flow", "Evaluate case flows against norm predicates");
  s_flow->add_option("--cases", flow_args.cases, "Cases JSONL")->required();
  s_flow->add_option("--role-lexicon", lexicon, "Role lexicon JSON");
  s_flow->add_option("--predicates", predicates, "Predicates JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
    if (o_out->count()) cfg.output_dir = out_dir;
    if (o_seed->count()) cfg.seed = seed;
    if (!mode.empty()) cfg.gateway_mode = mode;
    if (!cassette.empty()) cfg.cassette = cassette;
    if (!api_base.empty()) cfg.api_base = api_base;
    if (o_samples->count()) cfg.samples_per_norm = samples;
    if (no_feature) cfg.feature_filter = false;
    if (no_norm) cfg.norm_filter = false;
    if (no_conclusion) cfg.conclusion_filter = false;
    if (no_diversity) cfg.diversity = false;
    if (!selection.empty()) cfg.selection = selection;
    if (!cap_snapshot.empty()) cfg.cap_snapshot = cap_snapshot;
    if (!cap_api.empty()) cfg.cap_api = cap_api;
    if (!keyword.empty()) cfg.keyword = keyword;
    if (!negative_keyword.empty()) cfg.negative_keyword = negative_keyword;
    if (o_max->count()) cfg.max_results = max_results;
    if (oversample) cfg.oversample = true;
    if (random_negatives) cfg.random_negatives = true;
    if (o_train_neg->count()) cfg.train_negatives = train_neg;
    if (o_test_neg->count()) cfg.test_negatives = test_neg;
    if (!lexicon.empty()) cfg.role_lexicon = lexicon;
    if (!predicates.empty()) cfg.predicates = predicates;
    validate(cfg);

    fs::create_directories(cfg.output_dir);
    Manifest m;
    m.command = sub->get_name();
    const std::string name = m.command;
    if (name == "ingest-statute") cmd_ingest_statute(cfg, statute_args, m, out);
    else if (name == "extract-norms") cmd_extract_norms(cfg, statute_in, m, out);
    else if (name == "classify-norms") cmd_classify(cfg, norms_in, m, out);
    else if (name == "synthesize") cmd_synthesize(cfg, seeds_in, m, out);
    else if (name == "ingest-cap") cmd_ingest_cap(cfg, cap_args, m, out);
    else if (name == "assemble") cmd_assemble(cfg, asm_args, m, out);
    else if (name == "compile") cmd_compile(cfg, comp_args, m, out);
    else if (name == "evaluate") cmd_evaluate(cfg, eval_args, m, out);
    else if (name == "compare") cmd_compare(cfg, cmp_args, m, out);
    else if (name == "check-flow") cmd_check_flow(cfg, flow_args, m, out);

    json manifest = {{"command", m.command},   {"config_sha256", cfg.sha256()}, {"config", cfg.to_json()},
                     {"inputs", m.inputs},     {"outputs", m.outputs},         {"counts", m.counts}};
    if (!m.extra.empty()) manifest["details"] = m.extra;
    fs::create_directories(fs::path(cfg.output_dir) / "manifests");
    write_json(fs::path(cfg.output_dir) / "manifests" / (m.command + ".json"), manifest);
    return 0;
  } catch (const Error& e) {
    err << sub->get_name() << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << sub->get_name() << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ciforge::cli
