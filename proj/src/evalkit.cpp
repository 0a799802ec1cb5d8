#include "ciforge/evalkit.hpp"

#include "ciforge/error.hpp"
#include "ciforge/text.hpp"

#include <algorithm>
#include <cstdio>

namespace ciforge::eval {

using answers::Feature;
using nlohmann::json;

Task parse_task(std::string_view s) {
  if (text::iequals(s, "applicability")) return Task::Applicability;
  if (text::iequals(s, "compliance")) return Task::Compliance;
  if (text::iequals(s, "recitation")) return Task::Recitation;
  throw Error(ErrorCode::Config, "unknown task '" + std::string(s) + "'");
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::Applicability: return "applicability";
    case Task::Compliance: return "compliance";
    case Task::Recitation: return "recitation";
  }
  return "?";
}

PromptMode parse_prompt_mode(std::string_view s) {
  if (text::iequals(s, "vanilla")) return PromptMode::Vanilla;
  if (text::iequals(s, "multi-step") || text::iequals(s, "multistep")) return PromptMode::MultiStep;
  throw Error(ErrorCode::Config, "unknown prompt mode '" + std::string(s) + "'");
}

std::string_view to_string(PromptMode m) { return m == PromptMode::Vanilla ? "vanilla" : "multi-step"; }

json InstructionExample::to_json() const {
  return {{"instruction", instruction}, {"input", input.value_or("")}, {"output", response}};
}

std::string render_prompt(const InstructionExample& ex) {
  if (ex.input && !ex.input->empty()) {
    return "Below is an instruction that describes a task, paired with an input that provides further context. "
           "Write a response that appropriately completes the request.\n\n### Instruction:\n" +
           ex.instruction + "\n\n### Input:\n" + *ex.input + "\n\n### Response:";
  }
  return "Below is an instruction that describes a task. Write a response that appropriately completes the "
         "request.\n\n### Instruction:\n" +
         ex.instruction + "\n\n### Response:";
}

namespace {

constexpr std::string_view kApplicabilityVanilla =
    "Please determine whether the HIPAA Privacy Rule is applicable to the case.";
constexpr std::string_view kApplicabilityMultiStep =
    "Please assess the applicability of the HIPAA Privacy Rule to the case through the following steps: Step 1: "
    "Annotate the message characteristics [Sender, Sender Role, Recipient, Recipient Role, Subject, Subject Role, "
    "Type] about the flow of private information in the case as a list. Step 2: Determine whether the HIPAA Privacy "
    "Rule is applicable to the case.";
constexpr std::string_view kComplianceVanilla = "Please determine whether the HIPAA Privacy Rule permits or forbids the case.";
constexpr std::string_view kComplianceMultiStep =
    "Please assess the case for compliance with the HIPAA Privacy Rule through the following steps: Step 1: Annotate "
    "the eleven message characteristics [Sender, Sender Role, Recipient, Recipient Role, Subject, Subject Role, Type, "
    "Purpose, In Reply To, Consented By, Belief] about the flow of private information in the case as a list. Step "
    "2: Identify and list all applicable HIPAA regulation IDs (e.g., 164.xxx) and their content. Step 3: Determine "
    "whether the HIPAA Privacy Rule permits or forbids the case.";

std::string feature_list(const Case& c, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    Feature f = answers::kAllFeatures[i];
    if (i) out += ", ";
    out += std::string(answers::display_name(f)) + ": " + c.feature(f).value_or("None");
  }
  return out;
}

}  // namespace

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Applicable: return "Applicable";
    case Label::NotApplicable: return "NotApplicable";
    case Label::Permit: return "Permit";
    case Label::Forbid: return "Forbid";
    case Label::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::string_view response_text(Label l) { return l == Label::NotApplicable ? "Not Applicable" : to_string(l); }

std::array<Label, 2> task_labels(Task t) {
  if (t == Task::Applicability) return {Label::Applicable, Label::NotApplicable};
  return {Label::Permit, Label::Forbid};
}

Label gold_label(const Case& c, Task t) {
  if (t == Task::Applicability) {
    if (!c.applicability) return Label::Unknown;
    return *c.applicability == Applicability::Applicable ? Label::Applicable : Label::NotApplicable;
  }
  if (c.compliance == Compliance::Permit) return Label::Permit;
  if (c.compliance == Compliance::Forbid) return Label::Forbid;
  return Label::Unknown;
}

InstructionExample compile_example(const Case& c, Task task, PromptMode mode, const statute::NormIndex* norms) {
  if (task == Task::Recitation) throw Error(ErrorCode::InvalidInput, "recitation examples are compiled from norms");
  Label label = gold_label(c, task);
  if (label == Label::Unknown)
    throw Error(ErrorCode::InvalidInput, "case has no " + std::string(to_string(task)) + " label");

  InstructionExample ex;
  ex.task = task;
  ex.mode = mode;
  const std::string background = "Read the case background: " + c.background;
  if (task == Task::Applicability) {
    ex.input = background + ".";
    if (mode == PromptMode::Vanilla) {
      ex.instruction = kApplicabilityVanilla;
      ex.response = response_text(label);
    } else {
      ex.instruction = kApplicabilityMultiStep;
      ex.response = "Step 1: " + feature_list(c, answers::kVitalFeatureCount) + "\nStep 2: " +
                    std::string(response_text(label));
    }
    return ex;
  }
  if (mode == PromptMode::Vanilla) {
    ex.instruction = kComplianceVanilla;
    ex.input = background + ".";
    ex.response = response_text(label);
    return ex;
  }
  ex.instruction = kComplianceMultiStep;
  ex.input = background;
  if (!c.seed_norm_id) throw Error(ErrorCode::MissingNorm, "case has no seed norm id");
  std::string id = c.seed_norm_id->canonical();
  std::optional<std::string> content = norms ? norms->lookup(id) : std::nullopt;
  if (!content) throw Error(ErrorCode::MissingNorm, "norm " + id + " not found");
  ex.response = "Step 1: " + feature_list(c, answers::kFeatureCount) + "\nStep 2: " + id + ", " + *content +
                "\nStep 3: " + std::string(response_text(label));
  return ex;
}

InstructionExample compile_recitation(const std::string& norm_id, const std::string& full_text) {
  InstructionExample ex;
  ex.task = Task::Recitation;
  ex.instruction = "Please recite the contents of " + norm_id + " in the HIPAA Privacy Rule.";
  ex.response = full_text;
  return ex;
}

namespace {

Label first_label(std::string_view s, Task task) {
  if (task == Task::Applicability) {
    static const std::vector<std::string_view> phrases = {"not applicable", "applicable"};
    auto hit = answers::first_phrase(s, phrases);
    if (!hit) return Label::Unknown;
    return *hit == 0 ? Label::NotApplicable : Label::Applicable;
  }
  static const std::vector<std::string_view> phrases = {"permit", "permits", "permitted",
                                                        "forbid", "forbids", "forbidden"};
  auto hit = answers::first_phrase(s, phrases);
  if (!hit) return Label::Unknown;
  return *hit < 3 ? Label::Permit : Label::Forbid;
}

}  // namespace

Judgment parse_judgment(std::string_view transcript, Task task, PromptMode mode) noexcept {
  Judgment j;
  try {
    if (mode == PromptMode::Vanilla) {
      j.conclusion = first_label(transcript, task);
      return j;
    }
    auto steps = answers::split_steps(transcript);
    if (steps.empty()) {
      j.conclusion = first_label(transcript, task);
      return j;
    }
    j.conclusion = first_label(steps.back().second, task);
    for (const auto& [n, body] : steps) {
      if (n == 1 && !j.features) j.features = answers::parse_features(body);
      if (n == 2 && task == Task::Compliance && j.norm_ids.empty()) {
        for (const auto& m : find_norm_ids(body)) {
          if (std::find(j.norm_ids.begin(), j.norm_ids.end(), m.id) == j.norm_ids.end()) j.norm_ids.push_back(m.id);
        }
      }
    }
  } catch (...) {
    return Judgment{};
  }
  return j;
}

namespace {

double pct(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::optional<Label> parse_label(const std::string& s) {
  for (auto l : {Label::Applicable, Label::NotApplicable, Label::Permit, Label::Forbid, Label::Unknown}) {
    if (s == to_string(l)) return l;
  }
  return std::nullopt;
}

}  // namespace

EvalReport report_from_confusion(Task task, const Confusion& confusion) {
  const auto labels = task_labels(task);
  EvalReport r;
  r.task = task;
  r.confusion = confusion;
  std::size_t correct = 0;
  for (const auto& [key, n] : confusion) {
    const auto [gold, pred] = key;
    if (gold != labels[0] && gold != labels[1])
      throw Error(ErrorCode::InvalidInput, "gold label " + std::string(to_string(gold)) + " is not valid for task " +
                                               std::string(to_string(task)));
    r.total += n;
    if (gold == pred) correct += n;
  }
  for (Label l : labels) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& [key, n] : confusion) {
      const auto [gold, pred] = key;
      if (gold == l && pred == l) tp += n;
      if (gold != l && pred == l) fp += n;
      if (gold == l && pred != l) fn += n;
    }
    ClassMetrics m;
    m.support = tp + fn;
    m.precision = pct(tp, tp + fp);
    m.recall = pct(tp, tp + fn);
    m.f1 = m.precision + m.recall == 0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
    r.per_class[l] = m;
  }
  r.accuracy = pct(correct, r.total);
  r.macro_f1 = (r.per_class[labels[0]].f1 + r.per_class[labels[1]].f1) / 2.0;
  return r;
}

NormCredit parse_norm_credit(std::string_view s) {
  if (s == "containment") return NormCredit::Containment;
  if (s == "exact-set") return NormCredit::ExactSet;
  if (s == "prefix") return NormCredit::Prefix;
  throw Error(ErrorCode::Config, "unknown norm credit mode '" + std::string(s) + "'");
}

bool norm_retrieved(const Judgment& j, const Case& gold, NormCredit credit) {
  if (!gold.seed_norm_id) return false;
  const NormId& want = *gold.seed_norm_id;
  switch (credit) {
    case NormCredit::Containment:
      return std::find(j.norm_ids.begin(), j.norm_ids.end(), want) != j.norm_ids.end();
    case NormCredit::Prefix:
      return std::any_of(j.norm_ids.begin(), j.norm_ids.end(),
                         [&](const NormId& p) { return p.is_prefix_of(want) || want.is_prefix_of(p); });
    case NormCredit::ExactSet: {
      std::vector<NormId> expect = gold.cited_norm_ids.empty() ? std::vector<NormId>{want} : gold.cited_norm_ids;
      std::vector<NormId> got = j.norm_ids;
      std::sort(expect.begin(), expect.end());
      expect.erase(std::unique(expect.begin(), expect.end()), expect.end());
      std::sort(got.begin(), got.end());
      got.erase(std::unique(got.begin(), got.end()), got.end());
      return expect == got;
    }
  }
  return false;
}

double norm_retrieval_percent(std::size_t correct, std::size_t total) { return pct(correct, total); }

EvalReport score(const std::vector<Judgment>& preds, const std::vector<Case>& golds, Task task,
                 const ScoreOptions& opts) {
  if (preds.size() != golds.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(preds.size()) + " predictions for " +
                                               std::to_string(golds.size()) + " gold cases");
  if (task == Task::Recitation) throw Error(ErrorCode::InvalidInput, "recitation is not scored");
  Confusion confusion;
  const auto labels = task_labels(task);
  std::size_t retrieved = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    Label gold = gold_label(golds[i], task);
    Label pred = preds[i].conclusion;
    if (pred != labels[0] && pred != labels[1]) pred = Label::Unknown;
    ++confusion[{gold, pred}];
    if (opts.norm_retrieval && norm_retrieved(preds[i], golds[i], opts.credit)) ++retrieved;
  }
  EvalReport r = report_from_confusion(task, confusion);
  if (opts.norm_retrieval) r.norm_retrieval_accuracy = norm_retrieval_percent(retrieved, golds.size());
  return r;
}

json EvalReport::to_json() const {
  json classes = json::object();
  for (const auto& [l, m] : per_class) {
    classes[std::string(to_string(l))] = {
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  }
  json conf = json::array();
  for (const auto& [key, n] : confusion)
    conf.push_back({{"gold", to_string(key.first)}, {"predicted", to_string(key.second)}, {"count", n}});
  return {{"task", to_string(task)},
          {"total", total},
          {"accuracy", accuracy},
          {"macro_f1", macro_f1},
          {"per_class", classes},
          {"norm_retrieval_accuracy", norm_retrieval_accuracy ? json(*norm_retrieval_accuracy) : json(nullptr)},
          {"confusion", conf}};
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  r.task = parse_task(j.at("task").get<std::string>());
  r.total = j.value("total", std::size_t{0});
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  for (const auto& [k, v] : j.at("per_class").items()) {
    auto l = parse_label(k);
    if (!l) throw Error(ErrorCode::InvalidInput, "unknown class '" + k + "' in report");
    r.per_class[*l] = {v.at("precision").get<double>(), v.at("recall").get<double>(), v.at("f1").get<double>(),
                       v.value("support", std::size_t{0})};
  }
  if (j.contains("norm_retrieval_accuracy") && !j["norm_retrieval_accuracy"].is_null())
    r.norm_retrieval_accuracy = j["norm_retrieval_accuracy"].get<double>();
  for (const auto& row : j.value("confusion", json::array())) {
    auto g = parse_label(row.at("gold").get<std::string>());
    auto p = parse_label(row.at("predicted").get<std::string>());
    if (g && p) r.confusion[{*g, *p}] = row.at("count").get<std::size_t>();
  }
  return r;
}

std::string EvalReport::to_table() const {
  const auto labels = task_labels(task);
  const auto& a = per_class.at(labels[0]);
  const auto& b = per_class.at(labels[1]);
  char buf[256];
  std::string out = "task: " + std::string(to_string(task)) + "\n";
  std::snprintf(buf, sizeof buf, "%-23s %-23s\n", std::string(response_text(labels[0])).c_str(),
                std::string(response_text(labels[1])).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf, "%7s %7s %7s %7s %7s %7s %8s %8s\n", "Prec", "Rec", "F1", "Prec", "Rec", "F1", "Acc",
                "Ma-F1");
  out += buf;
  std::snprintf(buf, sizeof buf, "%7s %7s %7s %7s %7s %7s %8s %8s\n", text::fixed2(a.precision).c_str(),
                text::fixed2(a.recall).c_str(), text::fixed2(a.f1).c_str(), text::fixed2(b.precision).c_str(),
                text::fixed2(b.recall).c_str(), text::fixed2(b.f1).c_str(), text::fixed2(accuracy).c_str(),
                text::fixed2(macro_f1).c_str());
  out += buf;
  if (norm_retrieval_accuracy) out += "norm retrieval accuracy: " + text::fixed2(*norm_retrieval_accuracy) + "\n";
  out += "cases: " + std::to_string(total) + "\n";
  return out;
}

std::vector<Delta> compare_reports(const EvalReport& a, const EvalReport& b, DeltaMode mode) {
  if (a.task != b.task)
    throw Error(ErrorCode::TaskMismatch,
                "cannot compare " + std::string(to_string(a.task)) + " with " + std::string(to_string(b.task)));
  auto prep = [&](double v) { return mode == DeltaMode::PreRounded ? text::round_half_up(v, 2) : v; };
  std::vector<Delta> out;
  auto add = [&](std::string name, double x, double y) {
    out.push_back({std::move(name), x, y, prep(x) - prep(y)});
  };
  add("accuracy", a.accuracy, b.accuracy);
  add("macro_f1", a.macro_f1, b.macro_f1);
  if (a.norm_retrieval_accuracy && b.norm_retrieval_accuracy)
    add("norm_retrieval_accuracy", *a.norm_retrieval_accuracy, *b.norm_retrieval_accuracy);
  for (Label l : task_labels(a.task)) {
    auto ia = a.per_class.find(l);
    auto ib = b.per_class.find(l);
    if (ia == a.per_class.end() || ib == b.per_class.end()) continue;
    std::string p(to_string(l));
    add(p + ".precision", ia->second.precision, ib->second.precision);
    add(p + ".recall", ia->second.recall, ib->second.recall);
    add(p + ".f1", ia->second.f1, ib->second.f1);
  }
  return out;
}

std::string deltas_to_table(const std::vector<Delta>& deltas) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-26s %8s %8s %8s\n", "metric", "a", "b", "delta");
  out += buf;
  for (const auto& d : deltas) {
    std::snprintf(buf, sizeof buf, "%-26s %8s %8s %8s\n", d.metric.c_str(), text::fixed2(d.a).c_str(),
                  text::fixed2(d.b).c_str(), text::fixed2(d.delta).c_str());
    out += buf;
  }
  return out;
}

json deltas_to_json(const std::vector<Delta>& deltas) {
  json out = json::array();
  for (const auto& d : deltas) out.push_back({{"metric", d.metric}, {"a", d.a}, {"b", d.b}, {"delta", d.delta}});
  return out;
}

std::vector<Judgment> load_judgments(const std::filesystem::path& path, std::size_t gold_count, Task task,
                                     PromptMode mode) {
  std::vector<Judgment> out(gold_count);
  std::vector<bool> seen(gold_count, false);
  std::size_t line_no = 0;
  for (const auto& line : text::read_lines(path)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("case_id") || !j["case_id"].is_number_unsigned())
      throw Error(ErrorCode::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": case_id must be a row index");
    auto id = j["case_id"].get<std::size_t>();
    if (id >= gold_count)
      throw Error(ErrorCode::LengthMismatch, "case_id " + std::to_string(id) + " exceeds the gold file");
    if (seen[id]) throw Error(ErrorCode::InvalidInput, "duplicate transcript for case_id " + std::to_string(id));
    seen[id] = true;
    out[id] = parse_judgment(j.value("transcript", ""), task, mode);
  }
  return out;
}

}  // namespace ciforge::eval
