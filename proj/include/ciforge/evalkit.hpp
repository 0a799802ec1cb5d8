#pragma once

#include "ciforge/answer_parsing.hpp"
#include "ciforge/case.hpp"
#include "ciforge/norms.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ciforge::eval {

enum class Task { Applicability, Compliance, Recitation };
enum class PromptMode { Vanilla, MultiStep };

Task parse_task(std::string_view s);
std::string_view to_string(Task t);
PromptMode parse_prompt_mode(std::string_view s);
std::string_view to_string(PromptMode m);

struct InstructionExample {
  std::string instruction;
  std::optional<std::string> input;
  std::string response;
  Task task = Task::Applicability;
  PromptMode mode = PromptMode::Vanilla;

  // {instruction, input, output}; a missing input is "".
  nlohmann::json to_json() const;
};

std::string render_prompt(const InstructionExample& ex);

// Errors: MissingNorm (compliance multi-step whose seed norm cannot be
// resolved), InvalidInput (case lacks the label for `task`).
InstructionExample compile_example(const Case& c, Task task, PromptMode mode,
                                   const statute::NormIndex* norms = nullptr);
InstructionExample compile_recitation(const std::string& norm_id, const std::string& full_text);

enum class Label { Applicable, NotApplicable, Permit, Forbid, Unknown };
std::string_view to_string(Label l);
// Label names as printed in responses ("Not Applicable").
std::string_view response_text(Label l);
std::array<Label, 2> task_labels(Task t);
// Gold label of a case for a task; Unknown if the case carries none.
Label gold_label(const Case& c, Task t);

struct Judgment {
  std::optional<answers::FeatureValues> features;
  std::vector<NormId> norm_ids;
  Label conclusion = Label::Unknown;
};

// Never throws.
Judgment parse_judgment(std::string_view transcript, Task task, PromptMode mode) noexcept;

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
};

using Confusion = std::map<std::pair<Label, Label>, std::size_t>;  // (gold, predicted)

struct EvalReport {
  Task task = Task::Applicability;
  std::size_t total = 0;
  std::map<Label, ClassMetrics> per_class;
  double accuracy = 0;
  double macro_f1 = 0;
  std::optional<double> norm_retrieval_accuracy;
  Confusion confusion;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string to_table() const;
};

// Percent values at full precision. Gold labels outside the task's label set
// are rejected with Error{InvalidInput}.
EvalReport report_from_confusion(Task task, const Confusion& confusion);

enum class NormCredit { Containment, ExactSet, Prefix };
NormCredit parse_norm_credit(std::string_view s);

struct ScoreOptions {
  bool norm_retrieval = false;
  NormCredit credit = NormCredit::Containment;
};

bool norm_retrieved(const Judgment& j, const Case& gold, NormCredit credit);
double norm_retrieval_percent(std::size_t correct, std::size_t total);

// Errors: LengthMismatch.
EvalReport score(const std::vector<Judgment>& preds, const std::vector<Case>& golds, Task task,
                 const ScoreOptions& opts = {});

enum class DeltaMode { FullPrecision, PreRounded };

struct Delta {
  std::string metric;
  double a = 0;
  double b = 0;
  double delta = 0;
};

// a - b for accuracy, macro F1, norm retrieval (when both have it) and every
// per-class P/R/F1. Errors: TaskMismatch.
std::vector<Delta> compare_reports(const EvalReport& a, const EvalReport& b, DeltaMode mode = DeltaMode::FullPrecision);
std::string deltas_to_table(const std::vector<Delta>& deltas);
nlohmann::json deltas_to_json(const std::vector<Delta>& deltas);

// JSONL of {case_id, transcript}; case_id is the 0-based row of the gold file.
// Rows without a transcript become Unknown judgments.
std::vector<Judgment> load_judgments(const std::filesystem::path& path, std::size_t gold_count, Task task,
                                     PromptMode mode);

}  // namespace ciforge::eval
