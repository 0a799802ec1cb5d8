#pragma once

#include "cli.hpp"
#include "support.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace ciforge::testing {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ci-forge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Every stage of the offline pipeline into `out`; returns the first failure.
inline CliResult run_pipeline(const std::filesystem::path& out) {
  const std::string o = out.string();
  const std::string cassette = fixture("pipeline_cassette.jsonl").string();
  const std::vector<std::vector<std::string>> steps = {
      {"--out", o, "ingest-statute", "--snapshot", data_file("mini_hipaa.json").string()},
      {"--out", o, "extract-norms"},
      {"--out", o, "classify-norms", "--mode", "replay", "--cassette", cassette},
      {"--out", o, "synthesize", "--mode", "replay", "--cassette", cassette},
      {"--out", o, "ingest-cap", "--mode", "replay", "--cassette", cassette, "--snapshot",
       fixture("cap_snapshot.jsonl").string()},
      {"--out", o, "assemble"},
      {"--out", o, "compile", "--mode", "both", "--recitation"},
      {"--out", o, "evaluate", "--task", "compliance", "--mode", "multi-step", "--gold",
       fixture("eval_gold_compliance.jsonl").string(), "--pred",
       fixture("eval_pred_compliance_multi_step.jsonl").string()},
      {"--out", o, "check-flow", "--cases", (out / "cases.jsonl").string()},
  };
  for (const auto& s : steps) {
    auto r = run_cli(s);
    if (r.code != 0) {
      r.err = s[2] + ": " + r.err;
      return r;
    }
  }
  return {};
}

// Relative path -> contents for every file under `dir`.
inline std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), dir).string()] = text::read_file(e.path());
  }
  return files;
}

}  // namespace ciforge::testing
