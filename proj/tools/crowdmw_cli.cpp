// Copyright 2026 The crowdmw Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// crowdmw command-line front door: run, sweep, fixtures, election-demo.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crowdmw/error.hpp"
#include "crowdmw/harness.hpp"
#include "crowdmw/mapreduce.hpp"
#include "crowdmw/simgen.hpp"

namespace {

struct CommonFlags {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<int> cycles;
  std::optional<int> nodes;
  std::optional<std::string> mode;
  std::string out;
};

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--scenario", f.scenario, "Scenario file (key=value lines)");
  cmd->add_option("--seed", f.seed, "Seed for the network and the visitor generator");
  cmd->add_option("--backend", f.backend, "sim or udp")->check(CLI::IsMember({"sim", "udp"}));
  cmd->add_option("--cycles", f.cycles, "Cycles to run")->check(CLI::PositiveNumber);
  cmd->add_option("--nodes", f.nodes, "Node count")->check(CLI::PositiveNumber);
  cmd->add_option("--mode", f.mode, "visitor, room or both")->check(CLI::IsMember({"visitor", "room", "both"}));
  cmd->add_option("--out", f.out, "Output directory");
}

// Flags win over the environment, which wins over the scenario file.
crowdmw::ScenarioConfig Resolve(const CommonFlags& f) {
  crowdmw::ScenarioConfig c;
  if (!f.scenario.empty()) c = crowdmw::LoadScenarioFile(f.scenario);
  crowdmw::ApplyEnvironment(c);
  if (f.seed) c.net.seed = c.visitors.seed = *f.seed;
  if (f.backend) c.net.mode = crowdmw::ParseBackend(*f.backend);
  if (f.cycles) c.cycles_to_run = *f.cycles;
  if (f.nodes) c.node_count = *f.nodes;
  if (f.mode) c.modes = crowdmw::ParseModes(*f.mode);
  return c;
}

void WriteFile(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
  if (!out) throw crowdmw::Error(crowdmw::ErrorCode::kIoFailure, "cannot write " + path.string());
}

int Run(const CommonFlags& f) {
  const auto config = Resolve(f);
  const auto outcome = crowdmw::RunScenario(config);
  const auto& report = outcome.report;
  std::printf("backend=%s nodes=%d cycles=%d completed_cycles=%llu commits=%zu aborts=%zu elections=%zu\n",
              std::string(crowdmw::ToString(config.net.mode)).c_str(), config.node_count, config.cycles_to_run,
              static_cast<unsigned long long>(report.completed_cycles), report.commits.size(),
              report.aborts.size(), report.elections.size());
  for (std::uint64_t cycle : outcome.store->committed_cycles()) {
    std::printf("cycle %llu:", static_cast<unsigned long long>(cycle));
    for (const auto& row : outcome.store->results_for(cycle)) {
      std::printf(" %s/%s=%llu", std::string(crowdmw::ToString(row.mode)).c_str(), row.key.c_str(),
                  static_cast<unsigned long long>(row.count));
    }
    std::printf("\n");
  }
  const auto& rec = report.reconciliation;
  std::printf("reconciliation: %s generated=%llu committed=%llu pending=%llu double_reads=%llu %s\n",
              rec.ok ? "ok" : "FAILED", static_cast<unsigned long long>(rec.generated),
              static_cast<unsigned long long>(rec.committed), static_cast<unsigned long long>(rec.pending),
              static_cast<unsigned long long>(rec.duplicates), rec.detail.c_str());
  const std::filesystem::path out = f.out.empty() ? "out" : f.out;
  crowdmw::EmitReport(report, out);
  WriteFile(out / "store.txt", outcome.store->dump());
  std::printf("wrote %s/{metrics.csv,summary.csv,events.log,store.txt}\n", out.string().c_str());
  return rec.ok ? 0 : 1;
}

int Sweep(const CommonFlags& f, const std::vector<int>& counts) {
  const auto config = Resolve(f);
  const std::string csv = crowdmw::SweepLoad(config, counts);
  std::fputs(csv.c_str(), stdout);
  if (!f.out.empty()) WriteFile(std::filesystem::path(f.out) / "sweep.csv", csv);
  return 0;
}

int Fixtures(const std::string& action, const std::string& name, const std::string& dir) {
  const std::filesystem::path root = dir.empty() ? crowdmw::DefaultFixtureDir() : std::filesystem::path(dir);
  if (action == "list") {
    for (const auto& n : crowdmw::ListFixtures(root)) std::printf("%s\n", n.c_str());
    return 0;
  }
  const auto readings = crowdmw::ReplayFixture(name, root);
  for (const auto& r : readings) {
    std::printf("t=%lld %s=%d seq=%llu\n", static_cast<long long>(r.timestamp_ms),
                std::string(crowdmw::ToString(r.tag)).c_str(), r.room.number,
                static_cast<unsigned long long>(r.seq));
  }
  for (auto mode : {crowdmw::CountMode::kVisitor, crowdmw::CountMode::kRoom}) {
    std::printf("%s:", std::string(crowdmw::ToString(mode)).c_str());
    for (const auto& [k, v] : crowdmw::SequentialOracle(readings, mode)) {
      std::printf(" %s=%llu", k.c_str(), static_cast<unsigned long long>(v));
    }
    std::printf("\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdmw: crowd-monitoring middleware simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "Run a scenario and write metrics");
  AddCommon(run, run_flags);

  CommonFlags sweep_flags;
  std::vector<int> counts{0, 500, 1000, 1500};
  auto* sweep = app.add_subcommand("sweep", "Load sweep: mean response time per request count");
  AddCommon(sweep, sweep_flags);
  sweep->add_option("--counts", counts, "Ascending request counts")->delimiter(',');

  std::string fx_action = "list";
  std::string fx_name;
  std::string fx_dir;
  auto* fixtures = app.add_subcommand("fixtures", "List or show reading fixtures");
  fixtures->add_option("action", fx_action, "list or show")->check(CLI::IsMember({"list", "show"}));
  fixtures->add_option("name", fx_name, "Fixture name for show");
  fixtures->add_option("--dir", fx_dir, "Fixture directory");

  int demo_nodes = 5;
  std::uint64_t demo_seed = 1;
  int demo_cycles = 5;
  auto* demo = app.add_subcommand("election-demo", "Kill the leader every other cycle and print the succession");
  demo->add_option("--nodes", demo_nodes, "Node count")->check(CLI::Range(2, 250));
  demo->add_option("--seed", demo_seed, "Seed");
  demo->add_option("--cycles", demo_cycles, "Cycles")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return Run(run_flags);
    if (sweep->parsed()) return Sweep(sweep_flags, counts);
    if (fixtures->parsed()) {
      if (fx_action == "show" && fx_name.empty()) throw CLI::ValidationError("show needs a fixture name");
      return Fixtures(fx_action, fx_name, fx_dir);
    }
    if (demo->parsed()) {
      for (const auto& line : crowdmw::ElectionDemo(demo_nodes, demo_seed, demo_cycles)) {
        std::printf("%s\n", line.c_str());
      }
      return 0;
    }
  } catch (const crowdmw::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  }
  return 0;
}
