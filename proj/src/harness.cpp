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

#include "crowdmw/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "crowdmw/error.hpp"
#include "crowdmw/sim_network.hpp"
#include "crowdmw/udp_transport.hpp"

namespace crowdmw {

namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> SplitOn(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto at = s.find(sep, pos);
    out.push_back(Trim(s.substr(pos, at == std::string_view::npos ? std::string_view::npos : at - pos)));
    if (at == std::string_view::npos) return out;
    pos = at + 1;
  }
}

template <typename T>
T Number(std::string_view text, std::string_view what) {
  T v{};
  const std::string s = Trim(text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kConfigError, "bad " + std::string(what) + " '" + s + "'");
  }
  return v;
}

std::string Fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string SimAddress(int id) { return "10.0.0." + std::to_string(id) + ":7000"; }

// Shared between the harness and the sensor field's carrier function.
class Membership {
 public:
  Membership(int node_count, std::optional<NodeId> fixed) : node_count_(node_count), fixed_(fixed) {}

  std::optional<NodeId> carrier(int room) const {
    std::lock_guard lock(mu_);
    NodeId target = fixed_ ? *fixed_ : NodeId{static_cast<std::uint32_t>((room - 1) % node_count_ + 1)};
    if (!dead_.count(target)) return target;
    for (int id = 1; id <= node_count_; ++id) {
      if (!dead_.count(NodeId{static_cast<std::uint32_t>(id)})) return NodeId{static_cast<std::uint32_t>(id)};
    }
    return std::nullopt;
  }
  void kill(NodeId id) {
    std::lock_guard lock(mu_);
    dead_.insert(id);
  }

 private:
  int node_count_;
  std::optional<NodeId> fixed_;
  mutable std::mutex mu_;
  std::set<NodeId> dead_;
};

class Recorder final : public NodeObserver {
 public:
  explicit Recorder(MetricsReport& report) : report_(report) {}

  void on_log(std::int64_t t_us, NodeId node, const std::string& line) override {
    std::lock_guard lock(mu_);
    report_.events.push_back(FormatLogLine(t_us, node, line));
  }
  void on_metric(const MetricSample& sample) override {
    std::lock_guard lock(mu_);
    report_.samples.push_back(sample);
  }
  void on_election(NodeId elector, NodeId elected, std::int64_t t_us) override {
    std::lock_guard lock(mu_);
    report_.elections.push_back({t_us, elector, elected});
    last_progress_us_ = std::max(last_progress_us_, t_us);
  }
  void on_commit(NodeId leader, const CycleResult& result, std::int64_t t_us) override {
    std::lock_guard lock(mu_);
    report_.commits.push_back({t_us, leader, result.cycle_id, result.total_readings});
  }
  void on_abort(NodeId leader, std::uint64_t cycle, const std::string& reason) override {
    std::lock_guard lock(mu_);
    report_.aborts.push_back({leader, cycle, reason});
  }
  void on_cycle_complete(NodeId, std::uint64_t, std::int64_t t_us) override {
    std::lock_guard lock(mu_);
    ++report_.completed_cycles;
    last_progress_us_ = std::max(last_progress_us_, t_us);
  }
  std::int64_t last_progress_us() const {
    std::lock_guard lock(mu_);
    return last_progress_us_;
  }
  void note(std::int64_t t_us, const std::string& text) {
    std::lock_guard lock(mu_);
    report_.events.push_back(FormatLogLine(t_us, NodeId{0}, text));
  }

 private:
  MetricsReport& report_;
  mutable std::mutex mu_;
  std::int64_t last_progress_us_ = 0;
};

struct Prepared {
  std::vector<SensorReading> stream;
  GenerationLedger ledger;
  std::vector<NodeConfig> nodes;
};

Prepared Prepare(const ScenarioConfig& config) {
  Prepared p;
  if (!config.fixture.empty()) {
    p.stream = ReplayFixture(config.fixture);
    p.ledger = LedgerFor(p.stream);
  } else if (config.visitors.visitor_count > 0) {
    auto gen = GenerateStream(config.visitors, config.cycles_to_run * config.cycle.cycle_duration_ms);
    p.stream = std::move(gen.readings);
    p.ledger = std::move(gen.ledger);
  }
  // Load goes to the nodes expected to be followers.
  const NodeId expected_leader =
      config.leader_override ? *config.leader_override : NodeId{static_cast<std::uint32_t>(config.node_count)};
  std::vector<int> followers;
  for (int id = 1; id <= config.node_count; ++id) {
    if (NodeId{static_cast<std::uint32_t>(id)} != expected_leader) followers.push_back(id);
  }
  for (int id = 1; id <= config.node_count; ++id) {
    NodeConfig nc;
    nc.id = NodeId{static_cast<std::uint32_t>(id)};
    nc.address = config.net.mode == Backend::kUdp ? "127.0.0.1:" + std::to_string(config.udp_base_port + id)
                                                  : SimAddress(id);
    nc.cycle = config.cycle;
    nc.leader_override = config.leader_override;
    nc.modes = config.modes;
    nc.seed = config.net.seed;
    const auto pos = std::find(followers.begin(), followers.end(), id);
    if (pos != followers.end()) {
      const int n = static_cast<int>(followers.size());
      const int idx = static_cast<int>(pos - followers.begin());
      nc.load_requests = config.load_requests / n + (idx < config.load_requests % n ? 1 : 0);
    }
    p.nodes.push_back(std::move(nc));
  }
  return p;
}

std::unique_ptr<Store> OpenStore(const ScenarioConfig& config) {
  if (config.store_path.empty()) return Store::InMemory();
  return Store::OpenJournal(config.store_path, true);
}

void CheckDeadlock(const Recorder& rec, const ScenarioConfig& config, std::int64_t now_us) {
  const std::int64_t limit_us = 10 * config.cycle.cycle_duration_ms * 1000;
  if (now_us - rec.last_progress_us() > limit_us) {
    throw Error(ErrorCode::kScenarioDeadlock,
                "no commit or election for " + std::to_string(10 * config.cycle.cycle_duration_ms) + " ms");
  }
}

ScenarioOutcome RunSimulated(const ScenarioConfig& config) {
  ScenarioOutcome out;
  Prepared prep = Prepare(config);
  out.ledger = prep.ledger;
  out.store = OpenStore(config);
  Recorder recorder(out.report);
  Membership members(config.node_count,
                     config.fixture.empty() ? std::nullopt : std::optional<NodeId>(config.fixture_node));
  SensorField field(prep.stream, kDefaultRoomCount, [&members](int room) { return members.carrier(room); });

  EventLoop loop;
  SimNetwork net(loop, config.net);
  std::vector<std::unique_ptr<Endpoint>> endpoints;
  std::vector<std::unique_ptr<Node>> nodes;
  std::vector<std::set<std::int64_t>> armed(prep.nodes.size());

  std::function<void(std::size_t)> arm = [&](std::size_t k) {
    const auto at = nodes[k]->next_wakeup_us();
    if (!at || armed[k].count(*at)) return;
    armed[k].insert(*at);
    const std::int64_t when = std::max(*at, loop.now_us());
    loop.schedule_at(when, [&, k, at = *at] {
      armed[k].erase(at);
      nodes[k]->wake();
      arm(k);
    });
  };

  for (std::size_t k = 0; k < prep.nodes.size(); ++k) {
    endpoints.push_back(net.bind(prep.nodes[k].address));
    nodes.push_back(std::make_unique<Node>(prep.nodes[k], *endpoints[k], loop, *out.store, field, &recorder));
    net.set_handler(prep.nodes[k].address, [&, k](const Datagram& d) {
      nodes[k]->handle(d);
      arm(k);
    });
  }

  auto leader_now = [&]() -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k]->alive() && nodes[k]->is_leader()) best = k;
    }
    if (best) return best;
    if (auto rec = Registry(*out.store, config.cycle.liveness_window_ms()).recorded_leader()) {
      const std::size_t k = rec->value - 1;
      if (k < nodes.size() && nodes[k]->alive()) return k;
    }
    return std::nullopt;
  };
  auto kill = [&](std::size_t k) {
    if (!nodes[k]->alive()) return;
    nodes[k]->kill();
    members.kill(nodes[k]->id());
    out.report.killed.push_back({loop.now_us(), nodes[k]->id()});
  };

  for (const auto& fault : config.faults) {
    loop.schedule_at(fault.at_ms * 1000, [&, fault] {
      recorder.note(loop.now_us(), "FAULT " + ToString(fault));
      switch (fault.kind) {
        case FaultSpec::Kind::kKillLeader:
          if (auto k = leader_now()) kill(*k);
          break;
        case FaultSpec::Kind::kKillNode:
          kill(fault.node.value - 1);
          break;
        case FaultSpec::Kind::kSetLoss:
          net.set_loss_rate(fault.rate);
          break;
        case FaultSpec::Kind::kPartition: {
          std::set<std::string> group;
          for (NodeId id : fault.group) group.insert(SimAddress(static_cast<int>(id.value)));
          net.partition(std::move(group), (fault.at_ms + fault.duration_ms) * 1000);
          break;
        }
      }
    });
  }

  const std::int64_t d_us = config.cycle.cycle_duration_ms * 1000;
  for (int c = 1; c <= config.cycles_to_run + 1; ++c) {
    loop.schedule_at(c * d_us - 1, [&, c] {
      CycleBeliefs b;
      b.cycle = static_cast<std::uint64_t>(c - 1);
      for (const auto& n : nodes) {
        b.nodes[n->id()] = {n->alive(), n->alive() && n->is_leader(), n->known_leader()};
      }
      out.report.beliefs.push_back(std::move(b));
      CheckDeadlock(recorder, config, loop.now_us());
    });
  }

  for (std::size_t k = 0; k < nodes.size(); ++k) {
    nodes[k]->start();
    arm(k);
  }
  loop.run_until(config.run_duration_ms() * 1000 - 1);
  nodes.clear();
  endpoints.clear();
  out.report.reconciliation = Reconcile(out.ledger, *out.store, config.modes);
  return out;
}

ScenarioOutcome RunUdp(const ScenarioConfig& config) {
  ScenarioOutcome out;
  Prepared prep = Prepare(config);
  out.ledger = prep.ledger;
  out.store = OpenStore(config);
  Recorder recorder(out.report);
  Membership members(config.node_count,
                     config.fixture.empty() ? std::nullopt : std::optional<NodeId>(config.fixture_node));
  SensorField field(prep.stream, kDefaultRoomCount, [&members](int room) { return members.carrier(room); });

  WallClock clock;
  std::vector<std::unique_ptr<UdpEndpoint>> endpoints;
  std::vector<std::unique_ptr<Node>> nodes;
  for (const auto& nc : prep.nodes) {
    endpoints.push_back(std::make_unique<UdpEndpoint>(nc.address, config.net));
    nodes.push_back(std::make_unique<Node>(nc, *endpoints.back(), clock, *out.store, field, &recorder));
  }
  std::vector<std::jthread> threads;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    threads.emplace_back([&, k](std::stop_token st) { RunNode(*nodes[k], *endpoints[k], clock, st); });
  }

  auto sleep_until_ms = [&](std::int64_t ms) {
    while (clock.now_us() < ms * 1000) {
      std::this_thread::sleep_for(std::chrono::microseconds(
          std::min<std::int64_t>(ms * 1000 - clock.now_us(), 20000)));
    }
  };
  std::vector<FaultSpec> faults = config.faults;
  std::stable_sort(faults.begin(), faults.end(),
                   [](const FaultSpec& a, const FaultSpec& b) { return a.at_ms < b.at_ms; });
  Registry registry(*out.store, config.cycle.liveness_window_ms());
  auto kill = [&](std::size_t k) {
    if (k >= threads.size() || !threads[k].joinable()) return;
    threads[k].request_stop();
    threads[k].join();
    members.kill(NodeId{static_cast<std::uint32_t>(k + 1)});
    out.report.killed.push_back({clock.now_us(), NodeId{static_cast<std::uint32_t>(k + 1)}});
  };
  for (const auto& fault : faults) {
    sleep_until_ms(fault.at_ms);
    recorder.note(clock.now_us(), "FAULT " + ToString(fault));
    switch (fault.kind) {
      case FaultSpec::Kind::kKillLeader:
        if (auto leader = registry.recorded_leader()) kill(leader->value - 1);
        break;
      case FaultSpec::Kind::kKillNode:
        kill(fault.node.value - 1);
        break;
      case FaultSpec::Kind::kSetLoss:
        for (auto& ep : endpoints) ep->set_loss_rate(fault.rate);
        break;
      case FaultSpec::Kind::kPartition:
        break;  // rejected by Validate
    }
  }
  sleep_until_ms(config.run_duration_ms());
  for (auto& t : threads) t.request_stop();
  threads.clear();

  CycleBeliefs b;
  b.cycle = static_cast<std::uint64_t>(config.cycles_to_run);
  for (const auto& n : nodes) b.nodes[n->id()] = {false, n->is_leader(), n->known_leader()};
  out.report.beliefs.push_back(std::move(b));
  nodes.clear();
  endpoints.clear();
  out.report.reconciliation = Reconcile(out.ledger, *out.store, config.modes);
  return out;
}

}  // namespace

// ------------------------------------------------------------ faults

FaultSpec ParseFault(std::string_view text) {
  const std::string t = Trim(text);
  const auto at = t.rfind('@');
  if (at == std::string::npos) throw Error(ErrorCode::kConfigError, "fault '" + t + "' needs @<ms>");
  FaultSpec f;
  f.at_ms = Number<std::int64_t>(std::string_view(t).substr(at + 1), "fault time");
  const auto parts = SplitOn(std::string_view(t).substr(0, at), ':');
  const std::string& kind = parts[0];
  if (kind == "kill_leader" && parts.size() == 1) {
    f.kind = FaultSpec::Kind::kKillLeader;
  } else if (kind == "kill_node" && parts.size() == 2) {
    f.kind = FaultSpec::Kind::kKillNode;
    f.node = NodeId{Number<std::uint32_t>(parts[1], "node id")};
  } else if (kind == "set_loss" && parts.size() == 2) {
    f.kind = FaultSpec::Kind::kSetLoss;
    f.rate = Number<double>(parts[1], "loss rate");
  } else if (kind == "partition" && parts.size() == 3) {
    f.kind = FaultSpec::Kind::kPartition;
    for (const auto& id : SplitOn(parts[1], ',')) f.group.push_back(NodeId{Number<std::uint32_t>(id, "node id")});
    f.duration_ms = Number<std::int64_t>(parts[2], "partition duration");
  } else {
    throw Error(ErrorCode::kConfigError, "unknown fault '" + t + "'");
  }
  return f;
}

std::string ToString(const FaultSpec& f) {
  std::string head;
  switch (f.kind) {
    case FaultSpec::Kind::kKillLeader: head = "kill_leader"; break;
    case FaultSpec::Kind::kKillNode: head = "kill_node:" + std::to_string(f.node.value); break;
    case FaultSpec::Kind::kSetLoss: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", f.rate);
      head = std::string("set_loss:") + buf;
      break;
    }
    case FaultSpec::Kind::kPartition: {
      head = "partition:";
      for (std::size_t i = 0; i < f.group.size(); ++i) {
        if (i) head += ",";
        head += std::to_string(f.group[i].value);
      }
      head += ":" + std::to_string(f.duration_ms);
      break;
    }
  }
  return head + "@" + std::to_string(f.at_ms);
}

// ------------------------------------------------------------ config

void ScenarioConfig::Validate() const {
  if (node_count < 1 || node_count > 250) throw Error(ErrorCode::kConfigError, "nodes must be in [1, 250]");
  if (cycles_to_run < 1) throw Error(ErrorCode::kConfigError, "cycles must be >= 1");
  cycle.Validate();
  try {
    net.Validate();
    if (fixture.empty()) visitors.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  if (modes.empty()) throw Error(ErrorCode::kConfigError, "at least one mode is required");
  if (load_requests < 0) throw Error(ErrorCode::kConfigError, "load_requests must be >= 0");
  if (fixture_node.value < 1 || fixture_node.value > static_cast<std::uint32_t>(node_count)) {
    throw Error(ErrorCode::kConfigError, "fixture_node must name a node");
  }
  if (net.mode == Backend::kUdp && (udp_base_port < 1024 || udp_base_port + node_count > 65535)) {
    throw Error(ErrorCode::kConfigError, "udp_base_port out of range");
  }
  for (const auto& f : faults) {
    if (f.at_ms < 0 || f.at_ms > run_duration_ms()) {
      throw Error(ErrorCode::kConfigError, "fault '" + ToString(f) + "' is outside the scenario");
    }
    auto valid_id = [&](NodeId id) { return id.value >= 1 && id.value <= static_cast<std::uint32_t>(node_count); };
    switch (f.kind) {
      case FaultSpec::Kind::kKillLeader: break;
      case FaultSpec::Kind::kKillNode:
        if (!valid_id(f.node)) throw Error(ErrorCode::kConfigError, "fault names unknown node");
        break;
      case FaultSpec::Kind::kSetLoss:
        if (!(f.rate >= 0.0 && f.rate <= 1.0)) throw Error(ErrorCode::kConfigError, "loss rate must be in [0, 1]");
        break;
      case FaultSpec::Kind::kPartition:
        if (net.mode == Backend::kUdp) {
          throw Error(ErrorCode::kConfigError, "partition faults need the simulated backend");
        }
        if (f.group.empty() || f.duration_ms <= 0 || !std::all_of(f.group.begin(), f.group.end(), valid_id)) {
          throw Error(ErrorCode::kConfigError, "bad partition '" + ToString(f) + "'");
        }
        break;
    }
  }
}

std::vector<CountMode> ParseModes(std::string_view text) {
  const std::string t = Trim(text);
  if (t == "both") return {CountMode::kVisitor, CountMode::kRoom};
  try {
    return {ParseCountMode(t)};
  } catch (const Error&) {
    throw Error(ErrorCode::kConfigError, "mode must be visitor, room or both");
  }
}

ScenarioConfig ParseScenarioText(std::string_view text, ScenarioConfig c) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool faults_reset = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfigError, "line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = Trim(std::string_view(line).substr(0, eq));
    const std::string value = Trim(std::string_view(line).substr(eq + 1));
    try {
      if (key == "nodes") c.node_count = Number<int>(value, key);
      else if (key == "cycles") c.cycles_to_run = Number<int>(value, key);
      else if (key == "seed") c.net.seed = c.visitors.seed = Number<std::uint64_t>(value, key);
      else if (key == "backend") c.net.mode = ParseBackend(value);
      else if (key == "loss") c.net.loss_rate = Number<double>(value, key);
      else if (key == "latency_min_ms") c.net.latency_min_ms = Number<std::int64_t>(value, key);
      else if (key == "latency_max_ms") c.net.latency_max_ms = Number<std::int64_t>(value, key);
      else if (key == "service_ms") c.net.service_ms = Number<double>(value, key);
      else if (key == "cycle_ms") c.cycle.cycle_duration_ms = Number<std::int64_t>(value, key);
      else if (key == "window_ms") c.cycle.mapreduce_window_ms = Number<std::int64_t>(value, key);
      else if (key == "min_responding") c.cycle.min_responding_nodes = Number<int>(value, key);
      else if (key == "retry_limit") c.cycle.retry_limit = Number<int>(value, key);
      else if (key == "ping_timeout_ms") c.cycle.ping_timeout_ms = Number<std::int64_t>(value, key);
      else if (key == "ping_retries") c.cycle.ping_retries = Number<int>(value, key);
      else if (key == "submit_retry_ms") c.cycle.submit_retry_ms = Number<std::int64_t>(value, key);
      else if (key == "visitors") c.visitors.visitor_count = Number<int>(value, key);
      else if (key == "dwell_min_ms") c.visitors.dwell_min_ms = Number<std::int64_t>(value, key);
      else if (key == "dwell_max_ms") c.visitors.dwell_max_ms = Number<std::int64_t>(value, key);
      else if (key == "double_read_rate") c.visitors.double_read_rate = Number<double>(value, key);
      else if (key == "tag_mix") {
        const auto parts = SplitOn(value, ',');
        if (parts.size() != 3) throw Error(ErrorCode::kConfigError, "tag_mix needs three values");
        for (int i = 0; i < 3; ++i) c.visitors.tag_mix[i] = Number<double>(parts[i], key);
      } else if (key == "fixture") c.fixture = value;
      else if (key == "fixture_node") c.fixture_node = NodeId{Number<std::uint32_t>(value, key)};
      else if (key == "mode") c.modes = ParseModes(value);
      else if (key == "override") c.leader_override = NodeId{Number<std::uint32_t>(value, key)};
      else if (key == "load_requests") c.load_requests = Number<int>(value, key);
      else if (key == "udp_base_port") c.udp_base_port = Number<int>(value, key);
      else if (key == "store") c.store_path = value;
      else if (key == "fault") {
        if (!faults_reset) {
          c.faults.clear();
          faults_reset = true;
        }
        c.faults.push_back(ParseFault(value));
      } else {
        throw Error(ErrorCode::kConfigError, "unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

ScenarioConfig LoadScenarioFile(const std::filesystem::path& path, ScenarioConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ParseScenarioText(text.str(), std::move(base));
}

void ApplyEnvironment(ScenarioConfig& config) {
  if (const char* seed = std::getenv("CROWDMW_SEED"); seed && *seed) {
    config.net.seed = config.visitors.seed = Number<std::uint64_t>(seed, "CROWDMW_SEED");
  }
  if (const char* backend = std::getenv("CROWDMW_BACKEND"); backend && *backend) {
    try {
      config.net.mode = ParseBackend(backend);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, e.what());
    }
  }
}

// ------------------------------------------------------------ run

ScenarioOutcome RunScenario(const ScenarioConfig& config) {
  config.Validate();
  return config.net.mode == Backend::kUdp ? RunUdp(config) : RunSimulated(config);
}

Reconciliation Reconcile(const GenerationLedger& ledger, const Store& store,
                         std::span<const CountMode> modes, int room_count) {
  Reconciliation rec;
  std::ostringstream why;
  const auto wm = store.watermarks();

  // Committed ranges must tile [0, watermark) per room with no overlap.
  std::map<int, std::vector<ProgressRow>> by_room;
  for (const auto& p : store.progress()) by_room[p.room].push_back(p);
  for (auto& [room, rows] : by_room) {
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.from_seq < b.from_seq; });
    std::uint64_t next = 0;
    for (const auto& p : rows) {
      if (p.from_seq != next) why << "room " << room << " range gap/overlap at " << p.from_seq << "; ";
      next = p.to_seq;
    }
    if (wm.count(room) && next != wm.at(room)) why << "room " << room << " watermark mismatch; ";
  }

  // Which committed cycle took each (room, seq).
  auto owner = [&](int room, std::uint64_t seq) -> std::optional<std::uint64_t> {
    const auto it = by_room.find(room);
    if (it == by_room.end()) return std::nullopt;
    for (const auto& p : it->second) {
      if (seq >= p.from_seq && seq < p.to_seq) return p.cycle_id;
    }
    return std::nullopt;
  };

  std::map<std::uint64_t, Aggregates> visitor;
  std::map<std::uint64_t, Aggregates> room;
  for (const auto& r : ledger.records) {
    if (r.duplicate) {
      ++rec.duplicates;
      continue;
    }
    ++rec.generated;
    const auto cycle = owner(r.room.number, r.room_seq);
    if (!cycle) {
      ++rec.pending;
      continue;
    }
    ++rec.committed;
    visitor[*cycle][std::string(ToString(r.tag))] += static_cast<std::uint64_t>(r.room.number);
    room[*cycle][RoomKey(r.room)] += 1;
  }

  auto wants = [&](CountMode m) { return std::find(modes.begin(), modes.end(), m) != modes.end(); };
  std::set<std::uint64_t> cycles;
  for (const auto& p : store.progress()) cycles.insert(p.cycle_id);
  for (const auto& r : store.results()) cycles.insert(r.cycle_id);
  std::uint64_t stored_total = 0;
  for (std::uint64_t c : cycles) {
    Aggregates got_visitor;
    Aggregates got_room;
    for (const auto& row : store.results_for(c)) {
      if (row.count == 0) continue;
      (row.mode == CountMode::kVisitor ? got_visitor : got_room)[row.key] = row.count;
      if (row.mode == CountMode::kRoom) stored_total += row.count;
    }
    if (wants(CountMode::kVisitor) && got_visitor != visitor[c]) why << "cycle " << c << " visitor rows differ; ";
    if (wants(CountMode::kRoom) && got_room != room[c]) why << "cycle " << c << " room rows differ; ";
  }
  if (wants(CountMode::kRoom) && stored_total != rec.committed) {
    why << "store counts " << stored_total << " readings, ledger " << rec.committed << "; ";
  }
  if (rec.committed + rec.pending != rec.generated) why << "committed + pending != generated; ";
  (void)room_count;
  rec.detail = why.str();
  rec.ok = rec.detail.empty();
  return rec;
}

// ------------------------------------------------------------ reports

double Percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size()))) - 1;
  return values[idx];
}

std::vector<double> MetricsReport::values(std::string_view kind) const {
  std::vector<double> out;
  for (const auto& s : samples) {
    if (s.kind == kind) out.push_back(s.value);
  }
  return out;
}

double MetricsReport::mean(std::string_view kind) const {
  const auto v = values(kind);
  if (v.empty()) return 0.0;
  double sum = 0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

std::vector<SummaryRow> MetricsReport::summary() const {
  std::map<std::string, std::vector<double>> by_kind;
  for (const auto& s : samples) by_kind[s.kind].push_back(s.value);
  std::vector<SummaryRow> out;
  for (const auto& [kind, v] : by_kind) {
    double sum = 0;
    for (double x : v) sum += x;
    out.push_back({kind, v.size(), sum / static_cast<double>(v.size()), Percentile(v, 50), Percentile(v, 95),
                   Percentile(v, 99)});
  }
  return out;
}

std::string MetricsCsv(const MetricsReport& report) {
  std::string out = "kind,node,cycle,t_ms,value\n";
  for (const auto& s : report.samples) {
    out += s.kind + "," + std::to_string(s.node.value) + "," + std::to_string(s.cycle) + "," +
           Fixed3(static_cast<double>(s.t_us) / 1000.0) + "," + Fixed3(s.value) + "\n";
  }
  return out;
}

std::string SummaryCsv(const MetricsReport& report) {
  std::string out = "metric,count,mean,p50,p95,p99\n";
  for (const auto& r : report.summary()) {
    out += r.metric + "," + std::to_string(r.count) + "," + Fixed3(r.mean) + "," + Fixed3(r.p50) + "," +
           Fixed3(r.p95) + "," + Fixed3(r.p99) + "\n";
  }
  return out;
}

void EmitReport(const MetricsReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const char* name, const std::string& body) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    out.flush();
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  };
  std::string events;
  for (const auto& line : report.events) events += line + "\n";
  write("metrics.csv", MetricsCsv(report));
  write("summary.csv", SummaryCsv(report));
  write("events.log", events);
}

std::string SweepLoad(const ScenarioConfig& config, std::span<const int> request_counts) {
  if (!std::is_sorted(request_counts.begin(), request_counts.end())) {
    throw Error(ErrorCode::kConfigError, "request counts must be ascending");
  }
  std::string csv = "requests,mean_response_ms,rtt_ms,ttfb_ms\n";
  for (int count : request_counts) {
    if (count < 0) throw Error(ErrorCode::kConfigError, "request counts must be >= 0");
    ScenarioConfig c = config;
    c.load_requests = count;
    const auto outcome = RunScenario(c);
    const auto& r = outcome.report;
    csv += std::to_string(count) + "," + Fixed3(r.mean("response")) + "," + Fixed3(r.mean("rtt")) + "," +
           Fixed3(r.mean("ttfb")) + "\n";
  }
  return csv;
}

std::vector<std::string> ElectionDemo(int node_count, std::uint64_t seed, int cycles) {
  ScenarioConfig c;
  c.node_count = node_count;
  c.cycles_to_run = cycles;
  c.net.seed = c.visitors.seed = seed;
  const std::int64_t d = c.cycle.cycle_duration_ms;
  // Every other cycle, so the successor shows up in between.
  for (int k = 1, kills = 0; k < cycles && kills + 1 < node_count; k += 2, ++kills) {
    c.faults.push_back(ParseFault("kill_leader@" + std::to_string(k * d + d * 3 / 5)));
  }
  const auto outcome = RunScenario(c);
  std::vector<std::string> lines;
  for (const auto& b : outcome.report.beliefs) {
    std::vector<std::uint32_t> leaders;
    std::string live;
    for (const auto& [id, belief] : b.nodes) {
      if (!belief.alive) continue;
      if (belief.is_leader) leaders.push_back(id.value);
      live += (live.empty() ? "" : ",") + std::to_string(id.value);
    }
    std::string who = leaders.empty() ? "none" : std::to_string(leaders.front());
    for (std::size_t i = 1; i < leaders.size(); ++i) who += "+" + std::to_string(leaders[i]);
    std::string line = "cycle " + std::to_string(b.cycle) + ": leader=" + who + " live=" + live;
    for (const auto& k : outcome.report.killed) {
      if (static_cast<std::uint64_t>(k.t_us / (d * 1000)) == b.cycle) {
        line += " (killed node " + std::to_string(k.node.value) + " at " + Fixed3(k.t_us / 1000.0) + " ms)";
      }
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace crowdmw
