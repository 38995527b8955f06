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

#include "crowdmw/node.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "crowdmw/error.hpp"

namespace crowdmw {

namespace {

std::string Id(NodeId id) { return std::to_string(id.value); }

bool Awaiting(NodePhase p) {
  return p == NodePhase::kSubmitting || p == NodePhase::kAwaitingSegment ||
         p == NodePhase::kAwaitingResult;
}

}  // namespace

std::string FormatLogLine(std::int64_t t_us, NodeId node, const std::string& text) {
  char head[64];
  std::snprintf(head, sizeof(head), "t=%.3f node=%u ", static_cast<double>(t_us) / 1000.0, node.value);
  return head + text;
}

Node::Node(NodeConfig config, Endpoint& endpoint, const Clock& clock, Store& store,
           ReadingSource& source, NodeObserver* observer)
    : config_(std::move(config)),
      endpoint_(endpoint),
      clock_(clock),
      store_(store),
      registry_(store, config_.cycle.liveness_window_ms()),
      source_(source),
      observer_(observer),
      rng_(config_.seed ^ (0x9E3779B97F4A7C15ULL * (config_.id.value + 1))) {
  config_.cycle.Validate();
  if (config_.modes.empty()) throw Error(ErrorCode::kConfigError, "at least one count mode is required");
}

void Node::start() {
  if (!alive_ || started_) return;
  started_ = true;
  const std::int64_t d_us = ms_to_us(config_.cycle.cycle_duration_ms);
  const std::int64_t now = now_us();
  timers_[Timer::kCycleStart] = (now + d_us - 1) / d_us * d_us;
  log("START address=" + config_.address);
  try {
    registry_.register_node(config_.id, config_.address, clock_.now_ms());
  } catch (const Error& e) {
    log(std::string("REGISTER_FAILED ") + e.what());
  }
}

std::optional<std::int64_t> Node::next_wakeup_us() const {
  if (!alive_ || timers_.empty()) return std::nullopt;
  std::int64_t best = timers_.begin()->second;
  for (const auto& [t, at] : timers_) best = std::min(best, at);
  return best;
}

void Node::wake() {
  while (alive_) {
    std::optional<Timer> due;
    std::int64_t due_at = 0;
    for (const auto& [t, at] : timers_) {
      if (at <= now_us() && (!due || at < due_at)) {
        due = t;
        due_at = at;
      }
    }
    if (!due) return;
    timers_.erase(*due);
    try {
      switch (*due) {
        case Timer::kCycleStart: on_cycle_start(); break;
        case Timer::kProbe: on_probe_timeout(); break;
        case Timer::kSubmitRetry:
          if (!submit_acked_ && submit_attempts_ <= config_.cycle.retry_limit && Awaiting(phase_)) {
            send_submission();
          }
          break;
        case Timer::kWindow: on_window(); break;
        case Timer::kResend: on_resend(); break;
        case Timer::kMergeDeadline: on_merge_deadline(); break;
      }
    } catch (const Error& e) {
      log(std::string("ERROR ") + e.what());
    }
  }
}

void Node::kill() {
  if (!alive_) return;
  log("KILLED");
  alive_ = false;
  timers_.clear();
  endpoint_.close();
}

// ------------------------------------------------------------ cycle start

void Node::on_cycle_start() {
  const std::int64_t now = now_us();
  if (cycle_start_us_ > 0 || cycle_ > 0) {
    metric("messages_sent", static_cast<double>(sent_count_));
    metric("messages_received", static_cast<double>(received_count_));
  }
  const std::int64_t d_us = ms_to_us(config_.cycle.cycle_duration_ms);
  cycle_ = static_cast<std::uint32_t>(now / d_us);
  cycle_start_us_ = now;
  timers_.clear();
  timers_[Timer::kCycleStart] = (static_cast<std::int64_t>(cycle_) + 1) * d_us;

  transition(NodePhase::kRegistering);
  is_leader_ = false;
  leader_.reset();
  leader_address_.clear();
  suspects_.clear();
  probe_.reset();
  coord_.reset();
  dispatched_.clear();
  received_.clear();
  resends_ = 0;
  window_closed_ = false;
  ttfb_recorded_ = false;
  submit_acked_ = false;
  submit_xfer_ = 0;
  load_sent_us_.clear();
  reduce_replies_.clear();
  reassembler_.clear();
  sent_count_ = 0;
  received_count_ = 0;

  try {
    registry_.register_node(config_.id, config_.address, clock_.now_ms());
  } catch (const Error& e) {
    log(std::string("REGISTER_FAILED ") + e.what());
  }
  collect();
  transition(NodePhase::kCheckingServer);
  submit_pending_ = true;
  evaluate_leader();

  std::vector<Datagram> early = std::move(early_);
  early_.clear();
  for (auto& d : early) {
    if (d.message.cycle_id >= cycle_) handle(d);
  }
}

void Node::collect() {
  Collected got = source_.collect(config_.id, clock_.now_ms());
  recent_.insert(recent_.end(), got.context.begin(), got.context.end());
  for (const auto& r : got.readings) {
    auto& cov = buffer_.coverage[r.room.number];
    cov = std::max(cov, r.seq + 1);
    const bool have = std::any_of(buffer_.pending.begin(), buffer_.pending.end(), [&](const SensorReading& p) {
      return p.room == r.room && p.seq == r.seq;
    });
    if (have) continue;
    const bool double_read = std::any_of(recent_.begin(), recent_.end(), [&](const SensorReading& x) {
      return x.badge == r.badge && x.room == r.room && x.seq != r.seq &&
             std::llabs(x.timestamp_ms - r.timestamp_ms) <= kDoubleReadWindowMs;
    });
    if (double_read) {
      log("DROP_DOUBLE_READ room=" + std::to_string(r.room.number) + " seq=" + std::to_string(r.seq));
      continue;
    }
    buffer_.pending.push_back(r);
    recent_.push_back(r);
  }
  if (!recent_.empty()) {
    std::int64_t newest = recent_.front().timestamp_ms;
    for (const auto& x : recent_) newest = std::max(newest, x.timestamp_ms);
    std::erase_if(recent_, [&](const SensorReading& x) {
      return x.timestamp_ms < newest - 2 * kDoubleReadWindowMs;
    });
  }
}

void Node::evaluate_leader() {
  const auto snap = registry_.snapshot(clock_.now_ms());
  RegistrySnapshot view;
  view.taken_at_ms = snap.taken_at_ms;
  for (const auto& rec : snap.records) {
    if (!suspects_.count(rec.node_id)) view.records.push_back(rec);
  }
  std::optional<NodeId> wanted = config_.leader_override;
  if (wanted && suspects_.count(*wanted)) wanted.reset();
  const auto window = registry_.liveness_window_ms();

  NodeId candidate;
  try {
    candidate = ElectLeader(view, wanted, window);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kOverrideNotLive) {
      log(std::string("ELECT none: ") + e.what());
      return;
    }
    try {
      candidate = ElectLeader(view, std::nullopt, window);
    } catch (const Error& inner) {
      log(std::string("ELECT none: ") + inner.what());
      return;
    }
  }
  if (phase_ == NodePhase::kElecting) {
    log("ELECT leader=" + Id(candidate));
    if (observer_) observer_->on_election(config_.id, candidate, now_us());
  }
  if (candidate == config_.id) {
    become_leader();
    return;
  }
  for (const auto& rec : view.records) {
    if (rec.node_id == candidate) {
      start_probe(candidate, rec.address);
      return;
    }
  }
}

void Node::become_leader() {
  const bool was = is_leader_;
  is_leader_ = true;
  leader_ = config_.id;
  leader_address_ = config_.address;
  probe_.reset();
  timers_.erase(Timer::kProbe);
  try {
    registry_.set_leader(config_.id);
  } catch (const Error& e) {
    log(std::string("SET_LEADER_FAILED ") + e.what());
  }
  if (!was) log("LEADER cycle=" + std::to_string(cycle_));
  transition(NodePhase::kCollecting);
  if (!submit_pending_) return;
  submit_pending_ = false;
  coord_.emplace(cycle_, config_.id, config_.modes, config_.room_count);
  Submission own = DecodeSubmissionBody(EncodeSubmissionBody(buffer_));
  own.node = config_.id;
  own.address = config_.address;
  received_[config_.id] = std::move(own);
  for (const auto& [node, sub] : received_) coord_->add_submission(sub);
  timers_[Timer::kWindow] =
      cycle_start_us_ + ms_to_us(config_.cycle.cycle_duration_ms - config_.cycle.mapreduce_window_ms);
}

void Node::start_probe(NodeId target, const std::string& address) {
  is_leader_ = false;
  if (phase_ == NodePhase::kElecting) transition(NodePhase::kCheckingServer);
  probe_ = Probe{target, address, rng_(), 0, 0};
  send_ping();
}

void Node::send_ping() {
  ++probe_->attempts;
  probe_->sent_us = now_us();
  send(probe_->address, MessageKind::kPing, EncodeNonce(probe_->nonce));
  timers_[Timer::kProbe] = now_us() + ms_to_us(config_.cycle.ping_timeout_ms);
}

void Node::on_probe_timeout() {
  if (!probe_) return;
  if (probe_->attempts < config_.cycle.ping_retries) {
    send_ping();
    return;
  }
  log("SUSPECT node=" + Id(probe_->target));
  suspects_.insert(probe_->target);
  probe_.reset();
  transition(NodePhase::kElecting);
  evaluate_leader();
}

void Node::on_pong(const Datagram& d) {
  if (!probe_ || d.from != probe_->address || !IsPongFor(d.message, probe_->nonce)) return;
  metric("rtt", static_cast<double>(now_us() - probe_->sent_us) / 1000.0);
  leader_ = probe_->target;
  leader_address_ = probe_->address;
  probe_.reset();
  timers_.erase(Timer::kProbe);
  log("SERVER_AVAILABLE leader=" + Id(*leader_));
  if (submit_pending_) {
    submit();
  } else {
    transition(NodePhase::kCollecting);
  }
}

// ------------------------------------------------------------ client side

void Node::submit() {
  submit_pending_ = false;
  submit_body_ = EncodeSubmissionBody(buffer_);
  submit_xfer_ = next_xfer_++;
  submit_attempts_ = 0;
  submit_acked_ = false;
  submit_sent_us_ = now_us();
  transition(NodePhase::kSubmitting);
  send_submission();
  for (int i = 0; i < config_.load_requests; ++i) {
    const std::uint32_t xfer = next_xfer_++;
    load_sent_us_[xfer] = now_us();
    send_parts(leader_address_, MessageKind::kDataSubmit, xfer, "probe");
  }
}

void Node::send_submission() {
  ++submit_attempts_;
  send_parts(leader_address_, MessageKind::kDataSubmit, submit_xfer_, submit_body_);
  timers_[Timer::kSubmitRetry] = now_us() + ms_to_us(config_.cycle.submit_retry_ms);
}

void Node::on_ack(const Datagram& d) {
  std::uint32_t xfer = 0;
  const auto& p = d.message.payload;
  auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), xfer);
  if (ec != std::errc() || ptr != p.data() + p.size()) return;
  if (xfer == submit_xfer_ && !submit_acked_ && d.from == leader_address_) {
    submit_acked_ = true;
    timers_.erase(Timer::kSubmitRetry);
    metric("response", static_cast<double>(now_us() - submit_sent_us_) / 1000.0);
    if (phase_ == NodePhase::kSubmitting) transition(NodePhase::kAwaitingSegment);
    return;
  }
  if (auto it = load_sent_us_.find(xfer); it != load_sent_us_.end()) {
    metric("response", static_cast<double>(now_us() - it->second) / 1000.0);
    load_sent_us_.erase(it);
  }
}

void Node::on_segment(const Datagram& d) {
  const auto r = reassembler_.add(d.from, d.message);
  if (r.status == Reassembler::Status::kAlreadyComplete) {
    if (auto it = reduce_replies_.find(r.xfer); it != reduce_replies_.end()) {
      send_parts(d.from, MessageKind::kReduceResult, it->second.first, it->second.second);
    }
    return;
  }
  if (r.status != Reassembler::Status::kCompleted) return;
  if (phase_ != NodePhase::kSubmitting && phase_ != NodePhase::kAwaitingSegment) {
    log("IGNORE SEGMENT_ASSIGN phase=" + std::string(ToString(phase_)));
    return;
  }
  SegmentReduction reduction;
  try {
    const SegmentWire wire = DecodeSegmentBody(r.complete->body);
    reduction = ReduceAssigned(wire, config_.id, config_.modes, config_.room_count);
  } catch (const Error& e) {
    log(std::string("SEGMENT_REJECTED ") + e.what());
    return;
  }
  submit_acked_ = true;
  timers_.erase(Timer::kSubmitRetry);
  transition(NodePhase::kReducing);
  const std::uint32_t xfer = next_xfer_++;
  std::string body = EncodeReduceBody(reduction);
  send_parts(d.from, MessageKind::kReduceResult, xfer, body);
  reduce_replies_[r.xfer] = {xfer, std::move(body)};
  transition(NodePhase::kAwaitingResult);
}

void Node::apply_watermarks(const std::map<int, std::uint64_t>& watermarks) {
  buffer_.prune(watermarks);
  for (const auto& [room, wm] : watermarks) source_.acknowledge(room, wm);
}

void Node::on_success(const Datagram& d) {
  std::map<int, std::uint64_t> wm;
  try {
    wm = DecodeWatermarks(d.message.payload);
  } catch (const Error&) {
    log("MALFORMED CYCLE_SUCCESS");
    return;
  }
  apply_watermarks(wm);
  buffer_.committed_through = std::max(buffer_.committed_through, d.message.cycle_id);
  if (d.message.cycle_id == cycle_ && !is_leader_ && Awaiting(phase_)) {
    timers_.erase(Timer::kSubmitRetry);
    transition(NodePhase::kCollecting);
  }
}

void Node::on_abort_msg(const Datagram& d) {
  log("CYCLE_ABORTED by=" + Id(d.message.sender) + " reason=" + d.message.payload);
  if (is_leader_ || !Awaiting(phase_)) return;
  timers_.erase(Timer::kSubmitRetry);
  submit_pending_ = false;
  transition(NodePhase::kCheckingServer);
  evaluate_leader();
}

// ------------------------------------------------------------ leader side

void Node::on_data_submit(const Datagram& d) {
  const auto r = reassembler_.add(d.from, d.message);
  if (r.status == Reassembler::Status::kAlreadyComplete) {
    send(d.from, MessageKind::kRegisterAck, std::to_string(r.xfer));
    return;
  }
  if (r.status != Reassembler::Status::kCompleted) return;
  if (r.complete->body == "probe") {
    send(d.from, MessageKind::kRegisterAck, std::to_string(r.xfer));
    return;
  }
  Submission sub;
  try {
    sub = DecodeSubmissionBody(r.complete->body);
  } catch (const Error& e) {
    log(std::string("MALFORMED DATA_SUBMIT ") + e.what());
    return;
  }
  if (window_closed_) {
    log("LATE DATA_SUBMIT from=" + Id(d.message.sender));
    return;
  }
  sub.node = d.message.sender;
  sub.address = d.from;
  received_[sub.node] = sub;
  if (coord_) coord_->add_submission(std::move(sub));
  send(d.from, MessageKind::kRegisterAck, std::to_string(r.xfer));
}

void Node::on_window() {
  if (!is_leader_ || !coord_) return;
  window_closed_ = true;
  transition(NodePhase::kConsolidating);
  const auto need = static_cast<std::size_t>(config_.cycle.min_responding_nodes);
  if (coord_->responder_count() < need) {
    abort_cycle(std::to_string(coord_->responder_count()) + " of " + std::to_string(need) +
                " required nodes responded");
    return;
  }
  const auto& segments = coord_->consolidate(store_.watermarks());
  log("CONSOLIDATED pairs=" + std::to_string(coord_->consolidated().sorted_pairs.size()) +
      " segments=" + std::to_string(segments.size()));
  transition(NodePhase::kDispatching);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].assignee == config_.id) {
      coord_->reduce_locally(i);
    } else {
      dispatch_segment(i);
    }
  }
  transition(NodePhase::kMerging);
  if (coord_->complete()) {
    finalize();
    return;
  }
  const std::int64_t step_us = ms_to_us(config_.cycle.mapreduce_window_ms) / 5;
  timers_[Timer::kResend] = now_us() + step_us;
  timers_[Timer::kMergeDeadline] = cycle_start_us_ + ms_to_us(config_.cycle.cycle_duration_ms) - step_us;
}

void Node::dispatch_segment(std::size_t index) {
  const Segment& seg = coord_->segments().at(index);
  auto it = dispatched_.find(index);
  if (it == dispatched_.end()) {
    it = dispatched_.emplace(index, std::make_pair(next_xfer_++, EncodeSegmentBody(seg))).first;
  }
  send_parts(coord_->submissions().at(seg.assignee).address, MessageKind::kSegmentAssign, it->second.first,
             it->second.second);
}

void Node::on_resend() {
  if (phase_ != NodePhase::kMerging || !coord_) return;
  if (resends_ >= config_.cycle.retry_limit) return;
  ++resends_;
  for (std::size_t i : coord_->missing()) dispatch_segment(i);
  timers_[Timer::kResend] = now_us() + ms_to_us(config_.cycle.mapreduce_window_ms) / 5;
}

void Node::on_merge_deadline() {
  if (phase_ != NodePhase::kMerging || !coord_) return;
  for (std::size_t i : coord_->missing()) {
    log("LOCAL_FALLBACK segment=" + std::to_string(i));
    coord_->reduce_locally(i);
  }
  finalize();
}

void Node::on_reduce_result(const Datagram& d) {
  const auto r = reassembler_.add(d.from, d.message);
  if (r.status != Reassembler::Status::kCompleted) return;
  if (phase_ != NodePhase::kMerging || !coord_) return;
  const SegmentReduction reduction = DecodeReduceBody(r.complete->body, d.message.sender);
  if (!coord_->accept(reduction)) {
    log("REJECT REDUCE_RESULT from=" + Id(d.message.sender));
    return;
  }
  if (coord_->complete()) finalize();
}

void Node::finalize() {
  timers_.erase(Timer::kResend);
  timers_.erase(Timer::kMergeDeadline);
  transition(NodePhase::kCommitting);
  for (int attempt = 0; attempt < config_.cycle.retry_limit && coord_->verdict() != IntegrityVerdict::kIntact;
       ++attempt) {
    log("INTEGRITY_RETRY attempt=" + std::to_string(attempt + 1));
    for (std::size_t i = 0; i < coord_->segments().size(); ++i) coord_->reduce_locally(i);
  }
  if (coord_->verdict() != IntegrityVerdict::kIntact) {
    abort_cycle("integrity check failed");
    return;
  }
  const CycleResult result = coord_->result();
  const auto& progress = coord_->consolidated().progress;
  if (result.total_readings > 0 || !progress.empty()) {
    try {
      store_.commit_results(result, config_.modes, progress, clock_.now_ms());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kConflictingCommit && e.code() != ErrorCode::kStorageFailure) throw;
      abort_cycle(e.what());
      return;
    }
    log("COMMIT cycle=" + std::to_string(cycle_) + " readings=" + std::to_string(result.total_readings) +
        " fallbacks=" + std::to_string(coord_->local_fallbacks()));
    if (observer_) observer_->on_commit(config_.id, result, now_us());
    metric("readings_committed", static_cast<double>(result.total_readings));
  }
  metric("cycle_duration", static_cast<double>(now_us() - cycle_start_us_) / 1000.0);
  transition(NodePhase::kBroadcasting);
  const auto wm = store_.watermarks();
  const std::string body = EncodeWatermarks(wm);
  for (const auto& [node, sub] : coord_->submissions()) {
    if (node != config_.id) send(sub.address, MessageKind::kCycleSuccess, body);
  }
  apply_watermarks(wm);
  buffer_.committed_through = cycle_;
  if (observer_) observer_->on_cycle_complete(config_.id, cycle_, now_us());
  transition(NodePhase::kCollecting);
}

void Node::abort_cycle(const std::string& reason) {
  timers_.erase(Timer::kWindow);
  timers_.erase(Timer::kResend);
  timers_.erase(Timer::kMergeDeadline);
  log("ABORT cycle=" + std::to_string(cycle_) + " reason=" + reason);
  if (observer_) observer_->on_abort(config_.id, cycle_, reason);
  transition(NodePhase::kBroadcasting);
  const auto snap = registry_.snapshot(clock_.now_ms());
  for (const auto& rec : snap.records) {
    if (rec.node_id != config_.id && IsLive(rec, clock_.now_ms(), registry_.liveness_window_ms())) {
      send(rec.address, MessageKind::kCycleAbort, reason);
    }
  }
  coord_.reset();
  dispatched_.clear();
  transition(NodePhase::kElecting);
  evaluate_leader();
}

// ------------------------------------------------------------ plumbing

void Node::handle(const Datagram& d) {
  if (!alive_) return;
  const Message& m = d.message;
  ++received_count_;
  log("RECV " + std::string(ToString(m.kind)) + " from=" + Id(m.sender) + " cycle=" + std::to_string(m.cycle_id) +
      " bytes=" + std::to_string(m.payload.size()));
  if (!started_ || m.cycle_id > cycle_) {
    if (m.kind != MessageKind::kPing && early_.size() < 4096) early_.push_back(d);
    if (m.kind != MessageKind::kPing) return;
  }
  if (!ttfb_recorded_ && !is_leader_ && m.cycle_id == cycle_ &&
      ((probe_ && d.from == probe_->address) || (!leader_address_.empty() && d.from == leader_address_))) {
    ttfb_recorded_ = true;
    metric("ttfb", static_cast<double>(now_us() - cycle_start_us_) / 1000.0);
  }
  try {
    switch (m.kind) {
      case MessageKind::kPing:
        send(d.from, MessageKind::kPong, m.payload);
        return;
      case MessageKind::kCycleSuccess:
        on_success(d);
        return;
      default:
        break;
    }
    if (m.cycle_id < cycle_) return;
    switch (m.kind) {
      case MessageKind::kPong: on_pong(d); break;
      case MessageKind::kRegisterAck: on_ack(d); break;
      case MessageKind::kDataSubmit: on_data_submit(d); break;
      case MessageKind::kSegmentAssign: on_segment(d); break;
      case MessageKind::kReduceResult: on_reduce_result(d); break;
      case MessageKind::kCycleAbort: on_abort_msg(d); break;
      default: break;
    }
  } catch (const Error& e) {
    log(std::string("ERROR ") + e.what());
  }
}

void Node::transition(NodePhase to) {
  if (to == phase_) return;
  if (!IsLegalTransition(phase_, to)) {
    throw std::logic_error("illegal phase transition " + std::string(ToString(phase_)) + "->" +
                           std::string(ToString(to)));
  }
  log("PHASE " + std::string(ToString(phase_)) + "->" + std::string(ToString(to)));
  phase_ = to;
}

void Node::send(const std::string& dest, MessageKind kind, std::string payload) {
  if (!alive_) return;
  const std::size_t bytes = payload.size();
  Message m{kProtocolVersion, kind, config_.id, cycle_, std::move(payload)};
  try {
    endpoint_.send(dest, m);
  } catch (const Error& e) {
    log(std::string("SEND_FAILED ") + e.what());
    return;
  }
  ++sent_count_;
  log("SEND " + std::string(ToString(kind)) + " to=" + dest + " cycle=" + std::to_string(cycle_) +
      " bytes=" + std::to_string(bytes));
}

void Node::send_parts(const std::string& dest, MessageKind kind, std::uint32_t xfer, const std::string& body) {
  for (auto& part : Fragment(xfer, body)) send(dest, kind, std::move(part));
}

void Node::log(const std::string& text) {
  if (observer_) observer_->on_log(now_us(), config_.id, text);
}

void Node::metric(const std::string& kind, double value) {
  char text[96];
  std::snprintf(text, sizeof(text), "METRIC %s=%.3f", kind.c_str(), value);
  log(text);
  if (observer_) observer_->on_metric({kind, config_.id, cycle_, now_us(), value});
}

void RunNode(Node& node, Endpoint& endpoint, const Clock& clock, std::stop_token stop) {
  node.start();
  while (!stop.stop_requested() && node.alive()) {
    std::int64_t timeout_ms = 10;
    if (auto at = node.next_wakeup_us()) {
      timeout_ms = std::clamp<std::int64_t>((*at - clock.now_us() + 999) / 1000, 0, 10);
    }
    std::optional<Datagram> got;
    try {
      got = endpoint.recv(timeout_ms);
    } catch (const Error&) {
      break;
    }
    if (got) node.handle(*got);
    node.wake();
  }
  node.kill();
}

}  // namespace crowdmw
