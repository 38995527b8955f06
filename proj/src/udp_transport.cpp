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

#include "crowdmw/udp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>

#include "crowdmw/error.hpp"

namespace crowdmw {

namespace {

std::int64_t SteadyMicros() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

sockaddr_in ToSockaddr(const std::string& address) {
  const HostPort hp = ParseHostPort(address);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(hp.port);
  const std::string host = hp.host == "localhost" ? "127.0.0.1" : hp.host;
  if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
    throw Error(ErrorCode::kInvalidArgument, "not an IPv4 address: " + hp.host);
  }
  return sa;
}

std::string FromSockaddr(const sockaddr_in& sa) {
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof(buf));
  return std::string(buf) + ":" + std::to_string(ntohs(sa.sin_port));
}

}  // namespace

WallClock::WallClock() : origin_us_(SteadyMicros()) {}

std::int64_t WallClock::now_us() const { return SteadyMicros() - origin_us_; }

UdpEndpoint::UdpEndpoint(const std::string& address, const NetConfig& config)
    : address_(address), loss_rate_(config.loss_rate), rng_(config.seed) {
  const sockaddr_in sa = ToSockaddr(address);
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw Error(ErrorCode::kIoFailure, std::string("socket: ") + std::strerror(errno));
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&sa), sizeof(sa)) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::kIoFailure, "bind " + address + ": " + std::strerror(err));
  }
}

UdpEndpoint::~UdpEndpoint() { close(); }

SendReceipt UdpEndpoint::send(const std::string& dest, const Message& message) {
  const auto frame = EncodeMessage(message);
  const sockaddr_in sa = ToSockaddr(dest);
  int fd;
  {
    std::lock_guard lock(mu_);
    if (fd_ < 0) throw Error(ErrorCode::kEndpointClosed, address_);
    fd = fd_;
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    if (u < loss_rate_) return {};
  }
  // Datagram semantics: a failed sendto is a lost packet, not an error.
  ::sendto(fd, frame.data(), frame.size(), 0, reinterpret_cast<const sockaddr*>(&sa), sizeof(sa));
  return {};
}

std::optional<Datagram> UdpEndpoint::recv(std::int64_t timeout_ms) {
  const std::int64_t deadline = SteadyMicros() + timeout_ms * 1000;
  std::array<std::uint8_t, kMaxDatagram + 1> buf{};
  while (true) {
    int fd;
    {
      std::lock_guard lock(mu_);
      if (fd_ < 0) throw Error(ErrorCode::kEndpointClosed, address_);
      fd = fd_;
    }
    const std::int64_t left_ms = std::max<std::int64_t>(0, (deadline - SteadyMicros() + 999) / 1000);
    pollfd pfd{fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left_ms));
    if (rc == 0) return std::nullopt;
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIoFailure, std::string("poll: ") + std::strerror(errno));
    }
    sockaddr_in from{};
    socklen_t from_len = sizeof(from);
    const ssize_t n = ::recvfrom(fd, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from),
                                 &from_len);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw Error(ErrorCode::kIoFailure, std::string("recvfrom: ") + std::strerror(errno));
    }
    try {
      return Datagram{FromSockaddr(from),
                      DecodeMessage(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)))};
    } catch (const Error&) {
      // Malformed datagrams from the wire are discarded.
      if (SteadyMicros() >= deadline) return std::nullopt;
    }
  }
}

void UdpEndpoint::close() {
  std::lock_guard lock(mu_);
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

bool UdpEndpoint::closed() const {
  std::lock_guard lock(mu_);
  return fd_ < 0;
}

void UdpEndpoint::set_loss_rate(double rate) {
  std::lock_guard lock(mu_);
  loss_rate_ = rate;
}

}  // namespace crowdmw
