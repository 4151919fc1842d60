/**
 * @file comms.hpp
 * @brief Supervisor <-> vehicle protocol over a simulated wireless link.
 *
 * Frame layout (all numerics little-endian, doubles as IEEE-754 bits):
 *
 *   u8  version (=1)
 *   u32 body length in bytes
 *   body:
 *     u64 seq, u8 sender kind (0 supervisor, 1 vehicle), i32 sender id,
 *     u8 payload tag (0 Command, 1 Status, 2 Ack), payload fields.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "quayfleet/navigation.hpp"
#include "quayfleet/powertrain.hpp"
#include "quayfleet/trajectory.hpp"
#include "quayfleet/vehicle.hpp"

namespace quayfleet {

struct Endpoint {
  enum class Kind : std::uint8_t { Supervisor = 0, Vehicle = 1 };
  Kind kind = Kind::Supervisor;
  std::int32_t id = 0;

  static Endpoint supervisor() { return {Kind::Supervisor, 0}; }
  static Endpoint vehicle(std::int32_t id) { return {Kind::Vehicle, id}; }
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct CommandPayload {
  std::int32_t agv = 0;
  Mode mode = Mode::MoveToTarget;
  std::optional<ContainerKind> container;
  Trajectory trajectory;
  friend bool operator==(const CommandPayload&, const CommandPayload&) = default;
};

struct StatusPayload {
  PoseEstimate pose_estimate;
  Mode mode = Mode::Standby;
  double battery_Wh = 0.0;
  double path_progress = 0.0;
  std::uint32_t revision = 0;  ///< trajectory revision the progress refers to
  std::optional<ContainerKind> carried;
  friend bool operator==(const StatusPayload&, const StatusPayload&) = default;
};

struct AckPayload {
  std::uint64_t seq = 0;
  friend bool operator==(const AckPayload&, const AckPayload&) = default;
};

struct Message {
  std::uint64_t seq = 0;
  Endpoint sender;
  std::variant<CommandPayload, StatusPayload, AckPayload> payload;

  Endpoint receiver() const;
  /// Commands come from the supervisor, Status/Ack from vehicles.
  bool well_formed() const;
  friend bool operator==(const Message&, const Message&) = default;
};

inline constexpr std::uint8_t kFrameVersion = 1;

std::vector<std::uint8_t> encode(const Message& msg);
/// Throws MalformedFrame on truncated, oversized or inconsistent input.
Message decode(std::span<const std::uint8_t> bytes);

std::string to_hex(std::span<const std::uint8_t> bytes);

struct ChannelModel {
  double latency = 0.05;  ///< s
  double loss_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Single event queue advanced by the simulation clock. Delivery order is
/// (delivery time, seq, sender); each message is handed out at most once.
class Channel {
 public:
  explicit Channel(ChannelModel model);

  /// Returns false when the message was dropped.
  bool send(const Message& msg, double now);
  std::vector<Message> poll(const Endpoint& receiver, double now);

  std::size_t sent() const { return sent_; }
  std::size_t dropped() const { return dropped_; }
  std::size_t in_flight() const { return queue_.size(); }

  /// When enabled every sent frame is kept as hex for the trace.
  void set_frame_dump(bool on) { dump_ = on; }
  std::vector<std::string> take_frames();

  const ChannelModel& model() const { return model_; }

 private:
  struct Pending {
    double deliver_at;
    Message msg;
  };
  ChannelModel model_;
  std::vector<Pending> queue_;
  std::size_t sent_ = 0;
  std::size_t dropped_ = 0;
  bool dump_ = false;
  std::vector<std::string> frames_;
};

/// Loss decision for one message: pure in (seed, sender, seq).
bool channel_drops(const ChannelModel& model, const Endpoint& sender, std::uint64_t seq);

}  // namespace quayfleet
