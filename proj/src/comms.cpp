#include "quayfleet/comms.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <tuple>

#include "quayfleet/errors.hpp"
#include "quayfleet/random.hpp"

namespace quayfleet {

namespace {

constexpr std::size_t kMaxBody = 1u << 24;
constexpr std::uint8_t kContainerKinds = 4;
constexpr std::uint8_t kModes = 4;
constexpr std::uint8_t kSegmentKinds = 3;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void vec(Vec2 v) {
    f64(v.x);
    f64(v.y);
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4))); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  Vec2 vec() {
    const double x = f64();
    return {x, f64()};
  }
  std::uint8_t bounded(std::uint8_t limit, const char* what) {
    const auto v = u8();
    if (v >= limit) throw MalformedFrame(std::string("bad ") + what + " value");
    return v;
  }
  /// Element count that must fit in what is left of the frame.
  std::size_t count(std::size_t min_elem_bytes) {
    const std::size_t n = u32();
    if (n * min_elem_bytes > remaining()) throw MalformedFrame("element count exceeds frame");
    return n;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::uint64_t get(int n) {
    if (remaining() < static_cast<std::size_t>(n)) throw MalformedFrame("truncated frame");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kPieceBytes = 4 + 1 + 8 * 12;
constexpr std::size_t kSegmentBytes = 8 * 5;

void write_trajectory(Writer& w, const Trajectory& t) {
  w.i32(t.agv);
  w.i32(t.job);
  w.u32(t.revision);
  w.u32(static_cast<std::uint32_t>(t.path.size()));
  for (CellIndex c : t.path) w.i32(c);
  w.u32(static_cast<std::uint32_t>(t.pieces.size()));
  for (const auto& p : t.pieces) {
    w.i32(p.cell);
    w.u8(static_cast<std::uint8_t>(p.kind));
    w.f64(p.length);
    w.f64(p.v_limit);
    w.vec(p.start);
    w.vec(p.end);
    w.vec(p.arc_center);
    w.f64(p.radius);
    w.f64(p.start_angle);
    w.f64(p.sweep);
  }
  w.u32(static_cast<std::uint32_t>(t.motion.size()));
  for (const auto& m : t.motion) {
    w.f64(m.t0);
    w.f64(m.t1);
    w.f64(m.s0);
    w.f64(m.v0);
    w.f64(m.accel);
  }
  w.i32(t.pickup_boundary);
  w.f64(t.dwell_s);
}

Trajectory read_trajectory(Reader& r) {
  Trajectory t;
  t.agv = r.i32();
  t.job = r.i32();
  t.revision = r.u32();
  t.path.resize(r.count(4));
  for (auto& c : t.path) c = r.i32();
  t.pieces.resize(r.count(kPieceBytes));
  for (auto& p : t.pieces) {
    p.cell = r.i32();
    p.kind = static_cast<SegmentKind>(r.bounded(kSegmentKinds, "segment kind"));
    p.length = r.f64();
    p.v_limit = r.f64();
    p.start = r.vec();
    p.end = r.vec();
    p.arc_center = r.vec();
    p.radius = r.f64();
    p.start_angle = r.f64();
    p.sweep = r.f64();
  }
  t.motion.resize(r.count(kSegmentBytes));
  for (auto& m : t.motion) {
    m.t0 = r.f64();
    m.t1 = r.f64();
    m.s0 = r.f64();
    m.v0 = r.f64();
    m.accel = r.f64();
  }
  t.pickup_boundary = r.i32();
  t.dwell_s = r.f64();
  return t;
}

void write_container(Writer& w, const std::optional<ContainerKind>& c) {
  w.u8(c ? 1 : 0);
  w.u8(c ? static_cast<std::uint8_t>(*c) : 0);
}

std::optional<ContainerKind> read_container(Reader& r) {
  const auto has = r.bounded(2, "container flag");
  const auto kind = r.bounded(kContainerKinds, "container kind");
  if (!has) {
    if (kind != 0) throw MalformedFrame("container kind without flag");
    return std::nullopt;
  }
  return static_cast<ContainerKind>(kind);
}

}  // namespace

Endpoint Message::receiver() const {
  if (const auto* c = std::get_if<CommandPayload>(&payload)) return Endpoint::vehicle(c->agv);
  return Endpoint::supervisor();
}

bool Message::well_formed() const {
  const bool from_supervisor = sender.kind == Endpoint::Kind::Supervisor;
  return std::holds_alternative<CommandPayload>(payload) == from_supervisor;
}

std::vector<std::uint8_t> encode(const Message& msg) {
  Writer body;
  body.u64(msg.seq);
  body.u8(static_cast<std::uint8_t>(msg.sender.kind));
  body.i32(msg.sender.id);
  body.u8(static_cast<std::uint8_t>(msg.payload.index()));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CommandPayload>) {
          body.i32(p.agv);
          body.u8(static_cast<std::uint8_t>(p.mode));
          write_container(body, p.container);
          write_trajectory(body, p.trajectory);
        } else if constexpr (std::is_same_v<T, StatusPayload>) {
          body.f64(p.pose_estimate.pose.x);
          body.f64(p.pose_estimate.pose.y);
          body.f64(p.pose_estimate.pose.heading);
          body.f64(p.pose_estimate.sigma_xy);
          body.f64(p.pose_estimate.sigma_heading);
          body.u8(static_cast<std::uint8_t>(p.mode));
          body.f64(p.battery_Wh);
          body.f64(p.path_progress);
          body.u32(p.revision);
          write_container(body, p.carried);
        } else {
          body.u64(p.seq);
        }
      },
      msg.payload);

  Writer frame;
  frame.u8(kFrameVersion);
  frame.u32(static_cast<std::uint32_t>(body.bytes().size()));
  auto out = std::move(frame.bytes());
  out.insert(out.end(), body.bytes().begin(), body.bytes().end());
  return out;
}

Message decode(std::span<const std::uint8_t> bytes) {
  Reader head(bytes);
  if (head.u8() != kFrameVersion) throw MalformedFrame("unsupported frame version");
  const std::size_t len = head.u32();
  if (len > kMaxBody) throw MalformedFrame("oversized frame");
  if (len != head.remaining()) throw MalformedFrame("body length mismatch");

  Reader r(bytes.subspan(5));
  Message msg;
  msg.seq = r.u64();
  msg.sender.kind = static_cast<Endpoint::Kind>(r.bounded(2, "sender kind"));
  msg.sender.id = r.i32();
  switch (r.bounded(3, "payload tag")) {
    case 0: {
      CommandPayload p;
      p.agv = r.i32();
      p.mode = static_cast<Mode>(r.bounded(kModes, "mode"));
      p.container = read_container(r);
      p.trajectory = read_trajectory(r);
      msg.payload = std::move(p);
      break;
    }
    case 1: {
      StatusPayload p;
      p.pose_estimate.pose.x = r.f64();
      p.pose_estimate.pose.y = r.f64();
      p.pose_estimate.pose.heading = r.f64();
      p.pose_estimate.sigma_xy = r.f64();
      p.pose_estimate.sigma_heading = r.f64();
      p.mode = static_cast<Mode>(r.bounded(kModes, "mode"));
      p.battery_Wh = r.f64();
      p.path_progress = r.f64();
      p.revision = r.u32();
      p.carried = read_container(r);
      msg.payload = p;
      break;
    }
    default:
      msg.payload = AckPayload{r.u64()};
      break;
  }
  if (r.remaining() != 0) throw MalformedFrame("trailing bytes after payload");
  if (!msg.well_formed()) throw MalformedFrame("payload does not match sender kind");
  return msg;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

bool channel_drops(const ChannelModel& model, const Endpoint& sender, std::uint64_t seq) {
  if (model.loss_rate <= 0.0) return false;
  const auto key = hash_key({model.seed, 0x1055, static_cast<std::uint64_t>(sender.kind),
                             static_cast<std::uint64_t>(static_cast<std::uint32_t>(sender.id)), seq});
  return to_unit(key) < model.loss_rate;
}

Channel::Channel(ChannelModel model) : model_(model) {
  if (model_.latency < 0.0 || model_.loss_rate < 0.0 || model_.loss_rate > 1.0)
    throw std::invalid_argument("channel latency must be >= 0 and loss in [0, 1]");
}

bool Channel::send(const Message& msg, double now) {
  ++sent_;
  const auto frame = encode(msg);
  if (dump_) frames_.push_back(to_hex(frame));
  if (channel_drops(model_, msg.sender, msg.seq)) {
    ++dropped_;
    return false;
  }
  // Receivers only ever see what survived the wire format.
  queue_.push_back({now + model_.latency, decode(frame)});
  return true;
}

std::vector<Message> Channel::poll(const Endpoint& receiver, double now) {
  std::vector<Pending> due;
  std::erase_if(queue_, [&](Pending& p) {
    if (p.deliver_at <= now + 1e-9 && p.msg.receiver() == receiver) {
      due.push_back(std::move(p));
      return true;
    }
    return false;
  });
  std::sort(due.begin(), due.end(), [](const Pending& a, const Pending& b) {
    return std::tuple(a.deliver_at, a.msg.seq, a.msg.sender.kind, a.msg.sender.id) <
           std::tuple(b.deliver_at, b.msg.seq, b.msg.sender.kind, b.msg.sender.id);
  });
  std::vector<Message> out;
  out.reserve(due.size());
  for (auto& p : due) out.push_back(std::move(p.msg));
  return out;
}

std::vector<std::string> Channel::take_frames() {
  std::vector<std::string> out;
  out.swap(frames_);
  return out;
}

}  // namespace quayfleet
