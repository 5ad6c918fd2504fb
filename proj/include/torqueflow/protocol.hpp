#pragma once

// Controller <-> wrench wire protocol.
//
// One strict-JSON object per LF-terminated UTF-8 frame. Keys are written in
// the fixed order t, seq, ref, target_cnm, applied_cnm, peak_cnm, ts_ms, err
// and absent fields are omitted:
//
//   {"t":"SET_TARGET","seq":1,"target_cnm":300}
//   {"t":"ACK","seq":7,"ref":1,"target_cnm":300}
//   {"t":"TELEMETRY","seq":8,"applied_cnm":120,"peak_cnm":120,"ts_ms":1050}
//   {"t":"TARGET_REACHED","seq":9,"target_cnm":300,"peak_cnm":304,"ts_ms":1500}
//   {"t":"NACK","seq":10,"ref":0,"err":"not_armed"}
//
// Decoding rejects unknown types, unknown or duplicate keys, keys that do not
// belong to the message type, non-integer numbers and out-of-range values.

#include <torqueflow/error.hpp>
#include <torqueflow/scene.hpp>

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace torqueflow {

enum class MsgType : std::uint8_t { kSetTarget, kAck, kTelemetry, kTargetReached, kNack, kPing, kPong };

enum class NackReason : std::uint8_t { kNotArmed, kRange, kMalformed, kUnknownType, kBusy };

inline constexpr std::array<std::string_view, 7> kMsgTypeNames = {
    "SET_TARGET", "ACK", "TELEMETRY", "TARGET_REACHED", "NACK", "PING", "PONG"};
inline constexpr std::array<std::string_view, 5> kNackReasonNames = {
    "not_armed", "range", "malformed", "unknown_type", "busy"};

inline std::string_view to_string(MsgType t) { return kMsgTypeNames[static_cast<std::size_t>(t)]; }
inline std::string_view to_string(NackReason r) { return kNackReasonNames[static_cast<std::size_t>(r)]; }

inline std::optional<MsgType> parse_msg_type(std::string_view s) {
  for (std::size_t i = 0; i < kMsgTypeNames.size(); ++i)
    if (kMsgTypeNames[i] == s) return static_cast<MsgType>(i);
  return std::nullopt;
}

inline std::optional<NackReason> parse_nack_reason(std::string_view s) {
  for (std::size_t i = 0; i < kNackReasonNames.size(); ++i)
    if (kNackReasonNames[i] == s) return static_cast<NackReason>(i);
  return std::nullopt;
}

/// Largest torque value the codec accepts in applied/peak fields.
inline constexpr std::int64_t kMaxReadingCnm = 100000;

/// Maximum frame size including the LF.
inline constexpr std::size_t kMaxFrameBytes = 4096;

struct WrenchMessage {
  MsgType type = MsgType::kPing;
  std::uint32_t seq = 0;
  std::optional<std::uint32_t> ref;
  std::optional<TorqueCnm> target_cnm;
  std::optional<TorqueCnm> applied_cnm;
  std::optional<TorqueCnm> peak_cnm;
  std::optional<std::uint64_t> ts_ms;
  std::optional<NackReason> err;

  friend bool operator==(const WrenchMessage&, const WrenchMessage&) = default;
};

namespace protocol_detail {

enum Field : unsigned { kRef = 1, kTarget = 2, kApplied = 4, kPeak = 8, kTs = 16, kErr = 32 };

struct FieldRule {
  unsigned required;
  unsigned optional;
};

inline constexpr FieldRule rule_for(MsgType t) {
  switch (t) {
    case MsgType::kSetTarget: return {kTarget, 0};
    case MsgType::kAck: return {kRef, kTarget};
    case MsgType::kNack: return {kRef | kErr, 0};
    case MsgType::kTelemetry: return {kApplied | kTs, kPeak | kTarget};
    case MsgType::kTargetReached: return {kPeak | kTs, kTarget};
    case MsgType::kPing: return {0, kTs};
    case MsgType::kPong: return {0, kRef | kTs};
  }
  return {0, 0};
}

inline unsigned present_fields(const WrenchMessage& m) {
  return (m.ref ? kRef : 0u) | (m.target_cnm ? kTarget : 0u) | (m.applied_cnm ? kApplied : 0u) |
         (m.peak_cnm ? kPeak : 0u) | (m.ts_ms ? kTs : 0u) | (m.err ? kErr : 0u);
}

inline constexpr std::array<std::pair<Field, std::string_view>, 6> kFieldNames = {{
    {kRef, "ref"}, {kTarget, "target_cnm"}, {kApplied, "applied_cnm"},
    {kPeak, "peak_cnm"}, {kTs, "ts_ms"}, {kErr, "err"}}};

}  // namespace protocol_detail

/// Throws ProtocolError when a message breaks a per-type invariant.
inline void validate(const WrenchMessage& m) {
  using namespace protocol_detail;
  const FieldRule rule = rule_for(m.type);
  const unsigned have = present_fields(m);
  for (const auto& [bit, name] : kFieldNames) {
    if ((rule.required & bit) && !(have & bit))
      throw ProtocolError(ProtocolError::Kind::kMissingField, 0, 0,
                          std::string(to_string(m.type)) + " requires '" + std::string(name) + "'");
    if ((have & bit) && !((rule.required | rule.optional) & bit))
      throw ProtocolError(ProtocolError::Kind::kUnexpectedField, 0, 0,
                          std::string(to_string(m.type)) + " does not carry '" + std::string(name) + "'");
  }
  if (m.target_cnm && !torque_in_range(*m.target_cnm))
    throw ProtocolError(ProtocolError::Kind::kRange, 0, 0,
                        "target_cnm " + std::to_string(*m.target_cnm) + " outside [100, 1000]");
  for (const auto* v : {&m.applied_cnm, &m.peak_cnm})
    if (*v && (**v < 0 || **v > kMaxReadingCnm))
      throw ProtocolError(ProtocolError::Kind::kRange, 0, 0, "torque reading outside [0, 100000]");
}

/// Serializer without the invariant check. Lets a controller forward an
/// operator-typed value as-is so the wrench is the one that rejects it.
inline std::string encode_unvalidated(const WrenchMessage& m) {
  std::string out;
  out.reserve(96);
  out += "{\"t\":\"";
  out += to_string(m.type);
  out += "\",\"seq\":";
  out += std::to_string(m.seq);
  auto put = [&out](std::string_view key, auto value) {
    out += ",\"";
    out += key;
    out += "\":";
    out += std::to_string(value);
  };
  if (m.ref) put("ref", *m.ref);
  if (m.target_cnm) put("target_cnm", *m.target_cnm);
  if (m.applied_cnm) put("applied_cnm", *m.applied_cnm);
  if (m.peak_cnm) put("peak_cnm", *m.peak_cnm);
  if (m.ts_ms) put("ts_ms", *m.ts_ms);
  if (m.err) {
    out += ",\"err\":\"";
    out += to_string(*m.err);
    out += '"';
  }
  out += "}\n";
  return out;
}

/// Serializes one frame, LF included. Refuses messages that fail validate().
inline std::string encode(const WrenchMessage& m) {
  validate(m);
  return encode_unvalidated(m);
}

/// Parses one frame body (without the LF). Throws ProtocolError with the
/// byte offset of the problem inside the frame.
inline WrenchMessage parse_frame(std::string_view frame, std::size_t frame_length) {
  using nlohmann::json;
  using Kind = ProtocolError::Kind;
  auto fail = [&](Kind kind, std::string_view key, const std::string& what) -> ProtocolError {
    std::size_t off = 0;
    if (!key.empty()) {
      const std::string needle = "\"" + std::string(key) + "\"";
      const auto pos = frame.find(needle);
      off = pos == std::string_view::npos ? 0 : pos;
    }
    return ProtocolError(kind, off, frame_length, what);
  };

  std::set<std::string> seen;
  std::optional<std::string> duplicate;
  json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
    if (event == json::parse_event_t::key && depth == 1 && !seen.insert(parsed.get<std::string>()).second)
      duplicate = parsed.get<std::string>();
    return true;
  };
  json obj;
  try {
    obj = json::parse(frame.begin(), frame.end(), cb);
  } catch (const json::parse_error& e) {
    const std::size_t off = e.byte > 0 ? e.byte - 1 : 0;
    throw ProtocolError(Kind::kMalformed, off, frame_length, "malformed frame");
  }
  if (duplicate) throw fail(Kind::kMalformed, *duplicate, "duplicate key '" + *duplicate + "'");
  if (!obj.is_object()) throw ProtocolError(Kind::kMalformed, 0, frame_length, "frame is not a JSON object");

  auto t = obj.find("t");
  if (t == obj.end() || !t->is_string()) throw fail(Kind::kMissingField, "t", "missing message type");
  const auto type = parse_msg_type(t->get<std::string>());
  if (!type) throw fail(Kind::kUnknownType, "t", "unknown message type '" + t->get<std::string>() + "'");

  WrenchMessage m;
  m.type = *type;
  auto seq = obj.find("seq");
  if (seq == obj.end()) throw fail(Kind::kMissingField, "seq", "missing seq");

  auto unsigned_field = [&](const json& v, std::string_view key, std::uint64_t max) -> std::uint64_t {
    if (!v.is_number_integer()) throw fail(Kind::kMalformed, key, std::string(key) + " must be an integer");
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > max) throw fail(Kind::kRange, key, std::string(key) + " out of range");
      return u;
    }
    const auto s = v.get<std::int64_t>();
    if (s < 0 || static_cast<std::uint64_t>(s) > max) throw fail(Kind::kRange, key, std::string(key) + " out of range");
    return static_cast<std::uint64_t>(s);
  };

  for (const auto& [key, value] : obj.items()) {
    if (key == "t") continue;
    if (key == "seq") {
      m.seq = static_cast<std::uint32_t>(unsigned_field(value, key, UINT32_MAX));
    } else if (key == "ref") {
      m.ref = static_cast<std::uint32_t>(unsigned_field(value, key, UINT32_MAX));
    } else if (key == "target_cnm") {
      const auto v = unsigned_field(value, key, UINT32_MAX);
      if (!torque_in_range(static_cast<std::int64_t>(v)))
        throw fail(Kind::kRange, key, "target_cnm " + std::to_string(v) + " outside [100, 1000]");
      m.target_cnm = static_cast<TorqueCnm>(v);
    } else if (key == "applied_cnm") {
      m.applied_cnm = static_cast<TorqueCnm>(unsigned_field(value, key, kMaxReadingCnm));
    } else if (key == "peak_cnm") {
      m.peak_cnm = static_cast<TorqueCnm>(unsigned_field(value, key, kMaxReadingCnm));
    } else if (key == "ts_ms") {
      m.ts_ms = unsigned_field(value, key, UINT64_MAX);
    } else if (key == "err") {
      if (!value.is_string()) throw fail(Kind::kMalformed, key, "err must be a string");
      m.err = parse_nack_reason(value.get<std::string>());
      if (!m.err) throw fail(Kind::kMalformed, key, "unknown err code");
    } else {
      throw fail(Kind::kUnexpectedField, key, "unknown key '" + key + "'");
    }
  }
  try {
    validate(m);
  } catch (const ProtocolError& e) {
    throw ProtocolError(e.kind(), 0, frame_length, e.what());
  }
  return m;
}

struct Decoded {
  WrenchMessage message;
  std::size_t consumed = 0;  // bytes of the stream used by this frame, LF included
};

/// Decodes the first frame of `stream`. Returns nothing when no complete
/// frame is available yet; the caller keeps the bytes. Throws ProtocolError
/// for a bad frame; its frame_length says how many bytes to drop.
inline std::optional<Decoded> decode(std::string_view stream) {
  const auto nl = stream.find('\n');
  if (nl == std::string_view::npos) {
    if (stream.size() >= kMaxFrameBytes)
      throw ProtocolError(ProtocolError::Kind::kOversize, kMaxFrameBytes, stream.size(), "frame too long");
    return std::nullopt;
  }
  if (nl + 1 > kMaxFrameBytes)
    throw ProtocolError(ProtocolError::Kind::kOversize, kMaxFrameBytes, nl + 1, "frame too long");
  return Decoded{parse_frame(stream.substr(0, nl), nl + 1), nl + 1};
}

/// Accumulates stream bytes and yields complete frames in order. A bad frame
/// is dropped before its ProtocolError propagates, so reading can resume.
class FrameReader {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }

  std::optional<WrenchMessage> next() {
    if (discarding_) {
      const auto nl = buffer_.find('\n');
      if (nl == std::string::npos) {
        buffer_.clear();
        return std::nullopt;
      }
      buffer_.erase(0, nl + 1);
      discarding_ = false;
    }
    try {
      auto d = decode(buffer_);
      if (!d) return std::nullopt;
      buffer_.erase(0, d->consumed);
      return d->message;
    } catch (const ProtocolError& e) {
      if (e.kind() == ProtocolError::Kind::kOversize && buffer_.find('\n') == std::string::npos) {
        buffer_.clear();
        discarding_ = true;
        last_rejected_.clear();
      } else {
        last_rejected_ = buffer_.substr(0, e.frame_length());
        buffer_.erase(0, e.frame_length());
      }
      throw;
    }
  }

  std::size_t buffered() const { return buffer_.size(); }
  /// Bytes of the most recently rejected frame.
  const std::string& last_rejected() const { return last_rejected_; }

 private:
  std::string buffer_;
  std::string last_rejected_;
  bool discarding_ = false;
};

/// Maps a decode failure to the NACK reason sent back to the peer.
inline NackReason nack_reason_for(const ProtocolError& e) {
  switch (e.kind()) {
    case ProtocolError::Kind::kRange: return NackReason::kRange;
    case ProtocolError::Kind::kUnknownType: return NackReason::kUnknownType;
    default: return NackReason::kMalformed;
  }
}

/// Best-effort recovery of the sender's seq from a rejected frame, so a NACK
/// can reference it. Returns 0 when the frame carries no readable seq.
inline std::uint32_t salvage_seq(std::string_view frame) {
  const auto key = frame.find("\"seq\":");
  if (key == std::string_view::npos) return 0;
  std::uint64_t v = 0;
  bool any = false;
  for (std::size_t i = key + 6; i < frame.size() && frame[i] >= '0' && frame[i] <= '9'; ++i) {
    v = v * 10 + static_cast<std::uint64_t>(frame[i] - '0');
    any = true;
    if (v > UINT32_MAX) return 0;
  }
  return any ? static_cast<std::uint32_t>(v) : 0;
}

}  // namespace torqueflow
