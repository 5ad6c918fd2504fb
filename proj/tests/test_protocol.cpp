#include "support.hpp"

#include <torqueflow/protocol.hpp>

#include <gtest/gtest.h>

using namespace torqueflow;
using torqueflow::testing::random_message;

namespace {

WrenchMessage set_target(std::uint32_t seq, TorqueCnm cnm) {
  WrenchMessage m;
  m.type = MsgType::kSetTarget;
  m.seq = seq;
  m.target_cnm = cnm;
  return m;
}

ProtocolError::Kind decode_error(std::string_view frame) {
  try {
    decode(frame);
  } catch (const ProtocolError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << frame;
  return ProtocolError::Kind::kMalformed;
}

}  // namespace

TEST(Encode, SetTargetExactBytes) {
  EXPECT_EQ(encode(set_target(1, 300)), "{\"t\":\"SET_TARGET\",\"seq\":1,\"target_cnm\":300}\n");
}

TEST(Encode, PingExactBytes) {
  WrenchMessage m;
  m.type = MsgType::kPing;
  m.seq = 0;
  EXPECT_EQ(encode(m), "{\"t\":\"PING\",\"seq\":0}\n");
}

TEST(Encode, NackCarriesReason) {
  WrenchMessage m;
  m.type = MsgType::kNack;
  m.seq = 4;
  m.ref = 3;
  m.err = NackReason::kRange;
  EXPECT_EQ(encode(m), "{\"t\":\"NACK\",\"seq\":4,\"ref\":3,\"err\":\"range\"}\n");
}

TEST(Encode, RefusesInvalidMessages) {
  EXPECT_THROW(encode(set_target(1, 1200)), ProtocolError);
  EXPECT_THROW(encode(set_target(1, 99)), ProtocolError);
  WrenchMessage m;
  m.type = MsgType::kTelemetry;
  m.applied_cnm = 10;
  EXPECT_THROW(encode(m), ProtocolError);  // ts_ms missing
  m.ts_ms = 5;
  m.err = NackReason::kBusy;
  EXPECT_THROW(encode(m), ProtocolError);  // err not allowed
  // The unvalidated path still serializes, so the peer can be the one to reject.
  EXPECT_EQ(encode_unvalidated(set_target(2, 1200)), "{\"t\":\"SET_TARGET\",\"seq\":2,\"target_cnm\":1200}\n");
}

TEST(Decode, RoundTripsRandomMessages) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 5000; ++i) {
    const WrenchMessage m = random_message(rng);
    const std::string bytes = encode(m);
    const auto d = decode(bytes);
    ASSERT_TRUE(d);
    EXPECT_EQ(d->message, m) << bytes;
    EXPECT_EQ(d->consumed, bytes.size());
  }
}

TEST(Decode, OutOfRangeTarget) {
  EXPECT_EQ(decode_error("{\"t\":\"SET_TARGET\",\"seq\":1,\"target_cnm\":1200}\n"), ProtocolError::Kind::kRange);
  EXPECT_EQ(decode_error("{\"t\":\"SET_TARGET\",\"seq\":1,\"target_cnm\":-5}\n"), ProtocolError::Kind::kRange);
}

TEST(Decode, TruncatedFrameWaits) {
  const std::string full = encode(set_target(7, 450));
  for (std::size_t n = 0; n < full.size(); ++n) EXPECT_FALSE(decode(std::string_view(full).substr(0, n))) << n;
}

TEST(Decode, Rejections) {
  using K = ProtocolError::Kind;
  EXPECT_EQ(decode_error("{\"t\":\"EXPLODE\",\"seq\":1}\n"), K::kUnknownType);
  EXPECT_EQ(decode_error("{\"t\":\"PING\",\"seq\":1,\"seq\":2}\n"), K::kMalformed);
  EXPECT_EQ(decode_error("{\"t\":\"PING\"}\n"), K::kMissingField);
  EXPECT_EQ(decode_error("{\"t\":\"PING\",\"seq\":1,\"x\":1}\n"), K::kUnexpectedField);
  EXPECT_EQ(decode_error("{\"t\":\"SET_TARGET\",\"seq\":1}\n"), K::kMissingField);
  EXPECT_EQ(decode_error("{\"t\":\"PING\",\"seq\":1.5}\n"), K::kMalformed);
  EXPECT_EQ(decode_error("[1,2]\n"), K::kMalformed);
  EXPECT_EQ(decode_error("{\"t\":\"PING\",\n"), K::kMalformed);
  EXPECT_EQ(decode_error(std::string(kMaxFrameBytes, ' ')), K::kOversize);
}

TEST(Decode, ErrorsReportFrameLength) {
  const std::string bad = "{\"t\":\"PING\",\"seq\":1,\"x\":1}\n";
  try {
    decode(bad + "{\"t\":\"PING\",\"seq\":2}\n");
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.frame_length(), bad.size());
    EXPECT_EQ(e.offset(), bad.find("\"x\""));
  }
}

TEST(FrameReader, ResumesAfterBadFrame) {
  FrameReader r;
  r.feed("{\"t\":\"PING\",\"seq\":1}\n{\"t\":\"BOGUS\",\"seq\":2}\n{\"t\":\"PI");
  auto m = r.next();
  ASSERT_TRUE(m);
  EXPECT_EQ(m->seq, 1u);
  EXPECT_THROW(r.next(), ProtocolError);
  EXPECT_EQ(r.last_rejected(), "{\"t\":\"BOGUS\",\"seq\":2}\n");
  EXPECT_EQ(salvage_seq(r.last_rejected()), 2u);
  EXPECT_FALSE(r.next());
  r.feed("NG\",\"seq\":3}\n");
  m = r.next();
  ASSERT_TRUE(m);
  EXPECT_EQ(m->seq, 3u);
  EXPECT_EQ(r.buffered(), 0u);
}

TEST(FrameReader, ByteAtATime) {
  std::mt19937_64 rng(8);
  std::vector<WrenchMessage> sent;
  std::string stream;
  for (int i = 0; i < 50; ++i) {
    sent.push_back(random_message(rng));
    stream += encode(sent.back());
  }
  FrameReader r;
  std::vector<WrenchMessage> got;
  for (char c : stream) {
    r.feed(std::string_view(&c, 1));
    while (auto m = r.next()) got.push_back(*m);
  }
  EXPECT_EQ(got, sent);
}

TEST(FrameReader, OversizeIsSkippedToNextLine) {
  FrameReader r;
  r.feed(std::string(kMaxFrameBytes + 10, 'x'));
  EXPECT_THROW(r.next(), ProtocolError);
  r.feed("yyy\n{\"t\":\"PING\",\"seq\":9}\n");
  auto m = r.next();
  ASSERT_TRUE(m);
  EXPECT_EQ(m->seq, 9u);
}

TEST(NackReasonFor, MapsKinds) {
  using K = ProtocolError::Kind;
  EXPECT_EQ(nack_reason_for(ProtocolError(K::kRange, 0, 0, "")), NackReason::kRange);
  EXPECT_EQ(nack_reason_for(ProtocolError(K::kUnknownType, 0, 0, "")), NackReason::kUnknownType);
  EXPECT_EQ(nack_reason_for(ProtocolError(K::kMissingField, 0, 0, "")), NackReason::kMalformed);
}
