#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advmark/rng.hpp"

namespace advmark {

// Hard identity message: L bits, each exactly 0 or 1.
struct Message {
  std::vector<std::uint8_t> bits;

  int length() const { return static_cast<int>(bits.size()); }
  bool operator==(const Message& o) const { return bits == o.bits; }
};

// Decoder output before hardening: L unbounded finite reals.
struct SoftMessage {
  std::vector<double> values;

  int length() const { return static_cast<int>(values.size()); }
};

// One independent fair coin per bit; deterministic given the rng state.
Message sample_message(int length, Rng& rng);

// bit = 1 iff value > 0.5 (strictly). Ties at exactly 0.5 harden to 0.
Message harden(const SoftMessage& soft);

// Lift hard bits to reals, the inverse direction of harden.
SoftMessage lift(const Message& msg);

// Fraction of differing positions, in [0, 1].
double bit_error_rate(const Message& a, const Message& b);

// Mean per-bit distance from 0.5. High for decoder output on protected
// images, near zero on unprotected ones.
double message_score(const SoftMessage& soft);

Message complement(const Message& msg);

// Lowercase hex of the bit string, MSB first, zero-padded to ceil(L/4)
// digits. The bit length must be supplied when parsing because it is not
// recoverable from the digit count alone.
std::string message_to_hex(const Message& msg);
Message message_from_hex(const std::string& hex, int length);

}  // namespace advmark
