#include "advmark/message.hpp"

#include <cmath>
#include <stdexcept>

#include "advmark/errors.hpp"

namespace advmark {

Message sample_message(int length, Rng& rng) {
  if (length < 1) throw std::invalid_argument("sample_message: length must be >= 1");
  Message m;
  m.bits.resize(static_cast<std::size_t>(length));
  for (auto& b : m.bits) b = rng.bernoulli(0.5) ? 1 : 0;
  return m;
}

Message harden(const SoftMessage& soft) {
  Message m;
  m.bits.reserve(soft.values.size());
  for (double v : soft.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("harden: non-finite entry");
    m.bits.push_back(v > 0.5 ? 1 : 0);
  }
  return m;
}

SoftMessage lift(const Message& msg) {
  SoftMessage s;
  s.values.reserve(msg.bits.size());
  for (auto b : msg.bits) s.values.push_back(static_cast<double>(b));
  return s;
}

double bit_error_rate(const Message& a, const Message& b) {
  if (a.bits.size() != b.bits.size())
    throw std::invalid_argument("bit_error_rate: length mismatch");
  if (a.bits.empty()) throw std::invalid_argument("bit_error_rate: empty message");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) diff += a.bits[i] != b.bits[i];
  return static_cast<double>(diff) / static_cast<double>(a.bits.size());
}

double message_score(const SoftMessage& soft) {
  if (soft.values.empty()) throw std::invalid_argument("message_score: empty message");
  double acc = 0.0;
  for (double v : soft.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("message_score: non-finite entry");
    acc += std::fabs(v - 0.5);
  }
  return acc / static_cast<double>(soft.values.size());
}

Message complement(const Message& msg) {
  Message m = msg;
  for (auto& b : m.bits) b = b ? 0 : 1;
  return m;
}

std::string message_to_hex(const Message& msg) {
  const int L = msg.length();
  if (L < 1) throw std::invalid_argument("message_to_hex: empty message");
  const int digits = (L + 3) / 4;
  const int padded = digits * 4;
  std::string out(static_cast<std::size_t>(digits), '0');
  static const char* kHex = "0123456789abcdef";
  // Pad with zero bits on the MSB side so the hex reads as the bit string
  // interpreted as one big-endian integer.
  for (int d = 0; d < digits; ++d) {
    int nibble = 0;
    for (int j = 0; j < 4; ++j) {
      const int bit_index = d * 4 + j - (padded - L);
      const int bit = bit_index >= 0 ? msg.bits[static_cast<std::size_t>(bit_index)] : 0;
      nibble = (nibble << 1) | bit;
    }
    out[static_cast<std::size_t>(d)] = kHex[nibble];
  }
  return out;
}

Message message_from_hex(const std::string& hex, int length) {
  if (length < 1) throw std::invalid_argument("message_from_hex: length must be >= 1");
  const int digits = (length + 3) / 4;
  if (static_cast<int>(hex.size()) != digits)
    throw FormatError("message_from_hex: expected " + std::to_string(digits) + " hex digits, got " +
                      std::to_string(hex.size()));
  const int padded = digits * 4;
  std::vector<std::uint8_t> all(static_cast<std::size_t>(padded));
  for (int d = 0; d < digits; ++d) {
    const char c = hex[static_cast<std::size_t>(d)];
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else throw FormatError("message_from_hex: invalid hex digit");
    for (int j = 0; j < 4; ++j) all[static_cast<std::size_t>(d * 4 + j)] = (v >> (3 - j)) & 1;
  }
  for (int i = 0; i < padded - length; ++i)
    if (all[static_cast<std::size_t>(i)] != 0)
      throw FormatError("message_from_hex: nonzero padding bits");
  Message m;
  m.bits.assign(all.begin() + (padded - length), all.end());
  return m;
}

}  // namespace advmark
