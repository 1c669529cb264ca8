#include "advmark/protection.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "advmark/errors.hpp"
#include "advmark/imageio.hpp"
#include "advmark/perceptual.hpp"

namespace advmark {
namespace {

constexpr const char* kDbHeader = "advmark-protection-db v1";
constexpr int kMaxKeyAttempts = 100;

bool is_lower_hex(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for digest: " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("digest init failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    std::streamsize got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got));
  }
  if (in.bad()) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("read failed during digest: " + path);
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hexd = "0123456789abcdef";
  std::string out(static_cast<std::size_t>(2 * len), '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = hexd[md[i] >> 4];
    out[2 * i + 1] = hexd[md[i] & 0xf];
  }
  return out;
}

std::string rfc3339_utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool has_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

ProtectionDb::ProtectionDb(const std::string& path, const std::string& images_dir)
    : path_(path), images_dir_(images_dir.empty() ? path + ".images" : images_dir) {
  std::filesystem::create_directories(images_dir_);
  if (!std::filesystem::exists(path_)) {
    std::ofstream out(path_);
    out << kDbHeader << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot create protection db: " + path_);
    return;
  }
  std::ifstream in(path_);
  if (!in) throw std::runtime_error("cannot open protection db: " + path_);
  std::string line;
  if (!std::getline(in, line) || line != kDbHeader) {
    throw FormatError("not a protection db (bad header): " + path_);
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    ProtectionRecord r;
    std::string extra;
    if (!(ss >> r.message_key >> r.image_digest >> r.storage_path >> r.created_at) ||
        (ss >> extra)) {
      throw FormatError("malformed record at line " + std::to_string(lineno) + ": " + path_);
    }
    if (!is_lower_hex(r.message_key) || !is_lower_hex(r.image_digest) ||
        r.image_digest.size() != 64) {
      throw FormatError("malformed hex field at line " + std::to_string(lineno) + ": " + path_);
    }
    if (!keys_.insert(r.message_key).second) {
      throw FormatError("duplicate message key at line " + std::to_string(lineno) + ": " + path_);
    }
    records_.push_back(std::move(r));
  }
}

std::optional<ProtectionRecord> ProtectionDb::try_insert(const Message& key,
                                                         const std::string& storage_path) {
  if (has_whitespace(storage_path) || storage_path.empty()) {
    throw std::invalid_argument("storage path must be nonempty and whitespace-free");
  }
  ProtectionRecord r;
  r.message_key = message_to_hex(key);
  r.image_digest = sha256_file(storage_path);
  r.storage_path = storage_path;
  r.created_at = rfc3339_utc_now();

  std::lock_guard<std::mutex> lock(mu_);
  if (keys_.count(r.message_key) != 0) return std::nullopt;
  std::string line =
      r.message_key + ' ' + r.image_digest + ' ' + r.storage_path + ' ' + r.created_at + '\n';
  std::ofstream out(path_, std::ios::app);
  if (out) {
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
  }
  if (!out) throw std::runtime_error("append failed on protection db: " + path_);
  keys_.insert(r.message_key);
  records_.push_back(r);
  return r;
}

std::optional<ProtectionRecord> ProtectionDb::find(const Message& key) const {
  std::string hex = message_to_hex(key);
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& r : records_) {
    if (r.message_key == hex) return r;
  }
  return std::nullopt;
}

bool ProtectionDb::contains(const Message& key) const {
  std::string hex = message_to_hex(key);
  std::lock_guard<std::mutex> lock(mu_);
  return keys_.count(hex) != 0;
}

std::size_t ProtectionDb::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.size();
}

std::string to_string(ProtectState state) {
  switch (state) {
    case ProtectState::unprotected: return "unprotected";
    case ProtectState::untracked: return "untracked";
    case ProtectState::authentic: return "authentic";
    case ProtectState::manipulated: return "manipulated";
  }
  throw std::invalid_argument("unknown protection state");
}

ImageTensor apply_strength(const ImageTensor& x_in, const ImageTensor& x_adv, double beta) {
  validate_image(x_in);
  validate_image(x_adv);
  if (x_in.height != x_adv.height || x_in.width != x_adv.width) {
    throw std::invalid_argument("apply_strength: shape mismatch");
  }
  if (!std::isfinite(beta) || beta < 0.0) {
    throw std::invalid_argument("apply_strength: beta must be finite and nonnegative");
  }
  if (beta == 1.0) return x_adv;  // rounding in x + (adv - x) would break exactness
  ImageTensor out(x_in.height, x_in.width);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = x_in.data[i] + beta * (x_adv.data[i] - x_in.data[i]);
  }
  if (beta > 1.0) clamp_image(out);
  return out;
}

std::pair<ImageTensor, ProtectionRecord> protect(ModelBundle& b, ProtectionDb& db,
                                                 const ImageTensor& img, double beta, Rng& rng) {
  validate_image(img);
  for (int attempt = 0; attempt < kMaxKeyAttempts; ++attempt) {
    Message msg = sample_message(b.arch.message_bits, rng);
    if (db.contains(msg)) continue;
    ImageTensor x_adv = encode(b, img, msg);
    ImageTensor blended = apply_strength(img, x_adv, beta);
    std::string file = db.images_dir() + "/" + message_to_hex(msg) + ".png";
    write_png(blended, file);
    std::optional<ProtectionRecord> rec;
    try {
      rec = db.try_insert(msg, file);
    } catch (...) {
      std::remove(file.c_str());
      throw;
    }
    if (rec) return {std::move(blended), std::move(*rec)};
    // A concurrent protect claimed this key between the check and the
    // insert; discard the orphaned image and resample.
    std::remove(file.c_str());
  }
  throw std::runtime_error("no unused message key after " + std::to_string(kMaxKeyAttempts) +
                           " attempts");
}

SoftMessage extract(ModelBundle& b, const ImageTensor& img) { return decode(b, img); }

bool is_protected(const SoftMessage& soft, double threshold) {
  return message_score(soft) >= threshold;
}

std::optional<ProtectionRecord> trace(const ProtectionDb& db, const Message& key) {
  std::optional<ProtectionRecord> rec = db.find(key);
  if (!rec) return std::nullopt;
  std::string digest;
  try {
    digest = sha256_file(rec->storage_path);
  } catch (const std::exception& e) {
    throw IntegrityError("stored image unreadable for key " + rec->message_key + ": " + e.what());
  }
  if (digest != rec->image_digest) {
    throw IntegrityError("stored image digest mismatch for key " + rec->message_key);
  }
  return rec;
}

Verdict verify(ModelBundle& b, const ProtectionDb& db, const ImageTensor& img,
               const Hyperparams& hp) {
  Verdict v;
  SoftMessage soft = extract(b, img);
  v.ms = message_score(soft);
  if (!is_protected(soft, hp.ms_threshold)) {
    v.state = ProtectState::unprotected;
    return v;
  }
  Message key = harden(soft);
  std::optional<ProtectionRecord> rec = trace(db, key);
  if (!rec) {
    v.state = ProtectState::untracked;
    return v;
  }
  if (!b.extractor) {
    throw ConfigError("verify: bundle has no feature extractor to authenticate against");
  }
  ImageTensor source = read_image(rec->storage_path);
  v.ber_to_record = bit_error_rate(key, message_from_hex(rec->message_key, key.length()));
  double f = fcm(*b.extractor, img, source);
  v.fcm_to_source = f;
  v.state = f >= hp.auth_threshold ? ProtectState::authentic : ProtectState::manipulated;
  return v;
}

double calibrate_ms_threshold(const std::vector<double>& protected_scores,
                              const std::vector<double>& unprotected_scores) {
  if (protected_scores.empty() || unprotected_scores.empty()) {
    throw std::invalid_argument("calibrate_ms_threshold: both labeled sets must be nonempty");
  }
  std::vector<double> all;
  all.reserve(protected_scores.size() + unprotected_scores.size());
  for (double s : protected_scores) all.push_back(s);
  for (double s : unprotected_scores) all.push_back(s);
  for (double s : all) {
    if (!std::isfinite(s)) throw std::invalid_argument("calibrate_ms_threshold: non-finite score");
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> candidates;
  candidates.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    candidates.push_back(0.5 * (all[i] + all[i + 1]));
  }
  candidates.push_back(all.back() + 1.0);

  double best_t = candidates.front();
  double best_acc = -1.0;
  const double total = double(protected_scores.size() + unprotected_scores.size());
  for (double t : candidates) {
    std::size_t correct = 0;
    for (double s : protected_scores) correct += s >= t ? 1 : 0;
    for (double s : unprotected_scores) correct += s < t ? 1 : 0;
    double acc = double(correct) / total;
    if (acc > best_acc) {
      best_acc = acc;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace advmark
