#pragma once

#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "advmark/hyperparams.hpp"
#include "advmark/image.hpp"
#include "advmark/message.hpp"
#include "advmark/networks.hpp"
#include "advmark/rng.hpp"

namespace advmark {

// One provenance entry: the identity key embedded in a protected image, the
// digest of the stored file, and where/when it was stored.
struct ProtectionRecord {
  std::string message_key;   // lowercase hex of the L-bit key
  std::string image_digest;  // SHA-256 hex of the stored file bytes
  std::string storage_path;
  std::string created_at;    // RFC 3339 UTC, second resolution
};

// Embedded single-file provenance store. The file is a one-line header
// followed by append-only records, one per line:
//   <key hex> <digest hex> <storage path> <timestamp>
// Each record is appended and flushed as a single write before the in-memory
// index is updated, so a failed append leaves the store unchanged. Reads are
// answered from the index; all member functions are safe to call
// concurrently (writes serialize on an internal mutex).
class ProtectionDb {
 public:
  // Opens or creates the store. An existing file is parsed and validated:
  // wrong header, malformed record lines, or duplicate keys raise FormatError.
  // images_dir (default "<path>.images") is created and used by protect().
  explicit ProtectionDb(const std::string& path, const std::string& images_dir = "");

  // Digests the file at storage_path, appends a record, and returns it.
  // Returns nullopt when the key is already present. Throws
  // std::invalid_argument when the path contains whitespace (unrepresentable
  // in the line format) and std::runtime_error when the append fails.
  std::optional<ProtectionRecord> try_insert(const Message& key, const std::string& storage_path);

  std::optional<ProtectionRecord> find(const Message& key) const;
  bool contains(const Message& key) const;
  std::size_t size() const;

  const std::string& path() const { return path_; }
  const std::string& images_dir() const { return images_dir_; }

 private:
  mutable std::mutex mu_;
  std::string path_;
  std::string images_dir_;
  std::vector<ProtectionRecord> records_;
  std::set<std::string> keys_;
};

// What verification concluded about an image. ber_to_record and
// fcm_to_source are populated only when a database record was found.
enum class ProtectState { unprotected, untracked, authentic, manipulated };
std::string to_string(ProtectState state);

struct Verdict {
  ProtectState state = ProtectState::unprotected;
  double ms = 0.0;
  std::optional<double> ber_to_record;
  std::optional<double> fcm_to_source;
};

// X(beta) = x_in + beta * (x_adv - x_in). For beta in [0,1] this is a convex
// combination of canonical images and is returned unclipped, which makes
// MSE(x_in, X(beta)) = beta^2 * MSE(x_in, x_adv) an exact identity; beta > 1
// extrapolates and is clipped back to [-1,1]. Negative beta is rejected.
ImageTensor apply_strength(const ImageTensor& x_in, const ImageTensor& x_adv, double beta);

// Samples a fresh key (retrying collisions, at most 100 attempts), embeds it,
// blends with apply_strength, stores the result losslessly under the db's
// image directory, and inserts the record. Storage and record commit
// together: a failed insert removes the image file before rethrowing.
std::pair<ImageTensor, ProtectionRecord> protect(ModelBundle& b, ProtectionDb& db,
                                                 const ImageTensor& img, double beta, Rng& rng);

// Thin wrapper over decode: the soft message read from an image.
SoftMessage extract(ModelBundle& b, const ImageTensor& img);

// An image counts as protected when its decoded message score clears the
// threshold; unprotected images decode to values near 0.5 and score low.
bool is_protected(const SoftMessage& soft, double threshold);

// Exact-key lookup. When a record exists its stored file is re-digested;
// a missing or modified file raises IntegrityError.
std::optional<ProtectionRecord> trace(const ProtectionDb& db, const Message& key);

// Full provenance check: message score gates protected/unprotected, the
// hardened key is traced, and a found source is compared by feature cosine
// against hp.auth_threshold. Requires b.extractor once a record is found.
Verdict verify(ModelBundle& b, const ProtectionDb& db, const ImageTensor& img,
               const Hyperparams& hp);

// Sweeps candidate thresholds (midpoints between adjacent observed scores
// plus the extremes) and returns the one with the highest labeling accuracy;
// ties resolve to the lowest such threshold. Both sets must be nonempty.
double calibrate_ms_threshold(const std::vector<double>& protected_scores,
                              const std::vector<double>& unprotected_scores);

}  // namespace advmark
