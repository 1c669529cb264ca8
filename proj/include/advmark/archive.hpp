#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "advmark/tensor.hpp"

namespace advmark {

// Binary container for model state: magic + version header, one JSON metadata
// blob, named double arrays, and a trailing CRC32 over everything before it.
struct Archive {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Tensor>> arrays;

  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

void write_archive(const std::string& path, const nlohmann::json& meta,
                   const std::vector<std::pair<std::string, const Tensor*>>& arrays);

// Throws FormatError on truncation or bad magic, IncompatibilityError on a
// version this build does not read, IntegrityError on checksum mismatch.
Archive read_archive(const std::string& path);

}  // namespace advmark
