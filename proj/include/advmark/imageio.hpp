#pragma once

#include <string>

#include "advmark/image.hpp"

namespace advmark {

// Lossless 8-bit storage of canonical images. Throws FormatError when the
// file cannot be written or parsed back into a legal image.
void write_png(const ImageTensor& img, const std::string& path);
ImageTensor read_image(const std::string& path);

// In-memory encode/decode through a real JPEG codec at the given quality.
ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality);

}  // namespace advmark
