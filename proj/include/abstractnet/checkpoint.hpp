#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "abstractnet/zeroconv.hpp"

namespace abstractnet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text format, one param per line after the header:
//   abstractnet-checkpoint 1
//   activation <locked> <copy>
//   param <name> <locked|trainable> <rank> <extents...> <hex-float values...>
// Values use hexadecimal floating point so loading is bitwise exact.
std::string encode_checkpoint(const ControlNetBlock& cb);
ControlNetBlock decode_checkpoint(const std::string& text);

void save_checkpoint(const ControlNetBlock& cb, const std::filesystem::path& path);
ControlNetBlock load_checkpoint(const std::filesystem::path& path);

}  // namespace abstractnet
