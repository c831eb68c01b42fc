#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ltrv/tensor.hpp"

namespace ltrv {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered list of named tensors; the unit of persistence.
///
/// On disk (little-endian): "LTRV", u32 version (1), u32 count, then per
/// tensor: u16 name length, UTF-8 name, u8 rank, u64 extents, f64 data.
class NamedTensors {
 public:
  void set(const std::string& name, Tensor value);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Names with the given prefix, in insertion order.
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace ltrv
