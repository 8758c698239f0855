#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace slicescope {

// Binary membership over the canonical sample order.
struct SliceMask {
  std::vector<std::uint8_t> member;

  SliceMask() = default;
  explicit SliceMask(std::size_t n) : member(n, 0) {}

  static SliceMask from_indices(std::size_t n, const std::vector<std::size_t>& indices) {
    SliceMask mask(n);
    for (std::size_t i : indices) mask.member[i] = 1;
    return mask;
  }

  std::size_t n() const { return member.size(); }

  std::size_t size() const {
    std::size_t count = 0;
    for (std::uint8_t m : member) count += m;
    return count;
  }

  bool contains(std::size_t i) const { return member[i] != 0; }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < member.size(); ++i)
      if (member[i]) out.push_back(i);
    return out;
  }

  bool operator==(const SliceMask&) const = default;
};

}  // namespace slicescope
