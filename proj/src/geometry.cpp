#include "hbmrd/geometry.hpp"

#include <algorithm>
#include <numeric>

namespace hbmrd {

void Geometry::validate() const {
  if (channels < 1) throw ConfigError("geometry: channels must be >= 1");
  if (pseudo_channels_per_channel < 1)
    throw ConfigError("geometry: pseudo_channels_per_channel must be >= 1");
  if (banks_per_pseudo_channel < 1)
    throw ConfigError("geometry: banks_per_pseudo_channel must be >= 1");
  if (rows_per_bank < 1) throw ConfigError("geometry: rows_per_bank must be >= 1");
  if (row_size_bits < 64 || row_size_bits % 64 != 0)
    throw ConfigError("geometry: row_size_bits must be a positive multiple of 64");
}

void check_address(const Geometry& g, const Address& a) {
  if (a.channel >= g.channels)
    throw AddressError("address: channel " + std::to_string(a.channel) + " out of range");
  if (a.pseudo_channel >= g.pseudo_channels_per_channel)
    throw AddressError("address: pseudo channel " + std::to_string(a.pseudo_channel) +
                       " out of range");
  if (a.bank >= g.banks_per_pseudo_channel)
    throw AddressError("address: bank " + std::to_string(a.bank) + " out of range");
  if (a.row >= g.rows_per_bank)
    throw AddressError("address: row " + std::to_string(a.row) + " out of range");
}

void RowMapping::validate(uint32_t rows_per_bank) const {
  if (scheme_ == Scheme::identity) return;
  if (group_ == 0 || (group_ & (group_ - 1)) != 0)
    throw ConfigError("row mapping: group must be a power of two");
  if (mask_ >= group_)
    throw ConfigError("row mapping: mask must be smaller than group (bijection)");
  if (rows_per_bank % group_ != 0)
    throw ConfigError("row mapping: rows_per_bank must be a multiple of group");
}

std::string RowMapping::describe() const {
  if (scheme_ == Scheme::identity) return "identity";
  return "group_swap(group=" + std::to_string(group_) + ",mask=" + std::to_string(mask_) + ")";
}

SubarrayLayout SubarrayLayout::default_layout() {
  // 16 x 832 + 4 x 768 = 16384. The 768-row subarrays sit at indices
  // 4, 8, 11 and 15, which leaves the subarray containing the bank
  // midpoint (index 10, rows 8192..9023) and the last one both 832-row.
  SubarrayLayout layout;
  for (uint32_t i = 0; i < 20; ++i) {
    bool small = (i == 4 || i == 8 || i == 11 || i == 15);
    layout.sizes.push_back(small ? 768u : 832u);
  }
  return layout;
}

void SubarrayLayout::validate(uint32_t rows_per_bank) const {
  if (sizes.empty()) throw ConfigError("subarray layout: empty size list");
  uint64_t sum = 0;
  for (uint32_t s : sizes) {
    if (s == 0) throw ConfigError("subarray layout: zero-sized subarray");
    sum += s;
  }
  if (sum != rows_per_bank)
    throw ConfigError("subarray layout: sizes sum to " + std::to_string(sum) +
                      ", expected rows_per_bank = " + std::to_string(rows_per_bank));
}

SubarrayLayout::Location SubarrayLayout::locate(uint32_t physical_row) const {
  uint32_t start = 0;
  for (uint32_t i = 0; i < sizes.size(); ++i) {
    if (physical_row < start + sizes[i]) return {i, physical_row - start, sizes[i]};
    start += sizes[i];
  }
  throw AddressError("subarray_of: physical row " + std::to_string(physical_row) +
                     " beyond layout");
}

std::vector<uint32_t> SubarrayLayout::start_rows() const {
  std::vector<uint32_t> starts;
  starts.reserve(sizes.size());
  uint32_t acc = 0;
  for (uint32_t s : sizes) {
    starts.push_back(acc);
    acc += s;
  }
  return starts;
}

uint32_t SubarrayLayout::middle_index(uint32_t rows_per_bank) const {
  return locate(rows_per_bank / 2).subarray;
}

}  // namespace hbmrd
