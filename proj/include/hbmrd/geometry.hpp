#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hbmrd/errors.hpp"

namespace hbmrd {

// Static shape of one HBM2 stack. Defaults match the tested chips:
// 8 channels x 2 pseudo channels x 16 banks x 16384 rows of 1 KiB.
struct Geometry {
  uint32_t channels = 8;
  uint32_t pseudo_channels_per_channel = 2;
  uint32_t banks_per_pseudo_channel = 16;
  uint32_t rows_per_bank = 16384;
  uint32_t row_size_bits = 8192;

  void validate() const;

  uint64_t banks_total() const {
    return uint64_t(channels) * pseudo_channels_per_channel * banks_per_pseudo_channel;
  }
  uint64_t rows_total() const { return banks_total() * rows_per_bank; }
};

struct Address {
  uint32_t channel = 0;
  uint32_t pseudo_channel = 0;
  uint32_t bank = 0;
  uint32_t row = 0;  // logical row index unless stated otherwise
  uint32_t column = 0;

  bool same_bank(const Address& o) const {
    return channel == o.channel && pseudo_channel == o.pseudo_channel && bank == o.bank;
  }
};

void check_address(const Geometry& g, const Address& a);

// Flat bank index, used as an RNG coordinate and map key.
inline uint32_t bank_index(const Geometry& g, const Address& a) {
  return (a.channel * g.pseudo_channels_per_channel + a.pseudo_channel) *
             g.banks_per_pseudo_channel +
         a.bank;
}

// Logical-to-physical row translation. group_swap XORs a mask into the
// row index within fixed-size groups; mask < group keeps it a bijection.
// The pair-swap scheme of the tests is group_swap(group=2, mask=1).
class RowMapping {
 public:
  enum class Scheme { identity, group_swap };

  RowMapping() = default;
  RowMapping(Scheme scheme, uint32_t group, uint32_t mask)
      : scheme_(scheme), group_(group), mask_(mask) {}

  static RowMapping identity() { return RowMapping(); }
  static RowMapping group_swap(uint32_t group, uint32_t mask) {
    return RowMapping(Scheme::group_swap, group, mask);
  }

  void validate(uint32_t rows_per_bank) const;

  uint32_t to_physical(uint32_t logical) const {
    if (scheme_ == Scheme::identity) return logical;
    return (logical & ~(group_ - 1)) | ((logical & (group_ - 1)) ^ mask_);
  }
  // XOR within a group is an involution.
  uint32_t to_logical(uint32_t physical) const { return to_physical(physical); }

  Scheme scheme() const { return scheme_; }
  uint32_t group() const { return group_; }
  uint32_t mask() const { return mask_; }
  std::string describe() const;

 private:
  Scheme scheme_ = Scheme::identity;
  uint32_t group_ = 2;
  uint32_t mask_ = 0;
};

// Subarray layout of one bank: an ordered list of subarray row counts.
// The default is sixteen 832-row and four 768-row subarrays arranged so
// the subarray at the middle of the bank and the last subarray are both
// 832 rows (those two are the read-disturbance-resilient ones).
struct SubarrayLayout {
  std::vector<uint32_t> sizes;

  static SubarrayLayout default_layout();
  static SubarrayLayout single(uint32_t rows) { return SubarrayLayout{{rows}}; }

  void validate(uint32_t rows_per_bank) const;

  struct Location {
    uint32_t subarray;
    uint32_t offset;
    uint32_t size;
  };
  Location locate(uint32_t physical_row) const;

  // First physical row of each subarray (prefix sums, starting at 0).
  std::vector<uint32_t> start_rows() const;

  uint32_t middle_index(uint32_t rows_per_bank) const;
  uint32_t last_index() const { return uint32_t(sizes.size()) - 1; }
  bool is_resilient(uint32_t subarray, uint32_t rows_per_bank) const {
    return subarray == middle_index(rows_per_bank) || subarray == last_index();
  }
};

// Per-cell fault state as exposed by cell_params. hc_threshold is in
// effective-exposure units: the cell flips once accumulated exposure
// times the data-pattern coupling reaches it.
struct CellFaultState {
  double hc_threshold = 0.0;
  uint32_t retention_time_ms = 0;  // multiple of the 64 ms quantum
  bool true_cell = false;          // true cell flips 1->0, anti cell 0->1
  bool stored_bit = false;
  double last_refresh_ns = 0.0;
  double accumulated_exposure = 0.0;
};

}  // namespace hbmrd
