#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ckpt/field.hpp"

namespace ckpt {

// LIFO value stack for the store-all tape: Push just before a value is
// overwritten on the forward sweep, Pop to restore it on the backward sweep.
// Scalars and whole fields share the one stack; a kind tag per entry guards
// mismatched pops. Values round-trip bit-exactly.
//
// A TapeStack instance is single-owner and not thread safe; use one per run.
class TapeStack {
 public:
  void push_scalar(double v);
  double pop_scalar();

  void push_field(const Field& f);
  Field pop_field();

  bool empty() const { return entries_.empty(); }
  std::size_t depth() const { return entries_.size(); }
  std::size_t size_bytes() const { return bytes_.size(); }

  // High-water marks; never decrease over the stack's lifetime.
  std::size_t peak_bytes() const { return peak_bytes_; }
  std::size_t max_depth() const { return max_depth_; }

 private:
  enum class Kind : std::uint8_t { Scalar, Field };
  struct Entry {
    Kind kind;
    std::size_t offset;  // start of payload in bytes_
    int n;               // field side length, 0 for scalars
  };

  void note_peak();

  std::vector<std::byte> bytes_;
  std::vector<Entry> entries_;
  std::size_t peak_bytes_ = 0;
  std::size_t max_depth_ = 0;
};

}  // namespace ckpt
