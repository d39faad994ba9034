#include "ckpt/tape.hpp"

#include <cstring>
#include <stdexcept>

namespace ckpt {

void TapeStack::note_peak() {
  if (bytes_.size() > peak_bytes_) peak_bytes_ = bytes_.size();
  if (entries_.size() > max_depth_) max_depth_ = entries_.size();
}

void TapeStack::push_scalar(double v) {
  std::size_t off = bytes_.size();
  bytes_.resize(off + sizeof(double));
  std::memcpy(bytes_.data() + off, &v, sizeof(double));
  entries_.push_back({Kind::Scalar, off, 0});
  note_peak();
}

double TapeStack::pop_scalar() {
  if (entries_.empty()) throw std::logic_error("TapeStack: pop_scalar on empty stack");
  Entry e = entries_.back();
  if (e.kind != Kind::Scalar) throw std::logic_error("TapeStack: pop_scalar but top is a field");
  entries_.pop_back();
  double v;
  std::memcpy(&v, bytes_.data() + e.offset, sizeof(double));
  bytes_.resize(e.offset);
  return v;
}

void TapeStack::push_field(const Field& f) {
  std::size_t off = bytes_.size();
  bytes_.resize(off + f.bytes());
  if (f.bytes() > 0) std::memcpy(bytes_.data() + off, f.data(), f.bytes());
  entries_.push_back({Kind::Field, off, f.n()});
  note_peak();
}

Field TapeStack::pop_field() {
  if (entries_.empty()) throw std::logic_error("TapeStack: pop_field on empty stack");
  Entry e = entries_.back();
  if (e.kind != Kind::Field) throw std::logic_error("TapeStack: pop_field but top is a scalar");
  entries_.pop_back();
  Field f(e.n);
  if (f.bytes() > 0) std::memcpy(f.data(), bytes_.data() + e.offset, f.bytes());
  bytes_.resize(e.offset);
  return f;
}

}  // namespace ckpt
