//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <type_traits>
#include <utility>
#include <variant>

namespace chemlm {

class BadExpectedAccess: public std::logic_error {
public:
  BadExpectedAccess(): std::logic_error("accessed the value of a failed result") { }
};

template <class E>
struct Unexpected {
  E error;
};

template <class E>
Unexpected<std::decay_t<E>> make_unexpected(E &&err) {
  return { std::forward<E>(err) };
}

// Minimal value-or-error holder. GCC 11 ships no std::expected.
template <class T, class E>
class Expected {
public:
  Expected(const T &value): data_(std::in_place_index<0>, value) { }
  Expected(T &&value): data_(std::in_place_index<0>, std::move(value)) { }
  Expected(Unexpected<E> err)
      : data_(std::in_place_index<1>, std::move(err.error)) { }

  bool has_value() const noexcept { return data_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  T &value() & {
    if (!has_value())
      throw BadExpectedAccess();
    return std::get<0>(data_);
  }
  const T &value() const & {
    if (!has_value())
      throw BadExpectedAccess();
    return std::get<0>(data_);
  }
  T &&value() && {
    if (!has_value())
      throw BadExpectedAccess();
    return std::get<0>(std::move(data_));
  }

  const E &error() const { return std::get<1>(data_); }

  T &operator*() & { return value(); }
  const T &operator*() const & { return value(); }
  T *operator->() { return &value(); }
  const T *operator->() const { return &value(); }

private:
  std::variant<T, E> data_;
};

}  // namespace chemlm
