#pragma once

#include <cassert>
#include <type_traits>
#include <utility>
#include <variant>

namespace hepinfo {

// Wrapper that marks a value as the error alternative of an Expected.
template <class E>
struct Unexpected {
    E error;
};

template <class E>
Unexpected(E) -> Unexpected<E>;

// Minimal value-or-error holder; stands in for std::expected until C++23.
template <class T, class E>
class Expected {
public:
    Expected(T value) : v_(std::in_place_index<0>, std::move(value)) {}
    Expected(Unexpected<E> u) : v_(std::in_place_index<1>, std::move(u.error)) {}

    bool has_value() const noexcept { return v_.index() == 0; }
    explicit operator bool() const noexcept { return has_value(); }

    T& value() & { assert(has_value()); return std::get<0>(v_); }
    const T& value() const& { assert(has_value()); return std::get<0>(v_); }
    T&& value() && { assert(has_value()); return std::get<0>(std::move(v_)); }

    const E& error() const { assert(!has_value()); return std::get<1>(v_); }

    T* operator->() { return &value(); }
    const T* operator->() const { return &value(); }
    T& operator*() & { return value(); }
    const T& operator*() const& { return value(); }

private:
    std::variant<T, E> v_;
};

// Success-or-error with no payload.
template <class E>
class Status {
public:
    Status() = default;
    Status(Unexpected<E> u) : err_(std::move(u.error)), failed_(true) {}

    bool ok() const noexcept { return !failed_; }
    explicit operator bool() const noexcept { return ok(); }
    const E& error() const { assert(failed_); return err_; }

private:
    E err_{};
    bool failed_ = false;
};

}  // namespace hepinfo
