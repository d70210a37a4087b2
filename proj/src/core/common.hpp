#ifndef E2I_CORE_COMMON_HPP
#define E2I_CORE_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace e2i {

// One status per failure class; mirrored one-to-one by the C API codes.
enum class Status : int {
    ok = 0,
    usage = 1,
    format = 2,
    integrity = 3,
    unsupported = 4,
    invalid_data = 5,
    config = 6,
    training = 7,
    io = 8,
    shape = 9,
    mining = 10,
    degenerate = 11,
    internal = 12,
};

class Error : public std::runtime_error {
  public:
    Error(Status status, const std::string& message)
        : std::runtime_error(message), status_(status) {}
    Status status() const noexcept { return status_; }

  private:
    Status status_;
};

[[noreturn]] inline void fail(Status status, const std::string& message) {
    throw Error(status, message);
}

inline void require(bool condition, Status status, const std::string& message) {
    if (!condition) fail(status, message);
}

inline bool is_power_of_two(int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace e2i

#endif
