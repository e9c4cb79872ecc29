#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace negcnn::cli {

// Bad invocation: missing path, unknown option. Exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the negcnn tool. Progress goes to `err`, results to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace negcnn::cli
