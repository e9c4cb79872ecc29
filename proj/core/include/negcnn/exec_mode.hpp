#pragma once

#include <cstddef>
#include <functional>

namespace negcnn {

// Reference mode is serial and bit-deterministic. Fast mode lets kernels
// split work across threads; reductions may then be reassociated.
enum class ExecMode { kReference, kFast };

// Environment variable consulted on first use: NEGCNN_EXEC_MODE=fast|reference.
inline constexpr const char* kExecModeEnv = "NEGCNN_EXEC_MODE";

ExecMode exec_mode();
void set_exec_mode(ExecMode mode);
const char* to_string(ExecMode mode);

// Number of worker threads kernels may use: 1 in reference mode.
std::size_t worker_count();

// Runs body(begin, end) over [0, n) split into worker_count() contiguous
// chunks. Chunk k always covers the same range for a given (n, workers).
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace negcnn
