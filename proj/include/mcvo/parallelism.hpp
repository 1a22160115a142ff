#pragma once

namespace mcvo {

/// Selects the serial reference loop or the OpenMP loop of a kernel.
enum class Parallelism { kSerial, kOpenMP };

}  // namespace mcvo
