#pragma once

// Execution selection for kernels that exist in a serial reference form and
// an OpenMP form. Both forms return identical exact results.

namespace hecke {

enum class Exec { serial, parallel };

/// Thread count used by parallel kernels (1 when built without OpenMP).
int max_threads();

/// Sets the parallel kernel thread count; values < 1 restore the default.
void set_threads(int n);

bool openmp_enabled();

} // namespace hecke
