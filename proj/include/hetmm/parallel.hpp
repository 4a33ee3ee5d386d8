#pragma once

namespace hetmm {

/// Sets the worker count used by the data-parallel kernels; 0 restores the
/// runtime default. Results do not depend on this value.
void set_thread_count(int threads);
int thread_count();

}  // namespace hetmm
