#pragma once

// Scalar type selection. The default build uses 32-bit reals; defining
// SPIKEFORGE_REAL_DOUBLE switches every module to 64-bit and moves all
// symbols into a separate inline namespace.

#if defined(SPIKEFORGE_REAL_DOUBLE)
#define SPIKEFORGE_ABI f64
#else
#define SPIKEFORGE_ABI f32
#endif

namespace spikeforge::inline SPIKEFORGE_ABI {

#if defined(SPIKEFORGE_REAL_DOUBLE)
using real = double;
#else
using real = float;
#endif

}  // namespace spikeforge::inline SPIKEFORGE_ABI
