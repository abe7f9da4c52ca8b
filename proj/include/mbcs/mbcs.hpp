#pragma once

// Umbrella header for the whole toolkit: multichannel packets, seeded sensing
// matrices with a streaming encoder, DCT and integer-wavelet transforms, the
// block-sparse Bayesian MMV solver, and the benchmark harness.

#include "mbcs/types.hpp"
#include "mbcs/sensing.hpp"
#include "mbcs/dct.hpp"
#include "mbcs/dwt53.hpp"
#include "mbcs/solver.hpp"
#include "mbcs/synth.hpp"
#include "mbcs/io.hpp"
#include "mbcs/bench.hpp"
