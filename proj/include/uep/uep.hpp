#pragma once

#include "uep/density.hpp"
#include "uep/error.hpp"
#include "uep/grid.hpp"
#include "uep/io.hpp"
#include "uep/noise.hpp"
#include "uep/numeric.hpp"
#include "uep/parallel.hpp"
#include "uep/partition.hpp"
#include "uep/proxy.hpp"
#include "uep/quantization.hpp"
#include "uep/rng.hpp"
#include "uep/synth.hpp"
