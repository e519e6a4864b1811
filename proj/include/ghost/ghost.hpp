#pragma once

#include "ghost/config.hpp"
#include "ghost/correlate.hpp"
#include "ghost/detect.hpp"
#include "ghost/errors.hpp"
#include "ghost/fft.hpp"
#include "ghost/frame_io.hpp"
#include "ghost/grid.hpp"
#include "ghost/mask.hpp"
#include "ghost/metrics.hpp"
#include "ghost/pgm.hpp"
#include "ghost/propagate.hpp"
#include "ghost/rng.hpp"
#include "ghost/scenario.hpp"
#include "ghost/speckle.hpp"
#include "ghost/version.hpp"
